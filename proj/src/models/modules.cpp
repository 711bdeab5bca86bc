// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "models/modules.hpp"

#include <cmath>

namespace ncsl::models {

namespace {

// He-uniform: U(-b, b) with b = sqrt(6 / fan_in).
template <class T>
diff::Tensor<T> he_uniform(diff::Shape shape, std::int64_t fan_in, Rng& rng) {
  diff::Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

int hidden_width(const EncoderConfig& cfg) { return cfg.channels(128.0); }

}  // namespace

template <class T>
Linear<T>::Linear(ParameterSet<T>& ps, const std::string& name, int in, int out, bool with_bias,
                  Rng& rng) {
  weight = &ps.add(name + ".weight", he_uniform<T>({out, in}, in, rng));
  if (with_bias) bias = &ps.add(name + ".bias", diff::Tensor<T>({out}));
}

template <class T>
Conv<T>::Conv(ParameterSet<T>& ps, const std::string& name, int in, int out, int kernel, int s,
              Rng& rng)
    : stride(s), pad(kernel / 2) {
  weight = &ps.add(name + ".weight", he_uniform<T>({out, in, kernel, kernel}, in * kernel * kernel, rng));
}

template <class T>
BatchNorm<T>::BatchNorm(ParameterSet<T>& ps, const std::string& name, int channels) {
  gamma = &ps.add(name + ".gamma", diff::Tensor<T>({channels}, T{1}));
  beta = &ps.add(name + ".beta", diff::Tensor<T>({channels}));
  running_mean = &ps.add(name + ".running_mean", diff::Tensor<T>({channels}), false);
  running_var = &ps.add(name + ".running_var", diff::Tensor<T>({channels}, T{1}), false);
}

template <class T>
Encoder<T>::Encoder(const EncoderConfig& cfg, ParameterSet<T>& ps, const std::string& prefix, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.kind == EncoderKind::mlp) {
    int in = cfg_.in_channels * cfg_.image_size * cfg_.image_size;
    const int h = hidden_width(cfg_);
    for (int i = 0; i <= cfg_.depth; ++i) {
      const int out = i == cfg_.depth ? cfg_.repr_dim : h;
      const auto name = prefix + ".fc" + std::to_string(i);
      Dense d;
      d.fc = Linear<T>(ps, name, in, out, false, rng);
      d.bn = BatchNorm<T>(ps, name + ".bn", out);
      dense_.push_back(d);
      in = out;
    }
    return;
  }
  const int c0 = cfg_.channels(32.0);
  stem_ = Conv<T>(ps, prefix + ".stem.conv", cfg_.in_channels, c0, 3, 1, rng);
  stem_bn_ = BatchNorm<T>(ps, prefix + ".stem.bn", c0);
  int in = c0;
  int spatial = cfg_.image_size;
  for (int i = 0; i < cfg_.depth; ++i) {
    const bool last = i == cfg_.depth - 1;
    const int nominal = cfg_.channels(32.0 * std::pow(2.0, i));
    const int stride = (i > 0 && spatial >= 2) ? 2 : 1;
    spatial = (spatial + stride - 1) / stride;
    const auto name = prefix + ".block" + std::to_string(i);
    Block b;
    b.kind = cfg_.block;
    int out;
    if (cfg_.block == BlockKind::basic) {
      out = last ? cfg_.repr_dim : nominal;
      b.c1 = Conv<T>(ps, name + ".conv1", in, out, 3, stride, rng);
      b.b1 = BatchNorm<T>(ps, name + ".bn1", out);
      b.c2 = Conv<T>(ps, name + ".conv2", out, out, 3, 1, rng);
      b.b2 = BatchNorm<T>(ps, name + ".bn2", out);
    } else {
      out = last ? cfg_.repr_dim : 4 * nominal;
      b.c1 = Conv<T>(ps, name + ".conv1", in, nominal, 1, 1, rng);
      b.b1 = BatchNorm<T>(ps, name + ".bn1", nominal);
      b.c2 = Conv<T>(ps, name + ".conv2", nominal, nominal, 3, stride, rng);
      b.b2 = BatchNorm<T>(ps, name + ".bn2", nominal);
      b.c3 = Conv<T>(ps, name + ".conv3", nominal, out, 1, 1, rng);
      b.b3 = BatchNorm<T>(ps, name + ".bn3", out);
    }
    if (stride != 1 || in != out) {
      b.projected_shortcut = true;
      b.sc = Conv<T>(ps, name + ".shortcut", in, out, 1, stride, rng);
      b.sc_bn = BatchNorm<T>(ps, name + ".shortcut_bn", out);
    }
    blocks_.push_back(b);
    in = out;
  }
}

template <class T>
NodeRef Encoder<T>::operator()(Graph<T>& g, NodeRef x) const {
  if (cfg_.kind == EncoderKind::mlp) {
    auto h = g.flatten(x);
    const auto expected = static_cast<std::int64_t>(cfg_.in_channels) * cfg_.image_size * cfg_.image_size;
    NCSL_CHECK(g.value(h).dim(1) == expected, ShapeError, "mlp encoder expects ", expected,
               " input features, got ", g.value(h).dim(1));
    for (const auto& d : dense_) h = g.relu(d.bn(g, d.fc(g, h)));
    return h;
  }
  NCSL_CHECK(g.value(x).rank() == 4 && g.value(x).dim(1) == cfg_.in_channels, ShapeError,
             "conv encoder expects [B,", cfg_.in_channels, ",H,W] input, got ",
             diff::shape_str(g.value(x).shape()));
  auto h = g.relu(stem_bn_(g, stem_(g, x)));
  for (const auto& b : blocks_) {
    NodeRef y;
    if (b.kind == BlockKind::basic) {
      y = g.relu(b.b1(g, b.c1(g, h)));
      y = b.b2(g, b.c2(g, y));
    } else {
      y = g.relu(b.b1(g, b.c1(g, h)));
      y = g.relu(b.b2(g, b.c2(g, y)));
      y = b.b3(g, b.c3(g, y));
    }
    const auto shortcut = b.projected_shortcut ? b.sc_bn(g, b.sc(g, h)) : h;
    h = g.relu(g.add(y, shortcut));
  }
  return g.global_avgpool(h);
}

template <class T>
MlpHead<T>::MlpHead(int in, const std::vector<int>& widths, bool final_plain, ParameterSet<T>& ps,
                    const std::string& prefix, Rng& rng) {
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const bool last = i + 1 == widths.size();
    const auto name = prefix + "." + std::to_string(i);
    Layer l;
    l.has_bn = !(last && final_plain);
    l.relu = !last;
    l.fc = Linear<T>(ps, name + ".fc", in, widths[i], !l.has_bn, rng);
    if (l.has_bn) l.bn = BatchNorm<T>(ps, name + ".bn", widths[i]);
    layers_.push_back(l);
    in = widths[i];
  }
}

template <class T>
NodeRef MlpHead<T>::operator()(Graph<T>& g, NodeRef x) const {
  auto h = x;
  for (const auto& l : layers_) {
    h = l.fc(g, h);
    if (l.has_bn) h = l.bn(g, h);
    if (l.relu) h = g.relu(h);
  }
  return h;
}

std::int64_t encoder_param_count(const EncoderConfig& cfg) {
  auto conv = [](std::int64_t in, std::int64_t out, std::int64_t k) { return in * out * k * k; };
  auto bn = [](std::int64_t c) { return 2 * c; };
  std::int64_t n = 0;
  if (cfg.kind == EncoderKind::mlp) {
    std::int64_t in = static_cast<std::int64_t>(cfg.in_channels) * cfg.image_size * cfg.image_size;
    const std::int64_t h = hidden_width(cfg);
    for (int i = 0; i <= cfg.depth; ++i) {
      const std::int64_t out = i == cfg.depth ? cfg.repr_dim : h;
      n += in * out + bn(out);
      in = out;
    }
    return n;
  }
  std::int64_t in = cfg.channels(32.0);
  n += conv(cfg.in_channels, in, 3) + bn(in);
  int spatial = cfg.image_size;
  for (int i = 0; i < cfg.depth; ++i) {
    const bool last = i == cfg.depth - 1;
    const std::int64_t nominal = cfg.channels(32.0 * std::pow(2.0, i));
    const int stride = (i > 0 && spatial >= 2) ? 2 : 1;
    spatial = (spatial + stride - 1) / stride;
    std::int64_t out;
    if (cfg.block == BlockKind::basic) {
      out = last ? cfg.repr_dim : nominal;
      n += conv(in, out, 3) + bn(out) + conv(out, out, 3) + bn(out);
    } else {
      out = last ? cfg.repr_dim : 4 * nominal;
      n += conv(in, nominal, 1) + bn(nominal) + conv(nominal, nominal, 3) + bn(nominal) +
           conv(nominal, out, 1) + bn(out);
    }
    if (stride != 1 || in != out) n += conv(in, out, 1) + bn(out);
    in = out;
  }
  return n;
}

template struct Linear<float>;
template struct Linear<double>;
template struct Conv<float>;
template struct Conv<double>;
template struct BatchNorm<float>;
template struct BatchNorm<double>;
template class Encoder<float>;
template class Encoder<double>;
template class MlpHead<float>;
template class MlpHead<double>;

}  // namespace ncsl::models
