// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "eval/probe.hpp"

#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "diff/graph.hpp"
#include "diff/optim.hpp"
#include "diff/parameter_set.hpp"

namespace ncsl::eval {

void ProbeConfig::validate() const {
  NCSL_CHECK(epochs >= 1, ConfigError, "probe.epochs must be >= 1");
  NCSL_CHECK(batch_size >= 1, ConfigError, "probe.batch_size must be >= 1");
  NCSL_CHECK(base_lr > 0.0, ConfigError, "probe.base_lr must be > 0");
  NCSL_CHECK(momentum >= 0.0 && momentum < 1.0, ConfigError, "probe.momentum must lie in [0, 1)");
  NCSL_CHECK(weight_decay >= 0.0, ConfigError, "probe.weight_decay must be >= 0");
}

ProbeResult train_linear_probe(const FeatureFn& train_features, std::span<const int> train_labels, std::int64_t dim,
                               int num_classes, std::span<const float> val_features, std::span<const int> val_labels,
                               const ProbeConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::int64_t>(train_labels.size());
  NCSL_CHECK(n >= 1 && dim >= 1 && num_classes >= 2, InvalidArgument, "probe needs data, dim >= 1 and >= 2 classes");
  NCSL_CHECK(static_cast<std::int64_t>(val_features.size()) == dim * static_cast<std::int64_t>(val_labels.size()),
             ShapeError, "probe: validation matrix does not match ", val_labels.size(), " rows of dim ", dim);
  for (int l : train_labels)
    NCSL_CHECK(l >= 0 && l < num_classes, InvalidArgument, "probe: label ", l, " outside [0, ", num_classes, ")");

  diff::ParameterSet<float> ps;
  Rng init(derive_seed({cfg.seed, 0x70726f6265ULL}));
  diff::Tensor<float> w({num_classes, dim});
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& v : w.data()) v = static_cast<float>(init.uniform(-bound, bound));
  auto& weight = ps.add("probe.weight", std::move(w));
  auto& bias = ps.add("probe.bias", diff::Tensor<float>({num_classes}));
  diff::SgdMomentum<float> opt(ps.trainable(), cfg.momentum, cfg.weight_decay);

  const std::int64_t B = std::min<std::int64_t>(cfg.batch_size, n);
  const std::int64_t per_epoch = (n + B - 1) / B;
  const std::int64_t total = per_epoch * cfg.epochs;
  const double lr0 = cfg.base_lr * static_cast<double>(cfg.batch_size) / 256.0;

  ProbeResult res;
  std::vector<std::int64_t> order(n);
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed({cfg.seed, 0x6570ULL, static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order.begin(), order.end());
    std::int64_t correct = 0;
    double loss_sum = 0.0;
    for (std::int64_t s = 0; s < per_epoch; ++s, ++step) {
      std::vector<std::int64_t> rows(order.begin() + s * B, order.begin() + std::min(n, (s + 1) * B));
      auto feats = train_features(rows, epoch, step);
      NCSL_CHECK(feats.rank() == 2 && feats.dim(0) == static_cast<std::int64_t>(rows.size()) && feats.dim(1) == dim,
                 ShapeError, "probe: feature function returned ", diff::shape_str(feats.shape()));
      std::vector<int> labels;
      for (auto r : rows) labels.push_back(train_labels[r]);
      opt.zero_grad();
      diff::Graph<float> g(true, true);
      auto logits = g.affine(g.input(std::move(feats)), weight, &bias);
      auto loss = g.softmax_cross_entropy(logits, labels);
      const double lv = g.value(loss).item();
      NCSL_CHECK(std::isfinite(lv), NumericError, "probe: non-finite loss at step ", step);
      g.backward(loss);
      opt.step(diff::cosine_lr(step, total, lr0));
      loss_sum += lv * static_cast<double>(rows.size());
      if (epoch == cfg.epochs - 1) {
        const auto& lg = g.value(logits);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const float* r = lg.ptr() + i * num_classes;
          correct += std::max_element(r, r + num_classes) - r == labels[i];
        }
      }
    }
    res.final_loss = loss_sum / static_cast<double>(n);
    if (epoch == cfg.epochs - 1) res.train_acc = static_cast<double>(correct) / static_cast<double>(n);
  }
  res.steps = step;

  if (!val_labels.empty()) {
    const auto nv = static_cast<std::int64_t>(val_labels.size());
    diff::Graph<float> g(false, false);
    auto logits = g.affine(g.input(diff::Tensor<float>({nv, dim}, {val_features.begin(), val_features.end()})),
                           weight, &bias);
    const auto& lg = g.value(logits);
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < nv; ++i) {
      const float* r = lg.ptr() + i * num_classes;
      correct += std::max_element(r, r + num_classes) - r == val_labels[i];
    }
    res.val_acc = static_cast<double>(correct) / static_cast<double>(nv);
  }
  return res;
}

ProbeResult train_linear_probe(std::span<const float> train, std::span<const int> train_labels, std::int64_t dim,
                               int num_classes, std::span<const float> val, std::span<const int> val_labels,
                               const ProbeConfig& cfg) {
  NCSL_CHECK(static_cast<std::int64_t>(train.size()) == dim * static_cast<std::int64_t>(train_labels.size()),
             ShapeError, "probe: training matrix does not match ", train_labels.size(), " rows of dim ", dim);
  auto fn = [&](const std::vector<std::int64_t>& rows, std::int64_t, std::int64_t) {
    diff::Tensor<float> t({static_cast<std::int64_t>(rows.size()), dim});
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy(train.begin() + rows[i] * dim, train.begin() + (rows[i] + 1) * dim, t.data().begin() + i * dim);
    return t;
  };
  return train_linear_probe(fn, train_labels, dim, num_classes, val, val_labels, cfg);
}

}  // namespace ncsl::eval
