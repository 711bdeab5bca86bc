// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "data/augment.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace ncsl::data {

namespace {

// Planar float image in [0, 1].
struct Img {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;
  float& at(int ch, int y, int x) { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  float at(int ch, int y, int x) const { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
};

// Bilinear resample of the window [top, top+wh) x [left, left+ww) onto an
// oh x ow grid, pixel centres aligned (half-pixel convention).
Img resample(ImageView src, double top, double left, double wh, double ww, int oh, int ow) {
  Img out{src.channels, oh, ow, std::vector<float>(static_cast<std::size_t>(src.channels) * oh * ow)};
  const double sy = wh / oh, sx = ww / ow;
  std::vector<int> x0(ow), x1(ow);
  std::vector<float> fx(ow);
  for (int x = 0; x < ow; ++x) {
    double px = left + (x + 0.5) * sx - 0.5;
    px = std::clamp(px, 0.0, static_cast<double>(src.width - 1));
    x0[x] = static_cast<int>(std::floor(px));
    x1[x] = std::min(x0[x] + 1, src.width - 1);
    fx[x] = static_cast<float>(px - x0[x]);
  }
  const std::size_t plane = static_cast<std::size_t>(src.height) * src.width;
  for (int y = 0; y < oh; ++y) {
    double py = top + (y + 0.5) * sy - 0.5;
    py = std::clamp(py, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(std::floor(py));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const float fy = static_cast<float>(py - y0);
    for (int c = 0; c < src.channels; ++c) {
      const std::uint8_t* r0 = src.data + c * plane + static_cast<std::size_t>(y0) * src.width;
      const std::uint8_t* r1 = src.data + c * plane + static_cast<std::size_t>(y1) * src.width;
      for (int x = 0; x < ow; ++x) {
        const float a = r0[x0[x]] + fx[x] * (r0[x1[x]] - r0[x0[x]]);
        const float b = r1[x0[x]] + fx[x] * (r1[x1[x]] - r1[x0[x]]);
        out.at(c, y, x) = (a + fy * (b - a)) / 255.0f;
      }
    }
  }
  return out;
}

struct Window {
  int top, left, h, w;
};

Window random_resized_crop_window(int H, int W, const AugmentationConfig& cfg, Rng& rng) {
  const double area = static_cast<double>(H) * W;
  const double lr0 = std::log(cfg.crop_ratio[0]), lr1 = std::log(cfg.crop_ratio[1]);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(cfg.crop_scale[0], cfg.crop_scale[1]);
    const double aspect = std::exp(rng.uniform(lr0, lr1));
    const int w = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (w > 0 && w <= W && h > 0 && h <= H) {
      const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(H - h + 1)));
      const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(W - w + 1)));
      return {top, left, h, w};
    }
  }
  // Fallback: centre crop at the nearest admissible aspect ratio.
  const double in_ratio = static_cast<double>(W) / H;
  int w = W, h = H;
  if (in_ratio < cfg.crop_ratio[0]) {
    h = static_cast<int>(std::lround(W / cfg.crop_ratio[0]));
  } else if (in_ratio > cfg.crop_ratio[1]) {
    w = static_cast<int>(std::lround(H * cfg.crop_ratio[1]));
  }
  NCSL_CHECK(h >= 1 && w >= 1, InvalidArgument, "degenerate crop window ", h, "x", w);
  return {(H - h) / 2, (W - w) / 2, h, w};
}

float gray_of(const Img& im, int y, int x) {
  if (im.c < 3) return im.at(0, y, x);
  return 0.299f * im.at(0, y, x) + 0.587f * im.at(1, y, x) + 0.114f * im.at(2, y, x);
}

void blend_with(Img& im, float factor, const std::vector<float>& other, bool other_is_plane) {
  const std::size_t plane = static_cast<std::size_t>(im.h) * im.w;
  for (int c = 0; c < im.c; ++c)
    for (std::size_t p = 0; p < plane; ++p) {
      const float o = other_is_plane ? other[p] : other[0];
      float& v = im.v[c * plane + p];
      v = std::clamp(factor * v + (1.0f - factor) * o, 0.0f, 1.0f);
    }
}

std::vector<float> gray_plane(const Img& im) {
  std::vector<float> g(static_cast<std::size_t>(im.h) * im.w);
  for (int y = 0; y < im.h; ++y)
    for (int x = 0; x < im.w; ++x) g[static_cast<std::size_t>(y) * im.w + x] = gray_of(im, y, x);
  return g;
}

void adjust_brightness(Img& im, float f) {
  for (auto& v : im.v) v = std::clamp(v * f, 0.0f, 1.0f);
}

void adjust_contrast(Img& im, float f) {
  const auto g = gray_plane(im);
  double s = 0.0;
  for (float v : g) s += v;
  blend_with(im, f, {static_cast<float>(s / static_cast<double>(g.size()))}, false);
}

void adjust_saturation(Img& im, float f) {
  if (im.c != 3) return;
  blend_with(im, f, gray_plane(im), true);
}

void adjust_hue(Img& im, float shift) {
  if (im.c != 3) return;
  const std::size_t plane = static_cast<std::size_t>(im.h) * im.w;
  for (std::size_t p = 0; p < plane; ++p) {
    float& r = im.v[p];
    float& g = im.v[plane + p];
    float& b = im.v[2 * plane + p];
    const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const float d = mx - mn;
    if (d <= 0.0f) continue;  // grey pixel: hue undefined, unchanged
    float h;
    if (mx == r) {
      h = std::fmod((g - b) / d, 6.0f);
    } else if (mx == g) {
      h = (b - r) / d + 2.0f;
    } else {
      h = (r - g) / d + 4.0f;
    }
    h = h / 6.0f + shift;
    h -= std::floor(h);
    const float s = d / mx, v = mx;
    const float hh = h * 6.0f;
    const int i = static_cast<int>(hh) % 6;
    const float f = hh - std::floor(hh);
    const float pp = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
      case 0: r = v, g = t, b = pp; break;
      case 1: r = q, g = v, b = pp; break;
      case 2: r = pp, g = v, b = t; break;
      case 3: r = pp, g = q, b = v; break;
      case 4: r = t, g = pp, b = v; break;
      default: r = v, g = pp, b = q; break;
    }
  }
}

void gaussian_blur(Img& im, double sigma) {
  int k = static_cast<int>(0.1 * std::min(im.h, im.w));
  if (k % 2 == 0) ++k;
  if (k < 3) return;
  const int r = k / 2;
  std::vector<float> kern(k);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) total += kern[i + r] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
  for (auto& v : kern) v = static_cast<float>(v / total);
  auto reflect = [](int i, int n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return std::clamp(i, 0, n - 1);
  };
  Img tmp = im;
  for (int c = 0; c < im.c; ++c) {
    for (int y = 0; y < im.h; ++y)
      for (int x = 0; x < im.w; ++x) {
        float s = 0.0f;
        for (int i = -r; i <= r; ++i) s += kern[i + r] * im.at(c, y, reflect(x + i, im.w));
        tmp.at(c, y, x) = s;
      }
    for (int y = 0; y < im.h; ++y)
      for (int x = 0; x < im.w; ++x) {
        float s = 0.0f;
        for (int i = -r; i <= r; ++i) s += kern[i + r] * tmp.at(c, reflect(y + i, im.h), x);
        im.at(c, y, x) = s;
      }
  }
}

ImageTensor normalise(const Img& im, const std::vector<double>& mean, const std::vector<double>& std) {
  NCSL_CHECK((mean.size() == static_cast<std::size_t>(im.c) || mean.size() == 1) && mean.size() == std.size(),
             InvalidArgument, "normalisation has ", mean.size(), " means and ", std.size(), " stds for ", im.c,
             " channels");
  ImageTensor t({im.c, im.h, im.w});
  const std::size_t plane = static_cast<std::size_t>(im.h) * im.w;
  for (int c = 0; c < im.c; ++c) {
    const auto m = static_cast<float>(mean[mean.size() == 1 ? 0 : c]);
    const auto s = static_cast<float>(std[std.size() == 1 ? 0 : c]);
    for (std::size_t p = 0; p < plane; ++p) t.data()[c * plane + p] = (im.v[c * plane + p] - m) / s;
  }
  return t;
}

void check_image(ImageView img) {
  NCSL_CHECK(img.data != nullptr && img.channels >= 1 && img.height >= 1 && img.width >= 1, InvalidArgument,
             "malformed image ", img.channels, "x", img.height, "x", img.width);
}

}  // namespace

void AugmentationConfig::validate() const {
  NCSL_CHECK(out_size >= 1, ConfigError, "augmentation.out_size must be >= 1");
  NCSL_CHECK(crop_scale[0] > 0.0 && crop_scale[0] <= crop_scale[1] && crop_scale[1] <= 1.0, ConfigError,
             "augmentation.crop_scale must satisfy 0 < low <= high <= 1");
  NCSL_CHECK(crop_ratio[0] > 0.0 && crop_ratio[0] <= crop_ratio[1], ConfigError,
             "augmentation.crop_ratio must satisfy 0 < low <= high");
  for (double p : {hflip_prob, jitter_prob, grayscale_prob, blur_prob})
    NCSL_CHECK(p >= 0.0 && p <= 1.0, ConfigError, "augmentation probabilities must lie in [0, 1], got ", p);
  for (int i = 0; i < 3; ++i)
    NCSL_CHECK(color_jitter[i] >= 0.0, ConfigError, "augmentation.color_jitter strengths must be >= 0");
  NCSL_CHECK(color_jitter[3] >= 0.0 && color_jitter[3] <= 0.5, ConfigError,
             "augmentation.color_jitter hue must lie in [0, 0.5]");
  NCSL_CHECK(!mean.empty() && mean.size() == std.size(), ConfigError,
             "augmentation.mean and augmentation.std must be non-empty and the same length");
  for (double s : std) NCSL_CHECK(s > 0.0, ConfigError, "augmentation.std entries must be > 0");
}

AugmentationConfig AugmentationConfig::probe_preset() {
  AugmentationConfig c;
  c.crop_scale = {0.08, 1.0};
  c.jitter_prob = 0.0;
  c.grayscale_prob = 0.0;
  c.blur_prob = 0.0;
  return c;
}

AugmentationConfig AugmentationConfig::identity() {
  AugmentationConfig c;
  c.crop_scale = {1.0, 1.0};
  c.crop_ratio = {1.0, 1.0};
  c.hflip_prob = 0.0;
  c.jitter_prob = 0.0;
  c.grayscale_prob = 0.0;
  c.blur_prob = 0.0;
  return c;
}

ImageTensor augment(ImageView img, const AugmentationConfig& cfg, Rng& rng) {
  check_image(img);
  NCSL_CHECK(img.height >= cfg.out_size && img.width >= cfg.out_size, InvalidArgument, "image ", img.height, "x",
             img.width, " is smaller than the crop output ", cfg.out_size);
  const auto win = random_resized_crop_window(img.height, img.width, cfg, rng);
  Img im = resample(img, win.top, win.left, win.h, win.w, cfg.out_size, cfg.out_size);

  if (cfg.hflip_prob > 0.0 && rng.bernoulli(cfg.hflip_prob)) {
    for (int c = 0; c < im.c; ++c)
      for (int y = 0; y < im.h; ++y) {
        float* row = &im.at(c, y, 0);
        std::reverse(row, row + im.w);
      }
  }
  if (cfg.jitter_prob > 0.0 && rng.bernoulli(cfg.jitter_prob)) {
    const auto& j = cfg.color_jitter;
    const auto b = static_cast<float>(rng.uniform(std::max(0.0, 1 - j[0]), 1 + j[0]));
    const auto c = static_cast<float>(rng.uniform(std::max(0.0, 1 - j[1]), 1 + j[1]));
    const auto s = static_cast<float>(rng.uniform(std::max(0.0, 1 - j[2]), 1 + j[2]));
    const auto h = static_cast<float>(rng.uniform(-j[3], j[3]));
    int order[4] = {0, 1, 2, 3};
    rng.shuffle(order, order + 4);
    for (int op : order) {
      if (op == 0 && j[0] > 0) adjust_brightness(im, b);
      if (op == 1 && j[1] > 0) adjust_contrast(im, c);
      if (op == 2 && j[2] > 0) adjust_saturation(im, s);
      if (op == 3 && j[3] > 0) adjust_hue(im, h);
    }
  }
  if (cfg.grayscale_prob > 0.0 && rng.bernoulli(cfg.grayscale_prob) && im.c == 3) {
    const auto g = gray_plane(im);
    const std::size_t plane = g.size();
    for (int c = 0; c < 3; ++c) std::copy(g.begin(), g.end(), im.v.begin() + c * plane);
  }
  if (cfg.out_size >= cfg.blur_min_size && cfg.blur_prob > 0.0 && rng.bernoulli(cfg.blur_prob))
    gaussian_blur(im, rng.uniform(0.1, 2.0));
  return normalise(im, cfg.mean, cfg.std);
}

std::pair<ImageTensor, ImageTensor> augment_pair(ImageView img, const AugmentationConfig& cfg, Rng& rng) {
  auto a = augment(img, cfg, rng);
  auto b = augment(img, cfg, rng);
  return {std::move(a), std::move(b)};
}

ImageTensor eval_transform(ImageView img, int out_size, const std::vector<double>& mean,
                           const std::vector<double>& std, int resize_size) {
  check_image(img);
  if (resize_size == 0) resize_size = out_size;
  NCSL_CHECK(out_size >= 1 && resize_size >= out_size, InvalidArgument, "eval_transform: resize ", resize_size,
             " must be >= crop ", out_size, " >= 1");
  // Shorter side to resize_size, aspect preserved.
  int rh, rw;
  if (img.height <= img.width) {
    rh = resize_size;
    rw = static_cast<int>(std::lround(static_cast<double>(img.width) * resize_size / img.height));
  } else {
    rw = resize_size;
    rh = static_cast<int>(std::lround(static_cast<double>(img.height) * resize_size / img.width));
  }
  // Crop in resized coordinates, mapped back to a source window.
  const int top = (rh - out_size) / 2, left = (rw - out_size) / 2;
  const double sy = static_cast<double>(img.height) / rh, sx = static_cast<double>(img.width) / rw;
  Img im = resample(img, top * sy, left * sx, out_size * sy, out_size * sx, out_size, out_size);
  return normalise(im, mean, std);
}

Rng item_rng(std::uint64_t seed, std::int64_t step, std::int64_t slot) {
  return Rng(derive_seed({seed, 0x6175676dULL, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(slot)}));
}

std::pair<diff::Tensor<float>, diff::Tensor<float>> augment_batch(const Dataset& ds,
                                                                  const std::vector<std::int64_t>& indices,
                                                                  const AugmentationConfig& cfg,
                                                                  std::uint64_t seed, std::int64_t step) {
  const auto B = static_cast<std::int64_t>(indices.size());
  NCSL_CHECK(B >= 1, InvalidArgument, "augment_batch: empty index list");
  const std::int64_t S = cfg.out_size, C = ds.channels;
  diff::Tensor<float> v1({B, C, S, S}), v2({B, C, S, S});
  const std::size_t item = static_cast<std::size_t>(C * S * S);
  for (std::int64_t b = 0; b < B; ++b) {
    auto rng = item_rng(seed, step, b);
    auto [a, c] = augment_pair(ds.image(indices[b]), cfg, rng);
    std::copy(a.data().begin(), a.data().end(), v1.data().begin() + b * item);
    std::copy(c.data().begin(), c.data().end(), v2.data().begin() + b * item);
  }
  return {std::move(v1), std::move(v2)};
}

diff::Tensor<float> eval_batch(const Dataset& ds, std::int64_t begin, std::int64_t end, int out_size,
                               const std::vector<double>& mean, const std::vector<double>& std, int resize_size) {
  NCSL_CHECK(begin >= 0 && begin < end && end <= ds.size(), InvalidArgument, "eval_batch range [", begin, ", ",
             end, ") invalid for ", ds.size(), " images");
  const std::int64_t n = end - begin, S = out_size, C = ds.channels;
  diff::Tensor<float> out({n, C, S, S});
  const std::size_t item = static_cast<std::size_t>(C * S * S);
  for (std::int64_t i = 0; i < n; ++i) {
    auto t = eval_transform(ds.image(begin + i), out_size, mean, std, resize_size);
    std::copy(t.data().begin(), t.data().end(), out.data().begin() + i * item);
  }
  return out;
}

}  // namespace ncsl::data
