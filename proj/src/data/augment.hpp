// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "common/rng.hpp"
#include "data/dataset.hpp"
#include "diff/tensor.hpp"

namespace ncsl::data {

struct AugmentationConfig {
  int out_size = 32;
  std::array<double, 2> crop_scale = {0.2, 1.0};
  std::array<double, 2> crop_ratio = {3.0 / 4.0, 4.0 / 3.0};
  double hflip_prob = 0.5;
  // brightness, contrast, saturation, hue
  std::array<double, 4> color_jitter = {0.4, 0.4, 0.4, 0.1};
  double jitter_prob = 0.8;
  double grayscale_prob = 0.2;
  double blur_prob = 0.5;
  // Blur is skipped for outputs smaller than this.
  int blur_min_size = 64;
  std::vector<double> mean = {0.4914, 0.4822, 0.4465};
  std::vector<double> std = {0.2470, 0.2435, 0.2616};

  void validate() const;
  // RandomResizedCrop + horizontal flip + normalisation only.
  static AugmentationConfig probe_preset();
  // No randomness at all: full-image crop, every probability zero.
  static AugmentationConfig identity();
};

using ImageTensor = diff::Tensor<float>;  // [C, S, S]

// One stochastic draw of the augmentation chain.
ImageTensor augment(ImageView img, const AugmentationConfig& cfg, Rng& rng);
std::pair<ImageTensor, ImageTensor> augment_pair(ImageView img, const AugmentationConfig& cfg, Rng& rng);

// Resize (shorter side to resize_size, bilinear) then centre crop to
// out_size and normalise. resize_size 0 means out_size.
ImageTensor eval_transform(ImageView img, int out_size, const std::vector<double>& mean,
                           const std::vector<double>& std, int resize_size = 0);

// Independent stream per (seed, step, slot); batches are identical whether
// items are augmented serially or in parallel.
Rng item_rng(std::uint64_t seed, std::int64_t step, std::int64_t slot);

// Two augmented views of every indexed image, as [B, C, S, S].
std::pair<diff::Tensor<float>, diff::Tensor<float>> augment_batch(const Dataset& ds,
                                                                  const std::vector<std::int64_t>& indices,
                                                                  const AugmentationConfig& cfg,
                                                                  std::uint64_t seed, std::int64_t step);

// eval_transform applied to dataset rows [begin, end), as [n, C, S, S].
diff::Tensor<float> eval_batch(const Dataset& ds, std::int64_t begin, std::int64_t end, int out_size,
                               const std::vector<double>& mean, const std::vector<double>& std,
                               int resize_size = 0);

}  // namespace ncsl::data
