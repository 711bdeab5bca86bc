// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "diff/tensor.hpp"

namespace ncsl::eval {

struct ProbeConfig {
  int epochs = 30;
  int batch_size = 256;
  // Effective lr is base_lr * batch_size / 256, cosine-decayed over all steps.
  double base_lr = 0.3;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProbeResult {
  double val_acc = 0.0;
  double train_acc = 0.0;  // on the last epoch's batches
  double final_loss = 0.0;
  std::int64_t steps = 0;
};

// Produces [B, dim] features for the given training rows. epoch and step let
// callers derive augmentation streams.
using FeatureFn =
    std::function<diff::Tensor<float>(const std::vector<std::int64_t>& rows, std::int64_t epoch, std::int64_t step)>;

// Trains one affine layer with softmax cross-entropy on frozen features.
// val_features is [N_val, dim] row-major.
ProbeResult train_linear_probe(const FeatureFn& train_features, std::span<const int> train_labels, std::int64_t dim,
                               int num_classes, std::span<const float> val_features, std::span<const int> val_labels,
                               const ProbeConfig& cfg);

// Convenience form over a fixed [N, dim] training matrix.
ProbeResult train_linear_probe(std::span<const float> train, std::span<const int> train_labels, std::int64_t dim,
                               int num_classes, std::span<const float> val, std::span<const int> val_labels,
                               const ProbeConfig& cfg);

}  // namespace ncsl::eval
