// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "common/rng.hpp"
#include "diff/graph.hpp"
#include "diff/parameter_set.hpp"
#include "models/config.hpp"
#include "models/modules.hpp"
#include "models/nn_queue.hpp"

namespace ncsl::models {

// Encoder + projector + predictor under one parameter set ("online"). BYOL
// adds a target encoder+projector with identical parameter names; NNSiam adds
// a queue of past projections.
template <class T>
class SiameseModel {
 public:
  SiameseModel(const ModelConfig& cfg, std::uint64_t seed);
  SiameseModel(const SiameseModel&) = delete;
  SiameseModel& operator=(const SiameseModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  ParameterSet<T>& online() { return online_; }
  const ParameterSet<T>& online() const { return online_; }
  bool has_target() const { return target_ != nullptr; }
  ParameterSet<T>& target();
  bool has_queue() const { return queue_.has_value(); }
  NNQueue& queue();

  NodeRef encode(Graph<T>& g, NodeRef x) const { return encoder_(g, x); }
  NodeRef project(Graph<T>& g, NodeRef h) const { return projector_(g, h); }
  NodeRef predict(Graph<T>& g, NodeRef z) const { return predictor_(g, z); }

  // Target encoder+projector forward, outside any recorded graph. Training
  // mode uses batch statistics and updates the target running stats.
  diff::Tensor<T> target_projection(const diff::Tensor<T>& x, bool training);

  // Encoder-only forward in eval mode, no recording.
  diff::Tensor<T> represent(const diff::Tensor<T>& x);

 private:
  SiameseModel(const ModelConfig& cfg, std::uint64_t seed, Rng&& rng);

  ModelConfig cfg_;
  ParameterSet<T> online_;
  Encoder<T> encoder_;
  MlpHead<T> projector_;
  MlpHead<T> predictor_;
  std::unique_ptr<ParameterSet<T>> target_;
  std::unique_ptr<Encoder<T>> target_encoder_;
  std::unique_ptr<MlpHead<T>> target_projector_;
  std::optional<NNQueue> queue_;
};

// Mean over rows of -cos(p_i, z_i). Throws NumericError naming the first
// zero-norm row.
template <class T>
double negative_cosine(const diff::Tensor<T>& p, const diff::Tensor<T>& z);

template <class T>
NodeRef negative_cosine(Graph<T>& g, NodeRef p, NodeRef z);

template <class T>
struct LossTerms {
  NodeRef loss;
  NodeRef term12;  // D(p1, target of view 2)
  NodeRef term21;  // D(p2, target of view 1)
  NodeRef z1;
  NodeRef z2;
  NodeRef p1;
  NodeRef p2;
  // Stop-gradient targets for view 1 and view 2.
  NodeRef t1;
  NodeRef t2;
};

// Symmetrised loss for the model's variant. With update_queue unset an NNSiam
// queue is read but not written.
template <class T>
LossTerms<T> siamese_loss(SiameseModel<T>& model, Graph<T>& g, const diff::Tensor<T>& x1,
                          const diff::Tensor<T>& x2, bool update_queue = true);

extern template class SiameseModel<float>;
extern template class SiameseModel<double>;

}  // namespace ncsl::models
