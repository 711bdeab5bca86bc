// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "diff/parameter_set.hpp"

namespace ncsl::diff {

// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
//   buf <- mu * buf + (grad + lambda * value);  value <- value - lr * buf
template <class T>
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Parameter<T>*> params, double momentum, double weight_decay);

  void step(double lr);
  void zero_grad();

  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }
  const std::vector<Parameter<T>*>& params() const { return params_; }
  std::vector<Tensor<T>>& buffers() { return buffers_; }
  const std::vector<Tensor<T>>& buffers() const { return buffers_; }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<Tensor<T>> buffers_;
  double momentum_;
  double weight_decay_;
};

// base_lr * 0.5 * (1 + cos(pi * step / total_steps)), step in [0, total_steps].
double cosine_lr(long step, long total_steps, double base_lr);

// target <- tau * target + (1 - tau) * online for trainable entries; buffers
// (batch-norm running statistics) are copied from online.
template <class T>
void ema_update(std::span<Parameter<T>* const> target, std::span<Parameter<T>* const> online,
                double tau);

extern template class SgdMomentum<float>;
extern template class SgdMomentum<double>;

}  // namespace ncsl::diff
