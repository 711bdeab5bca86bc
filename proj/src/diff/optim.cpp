// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "diff/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ncsl::diff {

template <class T>
SgdMomentum<T>::SgdMomentum(std::vector<Parameter<T>*> params, double momentum,
                            double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  NCSL_CHECK(momentum >= 0.0 && momentum < 1.0, InvalidArgument, "momentum must lie in [0,1), got ",
             momentum);
  NCSL_CHECK(weight_decay >= 0.0, InvalidArgument, "weight decay must be non-negative");
  for (auto* p : params_) {
    NCSL_CHECK(p->requires_grad, InvalidArgument, "optimizer given non-trainable '", p->name, "'");
    buffers_.emplace_back(p->value.shape());
  }
}

template <class T>
void SgdMomentum<T>::step(double lr) {
  NCSL_CHECK(std::isfinite(lr) && lr >= 0.0, InvalidArgument, "invalid learning rate ", lr);
  for (auto* p : params_) {
    if (!all_finite<T>(p->grad.data()))
      fail<NumericError>("non-finite gradient in parameter '", p->name, "'");
  }
  const T mu = static_cast<T>(momentum_), wd = static_cast<T>(weight_decay_), eta = static_cast<T>(lr);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto* p = params_[k];
    T* buf = buffers_[k].ptr();
    T* v = p->value.ptr();
    const T* g = p->grad.ptr();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      buf[i] = mu * buf[i] + (g[i] + wd * v[i]);
      v[i] -= eta * buf[i];
    }
  }
}

template <class T>
void SgdMomentum<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

double cosine_lr(long step, long total_steps, double base_lr) {
  NCSL_CHECK(total_steps > 0, InvalidArgument, "total_steps must be positive, got ", total_steps);
  NCSL_CHECK(step >= 0 && step <= total_steps, InvalidArgument, "step ", step,
             " outside [0, ", total_steps, "]");
  if (step == total_steps) return 0.0;
  return base_lr * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

template <class T>
void ema_update(std::span<Parameter<T>* const> target, std::span<Parameter<T>* const> online,
                double tau) {
  NCSL_CHECK(tau >= 0.0 && tau <= 1.0, InvalidArgument, "tau must lie in [0,1], got ", tau);
  NCSL_CHECK(target.size() == online.size(), ShapeError, "EMA lists differ in length: ",
             target.size(), " vs ", online.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    auto* t = target[k];
    const auto* o = online[k];
    NCSL_CHECK(t->value.same_shape(o->value), ShapeError, "EMA shape mismatch between '", t->name,
               "' and '", o->name, "'");
    if (!o->requires_grad) {
      t->value = o->value;
      continue;
    }
    if (tau == 1.0) continue;
    if (tau == 0.0) {
      t->value = o->value;
      continue;
    }
    const T a = static_cast<T>(tau), b = static_cast<T>(1.0 - tau);
    for (std::size_t i = 0; i < t->value.size(); ++i) {
      const T prev = t->value[i], on = o->value[i];
      // Rounding may land one ulp outside [prev, on]; clamp keeps the convex bound exact.
      t->value[i] = std::clamp(a * prev + b * on, std::min(prev, on), std::max(prev, on));
    }
  }
}

template class SgdMomentum<float>;
template class SgdMomentum<double>;
template void ema_update<float>(std::span<Parameter<float>* const>, std::span<Parameter<float>* const>, double);
template void ema_update<double>(std::span<Parameter<double>* const>, std::span<Parameter<double>* const>, double);

}  // namespace ncsl::diff
