// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "models/nn_queue.hpp"

#include <cmath>

#include "common/error.hpp"

namespace ncsl::models {

namespace {

double norm_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

NNQueue::NNQueue(int capacity, int dim) : capacity_(capacity), dim_(dim) {
  NCSL_CHECK(capacity >= 1, InvalidArgument, "queue capacity must be >= 1, got ", capacity);
  NCSL_CHECK(dim >= 1, InvalidArgument, "queue dim must be >= 1, got ", dim);
  storage_.assign(static_cast<std::size_t>(capacity) * dim, 0.0);
}

void NNQueue::push(std::span<const double> v) {
  NCSL_CHECK(static_cast<int>(v.size()) == dim_, ShapeError, "queue push: expected ", dim_,
             " entries, got ", v.size());
  const double n = norm_of(v);
  NCSL_CHECK(std::isfinite(n) && n >= 1e-12, NumericError, "queue push: vector has zero or non-finite norm");
  double* dst = storage_.data() + static_cast<std::size_t>(head_) * dim_;
  for (int j = 0; j < dim_; ++j) dst[j] = v[j] / n;
  head_ = (head_ + 1) % capacity_;
  if (fill_ < capacity_) ++fill_;
}

int NNQueue::lookup_index(std::span<const double> v) const {
  NCSL_CHECK(fill_ > 0, StateError, "queue lookup on empty queue");
  NCSL_CHECK(static_cast<int>(v.size()) == dim_, ShapeError, "queue lookup: expected ", dim_,
             " entries, got ", v.size());
  const double n = norm_of(v);
  NCSL_CHECK(std::isfinite(n) && n >= 1e-12, NumericError, "queue lookup: vector has zero or non-finite norm");
  // Slots [0, fill) are occupied whether or not the ring has wrapped.
  int best = 0;
  double best_dot = -INFINITY;
  for (int i = 0; i < fill_; ++i) {
    const double* s = storage_.data() + static_cast<std::size_t>(i) * dim_;
    double d = 0.0;
    for (int j = 0; j < dim_; ++j) d += s[j] * v[j];
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return best;
}

std::vector<double> NNQueue::lookup(std::span<const double> v) const {
  auto s = slot(lookup_index(v));
  return {s.begin(), s.end()};
}

std::span<const double> NNQueue::slot(int i) const {
  NCSL_CHECK(i >= 0 && i < fill_, InvalidArgument, "queue slot ", i, " out of range [0, ", fill_, ")");
  return {storage_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
}

void NNQueue::restore(std::vector<double> storage, int fill, int head) {
  NCSL_CHECK(storage.size() == storage_.size(), ShapeError, "queue restore: storage has ", storage.size(),
             " values, expected ", storage_.size());
  NCSL_CHECK(fill >= 0 && fill <= capacity_ && head >= 0 && head < capacity_, FormatError,
             "queue restore: bad state fill=", fill, " head=", head);
  NCSL_CHECK(fill == capacity_ || head == fill, FormatError,
             "queue restore: head must equal fill before the ring wraps");
  for (int i = 0; i < fill; ++i) {
    double s = 0.0;
    for (int j = 0; j < dim_; ++j) s += storage[static_cast<std::size_t>(i) * dim_ + j] * storage[static_cast<std::size_t>(i) * dim_ + j];
    NCSL_CHECK(std::abs(std::sqrt(s) - 1.0) <= 1e-5, FormatError, "queue restore: slot ", i, " is not unit norm");
  }
  storage_ = std::move(storage);
  fill_ = fill;
  head_ = head;
}

}  // namespace ncsl::models
