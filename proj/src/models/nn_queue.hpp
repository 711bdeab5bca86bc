// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ncsl::models {

// FIFO ring of unit-norm vectors for nearest-neighbour lookup.
class NNQueue {
 public:
  NNQueue(int capacity, int dim);

  int capacity() const { return capacity_; }
  int dim() const { return dim_; }
  int fill() const { return fill_; }
  bool full() const { return fill_ == capacity_; }
  // Slot the next push will overwrite.
  int head() const { return head_; }

  void push(std::span<const double> v);
  // Index of the stored vector with the largest cosine to v; lowest slot wins ties.
  int lookup_index(std::span<const double> v) const;
  std::vector<double> lookup(std::span<const double> v) const;
  std::span<const double> slot(int i) const;

  const std::vector<double>& storage() const { return storage_; }
  void restore(std::vector<double> storage, int fill, int head);

 private:
  int capacity_;
  int dim_;
  int fill_ = 0;
  int head_ = 0;
  std::vector<double> storage_;
};

}  // namespace ncsl::models
