// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ncsl::data {

enum class OrderingMode { multiple_pass, single_pass, cumulative, hybrid };

const char* to_string(OrderingMode m);
OrderingMode ordering_mode_from(const std::string& s);

struct OrderingPlan {
  OrderingMode mode = OrderingMode::multiple_pass;
  std::int64_t total_steps = 1000;
  int batch_size = 128;
  int num_chunks = 100;
  // Hybrid only: chunk index at which full-set training takes over.
  int switch_chunk = 40;
  std::uint64_t seed = 0;

  bool chunked() const { return mode != OrderingMode::multiple_pass; }
  // Plan-only checks; validate(n) adds the dataset-size ones.
  void validate() const;
  void validate(std::int64_t n) const;
};

// Which indices a step may draw from: the full set, or the union of chunks
// [first_chunk, last_chunk].
struct Eligibility {
  bool full = false;
  int first_chunk = 0;
  int last_chunk = 0;
  // Steps sharing a phase id share one eligible set and one sample stream.
  std::int64_t phase = 0;
  std::int64_t phase_start = 0;

  bool operator==(const Eligibility&) const = default;
};

class ChunkSchedule {
 public:
  ChunkSchedule(const OrderingPlan& plan, std::int64_t n);

  const OrderingPlan& plan() const { return plan_; }
  std::int64_t dataset_size() const { return n_; }
  // Random partition of [0, N) into C chunks (sizes differ by at most one),
  // each sorted ascending. Empty for multiple_pass.
  const std::vector<std::vector<std::int64_t>>& chunks() const { return chunks_; }
  std::int64_t steps_per_chunk() const;

  Eligibility eligible(std::int64_t step) const;
  std::vector<std::int64_t> eligible_indices(std::int64_t step) const;

  // B indices for this step. Within a phase the draws are the concatenation
  // of independently shuffled passes over the eligible set, so the result is
  // a pure function of (plan, N, step). Not thread-safe (caches one pass).
  std::vector<std::int64_t> next_batch(std::int64_t step) const;

 private:
  const std::vector<std::int64_t>& pass(const Eligibility& e, std::int64_t epoch) const;

  OrderingPlan plan_;
  std::int64_t n_;
  std::vector<std::vector<std::int64_t>> chunks_;

  mutable std::int64_t cached_phase_ = -1;
  mutable std::int64_t cached_epoch_ = -1;
  mutable std::vector<std::int64_t> cached_pass_;
};

}  // namespace ncsl::data
