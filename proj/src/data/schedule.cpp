// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "data/schedule.hpp"

#include <algorithm>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace ncsl::data {

const char* to_string(OrderingMode m) {
  switch (m) {
    case OrderingMode::multiple_pass: return "multiple_pass";
    case OrderingMode::single_pass: return "single_pass";
    case OrderingMode::cumulative: return "cumulative";
    case OrderingMode::hybrid: return "hybrid";
  }
  return "?";
}

OrderingMode ordering_mode_from(const std::string& s) {
  for (auto m : {OrderingMode::multiple_pass, OrderingMode::single_pass, OrderingMode::cumulative,
                 OrderingMode::hybrid})
    if (s == to_string(m)) return m;
  fail<ConfigError>("unknown ordering mode '", s, "' (expected multiple_pass, single_pass, cumulative or hybrid)");
}

void OrderingPlan::validate() const {
  NCSL_CHECK(total_steps >= 1, ConfigError, "ordering.total_steps must be >= 1");
  NCSL_CHECK(batch_size >= 1, ConfigError, "ordering.batch_size must be >= 1");
  NCSL_CHECK(num_chunks >= 1, ConfigError, "ordering.num_chunks must be >= 1");
  if (chunked()) {
    NCSL_CHECK(total_steps % num_chunks == 0, ConfigError, "ordering.total_steps (", total_steps,
               ") must be divisible by ordering.num_chunks (", num_chunks, ") for ", to_string(mode));
  }
  if (mode == OrderingMode::hybrid) {
    NCSL_CHECK(switch_chunk >= 1 && switch_chunk < num_chunks, ConfigError, "ordering.switch_chunk (",
               switch_chunk, ") must lie in [1, num_chunks) = [1, ", num_chunks, ")");
  }
}

void OrderingPlan::validate(std::int64_t n) const {
  validate();
  NCSL_CHECK(n >= 1, ConfigError, "ordering needs a non-empty dataset");
  if (chunked())
    NCSL_CHECK(num_chunks <= n, ConfigError, "ordering.num_chunks (", num_chunks, ") exceeds dataset size ", n);
}

ChunkSchedule::ChunkSchedule(const OrderingPlan& plan, std::int64_t n) : plan_(plan), n_(n) {
  plan_.validate(n);
  if (!plan_.chunked()) return;
  std::vector<std::int64_t> perm(n);
  for (std::int64_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(derive_seed({plan_.seed, 0x6368756e6bULL}));
  rng.shuffle(perm.begin(), perm.end());
  const std::int64_t C = plan_.num_chunks, base = n / C, extra = n % C;
  std::int64_t at = 0;
  chunks_.resize(C);
  for (std::int64_t c = 0; c < C; ++c) {
    const std::int64_t sz = base + (c < extra ? 1 : 0);
    chunks_[c].assign(perm.begin() + at, perm.begin() + at + sz);
    std::sort(chunks_[c].begin(), chunks_[c].end());
    at += sz;
  }
}

std::int64_t ChunkSchedule::steps_per_chunk() const {
  return plan_.chunked() ? plan_.total_steps / plan_.num_chunks : plan_.total_steps;
}

Eligibility ChunkSchedule::eligible(std::int64_t step) const {
  NCSL_CHECK(step >= 0 && step < plan_.total_steps, InvalidArgument, "step ", step, " outside [0, ",
             plan_.total_steps, ")");
  Eligibility e;
  if (!plan_.chunked()) {
    e.full = true;
    return e;
  }
  const std::int64_t spc = steps_per_chunk();
  const int chunk = static_cast<int>(step / spc);
  switch (plan_.mode) {
    case OrderingMode::single_pass:
      e.first_chunk = e.last_chunk = chunk;
      break;
    case OrderingMode::cumulative:
      e.first_chunk = 0;
      e.last_chunk = chunk;
      break;
    case OrderingMode::hybrid:
      if (chunk >= plan_.switch_chunk) {
        e.full = true;
        e.phase = plan_.switch_chunk;
        e.phase_start = static_cast<std::int64_t>(plan_.switch_chunk) * spc;
        return e;
      }
      e.first_chunk = e.last_chunk = chunk;
      break;
    case OrderingMode::multiple_pass:
      break;
  }
  e.phase = chunk;
  e.phase_start = static_cast<std::int64_t>(chunk) * spc;
  return e;
}

std::vector<std::int64_t> ChunkSchedule::eligible_indices(std::int64_t step) const {
  const auto e = eligible(step);
  std::vector<std::int64_t> out;
  if (e.full) {
    out.resize(n_);
    for (std::int64_t i = 0; i < n_; ++i) out[i] = i;
    return out;
  }
  for (int c = e.first_chunk; c <= e.last_chunk; ++c) out.insert(out.end(), chunks_[c].begin(), chunks_[c].end());
  std::sort(out.begin(), out.end());
  return out;
}

const std::vector<std::int64_t>& ChunkSchedule::pass(const Eligibility& e, std::int64_t epoch) const {
  if (cached_phase_ == e.phase && cached_epoch_ == epoch) return cached_pass_;
  cached_pass_ = eligible_indices(e.phase_start);
  Rng rng(derive_seed({plan_.seed, 0x70617373ULL, static_cast<std::uint64_t>(e.phase),
                       static_cast<std::uint64_t>(epoch)}));
  rng.shuffle(cached_pass_.begin(), cached_pass_.end());
  cached_phase_ = e.phase;
  cached_epoch_ = epoch;
  return cached_pass_;
}

std::vector<std::int64_t> ChunkSchedule::next_batch(std::int64_t step) const {
  const auto e = eligible(step);
  const std::int64_t size =
      e.full ? n_
             : [&] {
                 std::int64_t s = 0;
                 for (int c = e.first_chunk; c <= e.last_chunk; ++c) s += static_cast<std::int64_t>(chunks_[c].size());
                 return s;
               }();
  NCSL_CHECK(size > 0, StateError, "internal: empty eligible set at step ", step);
  const std::int64_t B = plan_.batch_size;
  std::int64_t pos = (step - e.phase_start) * B;
  std::vector<std::int64_t> out;
  out.reserve(B);
  while (static_cast<std::int64_t>(out.size()) < B) {
    const std::int64_t epoch = pos / size, off = pos % size;
    const auto& p = pass(e, epoch);
    const std::int64_t take = std::min<std::int64_t>(B - static_cast<std::int64_t>(out.size()), size - off);
    out.insert(out.end(), p.begin() + off, p.begin() + off + take);
    pos += take;
  }
  return out;
}

}  // namespace ncsl::data
