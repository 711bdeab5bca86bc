// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ncsl::diag {

// N x d float32 representation matrix, row-major.
struct ReprMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<float> values;
  std::string checkpoint_id;
  std::string dataset_id;
  // Optional per-row class labels (empty when unknown).
  std::vector<int> labels;

  const float* row(std::int64_t i) const { return values.data() + i * cols; }
  void validate() const;
};

// "REPR" | version u32 | N u64 | d u64 | dtype u8 (0 = f32) | N*d f32 |
// trailer_len u64 | JSON trailer {checkpoint_id, dataset_id, labels}
inline constexpr std::uint32_t kReprFileVersion = 1;

void write_repr_file(const std::filesystem::path& path, const ReprMatrix& m);
ReprMatrix read_repr_file(const std::filesystem::path& path);

}  // namespace ncsl::diag
