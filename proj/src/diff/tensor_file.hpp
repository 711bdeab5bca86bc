// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "diff/tensor.hpp"

namespace ncsl::diff {

// Binary named-tensor container used for every checkpoint:
//   "NCSL" | version u32 | count u64 |
//   per entry: name_len u16 | utf-8 name | dtype u8 (0=f32, 1=f64) | rank u8 |
//              extents u64[rank] | little-endian payload
inline constexpr std::uint32_t kTensorFileVersion = 1;

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

struct NamedTensor {
  std::string name;
  AnyTensor tensor;
};

void write_tensor_file(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path);

// Looks up an entry by name and converts it to the requested precision.
template <class T>
Tensor<T> get_tensor(const std::vector<NamedTensor>& entries, const std::string& name);

const NamedTensor* find_entry(const std::vector<NamedTensor>& entries, const std::string& name);

}  // namespace ncsl::diff
