// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "common/error.hpp"

namespace ncsl {

// Writes through a sibling temporary file and renames it into place.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    NCSL_CHECK(os.good(), IoError, "cannot open '", tmp.string(), "' for writing");
    os << text;
    os.flush();
    NCSL_CHECK(os.good(), IoError, "write failed for '", tmp.string(), "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  NCSL_CHECK(in.good(), IoError, "cannot open '", path.string(), "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ncsl
