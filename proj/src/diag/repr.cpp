// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "diag/repr.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "common/error.hpp"
#include "json.hpp"

namespace ncsl::diag {

static_assert(std::endian::native == std::endian::little, "REPR files are little-endian");

void ReprMatrix::validate() const {
  NCSL_CHECK(rows >= 1 && cols >= 1, ShapeError, "representation matrix must be non-empty, got ", rows, "x", cols);
  NCSL_CHECK(static_cast<std::int64_t>(values.size()) == rows * cols, ShapeError, "representation matrix ", rows,
             "x", cols, " holds ", values.size(), " values");
  NCSL_CHECK(labels.empty() || static_cast<std::int64_t>(labels.size()) == rows, ShapeError, "representation matrix has ",
             labels.size(), " labels for ", rows, " rows");
  for (std::size_t i = 0; i < values.size(); ++i)
    NCSL_CHECK(std::isfinite(values[i]), NumericError, "non-finite representation entry at row ",
               static_cast<std::int64_t>(i) / cols, ", column ", static_cast<std::int64_t>(i) % cols);
}

void write_repr_file(const std::filesystem::path& path, const ReprMatrix& m) {
  m.validate();
  nlohmann::json trailer = {{"checkpoint_id", m.checkpoint_id}, {"dataset_id", m.dataset_id}, {"labels", m.labels}};
  const auto text = trailer.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    NCSL_CHECK(os.good(), IoError, "cannot open '", tmp.string(), "' for writing");
    auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    os.write("REPR", 4);
    put(kReprFileVersion);
    put(static_cast<std::uint64_t>(m.rows));
    put(static_cast<std::uint64_t>(m.cols));
    put(static_cast<std::uint8_t>(0));
    os.write(reinterpret_cast<const char*>(m.values.data()), static_cast<std::streamsize>(m.values.size() * 4));
    put(static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    os.flush();
    NCSL_CHECK(os.good(), IoError, "write failed for '", tmp.string(), "'");
  }
  std::filesystem::rename(tmp, path);
}

ReprMatrix read_repr_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  NCSL_CHECK(in.good(), IoError, "cannot open '", path.string(), "' for reading");
  auto raw = [&](void* dst, std::size_t n, const char* what) {
    const auto offset = static_cast<long long>(in.tellg());
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    NCSL_CHECK(static_cast<std::size_t>(in.gcount()) == n, FormatError, "truncated REPR file '", path.string(),
               "': expected ", n, " bytes of ", what, " at byte offset ", offset);
  };
  char magic[4];
  raw(magic, 4, "magic");
  NCSL_CHECK(std::string(magic, 4) == "REPR", FormatError, "'", path.string(), "' is not a REPR file");
  std::uint32_t version;
  raw(&version, 4, "version");
  NCSL_CHECK(version == kReprFileVersion, FormatError, "unsupported REPR version ", version);
  std::uint64_t n, d;
  std::uint8_t dtype;
  raw(&n, 8, "row count");
  raw(&d, 8, "column count");
  raw(&dtype, 1, "dtype");
  NCSL_CHECK(dtype == 0, FormatError, "unsupported REPR dtype ", int(dtype));
  NCSL_CHECK(n >= 1 && d >= 1 && n <= (1ULL << 40) / d, FormatError, "implausible REPR shape ", n, "x", d);
  ReprMatrix m;
  m.rows = static_cast<std::int64_t>(n);
  m.cols = static_cast<std::int64_t>(d);
  m.values.resize(n * d);
  raw(m.values.data(), m.values.size() * 4, "values");
  std::uint64_t tlen;
  raw(&tlen, 8, "trailer length");
  NCSL_CHECK(tlen <= (1ULL << 32), FormatError, "implausible REPR trailer length ", tlen);
  std::string text(tlen, '\0');
  raw(text.data(), tlen, "trailer");
  NCSL_CHECK(in.peek() == std::char_traits<char>::eof(), FormatError, "trailing bytes after REPR trailer in '",
             path.string(), "'");
  try {
    const auto j = nlohmann::json::parse(text);
    m.checkpoint_id = j.value("checkpoint_id", "");
    m.dataset_id = j.value("dataset_id", "");
    if (j.contains("labels")) m.labels = j.at("labels").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    fail<FormatError>("bad REPR trailer in '", path.string(), "': ", e.what());
  }
  m.validate();
  return m;
}

}  // namespace ncsl::diag
