// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "diff/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace ncsl::diff {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts are not supported");

namespace {

template <class U>
void put(std::ofstream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

class Reader {
 public:
  Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    NCSL_CHECK(in_.good(), IoError, "cannot open '", path.string(), "' for reading");
  }

  template <class U>
  U get(const char* what) {
    U v{};
    read_raw(&v, sizeof(U), what);
    return v;
  }

  void read_raw(void* dst, std::size_t n, const char* what) {
    const auto offset = static_cast<long long>(in_.tellg());
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    NCSL_CHECK(static_cast<std::size_t>(in_.gcount()) == n, FormatError, "truncated tensor file '",
               path_.string(), "': expected ", n, " bytes of ", what, " at byte offset ", offset);
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

void write_tensor_file(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    NCSL_CHECK(os.good(), IoError, "cannot open '", tmp.string(), "' for writing");
    os.write("NCSL", 4);
    put<std::uint32_t>(os, kTensorFileVersion);
    put<std::uint64_t>(os, entries.size());
    for (const auto& e : entries) {
      NCSL_CHECK(e.name.size() <= std::numeric_limits<std::uint16_t>::max(), InvalidArgument,
                 "tensor name too long: ", e.name.size(), " bytes");
      put<std::uint16_t>(os, static_cast<std::uint16_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      std::visit(
          [&](const auto& t) {
            using T = typename std::decay_t<decltype(t)>::value_type;
            NCSL_CHECK(t.rank() <= 255, InvalidArgument, "rank too large for '", e.name, "'");
            put<std::uint8_t>(os, static_cast<std::uint8_t>(dtype_of<T>()));
            put<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
            for (auto d : t.shape()) put<std::uint64_t>(os, static_cast<std::uint64_t>(d));
            os.write(reinterpret_cast<const char*>(t.ptr()),
                     static_cast<std::streamsize>(t.size() * sizeof(T)));
          },
          e.tensor);
    }
    os.flush();
    NCSL_CHECK(os.good(), IoError, "write failed for '", tmp.string(), "'");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path) {
  Reader r(path);
  char magic[4];
  r.read_raw(magic, 4, "magic");
  NCSL_CHECK(std::memcmp(magic, "NCSL", 4) == 0, FormatError, "'", path.string(),
             "' is not a tensor file (bad magic)");
  const auto version = r.get<std::uint32_t>("version");
  NCSL_CHECK(version == kTensorFileVersion, FormatError, "unsupported tensor file version ", version);
  const auto count = r.get<std::uint64_t>("entry count");
  std::vector<NamedTensor> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = r.get<std::uint16_t>("name length");
    std::string name(len, '\0');
    r.read_raw(name.data(), len, "name");
    const auto dtype = r.get<std::uint8_t>("dtype");
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape(rank);
    for (auto& d : shape) {
      const auto e = r.get<std::uint64_t>("extent");
      NCSL_CHECK(e > 0 && e < (1ULL << 40), FormatError, "bad extent ", e, " in '", name, "'");
      d = static_cast<std::int64_t>(e);
    }
    if (dtype == static_cast<std::uint8_t>(DType::f32)) {
      Tensor<float> t(shape);
      r.read_raw(t.ptr(), t.size() * sizeof(float), "f32 payload");
      out.push_back({std::move(name), std::move(t)});
    } else if (dtype == static_cast<std::uint8_t>(DType::f64)) {
      Tensor<double> t(shape);
      r.read_raw(t.ptr(), t.size() * sizeof(double), "f64 payload");
      out.push_back({std::move(name), std::move(t)});
    } else {
      fail<FormatError>("unknown dtype code ", int(dtype), " for '", name, "'");
    }
  }
  NCSL_CHECK(r.at_end(), FormatError, "trailing bytes after ", count, " entries in '", path.string(), "'");
  return out;
}

const NamedTensor* find_entry(const std::vector<NamedTensor>& entries, const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

template <class T>
Tensor<T> get_tensor(const std::vector<NamedTensor>& entries, const std::string& name) {
  const auto* e = find_entry(entries, name);
  NCSL_CHECK(e != nullptr, FormatError, "checkpoint has no entry '", name, "'");
  return std::visit([](const auto& t) { return t.template cast<T>(); }, e->tensor);
}

template Tensor<float> get_tensor<float>(const std::vector<NamedTensor>&, const std::string&);
template Tensor<double> get_tensor<double>(const std::vector<NamedTensor>&, const std::string&);

}  // namespace ncsl::diff
