// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "data/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace ncsl::data {

namespace fs = std::filesystem;

namespace {

constexpr int kCifarSide = 32;
constexpr int kCifarPixels = 3 * kCifarSide * kCifarSide;
constexpr int kCifarRecord = 1 + kCifarPixels;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::uint8_t> read_all(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  NCSL_CHECK(in.good(), IoError, "cannot open ", file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

bool has_ext(const fs::path& p, std::initializer_list<const char*> exts) {
  auto e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const char* x : exts)
    if (e == x) return true;
  return false;
}

DecodedImage read_png(const fs::path& file) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  NCSL_CHECK(png_image_begin_read_from_file(&img, file.c_str()) != 0, FormatError, "png ", file.string(),
             ": ", img.message);
  const bool colour = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> packed(PNG_IMAGE_SIZE(img));
  if (png_image_finish_read(&img, nullptr, packed.data(), 0, nullptr) == 0) {
    std::string msg = img.message;
    png_image_free(&img);
    fail<FormatError>("png ", file.string(), ": ", msg);
  }
  DecodedImage out;
  out.channels = colour ? 3 : 1;
  out.height = static_cast<int>(img.height);
  out.width = static_cast<int>(img.width);
  const std::size_t hw = static_cast<std::size_t>(out.height) * out.width;
  out.planar.resize(hw * out.channels);
  for (std::size_t p = 0; p < hw; ++p)
    for (int c = 0; c < out.channels; ++c) out.planar[c * hw + p] = packed[p * out.channels + c];
  return out;
}

// Binary PPM (P6) or PGM (P5), maxval 255.
DecodedImage read_pnm(const fs::path& file) {
  const auto bytes = read_all(file);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  const auto magic = token();
  NCSL_CHECK(magic == "P6" || magic == "P5", FormatError, file.string(), ": unsupported PNM magic '", magic, "'");
  DecodedImage out;
  out.channels = magic == "P6" ? 3 : 1;
  try {
    out.width = std::stoi(token());
    out.height = std::stoi(token());
    NCSL_CHECK(std::stoi(token()) == 255, FormatError, file.string(), ": only maxval 255 is supported");
  } catch (const std::logic_error&) {
    fail<FormatError>(file.string(), ": malformed PNM header");
  }
  ++pos;  // single whitespace byte after maxval
  NCSL_CHECK(out.width > 0 && out.height > 0, FormatError, file.string(), ": bad PNM dimensions");
  const std::size_t hw = static_cast<std::size_t>(out.height) * out.width;
  const std::size_t need = hw * out.channels;
  NCSL_CHECK(bytes.size() >= pos && bytes.size() - pos >= need, FormatError, file.string(),
             ": truncated pixel data at byte offset ", bytes.size(), ", expected ", pos + need, " bytes");
  out.planar.resize(need);
  for (std::size_t p = 0; p < hw; ++p)
    for (int c = 0; c < out.channels; ++c) out.planar[c * hw + p] = bytes[pos + p * out.channels + c];
  return out;
}

Dataset load_image_folder(const fs::path& root_in, Split split) {
  fs::path root = root_in;
  if (fs::is_directory(root / to_string(split))) root /= to_string(split);
  NCSL_CHECK(fs::is_directory(root), IoError, "image folder ", root.string(), " is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  NCSL_CHECK(!class_dirs.empty(), FormatError, "image folder ", root.string(), " has no class directories");

  Dataset ds;
  ds.name = root_in.filename().string();
  ds.split = split;
  ds.num_classes = static_cast<int>(class_dirs.size());
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[c]))
      if (e.is_regular_file() && has_ext(e.path(), {".png", ".ppm", ".pgm"})) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto img = read_image_file(f);
      if (img.channels == 1) {
        const auto plane = img.planar;
        img.planar.insert(img.planar.end(), plane.begin(), plane.end());
        img.planar.insert(img.planar.end(), plane.begin(), plane.end());
        img.channels = 3;
      }
      if (ds.labels.empty()) {
        ds.channels = img.channels;
        ds.height = img.height;
        ds.width = img.width;
      }
      NCSL_CHECK(img.height == ds.height && img.width == ds.width, FormatError, f.string(), " is ", img.width,
                 "x", img.height, " but the folder's first image is ", ds.width, "x", ds.height);
      ds.images.insert(ds.images.end(), img.planar.begin(), img.planar.end());
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  NCSL_CHECK(!ds.labels.empty(), FormatError, "image folder ", root.string(), " contains no images");
  return ds;
}

Dataset load_cifar10(const fs::path& path, Split split) {
  Dataset ds;
  ds.name = "cifar10";
  ds.split = split;
  ds.num_classes = 10;
  ds.channels = 3;
  ds.height = ds.width = kCifarSide;
  if (fs::is_regular_file(path)) {
    read_cifar10_batch(path, ds);
    return ds;
  }
  NCSL_CHECK(fs::is_directory(path), IoError, "cifar10 path ", path.string(), " does not exist");
  std::vector<std::string> names;
  if (split == Split::train) {
    for (int i = 1; i <= 5; ++i) names.push_back("data_batch_" + std::to_string(i) + ".bin");
  } else {
    names.push_back("test_batch.bin");
  }
  for (const auto& n : names) read_cifar10_batch(path / n, ds);
  return ds;
}

}  // namespace

const char* to_string(Split s) { return s == Split::train ? "train" : "val"; }

const char* to_string(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::cifar10_binary: return "cifar10-binary";
    case DatasetFormat::image_folder: return "image-folder";
    case DatasetFormat::synthetic_spec: return "synthetic-spec";
  }
  return "?";
}

Split split_from(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  fail<ConfigError>("unknown split '", s, "' (expected train or val)");
}

DatasetFormat dataset_format_from(const std::string& s) {
  for (auto f : {DatasetFormat::cifar10_binary, DatasetFormat::image_folder, DatasetFormat::synthetic_spec})
    if (s == to_string(f)) return f;
  fail<ConfigError>("unknown dataset format '", s, "' (expected cifar10-binary, image-folder or synthetic-spec)");
}

ImageView Dataset::image(std::int64_t i) const {
  NCSL_CHECK(i >= 0 && i < size(), InvalidArgument, "image index ", i, " out of range [0, ", size(), ")");
  return {images.data() + i * image_bytes(), channels, height, width};
}

void Dataset::validate() const {
  NCSL_CHECK(size() >= 1, FormatError, "dataset ", name, " is empty");
  NCSL_CHECK(channels >= 1 && height >= 1 && width >= 1, FormatError, "dataset ", name, " has bad image dims");
  NCSL_CHECK(num_classes >= 1, FormatError, "dataset ", name, " has no classes");
  NCSL_CHECK(static_cast<std::int64_t>(images.size()) == size() * image_bytes(), FormatError, "dataset ", name,
             ": ", images.size(), " pixel bytes for ", size(), " images of ", image_bytes(), " bytes");
  for (std::int64_t i = 0; i < size(); ++i)
    NCSL_CHECK(labels[i] >= 0 && labels[i] < num_classes, FormatError, "dataset ", name, ": label ", labels[i],
               " of image ", i, " outside [0, ", num_classes, ")");
}

void read_cifar10_batch(const fs::path& file, Dataset& into) {
  const auto bytes = read_all(file);
  const std::size_t full = bytes.size() / kCifarRecord;
  const std::size_t rem = bytes.size() % kCifarRecord;
  NCSL_CHECK(bytes.size() > 0, FormatError, file.string(), ": empty file");
  NCSL_CHECK(rem == 0, FormatError, file.string(), ": truncated record ", full, " at byte offset ",
             full * kCifarRecord, " (", rem, " of ", kCifarRecord, " bytes present)");
  into.images.reserve(into.images.size() + full * kCifarPixels);
  for (std::size_t r = 0; r < full; ++r) {
    const std::size_t off = r * kCifarRecord;
    const int label = bytes[off];
    NCSL_CHECK(label < 10, FormatError, file.string(), ": label ", label, " out of range at byte offset ", off);
    into.labels.push_back(label);
    into.images.insert(into.images.end(), bytes.begin() + off + 1, bytes.begin() + off + kCifarRecord);
  }
}

DecodedImage read_image_file(const fs::path& file) {
  if (has_ext(file, {".png"})) return read_png(file);
  if (has_ext(file, {".ppm", ".pgm", ".pnm"})) return read_pnm(file);
  fail<FormatError>(file.string(), ": unsupported image extension");
}

void write_ppm(const fs::path& file, ImageView img) {
  NCSL_CHECK(img.channels == 3, InvalidArgument, "write_ppm needs 3 channels");
  std::ofstream out(file, std::ios::binary);
  NCSL_CHECK(out.good(), IoError, "cannot write ", file.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  const std::size_t hw = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) out.put(static_cast<char>(img.data[c * hw + p]));
  NCSL_CHECK(out.good(), IoError, "write failed for ", file.string());
}

void SyntheticSpec::validate() const {
  NCSL_CHECK(n >= 1, ConfigError, "synthetic n must be >= 1");
  NCSL_CHECK(classes >= 1, ConfigError, "synthetic classes must be >= 1");
  NCSL_CHECK(image_size >= 1, ConfigError, "synthetic image_size must be >= 1");
  NCSL_CHECK(channels == 1 || channels == 3, ConfigError, "synthetic channels must be 1 or 3");
  NCSL_CHECK(noise >= 0.0 && std::isfinite(noise), ConfigError, "synthetic noise must be >= 0");
}

std::string SyntheticSpec::to_text() const {
  std::ostringstream o;
  o << "n = " << n << "\nclasses = " << classes << "\nimage_size = " << image_size << "\nchannels = " << channels
    << "\nseed = " << seed << "\nnoise = " << noise << "\n";
  return o.str();
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec s;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    NCSL_CHECK(eq != std::string::npos, ConfigError, "synthetic spec line ", lineno, ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto val = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      if (key == "n") {
        s.n = std::stoll(val, &used);
      } else if (key == "classes") {
        s.classes = std::stoi(val, &used);
      } else if (key == "image_size") {
        s.image_size = std::stoi(val, &used);
      } else if (key == "channels") {
        s.channels = std::stoi(val, &used);
      } else if (key == "seed") {
        s.seed = std::stoull(val, &used);
      } else if (key == "noise") {
        s.noise = std::stod(val, &used);
      } else {
        fail<ConfigError>("synthetic spec line ", lineno, ": unknown key '", key, "'");
      }
      NCSL_CHECK(used == val.size(), ConfigError, "synthetic spec line ", lineno, ": bad value '", val, "'");
    } catch (const std::logic_error&) {
      fail<ConfigError>("synthetic spec line ", lineno, ": bad value '", val, "' for ", key);
    }
  }
  s.validate();
  return s;
}

// Each class owns a smooth prototype (two random gratings around a random
// colour). Images are the prototype plus brightness shift and pixel noise.
Dataset generate_synthetic(const SyntheticSpec& spec, Split split) {
  spec.validate();
  const int S = spec.image_size, C = spec.channels;
  const std::size_t plane = static_cast<std::size_t>(S) * S;
  std::vector<std::vector<double>> protos(spec.classes, std::vector<double>(plane * C));
  for (int k = 0; k < spec.classes; ++k) {
    Rng rng(derive_seed({spec.seed, 0x70726f746fULL, static_cast<std::uint64_t>(k)}));
    for (int c = 0; c < C; ++c) {
      const double base = rng.uniform(60.0, 196.0);
      double fx[2], fy[2], ph[2], amp[2];
      for (int g = 0; g < 2; ++g) {
        fx[g] = rng.uniform(-3.0, 3.0) * 2.0 * std::numbers::pi / S;
        fy[g] = rng.uniform(-3.0, 3.0) * 2.0 * std::numbers::pi / S;
        ph[g] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        amp[g] = rng.uniform(15.0, 45.0);
      }
      for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
          double v = base;
          for (int g = 0; g < 2; ++g) v += amp[g] * std::sin(fx[g] * x + fy[g] * y + ph[g]);
          protos[k][c * plane + y * S + x] = v;
        }
    }
  }
  Dataset ds;
  ds.name = "synthetic";
  ds.split = split;
  ds.num_classes = spec.classes;
  ds.channels = C;
  ds.height = ds.width = S;
  ds.images.resize(static_cast<std::size_t>(spec.n) * plane * C);
  ds.labels.resize(spec.n);
  Rng rng(derive_seed({spec.seed, 0x696d616765ULL, static_cast<std::uint64_t>(split)}));
  for (std::int64_t i = 0; i < spec.n; ++i) {
    const int k = static_cast<int>(rng.below(spec.classes));
    ds.labels[i] = k;
    const double shift = rng.uniform(-20.0, 20.0);
    auto* dst = ds.images.data() + i * plane * C;
    for (std::size_t p = 0; p < plane * C; ++p) {
      const double v = protos[k][p] + shift + spec.noise * rng.normal();
      dst[p] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return ds;
}

Dataset load_dataset(const fs::path& path, DatasetFormat format, Split split) {
  Dataset ds;
  switch (format) {
    case DatasetFormat::cifar10_binary:
      ds = load_cifar10(path, split);
      break;
    case DatasetFormat::image_folder:
      ds = load_image_folder(path, split);
      break;
    case DatasetFormat::synthetic_spec: {
      const auto bytes = read_all(path);
      ds = generate_synthetic(parse_synthetic_spec(std::string(bytes.begin(), bytes.end())), split);
      break;
    }
  }
  ds.validate();
  return ds;
}

std::int64_t subset_size(std::int64_t n, double fraction) {
  NCSL_CHECK(fraction > 0.0 && fraction <= 1.0, InvalidArgument, "subset fraction ", fraction,
             " outside (0, 1]");
  const double exact = fraction * static_cast<double>(n);
  const double nearest = std::round(exact);
  // Absorb representation error so that 0.05 * 50000 is 2500, not 2501.
  const double k = std::abs(exact - nearest) <= 1e-9 * std::max(1.0, exact) ? nearest : std::ceil(exact);
  const auto out = static_cast<std::int64_t>(k);
  NCSL_CHECK(out >= 1, InvalidArgument, "subset fraction ", fraction, " of ", n, " images selects nothing");
  return std::min(out, n);
}

Dataset make_subset(const Dataset& ds, double fraction, std::uint64_t seed, std::vector<std::int64_t>* indices_out) {
  const auto k = subset_size(ds.size(), fraction);
  std::vector<std::int64_t> idx(ds.size());
  for (std::int64_t i = 0; i < ds.size(); ++i) idx[i] = i;
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  Rng rng(derive_seed({seed, 0x737562736574ULL}));
  for (std::int64_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::int64_t>(rng.below(ds.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());

  Dataset out;
  out.name = ds.name;
  out.split = ds.split;
  out.num_classes = ds.num_classes;
  out.channels = ds.channels;
  out.height = ds.height;
  out.width = ds.width;
  out.images.reserve(k * ds.image_bytes());
  out.labels.reserve(k);
  for (auto i : idx) {
    const auto* p = ds.images.data() + i * ds.image_bytes();
    out.images.insert(out.images.end(), p, p + ds.image_bytes());
    out.labels.push_back(ds.labels[i]);
  }
  if (indices_out) *indices_out = std::move(idx);
  return out;
}

}  // namespace ncsl::data
