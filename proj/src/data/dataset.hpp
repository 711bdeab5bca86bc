// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ncsl::data {

enum class Split { train, val };
enum class DatasetFormat { cifar10_binary, image_folder, synthetic_spec };

const char* to_string(Split s);
const char* to_string(DatasetFormat f);
Split split_from(const std::string& s);
DatasetFormat dataset_format_from(const std::string& s);

// Read-only view of one planar CHW uint8 image.
struct ImageView {
  const std::uint8_t* data = nullptr;
  int channels = 0;
  int height = 0;
  int width = 0;
};

struct Dataset {
  std::string name;
  Split split = Split::train;
  int num_classes = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  // N images, each planar CHW.
  std::vector<std::uint8_t> images;
  std::vector<int> labels;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t image_bytes() const { return static_cast<std::int64_t>(channels) * height * width; }
  ImageView image(std::int64_t i) const;
  void validate() const;
};

// Parameters of a generated Gaussian-blob dataset.
struct SyntheticSpec {
  std::int64_t n = 256;
  int classes = 4;
  int image_size = 32;
  int channels = 3;
  std::uint64_t seed = 0;
  // Per-pixel Gaussian noise, in 0-255 units.
  double noise = 24.0;

  void validate() const;
  std::string to_text() const;
};

// key = value lines; '#' starts a comment. Unknown keys are errors.
SyntheticSpec parse_synthetic_spec(const std::string& text);
Dataset generate_synthetic(const SyntheticSpec& spec, Split split);

// cifar10-binary: path is a directory holding data_batch_{1..5}.bin and
// test_batch.bin, or a single .bin file. image-folder: path/<class>/<image>
// (PNG or binary PPM), using path/<split> when that directory exists.
// synthetic-spec: path is a spec text file.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, Split split);

// Uniform sample without replacement of ceil(fraction * N) images, kept in
// ascending index order. indices_out receives the chosen source indices.
Dataset make_subset(const Dataset& ds, double fraction, std::uint64_t seed,
                    std::vector<std::int64_t>* indices_out = nullptr);
std::int64_t subset_size(std::int64_t n, double fraction);

// Reads a CIFAR-10 binary batch file (3073-byte records).
void read_cifar10_batch(const std::filesystem::path& file, Dataset& into);

// PNG (via libpng) or binary PPM/PGM, returned as planar CHW with 3 channels
// for colour input and 1 for greyscale.
struct DecodedImage {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> planar;
};
DecodedImage read_image_file(const std::filesystem::path& file);
void write_ppm(const std::filesystem::path& file, ImageView img);

}  // namespace ncsl::data
