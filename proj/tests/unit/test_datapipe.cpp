// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "data/augment.hpp"
#include "data/dataset.hpp"
#include "data/schedule.hpp"
#include "doctest.h"

using namespace ncsl;
using namespace ncsl::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("ncsl_test_datapipe_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream o(p, std::ios::binary);
  o.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// n CIFAR records; label r % 10, pixel bytes (r + j) & 255.
std::vector<std::uint8_t> cifar_records(int n, int label_offset = 0) {
  std::vector<std::uint8_t> b;
  for (int r = 0; r < n; ++r) {
    b.push_back(static_cast<std::uint8_t>((r + label_offset) % 10));
    for (int j = 0; j < 3072; ++j) b.push_back(static_cast<std::uint8_t>((r + j) & 255));
  }
  return b;
}

Dataset tiny_dataset(int n, int side) {
  SyntheticSpec s;
  s.n = n;
  s.image_size = side;
  s.classes = 3;
  return generate_synthetic(s, Split::train);
}

}  // namespace

TEST_CASE("cifar10 binary loader") {
  auto dir = scratch_dir("cifar");
  for (int i = 1; i <= 5; ++i) write_bytes(dir / ("data_batch_" + std::to_string(i) + ".bin"), cifar_records(7, i));
  write_bytes(dir / "test_batch.bin", cifar_records(4));
  auto tr = load_dataset(dir, DatasetFormat::cifar10_binary, Split::train);
  CHECK(tr.size() == 35);
  CHECK(tr.num_classes == 10);
  CHECK(tr.channels == 3);
  CHECK(tr.height == 32);
  // Record 2 of batch 3: label (2 + 3) % 10, first pixel byte 2, red plane first.
  CHECK(tr.labels[14 + 2] == 5);
  CHECK(tr.image(16).data[0] == 2);
  CHECK(tr.image(16).data[1024] == ((2 + 1024) & 255));
  auto va = load_dataset(dir, DatasetFormat::cifar10_binary, Split::val);
  CHECK(va.size() == 4);

  // Published constants: 5 x 10000 train records of 3073 bytes.
  CHECK(5 * 10000 * 3073 == 153650000);

  auto bad = dir / "trunc.bin";
  auto b = cifar_records(3);
  b.resize(b.size() - 100);
  write_bytes(bad, b);
  try {
    load_dataset(bad, DatasetFormat::cifar10_binary, Split::train);
    FAIL("expected a truncation error");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("byte offset 6146") != std::string::npos);
  }
  auto lbl = cifar_records(2);
  lbl[3073] = 10;
  write_bytes(dir / "label.bin", lbl);
  try {
    load_dataset(dir / "label.bin", DatasetFormat::cifar10_binary, Split::train);
    FAIL("expected a label error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset 3073") != std::string::npos);
  }
  CHECK_THROWS_AS(load_dataset(dir / "missing", DatasetFormat::cifar10_binary, Split::train), IoError);
  CHECK_THROWS_AS(dataset_format_from("cifar100"), ConfigError);
}

TEST_CASE("synthetic spec is deterministic and strict") {
  auto dir = scratch_dir("synth");
  std::ofstream(dir / "s.txt") << "# blobs\nn = 256\nclasses = 4\nseed = 0\nimage_size = 8\n";
  auto a = load_dataset(dir / "s.txt", DatasetFormat::synthetic_spec, Split::train);
  auto b = load_dataset(dir / "s.txt", DatasetFormat::synthetic_spec, Split::train);
  CHECK(a.size() == 256);
  CHECK(a.num_classes == 4);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  auto v = load_dataset(dir / "s.txt", DatasetFormat::synthetic_spec, Split::val);
  CHECK_FALSE(v.images == a.images);
  std::set<int> seen(a.labels.begin(), a.labels.end());
  CHECK(seen.size() == 4);

  CHECK_THROWS_AS(parse_synthetic_spec("n = 10\nsede = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_synthetic_spec("n = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_synthetic_spec("n = 0\n"), ConfigError);
  auto spec = parse_synthetic_spec("n=5\nnoise=3.5\n");
  CHECK(parse_synthetic_spec(spec.to_text()).noise == 3.5);
}

TEST_CASE("synthetic classes are separable by the class mean") {
  SyntheticSpec s;
  s.n = 400;
  s.image_size = 8;
  auto ds = generate_synthetic(s, Split::train);
  const auto D = ds.image_bytes();
  std::vector<std::vector<double>> mean(s.classes, std::vector<double>(D));
  std::vector<int> count(s.classes);
  for (std::int64_t i = 0; i < ds.size(); ++i) {
    ++count[ds.labels[i]];
    for (std::int64_t j = 0; j < D; ++j) mean[ds.labels[i]][j] += ds.image(i).data[j];
  }
  for (int k = 0; k < s.classes; ++k)
    for (auto& m : mean[k]) m /= count[k];
  auto val = generate_synthetic(s, Split::val);
  int correct = 0;
  for (std::int64_t i = 0; i < val.size(); ++i) {
    int best = 0;
    double bd = INFINITY;
    for (int k = 0; k < s.classes; ++k) {
      double d = 0;
      for (std::int64_t j = 0; j < D; ++j) d += std::pow(val.image(i).data[j] - mean[k][j], 2);
      if (d < bd) bd = d, best = k;
    }
    correct += best == val.labels[i];
  }
  CHECK(correct == val.size());
}

TEST_CASE("image folder loader reads png and ppm") {
  auto dir = scratch_dir("folder");
  fs::create_directories(dir / "train" / "cat");
  fs::create_directories(dir / "train" / "dog");
  const int W = 5, H = 4;
  std::vector<std::uint8_t> planar(3 * W * H);
  for (std::size_t i = 0; i < planar.size(); ++i) planar[i] = static_cast<std::uint8_t>(i * 7);
  write_ppm(dir / "train" / "dog" / "a.ppm", {planar.data(), 3, H, W});

  std::vector<std::uint8_t> interleaved(3 * W * H);
  for (int p = 0; p < W * H; ++p)
    for (int c = 0; c < 3; ++c) interleaved[p * 3 + c] = planar[c * W * H + p];
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = W;
  img.height = H;
  img.format = PNG_FORMAT_RGB;
  REQUIRE(png_image_write_to_file(&img, (dir / "train" / "cat" / "b.png").c_str(), 0, interleaved.data(), 0,
                                  nullptr) != 0);

  auto ds = load_dataset(dir, DatasetFormat::image_folder, Split::train);
  REQUIRE(ds.size() == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.labels == std::vector<int>{0, 1});
  CHECK(std::equal(planar.begin(), planar.end(), ds.image(0).data));
  CHECK(std::equal(planar.begin(), planar.end(), ds.image(1).data));

  std::ofstream(dir / "train" / "dog" / "c.ppm", std::ios::binary) << "P6\n5 4\n255\n" << std::string(10, 'x');
  CHECK_THROWS_AS(load_dataset(dir, DatasetFormat::image_folder, Split::train), FormatError);
}

TEST_CASE("make_subset") {
  auto ds = tiny_dataset(50, 4);
  std::vector<std::int64_t> idx;
  auto full = make_subset(ds, 1.0, 3, &idx);
  CHECK(full.images == ds.images);
  CHECK(idx.size() == 50);
  CHECK(subset_size(50000, 0.05) == 2500);
  CHECK(subset_size(50000, 0.02) == 1000);
  CHECK(subset_size(10, 0.01) == 1);
  CHECK(subset_size(7, 0.5) == 4);
  std::vector<std::int64_t> i1, i2, i3;
  auto a = make_subset(ds, 0.3, 9, &i1);
  auto b = make_subset(ds, 0.3, 9, &i2);
  make_subset(ds, 0.3, 10, &i3);
  CHECK(a.size() == 15);
  CHECK(i1 == i2);
  CHECK(a.images == b.images);
  CHECK(i1 != i3);
  CHECK(std::set<std::int64_t>(i1.begin(), i1.end()).size() == 15);
  for (std::size_t k = 0; k < i1.size(); ++k) CHECK(a.labels[k] == ds.labels[i1[k]]);
  CHECK_THROWS_AS(make_subset(ds, 0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(make_subset(ds, 1.5, 1), InvalidArgument);

  // Uniformity: every index chosen with frequency near k/N over many seeds.
  std::vector<int> hits(50);
  for (std::uint64_t s = 0; s < 2000; ++s) {
    std::vector<std::int64_t> ii;
    make_subset(ds, 0.2, s, &ii);
    for (auto i : ii) ++hits[i];
  }
  // Expected 400 per index, binomial sd ~17.9; 5 sd band.
  for (int h : hits) CHECK(std::abs(h - 400) < 90);
}

TEST_CASE("identity and forced-flip augmentation") {
  auto ds = tiny_dataset(3, 6);
  auto cfg = AugmentationConfig::identity();
  cfg.out_size = 6;
  Rng rng(1);
  auto [v1, v2] = augment_pair(ds.image(1), cfg, rng);
  CHECK(v1 == v2);
  const auto img = ds.image(1);
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < 36; ++p) {
      const float expect = (static_cast<float>(img.data[c * 36 + p]) / 255.0f - static_cast<float>(cfg.mean[c])) /
                           static_cast<float>(cfg.std[c]);
      CHECK(v1.data()[c * 36 + p] == doctest::Approx(expect).epsilon(1e-6));
    }
  cfg.hflip_prob = 1.0;
  auto [f1, f2] = augment_pair(ds.image(1), cfg, rng);
  CHECK(f1 == f2);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) CHECK(f1.data()[c * 36 + y * 6 + x] == v1.data()[c * 36 + y * 6 + (5 - x)]);
}

TEST_CASE("augmentation is reproducible and views differ") {
  auto ds = tiny_dataset(3, 40);
  AugmentationConfig cfg;
  cfg.out_size = 32;
  Rng r1(5), r2(5);
  auto a = augment_pair(ds.image(0), cfg, r1);
  auto b = augment_pair(ds.image(0), cfg, r2);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK_FALSE(a.first == a.second);
  CHECK(a.first.shape() == diff::Shape{3, 32, 32});
  for (float v : a.first.data()) CHECK(std::isfinite(v));

  // Blur path at >= 64 px.
  auto big = tiny_dataset(1, 72);
  cfg.out_size = 64;
  cfg.blur_prob = 1.0;
  Rng r3(7);
  auto blurred = augment(big.image(0), cfg, r3);
  CHECK(blurred.shape() == diff::Shape{3, 64, 64});

  cfg.out_size = 80;
  CHECK_THROWS_AS(augment(big.image(0), cfg, r3), InvalidArgument);
  cfg = AugmentationConfig{};
  cfg.hflip_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AugmentationConfig{};
  cfg.crop_scale = {0.9, 0.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("grayscale and jitter keep pixel values in range") {
  auto ds = tiny_dataset(1, 8);
  auto cfg = AugmentationConfig::identity();
  cfg.out_size = 8;
  cfg.grayscale_prob = 1.0;
  cfg.mean = {0.0};
  cfg.std = {1.0};
  Rng rng(3);
  auto g = augment(ds.image(0), cfg, rng);
  for (int p = 0; p < 64; ++p) {
    CHECK(g.data()[p] == g.data()[64 + p]);
    CHECK(g.data()[p] == g.data()[128 + p]);
  }
  cfg.grayscale_prob = 0.0;
  cfg.jitter_prob = 1.0;
  cfg.color_jitter = {0.9, 0.9, 0.9, 0.5};
  for (int t = 0; t < 50; ++t) {
    auto j = augment(ds.image(0), cfg, rng);
    for (float v : j.data()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  // Zero-strength jitter leaves pixels unchanged.
  cfg.color_jitter = {0.0, 0.0, 0.0, 0.0};
  auto id = augment(ds.image(0), cfg, rng);
  for (int p = 0; p < 64 * 3; ++p) CHECK(id.data()[p] == ds.image(0).data[p] / 255.0f);
}

TEST_CASE("eval transform") {
  auto ds = tiny_dataset(2, 32);
  const std::vector<double> m = {0.5, 0.5, 0.5}, s = {0.25, 0.25, 0.25};
  auto a = eval_transform(ds.image(0), 32, m, s);
  for (int i = 0; i < 3 * 1024; ++i)
    CHECK(a.data()[i] == doctest::Approx((ds.image(0).data[i] / 255.0 - 0.5) / 0.25).epsilon(1e-6));
  CHECK(eval_transform(ds.image(0), 32, m, s) == a);

  auto big = tiny_dataset(1, 40);
  auto b = eval_transform(big.image(0), 32, m, s, 36);
  CHECK(b.shape() == diff::Shape{3, 32, 32});
  // Oracle for one pixel: resize 40 -> 36 then crop offset 2; output pixel
  // (0,0) samples resized (2,2), i.e. source coordinate (2.5 * 40/36 - 0.5).
  const double src = 2.5 * 40.0 / 36.0 - 0.5;
  const int x0 = static_cast<int>(std::floor(src));
  const double f = src - x0;
  auto px = [&](int y, int x) { return static_cast<double>(big.image(0).data[y * 40 + x]); };
  const double top = px(x0, x0) + f * (px(x0, x0 + 1) - px(x0, x0));
  const double bot = px(x0 + 1, x0) + f * (px(x0 + 1, x0 + 1) - px(x0 + 1, x0));
  const double expect = ((top + f * (bot - top)) / 255.0 - 0.5) / 0.25;
  CHECK(b.data()[0] == doctest::Approx(expect).epsilon(1e-5));
  CHECK_THROWS_AS(eval_transform(big.image(0), 32, m, s, 30), InvalidArgument);
}

TEST_CASE("augment_batch uses per-item streams") {
  auto ds = tiny_dataset(10, 8);
  AugmentationConfig cfg;
  cfg.out_size = 8;
  auto [a1, a2] = augment_batch(ds, {3, 4, 5}, cfg, 11, 7);
  auto [b1, b2] = augment_batch(ds, {9, 4}, cfg, 11, 7);
  // Slot 1 of each batch sees image 4 with stream (11, 7, 1).
  const std::size_t item = 3 * 64;
  CHECK(std::equal(a1.data().begin() + item, a1.data().begin() + 2 * item, b1.data().begin() + item));
  auto rng = item_rng(11, 7, 1);
  auto [s1, s2] = augment_pair(ds.image(4), cfg, rng);
  CHECK(std::equal(s2.data().begin(), s2.data().end(), a2.data().begin() + item));
}

TEST_CASE("schedule examples") {
  OrderingPlan p;
  p.mode = OrderingMode::single_pass;
  p.total_steps = 1000;
  p.num_chunks = 10;
  p.batch_size = 20;
  p.seed = 4;
  ChunkSchedule sp(p, 200);
  for (int c = 0; c < 10; ++c) CHECK(sp.chunks()[c].size() == 20);
  auto chunk0 = std::set<std::int64_t>(sp.chunks()[0].begin(), sp.chunks()[0].end());
  for (int t = 0; t < 100; ++t)
    for (auto i : sp.next_batch(t)) CHECK(chunk0.count(i) == 1);
  auto chunk9 = std::set<std::int64_t>(sp.chunks()[9].begin(), sp.chunks()[9].end());
  for (auto i : sp.next_batch(999)) CHECK(chunk9.count(i) == 1);
  // One local epoch: a permutation of the chunk.
  auto b0 = sp.next_batch(0);
  CHECK(std::set<std::int64_t>(b0.begin(), b0.end()) == chunk0);

  p.mode = OrderingMode::cumulative;
  ChunkSchedule cu(p, 200);
  CHECK(cu.eligible_indices(999).size() == 200);

  p.mode = OrderingMode::hybrid;
  p.switch_chunk = 4;
  ChunkSchedule hy(p, 200);
  auto e399 = hy.eligible_indices(399);
  CHECK(e399 == hy.chunks()[3]);
  CHECK(hy.eligible_indices(400).size() == 200);

  // Wrap-around: eligible set of 10, B = 20.
  OrderingPlan w;
  w.mode = OrderingMode::single_pass;
  w.total_steps = 100;
  w.num_chunks = 10;
  w.batch_size = 20;
  ChunkSchedule ws(w, 100);
  std::map<std::int64_t, int> cnt;
  for (auto i : ws.next_batch(0)) ++cnt[i];
  CHECK(cnt.size() == 10);
  for (auto [i, c] : cnt) CHECK(c == 2);
}

TEST_CASE("schedule validation") {
  OrderingPlan p;
  p.mode = OrderingMode::single_pass;
  p.total_steps = 1001;
  p.num_chunks = 10;
  CHECK_THROWS_AS(ChunkSchedule(p, 200), ConfigError);
  p.total_steps = 1000;
  p.num_chunks = 300;
  p.total_steps = 3000;
  CHECK_THROWS_AS(ChunkSchedule(p, 200), ConfigError);
  p.num_chunks = 10;
  p.mode = OrderingMode::hybrid;
  p.switch_chunk = 10;
  CHECK_THROWS_AS(ChunkSchedule(p, 200), ConfigError);
  p.switch_chunk = 0;
  CHECK_THROWS_AS(ChunkSchedule(p, 200), ConfigError);
  p.mode = OrderingMode::multiple_pass;
  p.total_steps = 7;
  CHECK_NOTHROW(ChunkSchedule(p, 200));
  ChunkSchedule mp(p, 200);
  CHECK_THROWS_AS(mp.next_batch(7), InvalidArgument);
  CHECK_THROWS_AS(ordering_mode_from("online"), ConfigError);
}

TEST_CASE("multiple pass visits every image once per epoch") {
  OrderingPlan p;
  p.total_steps = 30;
  p.batch_size = 20;
  ChunkSchedule s(p, 100);
  std::map<std::int64_t, int> cnt;
  for (int t = 0; t < 5; ++t)
    for (auto i : s.next_batch(t)) ++cnt[i];
  CHECK(cnt.size() == 100);
  for (auto [i, c] : cnt) CHECK(c == 1);
  // Epoch boundary not aligned with batches: 100 / 30 leaves a remainder.
  p.batch_size = 30;
  ChunkSchedule s2(p, 100);
  cnt.clear();
  for (int t = 0; t < 10; ++t)
    for (auto i : s2.next_batch(t)) ++cnt[i];
  for (auto [i, c] : cnt) CHECK(c == 3);
  // Random access equals sequential access.
  ChunkSchedule s3(p, 100);
  CHECK(s3.next_batch(7) == s2.next_batch(7));
  CHECK(s3.next_batch(2) == s2.next_batch(2));
}
