// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "diag/collapse.hpp"
#include "doctest.h"

using namespace ncsl;
using namespace ncsl::diag;

namespace {

// Independent oracle: cyclic Jacobi eigenvalues of the Gram matrix A^T A,
// sigma_i = sqrt(lambda_i).
std::vector<double> gram_sigma(const std::vector<double>& a, int n, int d, bool center) {
  std::vector<double> x = a;
  if (center) {
    for (int j = 0; j < d; ++j) {
      double m = 0;
      for (int i = 0; i < n; ++i) m += x[i * d + j];
      m /= n;
      for (int i = 0; i < n; ++i) x[i * d + j] -= m;
    }
  }
  std::vector<double> g(d * d, 0.0);
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) {
      long double s = 0;
      for (int i = 0; i < n; ++i) s += static_cast<long double>(x[i * d + p]) * x[i * d + q];
      g[p * d + q] = static_cast<double>(s);
    }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) off += g[p * d + q] * g[p * d + q];
    if (off < 1e-300) break;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) {
        const double apq = g[p * d + q];
        if (apq == 0.0) continue;
        const double theta = (g[q * d + q] - g[p * d + p]) / (2 * apq);
        const double t = (theta >= 0 ? 1 : -1) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < d; ++k) {
          const double gkp = g[k * d + p], gkq = g[k * d + q];
          g[k * d + p] = c * gkp - s * gkq;
          g[k * d + q] = s * gkp + c * gkq;
        }
        for (int k = 0; k < d; ++k) {
          const double gpk = g[p * d + k], gqk = g[q * d + k];
          g[p * d + k] = c * gpk - s * gqk;
          g[q * d + k] = s * gpk + c * gqk;
        }
      }
  }
  std::vector<double> sig(d);
  for (int i = 0; i < d; ++i) sig[i] = std::sqrt(std::max(0.0, g[i * d + i]));
  std::sort(sig.rbegin(), sig.rend());
  return sig;
}

std::vector<double> random_matrix(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> a(n * d);
  for (auto& v : a) v = rng.normal();
  return a;
}

Spectrum spec(std::vector<double> s) { return {std::move(s), false}; }

}  // namespace

TEST_CASE("spectrum examples") {
  std::vector<double> diag = {3, 0, 0, 4};
  auto s = singular_spectrum(diag, 2, 2, false);
  CHECK(s.sigma[0] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(s.sigma[1] == doctest::Approx(3.0).epsilon(1e-15));

  std::vector<double> rank1;
  const double v[] = {1.0, -2.0, 0.5, 3.0};
  for (int i = 0; i < 20; ++i)
    for (double x : v) rank1.push_back((i - 7.5) * x);
  auto r = singular_spectrum(rank1, 20, 4, false);
  for (int j = 1; j < 4; ++j) CHECK(r.sigma[j] <= 1e-8 * r.sigma[0]);
}

TEST_CASE("spectrum matches the Gram eigenvalue oracle") {
  const int shapes[][2] = {{50, 8}, {8, 50}, {200, 33}, {64, 64}, {300, 128}, {3, 10}};
  std::uint64_t seed = 0;
  for (auto [n, d] : shapes)
    for (bool center : {false, true}) {
      auto a = random_matrix(n, d, ++seed);
      auto s = singular_spectrum(a, n, d, center);
      auto o = gram_sigma(a, n, d, center);
      REQUIRE(s.sigma.size() == static_cast<std::size_t>(d));
      const int rank = std::min(n - (center ? 1 : 0), d);
      for (int j = 0; j < d; ++j) {
        if (j < rank) {
          CHECK(std::abs(s.sigma[j] - o[j]) <= 1e-8 * o[j]);
        } else {
          // Gram eigenvalues of a null direction are ~eps * sigma_1^2.
          CHECK(s.sigma[j] <= 1e-6 * s.sigma[0]);
        }
      }
    }
}

TEST_CASE("cev and auc examples") {
  CHECK(cumulative_explained_variance(spec({1, 0})) == std::vector<double>{1, 1});
  CHECK(cumulative_explained_variance(spec({3, 1})) == std::vector<double>{0.75, 1.0});
  CHECK(cumulative_explained_variance(spec({2, 2, 2, 2})) == std::vector<double>{0.25, 0.5, 0.75, 1.0});
  CHECK(collapse_auc(spec({1, 0, 0, 0, 0, 0, 0})) == 1.0);
  CHECK(collapse_auc(spec({5, 5, 5, 5})) == 0.625);
  CHECK(collapse_auc(spec({3, 1})) == 0.875);
  CHECK_THROWS_AS(collapse_auc(spec({0, 0})), NumericError);
  CHECK_THROWS_AS(collapse_auc(spec({1, 2})), InvalidArgument);
  // Noise floor: values under 1e-10 sigma_1 are dropped.
  CHECK(collapse_auc(spec({1, 1e-12})) == 1.0);
  CHECK(collapse_auc(spec({1, 1e-9})) < 1.0);
  CHECK(effective_rank_at({0.5, 0.91, 0.995, 1.0}, 0.9) == 2);
  CHECK(effective_rank_at({0.5, 0.91, 0.995, 1.0}, 0.99) == 3);
}

TEST_CASE("per-dimension std examples") {
  std::vector<double> m = {0, 5, 1, 2, 5, 2};  // 2 rows x 3 cols
  auto s = per_dim_std(m, 2, 3);
  CHECK(s[0] == 1.0);
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 0.5);
  CHECK_THROWS_AS(per_dim_std(std::vector<double>{1, 2}, 1, 2), InvalidArgument);
}

TEST_CASE("auc bounds, scale and rotation invariance") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const int n = 20 + static_cast<int>(rng.below(40)), d = 2 + static_cast<int>(rng.below(12));
    auto a = random_matrix(n, d, seed + 1000);
    auto s = singular_spectrum(a, n, d, false);
    const double auc = collapse_auc(s);
    CHECK(auc >= (d + 1.0) / (2.0 * d) - 1e-15);
    CHECK(auc <= 1.0);
    auto scaled = a;
    for (auto& v : scaled) v *= 37.5;
    CHECK(collapse_auc(singular_spectrum(scaled, n, d, false)) == doctest::Approx(auc).epsilon(1e-12));

    // Random orthogonal Q via Gram-Schmidt.
    auto q = random_matrix(d, d, seed + 2000);
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < j; ++k) {
        double dot = 0;
        for (int i = 0; i < d; ++i) dot += q[i * d + j] * q[i * d + k];
        for (int i = 0; i < d; ++i) q[i * d + j] -= dot * q[i * d + k];
      }
      double nn = 0;
      for (int i = 0; i < d; ++i) nn += q[i * d + j] * q[i * d + j];
      for (int i = 0; i < d; ++i) q[i * d + j] /= std::sqrt(nn);
    }
    std::vector<double> rot(n * d, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) rot[i * d + j] += a[i * d + k] * q[k * d + j];
    auto sr = singular_spectrum(rot, n, d, false);
    for (int j = 0; j < d; ++j) CHECK(std::abs(sr.sigma[j] - s.sigma[j]) <= 1e-8 * s.sigma[0]);
    CHECK(std::abs(collapse_auc(sr) - auc) <= 1e-8);
  }
}

TEST_CASE("truncation to lower rank increases auc") {
  // Build A = U diag(s) V^T with known spectrum; rank-r truncation keeps the
  // first r values.
  const int n = 40, d = 10;
  std::vector<double> sig = {10, 8, 7, 5, 4, 3, 2.5, 2, 1, 0.5};
  double prev = collapse_auc(spec(sig));
  for (int r = d - 1; r >= 1; --r) {
    auto t = sig;
    for (int j = r; j < d; ++j) t[j] = 0.0;
    const double auc = collapse_auc(spec(t));
    CHECK(auc > prev);
    prev = auc;
  }
  CHECK(prev == 1.0);
  // Same through an actual matrix with a duplicated column.
  auto a = random_matrix(n, d, 5);
  auto s_full = singular_spectrum(a, n, d, false);
  std::vector<double> dup = a;
  for (int i = 0; i < n; ++i) dup[i * d + 9] = dup[i * d + 8];  // rank drops by one
  auto s_dup = singular_spectrum(dup, n, d, false);
  CHECK(s_dup.sigma[9] <= 1e-10 * s_dup.sigma[0]);
  CHECK(collapse_auc(s_dup) > collapse_auc(s_full));
}

TEST_CASE("correlated columns: std equal, auc detects redundancy") {
  const int n = 100;
  Rng rng(1);
  std::vector<double> m(n * 2);
  for (int i = 0; i < n; ++i) m[i * 2] = m[i * 2 + 1] = rng.normal();
  auto s = per_dim_std(m, n, 2);
  CHECK(s[0] == s[1]);
  CHECK(s[0] > 0.0);
  CHECK(collapse_auc(singular_spectrum(m, n, 2, true)) == 1.0);
}

TEST_CASE("repr file round trip and errors") {
  auto dir = std::filesystem::temp_directory_path() / "ncsl_test_diag";
  std::filesystem::remove_all(dir);
  ReprMatrix m;
  m.rows = 3;
  m.cols = 2;
  m.values = {1.5f, -2.0f, 0.0f, 3.25f, 1e-7f, 8.0f};
  m.checkpoint_id = "ckpt-7";
  m.dataset_id = "synthetic/train";
  m.labels = {0, 2, 1};
  write_repr_file(dir / "a.repr", m);
  auto r = read_repr_file(dir / "a.repr");
  CHECK(r.rows == 3);
  CHECK(r.cols == 2);
  CHECK(r.values == m.values);
  CHECK(r.labels == m.labels);
  CHECK(r.checkpoint_id == "ckpt-7");
  CHECK(r.dataset_id == "synthetic/train");

  // Byte layout of the header.
  std::ifstream in(dir / "a.repr", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "REPR");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 3);
  CHECK(bytes[16] == 2);
  CHECK(bytes[24] == 0);

  bytes.resize(30);
  std::ofstream(dir / "t.repr", std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), 30);
  try {
    read_repr_file(dir / "t.repr");
    FAIL("expected truncation error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset 25") != std::string::npos);
  }
  m.values[3] = NAN;
  CHECK_THROWS_AS(write_repr_file(dir / "b.repr", m), NumericError);
}

TEST_CASE("diagnose report and csv") {
  ReprMatrix m;
  m.rows = 4;
  m.cols = 3;
  // Rank-1 rows: multiples of (1, 2, 2).
  for (int i = 1; i <= 4; ++i)
    for (float x : {1.0f, 2.0f, 2.0f}) m.values.push_back(i * x);
  auto rep = diagnose(m, false);
  CHECK(rep.auc == 1.0);
  CHECK(rep.effective_rank_90 == 1);
  CHECK(rep.spectrum.sigma[0] == doctest::Approx(std::sqrt(30.0) * 3.0).epsilon(1e-12));
  const auto csv = spectrum_csv(rep);
  CHECK(csv.rfind("j,sigma_j,cev_j\n", 0) == 0);
  CHECK(csv.find("\n2,") != std::string::npos);
  CHECK(csv.find(",1\n3,") != std::string::npos);
  auto j = to_json(rep);
  CHECK(j["auc"].get<double>() == 1.0);
  CHECK(j["centered"].get<bool>() == false);

  ReprMatrix wide;
  wide.rows = 2;
  wide.cols = 5;
  wide.values = {1, 2, 3, 4, 5, 2, 1, 0, 1, 2};
  auto w = diagnose(wide, true);
  CHECK(w.warnings.size() == 1);
  CHECK(w.spectrum.sigma.size() == 5);
}
