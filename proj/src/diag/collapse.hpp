// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diag/repr.hpp"
#include "json.hpp"

namespace ncsl::diag {

struct Spectrum {
  // Descending, length d (zero-padded past min(N, d)).
  std::vector<double> sigma;
  bool centered = true;
};

// Singular values of the N x d row-major matrix in float64, after optional
// column-mean centring.
Spectrum singular_spectrum(std::span<const double> values, std::int64_t rows, std::int64_t cols, bool center);
Spectrum singular_spectrum(const ReprMatrix& m, bool center);

// Values below kSigmaFloor * sigma_1 count as zero here and in collapse_auc.
inline constexpr double kSigmaFloor = 1e-10;

std::vector<double> cumulative_explained_variance(const Spectrum& s);
double collapse_auc(const Spectrum& s);
// Population standard deviation of each column.
std::vector<double> per_dim_std(std::span<const double> values, std::int64_t rows, std::int64_t cols);
std::vector<double> per_dim_std(const ReprMatrix& m);
// Smallest 1-based j with cev_j >= tau.
int effective_rank_at(const std::vector<double>& cev, double tau);

struct CollapseReport {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  Spectrum spectrum;
  std::vector<double> cev;
  double auc = 0.0;
  std::vector<double> per_dim_std;
  int effective_rank_90 = 0;
  int effective_rank_99 = 0;
  std::vector<std::string> warnings;
};

CollapseReport diagnose(const ReprMatrix& m, bool center);
nlohmann::json to_json(const CollapseReport& r);
// Header "j,sigma_j,cev_j", j 1-based.
std::string spectrum_csv(const CollapseReport& r);

}  // namespace ncsl::diag
