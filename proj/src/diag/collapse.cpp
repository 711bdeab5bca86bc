// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "diag/collapse.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "common/error.hpp"

namespace ncsl::diag {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<double> to_double(const ReprMatrix& m) { return {m.values.begin(), m.values.end()}; }

}  // namespace

Spectrum singular_spectrum(std::span<const double> values, std::int64_t rows, std::int64_t cols, bool center) {
  NCSL_CHECK(rows >= 1 && cols >= 1 && static_cast<std::int64_t>(values.size()) == rows * cols, ShapeError,
             "singular_spectrum: ", values.size(), " values for a ", rows, "x", cols, " matrix");
  NCSL_CHECK(!center || rows >= 2, InvalidArgument, "singular_spectrum: centring needs at least 2 rows");
  for (std::size_t i = 0; i < values.size(); ++i)
    NCSL_CHECK(std::isfinite(values[i]), NumericError, "singular_spectrum: non-finite entry at row ",
               static_cast<std::int64_t>(i) / cols, ", column ", static_cast<std::int64_t>(i) % cols);
  RowMatrix a = Eigen::Map<const RowMatrix>(values.data(), rows, cols);
  if (center) a.rowwise() -= a.colwise().mean();
  Eigen::VectorXd sv;
  if (rows > cols) {
    // Tall: reduce to the d x d triangular factor, which has the same
    // singular values, then take a one-sided Jacobi SVD of that.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
  } else {
    sv = Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(a)).singularValues();
  }
  Spectrum s;
  s.centered = center;
  s.sigma.assign(static_cast<std::size_t>(cols), 0.0);
  for (Eigen::Index i = 0; i < sv.size(); ++i) s.sigma[i] = sv[i];
  return s;
}

Spectrum singular_spectrum(const ReprMatrix& m, bool center) {
  m.validate();
  const auto v = to_double(m);
  return singular_spectrum(v, m.rows, m.cols, center);
}

std::vector<double> cumulative_explained_variance(const Spectrum& s) {
  NCSL_CHECK(!s.sigma.empty(), InvalidArgument, "cumulative_explained_variance: empty spectrum");
  const double top = s.sigma.front();
  NCSL_CHECK(top > 0.0, NumericError, "cumulative_explained_variance: all-zero spectrum");
  std::vector<double> kept(s.sigma.size());
  double total = 0.0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    NCSL_CHECK(s.sigma[i] >= 0.0 && (i == 0 || s.sigma[i] <= s.sigma[i - 1]), InvalidArgument,
               "spectrum must be non-negative and sorted descending");
    kept[i] = s.sigma[i] < kSigmaFloor * top ? 0.0 : s.sigma[i];
    total += kept[i];
  }
  std::vector<double> cev(kept.size());
  double run = 0.0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    run += kept[i];
    cev[i] = run / total;
  }
  return cev;
}

double collapse_auc(const Spectrum& s) {
  const auto cev = cumulative_explained_variance(s);
  double sum = 0.0;
  for (double c : cev) sum += c;
  return sum / static_cast<double>(cev.size());
}

std::vector<double> per_dim_std(std::span<const double> values, std::int64_t rows, std::int64_t cols) {
  NCSL_CHECK(rows >= 2, InvalidArgument, "per_dim_std needs at least 2 rows");
  NCSL_CHECK(static_cast<std::int64_t>(values.size()) == rows * cols, ShapeError, "per_dim_std: ", values.size(),
             " values for a ", rows, "x", cols, " matrix");
  std::vector<double> mean(cols, 0.0), out(cols, 0.0);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) mean[j] += values[i * cols + j];
  for (auto& m : mean) m /= static_cast<double>(rows);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) {
      const double d = values[i * cols + j] - mean[j];
      out[j] += d * d;
    }
  for (auto& o : out) o = std::sqrt(o / static_cast<double>(rows));
  return out;
}

std::vector<double> per_dim_std(const ReprMatrix& m) {
  m.validate();
  const auto v = to_double(m);
  return per_dim_std(v, m.rows, m.cols);
}

int effective_rank_at(const std::vector<double>& cev, double tau) {
  NCSL_CHECK(tau > 0.0 && tau <= 1.0, InvalidArgument, "effective_rank_at: tau ", tau, " outside (0, 1]");
  for (std::size_t j = 0; j < cev.size(); ++j)
    if (cev[j] >= tau) return static_cast<int>(j + 1);
  return static_cast<int>(cev.size());
}

CollapseReport diagnose(const ReprMatrix& m, bool center) {
  CollapseReport r;
  r.rows = m.rows;
  r.cols = m.cols;
  r.spectrum = singular_spectrum(m, center);
  r.cev = cumulative_explained_variance(r.spectrum);
  double sum = 0.0;
  for (double c : r.cev) sum += c;
  r.auc = sum / static_cast<double>(r.cev.size());
  r.per_dim_std = per_dim_std(m);
  r.effective_rank_90 = effective_rank_at(r.cev, 0.9);
  r.effective_rank_99 = effective_rank_at(r.cev, 0.99);
  if (m.rows < m.cols)
    r.warnings.push_back("N=" + std::to_string(m.rows) + " < d=" + std::to_string(m.cols) +
                         ": spectrum truncated at N, trailing singular values are zero-padded");
  return r;
}

nlohmann::json to_json(const CollapseReport& r) {
  return {{"rows", r.rows},
          {"cols", r.cols},
          {"centered", r.spectrum.centered},
          {"sigma", r.spectrum.sigma},
          {"cev", r.cev},
          {"auc", r.auc},
          {"per_dim_std", r.per_dim_std},
          {"effective_rank_90", r.effective_rank_90},
          {"effective_rank_99", r.effective_rank_99},
          {"warnings", r.warnings}};
}

std::string spectrum_csv(const CollapseReport& r) {
  std::ostringstream o;
  o << std::setprecision(17) << "j,sigma_j,cev_j\n";
  for (std::size_t j = 0; j < r.cev.size(); ++j) o << j + 1 << "," << r.spectrum.sigma[j] << "," << r.cev[j] << "\n";
  return o.str();
}

}  // namespace ncsl::diag
