// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "eval/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "common/error.hpp"

namespace ncsl::eval {

namespace {

const char* kHeader = "model_id,val_loss,auc,probe_acc,train_loss,knn_acc,method,arch,subset,seed,status";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return {};
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

double parse_num(const std::string& s, int line, const std::string& col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    NCSL_CHECK(used == s.size(), FormatError, "records line ", line, ": bad number '", s, "' in ", col);
    return v;
  } catch (const std::logic_error&) {
    fail<FormatError>("records line ", line, ": bad number '", s, "' in ", col);
  }
}

void check_field(const std::string& v, const char* what) {
  NCSL_CHECK(v.find_first_of(",\n\r") == std::string::npos, InvalidArgument, "record ", what, " '", v,
             "' contains a comma or newline");
}

// Average ranks (1-based), ties share the mean rank.
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mean_rank;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::string records_csv(const std::vector<ModelRecord>& records) {
  std::ostringstream o;
  o << kHeader << "\n";
  for (const auto& r : records) {
    for (const auto* s : {&r.model_id, &r.method, &r.arch, &r.subset, &r.seed, &r.status}) check_field(*s, "field");
    o << r.model_id << "," << fmt(r.val_loss) << "," << fmt(r.auc) << "," << fmt(r.probe_acc) << ","
      << fmt(r.train_loss) << "," << fmt(r.knn_acc) << "," << r.method << "," << r.arch << "," << r.subset << ","
      << r.seed << "," << r.status << "\n";
  }
  return o.str();
}

std::vector<ModelRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  NCSL_CHECK(static_cast<bool>(std::getline(in, line)), FormatError, "records CSV is empty");
  const auto header = split_csv(line);
  auto col = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  for (const char* req : {"model_id", "val_loss", "auc", "probe_acc"})
    NCSL_CHECK(col(req) >= 0, FormatError, "records CSV header lacks required column '", req, "'");
  std::vector<ModelRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    NCSL_CHECK(f.size() == header.size(), FormatError, "records line ", lineno, ": ", f.size(), " fields, header has ",
               header.size());
    auto get = [&](const char* name) -> std::string {
      const int c = col(name);
      return c < 0 ? std::string() : f[c];
    };
    auto opt = [&](const char* name) -> std::optional<double> {
      const auto s = get(name);
      if (s.empty()) return std::nullopt;
      return parse_num(s, lineno, name);
    };
    ModelRecord r;
    r.model_id = get("model_id");
    NCSL_CHECK(!r.model_id.empty(), FormatError, "records line ", lineno, ": empty model_id");
    r.status = get("status").empty() ? "ok" : get("status");
    const auto vl = get("val_loss"), au = get("auc");
    if (r.status == "ok") {
      r.val_loss = parse_num(vl, lineno, "val_loss");
      r.auc = parse_num(au, lineno, "auc");
    } else {
      r.val_loss = vl.empty() ? NAN : parse_num(vl, lineno, "val_loss");
      r.auc = au.empty() ? NAN : parse_num(au, lineno, "auc");
    }
    r.probe_acc = opt("probe_acc");
    r.train_loss = opt("train_loss");
    r.knn_acc = opt("knn_acc");
    r.method = get("method");
    r.arch = get("arch");
    r.subset = get("subset");
    r.seed = get("seed");
    out.push_back(std::move(r));
  }
  return out;
}

void write_records_csv(const std::filesystem::path& path, const std::vector<ModelRecord>& records) {
  const auto text = records_csv(records);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream o(path, std::ios::binary | std::ios::trunc);
  NCSL_CHECK(o.good(), IoError, "cannot write ", path.string());
  o << text;
  NCSL_CHECK(o.good(), IoError, "write failed for ", path.string());
}

std::vector<ModelRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  NCSL_CHECK(in.good(), IoError, "cannot open ", path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_records_csv(ss.str());
}

double LinearFit::predict(const std::vector<double>& x) const {
  NCSL_CHECK(x.size() == coef.size(), ShapeError, "predict: ", x.size(), " features for a ", coef.size(),
             "-feature fit");
  double y = intercept;
  for (std::size_t i = 0; i < x.size(); ++i) y += coef[i] * x[i];
  return y;
}

LinearFit fit_ols(const std::vector<std::vector<double>>& columns, const std::vector<double>& y,
                  std::vector<std::string> names) {
  const std::size_t n = y.size(), p = columns.size() + 1;
  NCSL_CHECK(names.size() == columns.size(), InvalidArgument, "fit_ols: ", names.size(), " names for ",
             columns.size(), " columns");
  NCSL_CHECK(n >= p, InvalidArgument, "fit_ols: ", n, " points cannot determine ", p, " coefficients");
  for (const auto& c : columns) NCSL_CHECK(c.size() == n, ShapeError, "fit_ols: column length mismatch");
  auto x = [&](std::size_t i, std::size_t j) { return j == 0 ? 1.0 : columns[j - 1][i]; };

  // Augmented normal equations [X^T X | X^T y].
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t c = 0; c < p; ++c)
      for (std::size_t i = 0; i < n; ++i) a[r][c] += x(i, r) * x(i, c);
    for (std::size_t i = 0; i < n; ++i) a[r][p] += x(i, r) * y[i];
  }
  // Rank test on the correlation structure: scale rows/cols by sqrt(diag).
  double max_diag = 0.0;
  for (std::size_t r = 0; r < p; ++r) max_diag = std::max(max_diag, a[r][r]);
  std::vector<double> scale(p);
  for (std::size_t r = 0; r < p; ++r) {
    NCSL_CHECK(a[r][r] > 0.0, NumericError, "fit_ols: feature '", r == 0 ? "intercept" : names[r - 1],
               "' is identically zero; rank-deficient design, try a single-feature fit");
    scale[r] = 1.0 / std::sqrt(a[r][r]);
  }
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t c = 0; c < p; ++c) a[r][c] *= scale[r] * scale[c];
    a[r][p] *= scale[r];
  }
  // Gaussian elimination with partial pivoting.
  for (std::size_t k = 0; k < p; ++k) {
    std::size_t piv = k;
    for (std::size_t r = k + 1; r < p; ++r)
      if (std::abs(a[r][k]) > std::abs(a[piv][k])) piv = r;
    NCSL_CHECK(std::abs(a[piv][k]) > 1e-12, NumericError,
               "fit_ols: rank-deficient design matrix (features collinear); try a single-feature fit");
    std::swap(a[k], a[piv]);
    for (std::size_t r = k + 1; r < p; ++r) {
      const double f = a[r][k] / a[k][k];
      for (std::size_t c = k; c <= p; ++c) a[r][c] -= f * a[k][c];
    }
  }
  std::vector<double> beta(p);
  for (std::size_t k = p; k-- > 0;) {
    double s = a[k][p];
    for (std::size_t c = k + 1; c < p; ++c) s -= a[k][c] * beta[c];
    beta[k] = s / a[k][k];
  }
  for (std::size_t k = 0; k < p; ++k) beta[k] *= scale[k];

  LinearFit f;
  f.features = std::move(names);
  f.intercept = beta[0];
  f.coef.assign(beta.begin() + 1, beta.end());
  f.n_points = static_cast<int>(n);
  std::vector<double> pred(n);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] = beta[0];
    for (std::size_t j = 1; j < p; ++j) pred[i] += beta[j] * x(i, j);
    ss_res += (y[i] - pred[i]) * (y[i] - pred[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  NCSL_CHECK(ss_tot > 0.0, NumericError, "fit_ols: target is constant, r2 undefined");
  f.r2 = 1.0 - ss_res / ss_tot;
  f.pearson_r = pearson(pred, y);
  f.spearman_rho = spearman(pred, y);
  return f;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  NCSL_CHECK(a.size() == b.size() && a.size() >= 2, InvalidArgument, "pearson needs two equal-length series of >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) { return pearson(ranks(a), ranks(b)); }

PredictorFit fit_accuracy_predictor(const std::vector<ModelRecord>& records, LossFeature loss, AccuracyTarget target) {
  std::vector<double> l, u, y;
  for (const auto& r : records) {
    if (r.status != "ok") continue;
    const auto& acc = target == AccuracyTarget::probe_acc ? r.probe_acc : r.knn_acc;
    if (!acc) continue;
    double lv;
    if (loss == LossFeature::val_loss) {
      lv = r.val_loss;
    } else {
      NCSL_CHECK(r.train_loss.has_value(), InvalidArgument, "record ", r.model_id, " has no train_loss");
      lv = *r.train_loss;
    }
    NCSL_CHECK(std::isfinite(lv) && std::isfinite(r.auc) && std::isfinite(*acc), NumericError, "record ",
               r.model_id, " has a non-finite value");
    l.push_back(lv);
    u.push_back(r.auc);
    y.push_back(*acc);
  }
  NCSL_CHECK(y.size() >= 3, InvalidArgument, "accuracy predictor needs >= 3 usable records, got ", y.size());
  PredictorFit f;
  f.loss_feature = loss == LossFeature::val_loss ? "val_loss" : "train_loss";
  f.target = target == AccuracyTarget::probe_acc ? "probe_acc" : "knn_acc";
  f.both = fit_ols({l, u}, y, {f.loss_feature, "auc"});
  f.auc_only = fit_ols({u}, y, {"auc"});
  f.loss_only = fit_ols({l}, y, {f.loss_feature});
  return f;
}

double predict_accuracy(const PredictorFit& fit, double loss, double auc) { return fit.both.predict({loss, auc}); }

std::vector<RankedCandidate> rank_candidates(const PredictorFit& fit, const std::vector<ModelRecord>& candidates,
                                             LossFeature loss) {
  std::vector<RankedCandidate> out;
  for (const auto& c : candidates) {
    double lv = c.val_loss;
    if (loss == LossFeature::train_loss) {
      NCSL_CHECK(c.train_loss.has_value(), InvalidArgument, "candidate ", c.model_id, " has no train_loss");
      lv = *c.train_loss;
    }
    out.push_back({c.model_id, predict_accuracy(fit, lv, c.auc), 0});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.predicted > b.predicted; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i + 1);
  return out;
}

nlohmann::json to_json(const LinearFit& f) {
  return {{"features", f.features}, {"intercept", f.intercept}, {"coef", f.coef},
          {"r2", f.r2},             {"pearson_r", f.pearson_r}, {"spearman_rho", f.spearman_rho},
          {"n_points", f.n_points}};
}

nlohmann::json to_json(const PredictorFit& f) {
  return {{"loss_feature", f.loss_feature},
          {"target", f.target},
          {"intercept", f.intercept()},
          {"coef_loss", f.coef_loss()},
          {"coef_auc", f.coef_auc()},
          {"r2", f.both.r2},
          {"pearson_r", f.both.pearson_r},
          {"spearman_rho", f.both.spearman_rho},
          {"n_points", f.both.n_points},
          {"both", to_json(f.both)},
          {"auc_only", to_json(f.auc_only)},
          {"loss_only", to_json(f.loss_only)}};
}

PredictorFit predictor_fit_from_json(const nlohmann::json& j) {
  auto lin = [](const nlohmann::json& o) {
    LinearFit f;
    f.features = o.at("features").get<std::vector<std::string>>();
    f.intercept = o.at("intercept").get<double>();
    f.coef = o.at("coef").get<std::vector<double>>();
    f.r2 = o.at("r2").get<double>();
    f.pearson_r = o.at("pearson_r").get<double>();
    f.spearman_rho = o.at("spearman_rho").get<double>();
    f.n_points = o.at("n_points").get<int>();
    return f;
  };
  try {
    PredictorFit f;
    f.loss_feature = j.at("loss_feature").get<std::string>();
    f.target = j.at("target").get<std::string>();
    f.both = lin(j.at("both"));
    f.auc_only = lin(j.at("auc_only"));
    f.loss_only = lin(j.at("loss_only"));
    NCSL_CHECK(f.both.coef.size() == 2, FormatError, "predictor fit must have two coefficients");
    return f;
  } catch (const nlohmann::json::exception& e) {
    fail<FormatError>("malformed predictor fit JSON: ", e.what());
  }
}

}  // namespace ncsl::eval
