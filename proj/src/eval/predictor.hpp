// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace ncsl::eval {

struct ModelRecord {
  std::string model_id;
  double val_loss = 0.0;
  double auc = 0.0;
  std::optional<double> probe_acc;
  std::optional<double> train_loss;
  std::optional<double> knn_acc;
  std::string method;
  std::string arch;
  std::string subset;
  std::string seed;
  std::string status = "ok";
};

// Header: model_id,val_loss,auc,probe_acc,train_loss,knn_acc,method,arch,subset,seed,status
// The first four columns are required on read; empty cells are missing values.
void write_records_csv(const std::filesystem::path& path, const std::vector<ModelRecord>& records);
std::vector<ModelRecord> read_records_csv(const std::filesystem::path& path);
std::string records_csv(const std::vector<ModelRecord>& records);
std::vector<ModelRecord> parse_records_csv(const std::string& text);

struct LinearFit {
  std::vector<std::string> features;
  double intercept = 0.0;
  std::vector<double> coef;
  double r2 = 0.0;
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  int n_points = 0;

  double predict(const std::vector<double>& x) const;
};

// OLS y ~ b0 + X b via the normal equations in float64. Throws NumericError
// when the design is rank deficient.
LinearFit fit_ols(const std::vector<std::vector<double>>& columns, const std::vector<double>& y,
                  std::vector<std::string> names);

double pearson(const std::vector<double>& a, const std::vector<double>& b);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

enum class LossFeature { val_loss, train_loss };
enum class AccuracyTarget { probe_acc, knn_acc };

struct PredictorFit {
  std::string loss_feature = "val_loss";
  std::string target = "probe_acc";
  LinearFit both;       // acc ~ loss + auc
  LinearFit auc_only;
  LinearFit loss_only;

  double intercept() const { return both.intercept; }
  double coef_loss() const { return both.coef.at(0); }
  double coef_auc() const { return both.coef.at(1); }
};

// Uses records with status "ok" and the target set. Needs at least 3.
PredictorFit fit_accuracy_predictor(const std::vector<ModelRecord>& records, LossFeature loss = LossFeature::val_loss,
                                    AccuracyTarget target = AccuracyTarget::probe_acc);

double predict_accuracy(const PredictorFit& fit, double loss, double auc);

struct RankedCandidate {
  std::string model_id;
  double predicted = 0.0;
  int rank = 0;  // 1 = best
};
// Descending predicted accuracy; equal predictions keep input order.
std::vector<RankedCandidate> rank_candidates(const PredictorFit& fit, const std::vector<ModelRecord>& candidates,
                                             LossFeature loss = LossFeature::val_loss);

nlohmann::json to_json(const LinearFit& f);
nlohmann::json to_json(const PredictorFit& f);
PredictorFit predictor_fit_from_json(const nlohmann::json& j);

}  // namespace ncsl::eval
