// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "app/run_config.hpp"
#include "eval/predictor.hpp"
#include "json.hpp"

namespace ncsl::app {

namespace fs = std::filesystem;

// Each command validates its inputs before writing anything and returns a
// JSON summary of what it produced.

nlohmann::json cmd_pretrain(const fs::path& config, const std::optional<fs::path>& resume = std::nullopt);

// split is "train" or "val".
nlohmann::json cmd_extract(const fs::path& config, const fs::path& checkpoint, const fs::path& out,
                           const std::string& split = "val");

// Writes <prefix>.collapse.json and <prefix>.spectrum.csv; the prefix
// defaults to the repr path without its extension.
nlohmann::json cmd_diagnose(const fs::path& repr, bool center, const std::optional<fs::path>& out_prefix = std::nullopt);

// Labels come from the files (one integer per line) when given, otherwise
// from the labels stored in each repr file.
nlohmann::json cmd_knn(const fs::path& train_repr, const fs::path& val_repr,
                       const std::optional<fs::path>& train_labels = std::nullopt,
                       const std::optional<fs::path>& val_labels = std::nullopt,
                       const std::vector<int>& k_candidates = {}, const std::optional<fs::path>& out = std::nullopt);

nlohmann::json cmd_probe(const fs::path& config, const fs::path& checkpoint,
                         const std::optional<fs::path>& out = std::nullopt);

// Without fit: fits on records that carry an accuracy (probe_acc, else
// knn_acc) against val_loss, and against train_loss when present, writing
// predictor_fit.json. With fit: applies it. Both write ranking.csv.
nlohmann::json cmd_predict(const fs::path& records, const std::optional<fs::path>& fit = std::nullopt,
                           const std::optional<fs::path>& out_dir = std::nullopt);

nlohmann::json cmd_distill(const fs::path& config, const fs::path& teacher);

// Post-training evaluation of one run: losses, representations, collapse
// report, k-NN and (optionally) the linear probe. Writes record.csv,
// eval.json, train.repr, val.repr, collapse.json and spectrum.csv.
eval::ModelRecord evaluate_run(const RunConfig& cfg, const std::optional<fs::path>& checkpoint = std::nullopt);
nlohmann::json cmd_evaluate(const fs::path& config, const std::optional<fs::path>& checkpoint = std::nullopt);

struct SweepRun {
  std::string name;
  RunConfig config;
};

struct SweepPlan {
  fs::path output_dir;
  std::vector<SweepRun> runs;
};

// {"output_dir": ..., "base": {RunConfig without output_dir},
//  "runs": [{"name": ..., "overrides": {...}}], "grid": {"dotted.path": [values]}}
// Runs and grid combine as a product; every resulting config is validated.
SweepPlan parse_sweep(const nlohmann::json& j);
SweepPlan load_sweep(const fs::path& path);

// Runs pretrain + evaluate for every run in child processes, at most jobs at a
// time, and collates records.csv. Failed runs appear with status "failed".
nlohmann::json cmd_sweep(const fs::path& sweep_config, int jobs);

// Methods x architectures tables (mean +- std over runs) as Markdown and a
// long-form CSV: <prefix>.md and <prefix>.csv.
nlohmann::json cmd_report(const fs::path& records, const std::optional<fs::path>& out_prefix = std::nullopt);
std::string report_markdown(const std::vector<eval::ModelRecord>& records);

std::string method_label(const RunConfig& cfg);
std::string arch_label(const models::EncoderConfig& e);

}  // namespace ncsl::app
