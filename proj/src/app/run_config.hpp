// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "data/augment.hpp"
#include "data/dataset.hpp"
#include "data/schedule.hpp"
#include "eval/probe.hpp"
#include "json.hpp"
#include "models/config.hpp"

namespace ncsl::app {

struct DatasetSpec {
  data::DatasetFormat format = data::DatasetFormat::synthetic_spec;
  std::string path;      // required
  std::string val_path;  // defaults to path
  double subset_fraction = 1.0;
};

struct OptimConfig {
  double base_lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double warmup_epochs = 0.0;
  // lr = base_lr * batch_size / 256
  bool scale_lr_by_batch = true;
};

struct EvalConfig {
  int batch_size = 256;
  std::vector<int> k_candidates = {1, 2, 5, 10, 20, 50, 100, 200};
  std::uint64_t eval_seed = 0;
  int resize_size = 0;  // 0 = crop size, i.e. no resize
  bool center = true;
  bool run_probe = false;
};

struct DistillConfig {
  models::EncoderConfig student;
  std::int64_t total_steps = 1000;
  int batch_size = 128;
  double normalizer_momentum = 0.9;
  bool normalize_teacher = true;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir;  // required
  DatasetSpec dataset;
  models::ModelConfig model;
  data::OrderingPlan ordering;
  data::AugmentationConfig augmentation;
  OptimConfig optim;
  // 0 = every total_steps / 10 (at least 1).
  std::int64_t checkpoint_every = 0;
  std::int64_t log_every = 10;
  EvalConfig eval;
  eval::ProbeConfig probe;
  DistillConfig distill;

  void validate() const;
  std::int64_t effective_checkpoint_every() const;
};

// Strict parse: unknown keys and type mismatches raise ConfigError naming the
// field path (e.g. "optim.learnig_rate"). Missing optional keys take defaults.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);
models::EncoderConfig parse_encoder_config(const nlohmann::json& j, const std::string& where);
nlohmann::json to_json(const models::EncoderConfig& e);
models::ModelConfig parse_model_config(const nlohmann::json& j, const std::string& where);
nlohmann::json to_json(const models::ModelConfig& m);

// NCSL_SEED, when set, replaces the config seed (and the ordering seed).
void apply_env_overrides(RunConfig& c);

}  // namespace ncsl::app
