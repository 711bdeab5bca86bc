// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "app/run_config.hpp"
#include "data/dataset.hpp"
#include "json.hpp"
#include "train/checkpoint.hpp"

namespace ncsl::train {

// Seed-stream tags mixed with the run seed via derive_seed.
enum Stream : std::uint64_t {
  kStreamInit = 1,
  kStreamAugment = 2,
  kStreamSubset = 3,
  kStreamProbe = 4,
  kStreamDistill = 5,
};

struct MetricsRecord {
  std::int64_t step = 0;  // optimizer steps completed
  double lr = 0.0;
  double train_loss = 0.0;  // mean over the steps since the previous record
  double wall_time_s = 0.0;
};

nlohmann::json to_json(const MetricsRecord& r);
std::vector<MetricsRecord> read_metrics_log(const std::filesystem::path& path);

// Linear ramp 0 -> base_lr over warmup_steps, then cosine decay over the rest.
double warmup_cosine_lr(std::int64_t step, std::int64_t warmup_steps, std::int64_t total_steps, double base_lr);

// base_lr, linearly scaled by batch_size / 256 when configured.
double effective_base_lr(const app::RunConfig& cfg);
std::int64_t warmup_steps(const app::RunConfig& cfg, std::int64_t dataset_size);
std::uint64_t model_init_seed(const app::RunConfig& cfg);

// Training split (subsampled per dataset.subset_fraction) and held-out split.
data::Dataset load_training_set(const app::RunConfig& cfg);
data::Dataset load_validation_set(const app::RunConfig& cfg);
// Channel and class-count checks against the model configuration.
void check_dataset(const data::Dataset& ds, const app::RunConfig& cfg, const char* role);

struct PretrainOptions {
  // Continue from this checkpoint; its config must equal the run config.
  std::optional<std::filesystem::path> resume_from;
  // Stop once this many steps are done (simulated interruption); -1 runs to T.
  std::int64_t stop_after = -1;
  // Called with the step count at start and after every step (post EMA).
  std::function<void(std::int64_t, Model&)> on_step;
  // Dataset override, mainly for tests; replaces load_training_set.
  const data::Dataset* dataset = nullptr;
};

struct PretrainResult {
  std::int64_t steps_done = 0;
  std::filesystem::path final_checkpoint;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path metrics_log;
};

// Runs exactly T optimizer steps (or stop_after). Writes config.json,
// metrics.jsonl and checkpoints into cfg.output_dir.
PretrainResult pretrain(const app::RunConfig& cfg, const PretrainOptions& opts = {});

}  // namespace ncsl::train
