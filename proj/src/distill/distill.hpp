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
#include "diff/tensor.hpp"
#include "models/modules.hpp"
#include "train/checkpoint.hpp"

namespace ncsl::distill {

// Per-dimension running mean and variance. The first update adopts the batch
// statistics; later ones blend them in with weight (1 - momentum).
class OnlineNormalizer {
 public:
  explicit OnlineNormalizer(int dim, double momentum = 0.9, double eps = 1e-5);

  int dim() const { return dim_; }
  double momentum() const { return momentum_; }
  double eps() const { return eps_; }
  bool initialized() const { return initialized_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& var() const { return var_; }

  // Updates the running statistics with a [B, d] batch (B >= 2, population
  // variance) and returns (batch - mean) / sqrt(var + eps).
  diff::Tensor<float> update(const diff::Tensor<float>& batch);
  // Normalises with the current statistics; requires a prior update.
  diff::Tensor<float> apply(const diff::Tensor<float>& batch) const;
  void restore(std::vector<double> mean, std::vector<double> var);

 private:
  int dim_;
  double momentum_;
  double eps_;
  bool initialized_ = false;
  std::vector<double> mean_;
  std::vector<double> var_;
};

// Student encoder plus an affine head onto the teacher's representation size.
struct Student {
  std::unique_ptr<train::Model> model;
  diff::ParameterSet<float> head_params;
  models::Linear<float> head;
  int teacher_dim = 0;

  // Trainable parameters: the encoder (projector and predictor are unused) and the head.
  std::vector<diff::Parameter<float>*> trainable();
  diff::NodeRef forward(diff::Graph<float>& g, diff::NodeRef x) const;
};

models::ModelConfig student_model_config(const app::RunConfig& cfg);

// Fresh student with He-uniform head. Throws ConfigError when the configured
// student cannot consume the teacher's inputs.
Student make_student(const app::RunConfig& cfg, const models::ModelConfig& teacher, std::uint64_t seed);
// Head set to the identity; requires student repr_dim == teacher repr_dim.
void set_identity_head(Student& s);
// Copies every online entry of a checkpoint into the student encoder.
void init_student_from(Student& s, const std::filesystem::path& checkpoint);

// Mean squared error between student head output and target, eval mode.
double distill_eval_loss(Student& s, const diff::Tensor<float>& x, const diff::Tensor<float>& target);

struct DistillOptions {
  std::optional<std::filesystem::path> student_init;
  bool identity_head = false;
  const data::Dataset* dataset = nullptr;
  std::function<void(std::int64_t, Student&, const OnlineNormalizer&)> on_step;
};

struct DistillResult {
  std::int64_t steps_done = 0;
  // Eval-mode loss of the initial student on the first batch, raw teacher targets.
  double initial_loss = 0.0;
  std::filesystem::path final_checkpoint;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path metrics_log;
};

// Trains the student for distill.total_steps on single augmented views;
// writes checkpoints, metrics.jsonl and config.json into output_dir/distill.
// The teacher stays in eval mode and must be bitwise unchanged afterwards.
DistillResult run_distill(const app::RunConfig& cfg, const std::filesystem::path& teacher_checkpoint,
                          const DistillOptions& opts = {});

std::filesystem::path distill_dir(const app::RunConfig& cfg);

}  // namespace ncsl::distill
