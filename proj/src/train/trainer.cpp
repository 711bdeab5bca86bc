// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "common/fs.hpp"
#include "common/rng.hpp"
#include "data/augment.hpp"
#include "data/schedule.hpp"
#include "diff/optim.hpp"

namespace ncsl::train {

nlohmann::json to_json(const MetricsRecord& r) {
  return {{"step", r.step}, {"lr", r.lr}, {"train_loss", r.train_loss}, {"wall_time_s", r.wall_time_s}};
}

std::vector<MetricsRecord> read_metrics_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  NCSL_CHECK(in.good(), IoError, "cannot open metrics log '", path.string(), "'");
  std::vector<MetricsRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("step").get<std::int64_t>(), j.at("lr").get<double>(), j.at("train_loss").get<double>(),
                     j.at("wall_time_s").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      fail<FormatError>("malformed metrics line ", lineno, " in '", path.string(), "': ", e.what());
    }
  }
  return out;
}

double warmup_cosine_lr(std::int64_t step, std::int64_t warmup_steps, std::int64_t total_steps, double base_lr) {
  NCSL_CHECK(warmup_steps >= 0 && warmup_steps < total_steps, InvalidArgument, "warmup_steps ", warmup_steps,
             " must lie in [0, total_steps=", total_steps, ")");
  NCSL_CHECK(step >= 0 && step <= total_steps, InvalidArgument, "step ", step, " outside [0, ", total_steps, "]");
  if (step < warmup_steps) return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  return diff::cosine_lr(step - warmup_steps, total_steps - warmup_steps, base_lr);
}

double effective_base_lr(const app::RunConfig& cfg) {
  if (!cfg.optim.scale_lr_by_batch) return cfg.optim.base_lr;
  return cfg.optim.base_lr * cfg.ordering.batch_size / 256.0;
}

std::int64_t warmup_steps(const app::RunConfig& cfg, std::int64_t dataset_size) {
  const auto w = static_cast<std::int64_t>(
      std::llround(cfg.optim.warmup_epochs * static_cast<double>(dataset_size) / cfg.ordering.batch_size));
  NCSL_CHECK(w < cfg.ordering.total_steps, ConfigError, "optim.warmup_epochs=", cfg.optim.warmup_epochs, " gives ", w,
             " warmup steps, not below total_steps=", cfg.ordering.total_steps);
  return w;
}

std::uint64_t model_init_seed(const app::RunConfig& cfg) { return derive_seed({cfg.seed, kStreamInit}); }

data::Dataset load_training_set(const app::RunConfig& cfg) {
  auto ds = data::load_dataset(cfg.dataset.path, cfg.dataset.format, data::Split::train);
  if (cfg.dataset.subset_fraction < 1.0)
    ds = data::make_subset(ds, cfg.dataset.subset_fraction, derive_seed({cfg.seed, kStreamSubset}));
  check_dataset(ds, cfg, "training");
  return ds;
}

data::Dataset load_validation_set(const app::RunConfig& cfg) {
  const auto path = cfg.dataset.val_path.empty() ? cfg.dataset.path : cfg.dataset.val_path;
  auto ds = data::load_dataset(path, cfg.dataset.format, data::Split::val);
  check_dataset(ds, cfg, "validation");
  return ds;
}

void check_dataset(const data::Dataset& ds, const app::RunConfig& cfg, const char* role) {
  NCSL_CHECK(ds.size() > 0, ConfigError, role, " dataset is empty");
  NCSL_CHECK(ds.channels == cfg.model.encoder.in_channels, ConfigError, role, " dataset has ", ds.channels,
             " channels but model.encoder.in_channels=", cfg.model.encoder.in_channels);
}

namespace {

class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, bool append) : os_(path, append ? std::ios::app : std::ios::trunc) {
    NCSL_CHECK(os_.good(), IoError, "cannot open metrics log '", path.string(), "'");
  }
  void write(const MetricsRecord& r) {
    os_ << to_json(r).dump() << '\n';
    os_.flush();
    NCSL_CHECK(os_.good(), IoError, "metrics log write failed");
  }

 private:
  std::ofstream os_;
};

// Keeps records with step <= s and returns the wall time of the last one.
double truncate_metrics(const std::filesystem::path& path, std::int64_t s) {
  double wall = 0.0;
  std::string kept;
  if (std::filesystem::exists(path)) {
    for (const auto& r : read_metrics_log(path)) {
      if (r.step > s) break;
      kept += to_json(r).dump() + "\n";
      wall = r.wall_time_s;
    }
  }
  write_text_atomic(path, kept);
  return wall;
}

}  // namespace

PretrainResult pretrain(const app::RunConfig& cfg, const PretrainOptions& opts) {
  cfg.validate();
  const std::filesystem::path out_dir = cfg.output_dir;
  std::filesystem::create_directories(out_dir);
  const auto cfg_json = app::to_json(cfg);
  write_text_atomic(out_dir / "config.json", cfg_json.dump(2) + "\n");

  data::Dataset loaded;
  if (opts.dataset == nullptr) loaded = load_training_set(cfg);
  const data::Dataset& ds = opts.dataset != nullptr ? *opts.dataset : loaded;
  check_dataset(ds, cfg, "training");

  const auto T = cfg.ordering.total_steps;
  cfg.ordering.validate(ds.size());
  data::ChunkSchedule schedule(cfg.ordering, ds.size());
  const double base_lr = effective_base_lr(cfg);
  const auto W = warmup_steps(cfg, ds.size());
  const auto ckpt_every = cfg.effective_checkpoint_every();
  const auto aug_seed = derive_seed({cfg.seed, kStreamAugment});

  Model model(cfg.model, model_init_seed(cfg));
  diff::SgdMomentum<float> opt(model.online().trainable(), cfg.optim.momentum, cfg.optim.weight_decay);
  std::vector<diff::Parameter<float>*> ema_target, ema_online;
  if (model.has_target()) {
    ema_target = model.target().all();
    for (auto* p : ema_target) ema_online.push_back(&model.online().at(p->name));
  }

  PretrainResult result;
  result.metrics_log = out_dir / "metrics.jsonl";
  std::int64_t start = 0;
  double wall_offset = 0.0;
  if (opts.resume_from) {
    auto ck = read_checkpoint(*opts.resume_from);
    NCSL_CHECK(ck.meta.kind == "pretrain", ConfigError, "cannot resume from a '", ck.meta.kind, "' checkpoint");
    NCSL_CHECK(ck.meta.config == cfg_json, ConfigError, "checkpoint '", opts.resume_from->string(),
               "' was produced by a different config");
    restore_model(model, ck.entries);
    restore_optimizer(opt, ck.entries);
    start = ck.meta.step;
    NCSL_CHECK(start >= 0 && start <= T, FormatError, "checkpoint step ", start, " outside [0, ", T, "]");
    wall_offset = truncate_metrics(result.metrics_log, start);
    for (std::int64_t s = ckpt_every; s <= start; s += ckpt_every)
      if (std::filesystem::exists(checkpoint_path(out_dir, s))) result.checkpoints.push_back(checkpoint_path(out_dir, s));
  }
  MetricsWriter metrics(result.metrics_log, opts.resume_from.has_value());
  const CheckpointMeta base_meta{0, "pretrain", app::to_json(cfg.model), cfg_json};

  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t end = opts.stop_after >= 0 ? std::min(opts.stop_after, T) : T;
  if (opts.on_step) opts.on_step(start, model);
  double window_sum = 0.0;
  std::int64_t window_n = 0;
  for (std::int64_t s = start; s < end; ++s) {
    const auto idx = schedule.next_batch(s);
    const auto [x1, x2] = data::augment_batch(ds, idx, cfg.augmentation, aug_seed, s);
    const auto last_ckpt = [&] {
      return result.checkpoints.empty() ? std::string("none") : result.checkpoints.back().string();
    };
    double loss = 0.0, lr = 0.0;
    try {
      diff::Graph<float> g(true, true);
      const auto terms = models::siamese_loss(model, g, x1, x2);
      loss = g.value(terms.loss).item();
      NCSL_CHECK(std::isfinite(loss), NumericError, "non-finite loss value ", loss);
      opt.zero_grad();
      g.backward(terms.loss);
      lr = warmup_cosine_lr(s, W, T, base_lr);
      opt.step(lr);
    } catch (const NumericError& e) {
      const std::string what = e.what();
      const bool nonfinite = what.find("non-finite") != std::string::npos;
      fail<NumericError>(nonfinite ? "non-finite loss" : "numeric failure", " at step ", s, " (", what,
                         "); run aborted, last checkpoint: ", last_ckpt());
    }
    if (model.has_target())
      diff::ema_update<float>(std::span<diff::Parameter<float>* const>(ema_target),
                              std::span<diff::Parameter<float>* const>(ema_online), cfg.model.tau);

    const auto done = s + 1;
    window_sum += loss;
    ++window_n;
    const bool ckpt = done % ckpt_every == 0 || done == T;
    if (done % cfg.log_every == 0 || ckpt || done == end) {
      const double wall =
          wall_offset + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      metrics.write({done, lr, window_sum / static_cast<double>(window_n), wall});
      window_sum = 0.0;
      window_n = 0;
    }
    if (ckpt) {
      auto meta = base_meta;
      meta.step = done;
      const auto path = checkpoint_path(out_dir, done);
      save_checkpoint(path, model, &opt, meta);
      result.checkpoints.push_back(path);
    }
    if (opts.on_step) opts.on_step(done, model);
  }
  result.steps_done = end;
  if (!result.checkpoints.empty()) result.final_checkpoint = result.checkpoints.back();
  return result;
}

}  // namespace ncsl::train
