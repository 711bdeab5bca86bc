// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "distill/distill.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "common/fs.hpp"
#include "common/rng.hpp"
#include "data/augment.hpp"
#include "data/schedule.hpp"
#include "diff/optim.hpp"
#include "train/trainer.hpp"

namespace ncsl::distill {

using diff::Tensor;

OnlineNormalizer::OnlineNormalizer(int dim, double momentum, double eps)
    : dim_(dim), momentum_(momentum), eps_(eps), mean_(dim, 0.0), var_(dim, 1.0) {
  NCSL_CHECK(dim >= 1, InvalidArgument, "normalizer dim must be >= 1");
  NCSL_CHECK(momentum >= 0.0 && momentum < 1.0, InvalidArgument, "normalizer momentum ", momentum,
             " outside [0, 1)");
  NCSL_CHECK(eps > 0.0, InvalidArgument, "normalizer eps must be > 0");
}

Tensor<float> OnlineNormalizer::update(const Tensor<float>& batch) {
  NCSL_CHECK(batch.rank() == 2 && batch.dim(1) == dim_, ShapeError, "normalizer expects [B, ", dim_, "], got ",
             diff::shape_str(batch.shape()));
  const auto B = batch.dim(0);
  NCSL_CHECK(B >= 2, InvalidArgument, "normalizer update needs B >= 2, got ", B);
  for (int j = 0; j < dim_; ++j) {
    double m = 0.0;
    for (std::int64_t i = 0; i < B; ++i) m += batch.ptr()[i * dim_ + j];
    m /= static_cast<double>(B);
    double v = 0.0;
    for (std::int64_t i = 0; i < B; ++i) {
      const double d = batch.ptr()[i * dim_ + j] - m;
      v += d * d;
    }
    v /= static_cast<double>(B);
    if (initialized_) {
      mean_[j] = momentum_ * mean_[j] + (1.0 - momentum_) * m;
      var_[j] = momentum_ * var_[j] + (1.0 - momentum_) * v;
    } else {
      mean_[j] = m;
      var_[j] = v;
    }
  }
  initialized_ = true;
  return apply(batch);
}

Tensor<float> OnlineNormalizer::apply(const Tensor<float>& batch) const {
  NCSL_CHECK(initialized_, StateError, "normalizer has no statistics yet");
  NCSL_CHECK(batch.rank() == 2 && batch.dim(1) == dim_, ShapeError, "normalizer expects [B, ", dim_, "], got ",
             diff::shape_str(batch.shape()));
  Tensor<float> out(batch.shape());
  for (std::int64_t i = 0; i < batch.dim(0); ++i)
    for (int j = 0; j < dim_; ++j)
      out.ptr()[i * dim_ + j] =
          static_cast<float>((batch.ptr()[i * dim_ + j] - mean_[j]) / std::sqrt(var_[j] + eps_));
  return out;
}

void OnlineNormalizer::restore(std::vector<double> mean, std::vector<double> var) {
  NCSL_CHECK(static_cast<int>(mean.size()) == dim_ && static_cast<int>(var.size()) == dim_, ShapeError,
             "normalizer state must have ", dim_, " entries");
  for (double v : var) NCSL_CHECK(v >= 0.0, FormatError, "negative normalizer variance");
  mean_ = std::move(mean);
  var_ = std::move(var);
  initialized_ = true;
}

std::vector<diff::Parameter<float>*> Student::trainable() {
  std::vector<diff::Parameter<float>*> out;
  for (auto* p : model->online().trainable())
    if (p->name.rfind("encoder.", 0) == 0) out.push_back(p);
  for (auto* p : head_params.trainable()) out.push_back(p);
  return out;
}

diff::NodeRef Student::forward(diff::Graph<float>& g, diff::NodeRef x) const { return head(g, model->encode(g, x)); }

models::ModelConfig student_model_config(const app::RunConfig& cfg) {
  models::ModelConfig m;
  m.variant = models::Variant::simsiam;
  m.encoder = cfg.distill.student;
  m.head = models::HeadConfig::defaults_for(m.encoder.repr_dim);
  m.validate();
  return m;
}

Student make_student(const app::RunConfig& cfg, const models::ModelConfig& teacher, std::uint64_t seed) {
  const auto mc = student_model_config(cfg);
  NCSL_CHECK(mc.encoder.in_channels == teacher.encoder.in_channels && mc.encoder.image_size == teacher.encoder.image_size,
             ConfigError, "student input [", mc.encoder.in_channels, ", ", mc.encoder.image_size, "] differs from teacher [",
             teacher.encoder.in_channels, ", ", teacher.encoder.image_size, "]");
  Student s;
  s.model = std::make_unique<train::Model>(mc, derive_seed({seed, 0}));
  Rng rng(derive_seed({seed, 1}));
  s.teacher_dim = teacher.encoder.repr_dim;
  s.head = models::Linear<float>(s.head_params, "head", mc.encoder.repr_dim, s.teacher_dim, true, rng);
  return s;
}

void set_identity_head(Student& s) {
  auto& w = s.head.weight->value;
  NCSL_CHECK(w.dim(0) == w.dim(1), ConfigError, "identity head needs student repr_dim (", w.dim(1),
             ") == teacher repr_dim (", w.dim(0), ")");
  w.fill(0.0f);
  for (std::int64_t i = 0; i < w.dim(0); ++i) w.ptr()[i * w.dim(1) + i] = 1.0f;
  s.head.bias->value.fill(0.0f);
}

void init_student_from(Student& s, const std::filesystem::path& checkpoint) {
  const auto ck = train::read_checkpoint(checkpoint);
  for (auto* p : s.model->online().all()) {
    if (p->name.rfind("encoder.", 0) != 0) continue;
    auto t = diff::get_tensor<float>(ck.entries, "online/" + p->name);
    NCSL_CHECK(t.same_shape(p->value), ShapeError, "dimension mismatch for '", p->name, "': checkpoint ",
               diff::shape_str(t.shape()), ", student ", diff::shape_str(p->value.shape()));
    p->value = std::move(t);
  }
}

namespace {

diff::NodeRef mse(diff::Graph<float>& g, diff::NodeRef out, const Tensor<float>& target) {
  return g.mean(g.square(g.sub(out, g.input(target, "target"))));
}

Tensor<float> single_views(const data::Dataset& ds, const std::vector<std::int64_t>& idx,
                           const data::AugmentationConfig& aug, std::uint64_t seed, std::int64_t step) {
  const auto S = aug.out_size;
  const auto per = static_cast<std::int64_t>(ds.channels) * S * S;
  Tensor<float> x({static_cast<std::int64_t>(idx.size()), ds.channels, S, S});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto rng = data::item_rng(seed, step, static_cast<std::int64_t>(k));
    const auto v = data::augment(ds.image(idx[k]), aug, rng);
    std::copy(v.ptr(), v.ptr() + per, x.ptr() + static_cast<std::int64_t>(k) * per);
  }
  return x;
}

}  // namespace

double distill_eval_loss(Student& s, const Tensor<float>& x, const Tensor<float>& target) {
  diff::Graph<float> g(false, false);
  const auto out = s.forward(g, g.input(x));
  NCSL_CHECK(g.value(out).shape() == target.shape(), ShapeError, "student head output ",
             diff::shape_str(g.value(out).shape()), " vs teacher ", diff::shape_str(target.shape()));
  return g.value(mse(g, out, target)).item();
}

std::filesystem::path distill_dir(const app::RunConfig& cfg) { return std::filesystem::path(cfg.output_dir) / "distill"; }

DistillResult run_distill(const app::RunConfig& cfg, const std::filesystem::path& teacher_checkpoint,
                          const DistillOptions& opts) {
  cfg.validate();
  const auto dir = distill_dir(cfg);
  std::filesystem::create_directories(dir);
  const auto cfg_json = app::to_json(cfg);
  write_text_atomic(dir / "config.json", cfg_json.dump(2) + "\n");

  auto teacher = train::load_model(teacher_checkpoint);
  const auto teacher_sum = train::parameter_checksum(teacher->online());
  data::Dataset loaded;
  if (opts.dataset == nullptr) loaded = train::load_training_set(cfg);
  const data::Dataset& ds = opts.dataset != nullptr ? *opts.dataset : loaded;
  NCSL_CHECK(ds.channels == teacher->config().encoder.in_channels, ConfigError, "dataset has ", ds.channels,
             " channels, teacher expects ", teacher->config().encoder.in_channels);

  const auto& dc = cfg.distill;
  const auto seed = derive_seed({cfg.seed, train::kStreamDistill});
  Student student = make_student(cfg, teacher->config(), seed);
  if (opts.student_init) init_student_from(student, *opts.student_init);
  if (opts.identity_head) set_identity_head(student);
  NCSL_CHECK(student.head.weight->value.dim(0) == teacher->config().encoder.repr_dim, ConfigError,
             "dimension mismatch: student head outputs ", student.head.weight->value.dim(0), ", teacher repr_dim is ",
             teacher->config().encoder.repr_dim);

  data::OrderingPlan plan;
  plan.mode = data::OrderingMode::multiple_pass;
  plan.total_steps = dc.total_steps;
  plan.batch_size = dc.batch_size;
  plan.seed = seed;
  plan.validate(ds.size());
  data::ChunkSchedule schedule(plan, ds.size());
  const auto T = dc.total_steps;
  const double base_lr = cfg.optim.base_lr * (cfg.optim.scale_lr_by_batch ? dc.batch_size / 256.0 : 1.0);
  const auto W = static_cast<std::int64_t>(
      std::llround(cfg.optim.warmup_epochs * static_cast<double>(ds.size()) / dc.batch_size));
  NCSL_CHECK(W < T, ConfigError, "warmup of ", W, " steps is not below distill.total_steps=", T);
  const auto ckpt_every = cfg.checkpoint_every > 0 ? cfg.checkpoint_every : std::max<std::int64_t>(1, T / 10);
  const auto aug_seed = derive_seed({seed, train::kStreamAugment});

  diff::SgdMomentum<float> opt(student.trainable(), cfg.optim.momentum, cfg.optim.weight_decay);
  OnlineNormalizer norm(teacher->config().encoder.repr_dim, dc.normalizer_momentum);
  DistillResult result;
  result.metrics_log = dir / "metrics.jsonl";
  std::ofstream metrics(result.metrics_log, std::ios::trunc);
  NCSL_CHECK(metrics.good(), IoError, "cannot open '", result.metrics_log.string(), "'");

  const auto student_cfg_json = app::to_json(student.model->config());
  const auto t0 = std::chrono::steady_clock::now();
  if (opts.on_step) opts.on_step(0, student, norm);
  double window_sum = 0.0;
  std::int64_t window_n = 0;
  for (std::int64_t s = 0; s < T; ++s) {
    const auto x = single_views(ds, schedule.next_batch(s), cfg.augmentation, aug_seed, s);
    const auto h = teacher->represent(x);
    if (s == 0) result.initial_loss = distill_eval_loss(student, x, h);
    const auto target = dc.normalize_teacher ? norm.update(h) : h;
    double loss = 0.0, lr = 0.0;
    try {
      diff::Graph<float> g(true, true);
      const auto l = mse(g, student.forward(g, g.input(x, "x")), target);
      loss = g.value(l).item();
      NCSL_CHECK(std::isfinite(loss), NumericError, "non-finite loss value ", loss);
      opt.zero_grad();
      g.backward(l);
      lr = train::warmup_cosine_lr(s, W, T, base_lr);
      opt.step(lr);
    } catch (const NumericError& e) {
      const auto last = result.checkpoints.empty() ? std::string("none") : result.checkpoints.back().string();
      fail<NumericError>("distillation aborted at step ", s, " (", e.what(), "); last checkpoint: ", last);
    }
    const auto done = s + 1;
    window_sum += loss;
    ++window_n;
    const bool ckpt = done % ckpt_every == 0 || done == T;
    if (done % cfg.log_every == 0 || ckpt) {
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      metrics << train::to_json(train::MetricsRecord{done, lr, window_sum / static_cast<double>(window_n), wall}).dump()
              << '\n';
      metrics.flush();
      window_sum = 0.0;
      window_n = 0;
    }
    if (ckpt) {
      std::vector<diff::NamedTensor> extra = {{"head/weight", student.head.weight->value},
                                              {"head/bias", student.head.bias->value}};
      if (norm.initialized()) {
        extra.push_back({"normalizer/mean", Tensor<double>({norm.dim()}, norm.mean())});
        extra.push_back({"normalizer/var", Tensor<double>({norm.dim()}, norm.var())});
      }
      const auto path = train::checkpoint_path(dir, done);
      train::save_checkpoint(path, *student.model, nullptr, {done, "distill", student_cfg_json, cfg_json}, extra);
      result.checkpoints.push_back(path);
    }
    if (opts.on_step) opts.on_step(done, student, norm);
  }
  NCSL_CHECK(train::parameter_checksum(teacher->online()) == teacher_sum, StateError,
             "teacher parameters changed during distillation");
  result.steps_done = T;
  result.final_checkpoint = result.checkpoints.back();
  return result;
}

}  // namespace ncsl::distill
