// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "app/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>

#include "common/error.hpp"

namespace ncsl::app {

using nlohmann::json;

namespace {

// Strict view of one JSON object: every key must be consumed by finish().
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    NCSL_CHECK(j_.is_object(), ConfigError, where(), " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    out = convert<T>(j_.at(key), field(key));
  }

  template <class T>
  void require(const char* key, T& out) {
    NCSL_CHECK(j_.contains(key), ConfigError, "missing required key '", field(key), "'");
    get(key, out);
  }

  // Child object, or an empty object when absent.
  Obj child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return Obj(empty(), field(key));
    return Obj(j_.at(key), field(key));
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      NCSL_CHECK(seen_.count(it.key()) == 1, ConfigError, "unknown config key '", field(it.key().c_str()), "'");
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  std::string where() const { return path_.empty() ? std::string("config") : "'" + path_ + "'"; }

  template <class T>
  static T convert(const json& v, const std::string& f) {
    if constexpr (std::is_same_v<T, bool>) {
      NCSL_CHECK(v.is_boolean(), ConfigError, "'", f, "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      NCSL_CHECK(v.is_number_integer(), ConfigError, "'", f, "' must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        NCSL_CHECK(v.is_number_unsigned() || v.get<std::int64_t>() >= 0, ConfigError, "'", f, "' must be >= 0");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      NCSL_CHECK(v.is_number(), ConfigError, "'", f, "' must be a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      NCSL_CHECK(v.is_string(), ConfigError, "'", f, "' must be a string");
      return v.get<std::string>();
    } else {
      // vectors / arrays of numbers
      NCSL_CHECK(v.is_array(), ConfigError, "'", f, "' must be an array");
      T out{};
      if constexpr (requires { out.resize(0); }) out.resize(v.size());
      NCSL_CHECK(out.size() == v.size(), ConfigError, "'", f, "' must have ", out.size(), " entries");
      for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = convert<typename T::value_type>(v[i], f + "[" + std::to_string(i) + "]");
      return out;
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class E, class F>
void get_enum(Obj& o, const char* key, E& out, F from) {
  std::string s;
  o.get(key, s);
  if (s.empty()) return;
  try {
    out = from(s);
  } catch (const ConfigError& e) {
    fail<ConfigError>("'", o.field(key), "': ", e.what());
  }
}

void rethrow_with(const std::string& field, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    fail<ConfigError>("invalid '", field, "': ", e.what());
  }
}

}  // namespace

models::EncoderConfig parse_encoder_config(const json& j, const std::string& where) {
  Obj o(j, where);
  models::EncoderConfig e;
  get_enum(o, "kind", e.kind, models::encoder_kind_from);
  o.get("depth", e.depth);
  o.get("width_multiplier", e.width_multiplier);
  o.get("repr_dim", e.repr_dim);
  get_enum(o, "block", e.block, models::block_kind_from);
  o.get("in_channels", e.in_channels);
  o.get("image_size", e.image_size);
  o.finish();
  rethrow_with(where, [&] { e.validate(); });
  return e;
}

json to_json(const models::EncoderConfig& e) {
  return {{"kind", models::to_string(e.kind)},   {"depth", e.depth},
          {"width_multiplier", e.width_multiplier}, {"repr_dim", e.repr_dim},
          {"block", models::to_string(e.block)}, {"in_channels", e.in_channels},
          {"image_size", e.image_size}};
}

models::ModelConfig parse_model_config(const json& j, const std::string& where) {
  Obj m(j, where);
  models::ModelConfig c;
  get_enum(m, "variant", c.variant, models::variant_from);
  m.get("tau", c.tau);
  m.get("queue_capacity", c.queue_capacity);
  if (m.has("encoder")) c.encoder = parse_encoder_config(m.raw("encoder"), where + ".encoder");
  c.head = models::HeadConfig::defaults_for(c.encoder.repr_dim);
  auto h = m.child("head");
  h.get("projector", c.head.projector);
  h.get("predictor_bottleneck", c.head.predictor_bottleneck);
  h.finish();
  m.finish();
  rethrow_with(where, [&] { c.validate(); });
  return c;
}

json to_json(const models::ModelConfig& m) {
  return {{"variant", models::to_string(m.variant)},
          {"tau", m.tau},
          {"queue_capacity", m.queue_capacity},
          {"encoder", to_json(m.encoder)},
          {"head", {{"projector", m.head.projector}, {"predictor_bottleneck", m.head.predictor_bottleneck}}}};
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  Obj root(j, "");
  root.get("seed", c.seed);
  root.require("output_dir", c.output_dir);

  {
    auto d = root.child("dataset");
    NCSL_CHECK(root.has("dataset"), ConfigError, "missing required key 'dataset'");
    get_enum(d, "format", c.dataset.format, data::dataset_format_from);
    d.require("path", c.dataset.path);
    d.get("val_path", c.dataset.val_path);
    d.get("subset_fraction", c.dataset.subset_fraction);
    d.finish();
  }
  if (root.has("model")) c.model = parse_model_config(root.raw("model"), "model");
  {
    auto o = root.child("ordering");
    get_enum(o, "mode", c.ordering.mode, data::ordering_mode_from);
    o.get("total_steps", c.ordering.total_steps);
    o.get("batch_size", c.ordering.batch_size);
    o.get("num_chunks", c.ordering.num_chunks);
    o.get("switch_chunk", c.ordering.switch_chunk);
    o.finish();
  }
  {
    auto a = root.child("augmentation");
    auto& g = c.augmentation;
    a.get("out_size", g.out_size);
    a.get("crop_scale", g.crop_scale);
    a.get("crop_ratio", g.crop_ratio);
    a.get("hflip_prob", g.hflip_prob);
    a.get("color_jitter", g.color_jitter);
    a.get("jitter_prob", g.jitter_prob);
    a.get("grayscale_prob", g.grayscale_prob);
    a.get("blur_prob", g.blur_prob);
    a.get("blur_min_size", g.blur_min_size);
    a.get("mean", g.mean);
    a.get("std", g.std);
    a.finish();
  }
  {
    auto o = root.child("optim");
    o.get("base_lr", c.optim.base_lr);
    o.get("momentum", c.optim.momentum);
    o.get("weight_decay", c.optim.weight_decay);
    o.get("warmup_epochs", c.optim.warmup_epochs);
    o.get("scale_lr_by_batch", c.optim.scale_lr_by_batch);
    o.finish();
  }
  root.get("checkpoint_every", c.checkpoint_every);
  root.get("log_every", c.log_every);
  {
    auto e = root.child("eval");
    e.get("batch_size", c.eval.batch_size);
    e.get("k_candidates", c.eval.k_candidates);
    e.get("eval_seed", c.eval.eval_seed);
    e.get("resize_size", c.eval.resize_size);
    e.get("center", c.eval.center);
    e.get("run_probe", c.eval.run_probe);
    e.finish();
  }
  {
    auto p = root.child("probe");
    p.get("epochs", c.probe.epochs);
    p.get("batch_size", c.probe.batch_size);
    p.get("base_lr", c.probe.base_lr);
    p.get("momentum", c.probe.momentum);
    p.get("weight_decay", c.probe.weight_decay);
    p.finish();
  }
  {
    auto d = root.child("distill");
    c.distill.student = d.has("student") ? parse_encoder_config(d.raw("student"), "distill.student") : c.model.encoder;
    d.get("total_steps", c.distill.total_steps);
    d.get("batch_size", c.distill.batch_size);
    d.get("normalizer_momentum", c.distill.normalizer_momentum);
    d.get("normalize_teacher", c.distill.normalize_teacher);
    d.finish();
  }
  root.finish();
  c.ordering.seed = c.seed;
  c.probe.seed = c.seed;
  c.validate();
  return c;
}

void RunConfig::validate() const {
  NCSL_CHECK(!output_dir.empty(), ConfigError, "'output_dir' must be non-empty");
  NCSL_CHECK(!dataset.path.empty(), ConfigError, "'dataset.path' must be non-empty");
  NCSL_CHECK(dataset.subset_fraction > 0.0 && dataset.subset_fraction <= 1.0, ConfigError,
             "'dataset.subset_fraction' must lie in (0, 1]");
  rethrow_with("model", [&] { model.validate(); });
  rethrow_with("ordering", [&] { ordering.validate(); });
  rethrow_with("augmentation", [&] { augmentation.validate(); });
  NCSL_CHECK(augmentation.out_size == model.encoder.image_size, ConfigError, "'augmentation.out_size' (",
             augmentation.out_size, ") must equal 'model.encoder.image_size' (", model.encoder.image_size, ")");
  NCSL_CHECK(augmentation.mean.size() == 1 || static_cast<int>(augmentation.mean.size()) == model.encoder.in_channels,
             ConfigError, "'augmentation.mean' needs 1 or in_channels entries");
  NCSL_CHECK(optim.base_lr > 0.0, ConfigError, "'optim.base_lr' must be > 0");
  NCSL_CHECK(optim.momentum >= 0.0 && optim.momentum < 1.0, ConfigError, "'optim.momentum' must lie in [0, 1)");
  NCSL_CHECK(optim.weight_decay >= 0.0, ConfigError, "'optim.weight_decay' must be >= 0");
  NCSL_CHECK(optim.warmup_epochs >= 0.0, ConfigError, "'optim.warmup_epochs' must be >= 0");
  NCSL_CHECK(checkpoint_every >= 0, ConfigError, "'checkpoint_every' must be >= 0");
  NCSL_CHECK(log_every >= 1, ConfigError, "'log_every' must be >= 1");
  NCSL_CHECK(eval.batch_size >= 1, ConfigError, "'eval.batch_size' must be >= 1");
  NCSL_CHECK(!eval.k_candidates.empty(), ConfigError, "'eval.k_candidates' must be non-empty");
  for (int k : eval.k_candidates) NCSL_CHECK(k >= 1, ConfigError, "'eval.k_candidates' entries must be >= 1");
  NCSL_CHECK(eval.resize_size == 0 || eval.resize_size >= augmentation.out_size, ConfigError,
             "'eval.resize_size' must be 0 or >= augmentation.out_size");
  rethrow_with("probe", [&] { probe.validate(); });
  NCSL_CHECK(distill.total_steps >= 1, ConfigError, "'distill.total_steps' must be >= 1");
  NCSL_CHECK(distill.batch_size >= 2, ConfigError, "'distill.batch_size' must be >= 2");
  NCSL_CHECK(distill.normalizer_momentum >= 0.0 && distill.normalizer_momentum < 1.0, ConfigError,
             "'distill.normalizer_momentum' must lie in [0, 1)");
  NCSL_CHECK(distill.student.image_size == model.encoder.image_size &&
                 distill.student.in_channels == model.encoder.in_channels,
             ConfigError, "'distill.student' input shape must match 'model.encoder'");
}

std::int64_t RunConfig::effective_checkpoint_every() const {
  if (checkpoint_every > 0) return checkpoint_every;
  return std::max<std::int64_t>(1, ordering.total_steps / 10);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  NCSL_CHECK(in.good(), IoError, "cannot open config '", path.string(), "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail<ConfigError>("config '", path.string(), "' is not valid JSON: ", e.what());
  }
  auto c = parse_run_config(j);
  apply_env_overrides(c);
  return c;
}

json to_json(const RunConfig& c) {
  const auto& g = c.augmentation;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"dataset",
       {{"format", data::to_string(c.dataset.format)},
        {"path", c.dataset.path},
        {"val_path", c.dataset.val_path},
        {"subset_fraction", c.dataset.subset_fraction}}},
      {"model", to_json(c.model)},
      {"ordering",
       {{"mode", data::to_string(c.ordering.mode)},
        {"total_steps", c.ordering.total_steps},
        {"batch_size", c.ordering.batch_size},
        {"num_chunks", c.ordering.num_chunks},
        {"switch_chunk", c.ordering.switch_chunk}}},
      {"augmentation",
       {{"out_size", g.out_size},
        {"crop_scale", g.crop_scale},
        {"crop_ratio", g.crop_ratio},
        {"hflip_prob", g.hflip_prob},
        {"color_jitter", g.color_jitter},
        {"jitter_prob", g.jitter_prob},
        {"grayscale_prob", g.grayscale_prob},
        {"blur_prob", g.blur_prob},
        {"blur_min_size", g.blur_min_size},
        {"mean", g.mean},
        {"std", g.std}}},
      {"optim",
       {{"base_lr", c.optim.base_lr},
        {"momentum", c.optim.momentum},
        {"weight_decay", c.optim.weight_decay},
        {"warmup_epochs", c.optim.warmup_epochs},
        {"scale_lr_by_batch", c.optim.scale_lr_by_batch}}},
      {"checkpoint_every", c.checkpoint_every},
      {"log_every", c.log_every},
      {"eval",
       {{"batch_size", c.eval.batch_size},
        {"k_candidates", c.eval.k_candidates},
        {"eval_seed", c.eval.eval_seed},
        {"resize_size", c.eval.resize_size},
        {"center", c.eval.center},
        {"run_probe", c.eval.run_probe}}},
      {"probe",
       {{"epochs", c.probe.epochs},
        {"batch_size", c.probe.batch_size},
        {"base_lr", c.probe.base_lr},
        {"momentum", c.probe.momentum},
        {"weight_decay", c.probe.weight_decay}}},
      {"distill",
       {{"student", to_json(c.distill.student)},
        {"total_steps", c.distill.total_steps},
        {"batch_size", c.distill.batch_size},
        {"normalizer_momentum", c.distill.normalizer_momentum},
        {"normalize_teacher", c.distill.normalize_teacher}}},
  };
}

void apply_env_overrides(RunConfig& c) {
  const char* s = std::getenv("NCSL_SEED");
  if (s == nullptr || *s == '\0') return;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    NCSL_CHECK(used == std::string(s).size(), ConfigError, "NCSL_SEED='", s, "' is not an unsigned integer");
    c.seed = v;
    c.ordering.seed = v;
    c.probe.seed = v;
  } catch (const std::logic_error&) {
    fail<ConfigError>("NCSL_SEED='", s, "' is not an unsigned integer");
  }
}

}  // namespace ncsl::app
