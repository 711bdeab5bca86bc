// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "train/checkpoint.hpp"

#include <cstdio>

#include "app/run_config.hpp"
#include "common/fs.hpp"

namespace ncsl::train {

using diff::NamedTensor;
using diff::Tensor;

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::int64_t step) {
  char name[32];
  std::snprintf(name, sizeof(name), "ckpt_%06lld.ncsl", static_cast<long long>(step));
  return dir / name;
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p.replace_extension(".json");
  return p;
}

void save_checkpoint(const std::filesystem::path& path, Model& model, const diff::SgdMomentum<float>* opt,
                     const CheckpointMeta& meta, const std::vector<NamedTensor>& extra) {
  std::vector<NamedTensor> entries;
  for (auto* p : model.online().all()) entries.push_back({"online/" + p->name, p->value});
  if (model.has_target())
    for (auto* p : model.target().all()) entries.push_back({"target/" + p->name, p->value});
  if (opt != nullptr) {
    const auto& ps = opt->params();
    for (std::size_t i = 0; i < ps.size(); ++i) entries.push_back({"opt/" + ps[i]->name, opt->buffers()[i]});
  }
  if (model.has_queue()) {
    const auto& q = model.queue();
    entries.push_back({"queue/storage", Tensor<double>({q.capacity(), q.dim()}, q.storage())});
    entries.push_back({"queue/state", Tensor<double>({2}, {double(q.fill()), double(q.head())})});
  }
  for (const auto& e : extra) entries.push_back(e);
  diff::write_tensor_file(path, entries);
  const nlohmann::json side = {{"step", meta.step}, {"kind", meta.kind}, {"model", meta.model}, {"config", meta.config}};
  write_text_atomic(sidecar_path(path), side.dump(2) + "\n");
}

LoadedCheckpoint read_checkpoint(const std::filesystem::path& path) {
  LoadedCheckpoint out;
  const auto side = sidecar_path(path);
  NCSL_CHECK(std::filesystem::exists(side), IoError, "checkpoint '", path.string(), "' has no sidecar '",
             side.string(), "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(side));
    out.meta.step = j.at("step").get<std::int64_t>();
    out.meta.kind = j.at("kind").get<std::string>();
    out.meta.model = j.at("model");
    out.meta.config = j.value("config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    fail<FormatError>("malformed checkpoint sidecar '", side.string(), "': ", e.what());
  }
  out.entries = diff::read_tensor_file(path);
  return out;
}

namespace {

void restore_set(diff::ParameterSet<float>& ps, const std::vector<NamedTensor>& entries, const std::string& prefix) {
  for (auto* p : ps.all()) {
    auto t = diff::get_tensor<float>(entries, prefix + p->name);
    NCSL_CHECK(t.same_shape(p->value), ShapeError, "checkpoint entry '", prefix, p->name, "' has shape ",
               diff::shape_str(t.shape()), ", model expects ", diff::shape_str(p->value.shape()));
    p->value = std::move(t);
  }
}

}  // namespace

void restore_model(Model& model, const std::vector<NamedTensor>& entries) {
  restore_set(model.online(), entries, "online/");
  if (model.has_target()) restore_set(model.target(), entries, "target/");
  if (model.has_queue()) {
    auto& q = model.queue();
    auto storage = diff::get_tensor<double>(entries, "queue/storage");
    auto state = diff::get_tensor<double>(entries, "queue/state");
    NCSL_CHECK(storage.rank() == 2 && storage.dim(0) == q.capacity() && storage.dim(1) == q.dim(), ShapeError,
               "checkpoint queue has shape ", diff::shape_str(storage.shape()), ", model expects [", q.capacity(),
               ", ", q.dim(), "]");
    NCSL_CHECK(state.size() == 2, FormatError, "checkpoint queue/state must hold 2 values");
    q.restore(std::vector<double>(storage.ptr(), storage.ptr() + storage.size()), int(state.ptr()[0]),
              int(state.ptr()[1]));
  }
}

void restore_optimizer(diff::SgdMomentum<float>& opt, const std::vector<NamedTensor>& entries) {
  const auto& ps = opt.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto t = diff::get_tensor<float>(entries, "opt/" + ps[i]->name);
    NCSL_CHECK(t.same_shape(opt.buffers()[i]), ShapeError, "optimizer buffer shape mismatch for '", ps[i]->name,
               "'");
    opt.buffers()[i] = std::move(t);
  }
}

std::unique_ptr<Model> load_model(const LoadedCheckpoint& ckpt) {
  const auto cfg = app::parse_model_config(ckpt.meta.model, "model");
  auto model = std::make_unique<Model>(cfg, 0);
  restore_model(*model, ckpt.entries);
  return model;
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path) { return load_model(read_checkpoint(path)); }

std::uint64_t parameter_checksum(const diff::ParameterSet<float>& ps) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& v = ps[i].value;
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.ptr());
    for (std::size_t k = 0; k < v.size() * sizeof(float); ++k) {
      h ^= bytes[k];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace ncsl::train
