// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "diff/optim.hpp"
#include "diff/tensor_file.hpp"
#include "json.hpp"
#include "models/siamese.hpp"

namespace ncsl::train {

using Model = models::SiameseModel<float>;

// Sidecar contents. "model" is the ModelConfig needed to rebuild the network;
// "config" echoes the full RunConfig that produced the checkpoint.
struct CheckpointMeta {
  std::int64_t step = 0;
  std::string kind = "pretrain";
  nlohmann::json model;
  nlohmann::json config;
};

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::vector<diff::NamedTensor> entries;
};

// dir/ckpt_000123.ncsl
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::int64_t step);
// ckpt_000123.ncsl -> ckpt_000123.json
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

// Entries: online/<name>, target/<name>, opt/<name> (momentum buffers keyed by
// parameter name), queue/storage and queue/state (fill, head), plus extra.
void save_checkpoint(const std::filesystem::path& path, Model& model, const diff::SgdMomentum<float>* opt,
                     const CheckpointMeta& meta, const std::vector<diff::NamedTensor>& extra = {});
LoadedCheckpoint read_checkpoint(const std::filesystem::path& path);

// Copies every online/target/queue entry into a model of matching layout.
void restore_model(Model& model, const std::vector<diff::NamedTensor>& entries);
void restore_optimizer(diff::SgdMomentum<float>& opt, const std::vector<diff::NamedTensor>& entries);

// Rebuilds the network described by the sidecar and restores its state.
std::unique_ptr<Model> load_model(const std::filesystem::path& path);
std::unique_ptr<Model> load_model(const LoadedCheckpoint& ckpt);

// FNV-1a over the raw bytes of every value, in registration order.
std::uint64_t parameter_checksum(const diff::ParameterSet<float>& ps);

}  // namespace ncsl::train
