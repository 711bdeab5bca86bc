// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "train/evaluate.hpp"

#include <algorithm>

#include "common/rng.hpp"
#include "data/augment.hpp"
#include "train/trainer.hpp"

namespace ncsl::train {

diag::ReprMatrix extract_representations(Model& model, const data::Dataset& ds, const app::RunConfig& cfg) {
  const auto& a = cfg.augmentation;
  diag::ReprMatrix m;
  m.rows = ds.size();
  m.cols = model.config().encoder.repr_dim;
  m.values.resize(static_cast<std::size_t>(m.rows * m.cols));
  for (std::int64_t b = 0; b < ds.size(); b += cfg.eval.batch_size) {
    const auto e = std::min<std::int64_t>(ds.size(), b + cfg.eval.batch_size);
    const auto x = data::eval_batch(ds, b, e, a.out_size, a.mean, a.std, cfg.eval.resize_size);
    const auto h = model.represent(x);
    std::copy(h.ptr(), h.ptr() + h.size(), m.values.begin() + b * m.cols);
  }
  m.labels = ds.labels;
  return m;
}

double evaluation_loss(Model& model, const data::Dataset& ds, const app::RunConfig& cfg) {
  NCSL_CHECK(ds.size() > 0, InvalidArgument, "evaluation_loss: empty dataset");
  double total = 0.0;
  std::int64_t batch_no = 0;
  for (std::int64_t b = 0; b < ds.size(); b += cfg.eval.batch_size, ++batch_no) {
    const auto e = std::min<std::int64_t>(ds.size(), b + cfg.eval.batch_size);
    std::vector<std::int64_t> idx;
    for (auto i = b; i < e; ++i) idx.push_back(i);
    const auto [x1, x2] = data::augment_batch(ds, idx, cfg.augmentation, cfg.eval.eval_seed, batch_no);
    diff::Graph<float> g(false, false);
    const auto terms = models::siamese_loss(model, g, x1, x2, false);
    total += static_cast<double>(g.value(terms.loss).item()) * static_cast<double>(e - b);
  }
  return total / static_cast<double>(ds.size());
}

eval::ProbeResult linear_probe(Model& model, const data::Dataset& train, const data::Dataset& val,
                               const app::RunConfig& cfg) {
  NCSL_CHECK(train.num_classes >= 2, InvalidArgument, "linear probe needs at least 2 classes");
  const auto before = parameter_checksum(model.online());
  auto preset = data::AugmentationConfig::probe_preset();
  preset.out_size = cfg.augmentation.out_size;
  preset.mean = cfg.augmentation.mean;
  preset.std = cfg.augmentation.std;
  const auto seed = derive_seed({cfg.seed, kStreamProbe});
  const auto dim = model.config().encoder.repr_dim;

  eval::FeatureFn features = [&](const std::vector<std::int64_t>& rows, std::int64_t, std::int64_t step) {
    const auto S = preset.out_size;
    diff::Tensor<float> x({static_cast<std::int64_t>(rows.size()), train.channels, S, S});
    const auto per = static_cast<std::int64_t>(train.channels) * S * S;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      auto rng = data::item_rng(seed, step, static_cast<std::int64_t>(k));
      const auto v = data::augment(train.image(rows[k]), preset, rng);
      std::copy(v.ptr(), v.ptr() + per, x.ptr() + static_cast<std::int64_t>(k) * per);
    }
    return model.represent(x);
  };
  const auto val_repr = extract_representations(model, val, cfg);
  auto pc = cfg.probe;
  pc.seed = seed;
  const int classes = std::max(train.num_classes, val.num_classes);
  auto r = eval::train_linear_probe(features, train.labels, dim, classes, val_repr.values, val.labels, pc);
  NCSL_CHECK(parameter_checksum(model.online()) == before, StateError,
             "encoder parameters changed during linear probing");
  return r;
}

}  // namespace ncsl::train
