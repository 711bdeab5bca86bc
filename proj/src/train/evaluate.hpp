// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "app/run_config.hpp"
#include "data/dataset.hpp"
#include "diag/repr.hpp"
#include "eval/probe.hpp"
#include "train/checkpoint.hpp"

namespace ncsl::train {

// Eval-mode encoder outputs for every image under the deterministic eval
// transform, computed in batches of cfg.eval.batch_size. Labels are copied.
diag::ReprMatrix extract_representations(Model& model, const data::Dataset& ds, const app::RunConfig& cfg);

// Symmetrised siamese loss averaged over one pass of paired augmentations
// drawn from cfg.eval.eval_seed. Eval-mode batch norm, no recording, the
// NNSiam queue is read but not written.
double evaluation_loss(Model& model, const data::Dataset& ds, const app::RunConfig& cfg);

// Linear probe on the frozen encoder: probe-preset augmented training views,
// eval-transform validation views. Throws StateError if the encoder changed.
eval::ProbeResult linear_probe(Model& model, const data::Dataset& train, const data::Dataset& val,
                               const app::RunConfig& cfg);

}  // namespace ncsl::train
