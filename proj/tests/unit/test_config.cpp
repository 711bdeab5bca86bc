// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <string>

#include "app/run_config.hpp"
#include "common/error.hpp"
#include "doctest.h"

using namespace ncsl;
using namespace ncsl::app;
using nlohmann::json;

namespace {

json minimal() { return {{"output_dir", "out"}, {"dataset", {{"path", "data.spec"}}}}; }

std::string error_of(const json& j) {
  try {
    parse_run_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("minimal config fills defaults") {
  const auto c = parse_run_config(minimal());
  CHECK(c.output_dir == "out");
  CHECK(c.dataset.path == "data.spec");
  CHECK(c.ordering.num_chunks == 100);
  CHECK(c.optim.momentum == 0.9);
  CHECK(c.optim.base_lr == 0.05);
  CHECK(c.optim.warmup_epochs == 0.0);
  CHECK(c.model.variant == models::Variant::simsiam);
  CHECK(c.model.head.projector == std::vector<int>(3, c.model.encoder.repr_dim));
  CHECK(c.effective_checkpoint_every() == c.ordering.total_steps / 10);
  CHECK(c.distill.normalizer_momentum == 0.9);
}

TEST_CASE("unknown keys are rejected with their path") {
  auto j = minimal();
  j["learnig_rate"] = 0.1;
  CHECK(error_of(j).find("learnig_rate") != std::string::npos);
  j = minimal();
  j["optim"] = {{"learnig_rate", 0.1}};
  CHECK(error_of(j).find("optim.learnig_rate") != std::string::npos);
  j = minimal();
  j["model"] = {{"encoder", {{"dept", 3}}}};
  CHECK(error_of(j).find("model.encoder.dept") != std::string::npos);
}

TEST_CASE("missing keys, type errors and invariants name the field") {
  CHECK(error_of({{"dataset", {{"path", "x"}}}}).find("output_dir") != std::string::npos);
  CHECK(error_of({{"output_dir", "o"}}).find("dataset") != std::string::npos);
  auto j = minimal();
  j["optim"] = {{"base_lr", "fast"}};
  CHECK(error_of(j).find("optim.base_lr") != std::string::npos);
  j["optim"] = {{"base_lr", 0.0}};
  CHECK(error_of(j).find("optim.base_lr") != std::string::npos);
  j["optim"] = {{"warmup_epochs", -1.0}};
  CHECK(error_of(j).find("optim.warmup_epochs") != std::string::npos);
  j = minimal();
  j["ordering"] = {{"mode", "sideways"}};
  CHECK(error_of(j).find("ordering.mode") != std::string::npos);
  j = minimal();
  j["ordering"] = {{"batch_size", 2.5}};
  CHECK(error_of(j).find("ordering.batch_size") != std::string::npos);
  j = minimal();
  j["augmentation"] = {{"crop_scale", {0.2}}};
  CHECK(error_of(j).find("augmentation.crop_scale") != std::string::npos);
}

TEST_CASE("parse, serialize, parse is the identity") {
  auto j = minimal();
  j["seed"] = 7;
  j["model"] = {{"variant", "byol"},
                {"tau", 0.99},
                {"encoder", {{"kind", "mlp"}, {"depth", 2}, {"repr_dim", 16}, {"in_channels", 1}, {"image_size", 8}}}};
  j["augmentation"] = {{"out_size", 8}, {"mean", {0.5}}, {"std", {0.25}}};
  j["ordering"] = {{"mode", "hybrid"}, {"total_steps", 50}, {"num_chunks", 10}, {"switch_chunk", 4}};
  j["distill"] = {{"student", {{"kind", "mlp"}, {"depth", 1}, {"repr_dim", 8}, {"in_channels", 1}, {"image_size", 8}}}};
  const auto a = parse_run_config(j);
  const auto ja = to_json(a);
  const auto b = parse_run_config(ja);
  CHECK(to_json(b) == ja);
  CHECK(b.model.variant == models::Variant::byol);
  CHECK(b.model.head.projector == std::vector<int>{16, 16, 16});
  CHECK(b.ordering.seed == 7);
  CHECK(b.distill.student.repr_dim == 8);
}

TEST_CASE("NCSL_SEED overrides the seed") {
  auto c = parse_run_config(minimal());
  ::setenv("NCSL_SEED", "1234", 1);
  apply_env_overrides(c);
  CHECK(c.seed == 1234);
  CHECK(c.ordering.seed == 1234);
  ::setenv("NCSL_SEED", "12x", 1);
  CHECK_THROWS_AS(apply_env_overrides(c), ConfigError);
  ::unsetenv("NCSL_SEED");
}
