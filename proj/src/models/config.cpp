// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "models/config.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace ncsl::models {

int EncoderConfig::channels(double base) const {
  return std::max(1, static_cast<int>(std::lround(base * width_multiplier)));
}

void EncoderConfig::validate() const {
  NCSL_CHECK(depth >= 1, ConfigError, "encoder.depth must be >= 1, got ", depth);
  NCSL_CHECK(repr_dim >= 8, ConfigError, "encoder.repr_dim must be >= 8, got ", repr_dim);
  NCSL_CHECK(width_multiplier > 0.0 && std::isfinite(width_multiplier), ConfigError,
             "encoder.width_multiplier must be positive, got ", width_multiplier);
  NCSL_CHECK(in_channels >= 1, ConfigError, "encoder.in_channels must be >= 1");
  NCSL_CHECK(image_size >= 1, ConfigError, "encoder.image_size must be >= 1");
  if (kind == EncoderKind::conv) {
    NCSL_CHECK(image_size >= 3, ConfigError, "conv encoder needs image_size >= 3");
  }
}

void HeadConfig::validate() const {
  NCSL_CHECK(!projector.empty(), ConfigError, "head.projector must list at least one width");
  for (auto w : projector) NCSL_CHECK(w >= 1, ConfigError, "head.projector widths must be positive");
  NCSL_CHECK(predictor_bottleneck >= 1 && predictor_bottleneck < proj_dim(), ConfigError,
             "head.predictor_bottleneck must lie in [1, proj_dim=", proj_dim(), "), got ",
             predictor_bottleneck);
}

HeadConfig HeadConfig::defaults_for(int repr_dim) {
  HeadConfig h;
  h.projector = {repr_dim, repr_dim, repr_dim};
  h.predictor_bottleneck = std::max(1, repr_dim / 4);
  return h;
}

void ModelConfig::validate() const {
  encoder.validate();
  head.validate();
  if (variant == Variant::byol) {
    NCSL_CHECK(tau >= 0.0 && tau <= 1.0, ConfigError, "model.tau must lie in [0,1], got ", tau);
  }
  if (variant == Variant::nnsiam) {
    NCSL_CHECK(queue_capacity >= 1, ConfigError,
               "nnsiam requires a positive model.queue_capacity, got ", queue_capacity);
  }
}

const char* to_string(EncoderKind k) { return k == EncoderKind::mlp ? "mlp" : "conv"; }
const char* to_string(BlockKind k) { return k == BlockKind::basic ? "basic" : "bottleneck"; }
const char* to_string(Variant v) {
  switch (v) {
    case Variant::simsiam: return "simsiam";
    case Variant::byol: return "byol";
    case Variant::nnsiam: return "nnsiam";
  }
  return "?";
}

EncoderKind encoder_kind_from(const std::string& s) {
  if (s == "mlp") return EncoderKind::mlp;
  if (s == "conv") return EncoderKind::conv;
  fail<ConfigError>("unknown encoder kind '", s, "' (expected mlp|conv)");
}
BlockKind block_kind_from(const std::string& s) {
  if (s == "basic") return BlockKind::basic;
  if (s == "bottleneck") return BlockKind::bottleneck;
  fail<ConfigError>("unknown block kind '", s, "' (expected basic|bottleneck)");
}
Variant variant_from(const std::string& s) {
  if (s == "simsiam") return Variant::simsiam;
  if (s == "byol") return Variant::byol;
  if (s == "nnsiam") return Variant::nnsiam;
  fail<ConfigError>("unknown variant '", s, "' (expected simsiam|byol|nnsiam)");
}

}  // namespace ncsl::models
