// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ncsl::models {

enum class EncoderKind { mlp, conv };
enum class BlockKind { basic, bottleneck };
enum class Variant { simsiam, byol, nnsiam };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::conv;
  int depth = 4;
  double width_multiplier = 1.0;
  int repr_dim = 128;
  BlockKind block = BlockKind::basic;
  int in_channels = 3;
  int image_size = 32;

  void validate() const;
  // Channel count for a nominal base width, scaled by width_multiplier.
  int channels(double base) const;
};

struct HeadConfig {
  // Projector layer widths; the last entry is proj_dim.
  std::vector<int> projector = {128, 128, 128};
  int predictor_bottleneck = 32;

  int proj_dim() const { return projector.empty() ? 0 : projector.back(); }
  void validate() const;
  // Projector widths all repr_dim, predictor bottleneck repr_dim / 4.
  static HeadConfig defaults_for(int repr_dim);
};

struct ModelConfig {
  Variant variant = Variant::simsiam;
  EncoderConfig encoder;
  HeadConfig head;
  double tau = 0.996;
  int queue_capacity = 2048;

  void validate() const;
};

const char* to_string(EncoderKind k);
const char* to_string(BlockKind k);
const char* to_string(Variant v);
EncoderKind encoder_kind_from(const std::string& s);
BlockKind block_kind_from(const std::string& s);
Variant variant_from(const std::string& s);

}  // namespace ncsl::models
