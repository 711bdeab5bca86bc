// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "common/rng.hpp"
#include "diff/graph.hpp"
#include "diff/parameter_set.hpp"
#include "models/config.hpp"

namespace ncsl::models {

using diff::Graph;
using diff::NodeRef;
using diff::Parameter;
using diff::ParameterSet;

template <class T>
struct Linear {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;

  Linear() = default;
  Linear(ParameterSet<T>& ps, const std::string& name, int in, int out, bool with_bias, Rng& rng);
  NodeRef operator()(Graph<T>& g, NodeRef x) const { return g.affine(x, *weight, bias); }
};

template <class T>
struct Conv {
  Parameter<T>* weight = nullptr;
  int stride = 1;
  int pad = 0;

  Conv() = default;
  Conv(ParameterSet<T>& ps, const std::string& name, int in, int out, int kernel, int stride, Rng& rng);
  NodeRef operator()(Graph<T>& g, NodeRef x) const { return g.conv2d(x, *weight, nullptr, stride, pad); }
};

template <class T>
struct BatchNorm {
  Parameter<T>* gamma = nullptr;
  Parameter<T>* beta = nullptr;
  Parameter<T>* running_mean = nullptr;
  Parameter<T>* running_var = nullptr;

  BatchNorm() = default;
  BatchNorm(ParameterSet<T>& ps, const std::string& name, int channels);
  NodeRef operator()(Graph<T>& g, NodeRef x) const {
    return g.batchnorm(x, *gamma, *beta, *running_mean, *running_var);
  }
};

// Backbone: conv (stem + residual blocks + global average pool) or mlp.
// Output is [B, repr_dim].
template <class T>
class Encoder {
 public:
  Encoder(const EncoderConfig& cfg, ParameterSet<T>& ps, const std::string& prefix, Rng& rng);
  NodeRef operator()(Graph<T>& g, NodeRef x) const;
  const EncoderConfig& config() const { return cfg_; }

 private:
  struct Block {
    BlockKind kind;
    Conv<T> c1, c2, c3;
    BatchNorm<T> b1, b2, b3;
    bool projected_shortcut = false;
    Conv<T> sc;
    BatchNorm<T> sc_bn;
  };
  struct Dense {
    Linear<T> fc;
    BatchNorm<T> bn;
  };

  EncoderConfig cfg_;
  Conv<T> stem_;
  BatchNorm<T> stem_bn_;
  std::vector<Block> blocks_;
  std::vector<Dense> dense_;
};

// Stack of affine+BN(+ReLU) layers. With final_plain set the last layer is a
// biased affine with neither BN nor ReLU (predictor output).
template <class T>
class MlpHead {
 public:
  MlpHead(int in, const std::vector<int>& widths, bool final_plain, ParameterSet<T>& ps,
          const std::string& prefix, Rng& rng);
  NodeRef operator()(Graph<T>& g, NodeRef x) const;

 private:
  struct Layer {
    Linear<T> fc;
    bool has_bn = true;
    BatchNorm<T> bn;
    bool relu = true;
  };
  std::vector<Layer> layers_;
};

// Analytic trainable-parameter count of an encoder, computed from layer dims
// alone; used to cross-check the constructed modules.
std::int64_t encoder_param_count(const EncoderConfig& cfg);

extern template struct Linear<float>;
extern template struct Linear<double>;
extern template class Encoder<float>;
extern template class Encoder<double>;
extern template class MlpHead<float>;
extern template class MlpHead<double>;

}  // namespace ncsl::models
