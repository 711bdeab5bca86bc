// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "diff/tensor.hpp"

namespace ncsl::diff {

enum class OpKind : std::uint8_t {
  input,
  affine,
  conv2d,
  batchnorm,
  relu,
  maxpool2d,
  global_avgpool,
  l2_normalize,
  rowdot,
  mean,
  stop_grad,
  reshape,
  add,
  sub,
  scale,
  square,
  softmax_xent,
};

const char* op_name(OpKind kind);

struct NodeRef {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
  bool operator==(const NodeRef&) const = default;
};

// Define-by-run tape. Each op evaluates immediately and appends a node, so the
// construction order is a topological order. In training mode batch norm uses
// batch statistics and updates its running buffers; in eval mode it reads the
// running buffers. A graph built with record=false keeps values only and
// refuses backward().
template <class T>
class Graph {
 public:
  struct Node {
    OpKind kind = OpKind::input;
    std::vector<std::int32_t> inputs;
    std::vector<Parameter<T>*> params;
    bool stop_grad = false;
    std::string label;
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void(Graph&, std::int32_t)> backward_fn;
  };

  explicit Graph(bool training = true, bool record = true) : training_(training), record_(record) {}

  bool training() const { return training_; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeRef r) const { return nodes_.at(checked(r)); }
  const Tensor<T>& value(NodeRef r) const { return nodes_.at(checked(r)).value; }
  // Gradient of the last backward() target with respect to this node; empty if
  // no gradient reached it.
  const Tensor<T>& grad(NodeRef r) const { return nodes_.at(checked(r)).grad; }

  NodeRef input(Tensor<T> v, std::string label = {});

  // x[B,in] * w[out,in]^T + b[out]
  NodeRef affine(NodeRef x, Parameter<T>& w, Parameter<T>* b);
  // x[B,Cin,H,W] (*) w[Cout,Cin,K,K], square kernel, symmetric zero padding.
  NodeRef conv2d(NodeRef x, Parameter<T>& w, Parameter<T>* b, int stride, int pad);
  // Per-channel normalisation over [B,C] or [B,C,H,W].
  NodeRef batchnorm(NodeRef x, Parameter<T>& gamma, Parameter<T>& beta, Parameter<T>& running_mean,
                    Parameter<T>& running_var, double momentum = 0.9, double eps = 1e-5);
  NodeRef relu(NodeRef x);
  NodeRef maxpool2d(NodeRef x, int kernel, int stride);
  NodeRef global_avgpool(NodeRef x);
  NodeRef l2_normalize(NodeRef x);
  NodeRef rowdot(NodeRef a, NodeRef b);
  NodeRef mean(NodeRef x);
  NodeRef stop_grad(NodeRef x);
  NodeRef reshape(NodeRef x, Shape shape);
  NodeRef flatten(NodeRef x);
  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef scale(NodeRef x, double factor);
  NodeRef square(NodeRef x);
  NodeRef softmax_cross_entropy(NodeRef logits, std::vector<int> labels);

  // Accumulates d(loss)/d(param) into Parameter::grad for every trainable
  // parameter reachable from loss, skipping paths through stop_grad nodes.
  void backward(NodeRef loss);

 private:
  std::int32_t checked(NodeRef r) const;
  NodeRef push(Node n);
  Tensor<T>& grad_buffer(std::int32_t id);
  std::string where(OpKind kind) const;

  bool training_;
  bool record_;
  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace ncsl::diff
