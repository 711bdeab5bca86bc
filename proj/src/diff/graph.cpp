// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "diff/graph.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "diff/kernels.hpp"

namespace ncsl::diff {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::input: return "input";
    case OpKind::affine: return "affine";
    case OpKind::conv2d: return "conv2d";
    case OpKind::batchnorm: return "batchnorm";
    case OpKind::relu: return "relu";
    case OpKind::maxpool2d: return "maxpool2d";
    case OpKind::global_avgpool: return "global_avgpool";
    case OpKind::l2_normalize: return "l2_normalize";
    case OpKind::rowdot: return "rowdot";
    case OpKind::mean: return "mean";
    case OpKind::stop_grad: return "stop_grad";
    case OpKind::reshape: return "reshape";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::scale: return "scale";
    case OpKind::square: return "square";
    case OpKind::softmax_xent: return "softmax_xent";
  }
  return "?";
}

template <class T>
std::int32_t Graph<T>::checked(NodeRef r) const {
  NCSL_CHECK(r.valid() && static_cast<std::size_t>(r.id) < nodes_.size(), StateError,
             "node ", r.id, " does not exist in this graph (graph has ", nodes_.size(),
             " nodes; was the forward pass run?)");
  return r.id;
}

template <class T>
std::string Graph<T>::where(OpKind kind) const {
  return detail::concat("node ", nodes_.size(), " (", op_name(kind), ")");
}

template <class T>
NodeRef Graph<T>::push(Node n) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  if (!all_finite<T>(n.value.data())) {
    fail<NumericError>("non-finite output at node ", id, " (", op_name(n.kind),
                       n.label.empty() ? "" : ", ", n.label, ")");
  }
  if (!record_) n.backward_fn = nullptr;
  nodes_.push_back(std::move(n));
  return NodeRef{id};
}

template <class T>
Tensor<T>& Graph<T>::grad_buffer(std::int32_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <class T>
NodeRef Graph<T>::input(Tensor<T> v, std::string label) {
  Node n;
  n.kind = OpKind::input;
  n.label = std::move(label);
  n.value = std::move(v);
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::affine(NodeRef xr, Parameter<T>& w, Parameter<T>* b) {
  const auto& x = value(xr);
  NCSL_CHECK(x.rank() == 2 && w.value.rank() == 2 && x.dim(1) == w.value.dim(1), ShapeError,
             where(OpKind::affine), ": input ", shape_str(x.shape()), " incompatible with weight '",
             w.name, "' ", shape_str(w.value.shape()));
  const std::int64_t B = x.dim(0), in = x.dim(1), out = w.value.dim(0);
  if (b) {
    NCSL_CHECK(b->value.size() == static_cast<std::size_t>(out), ShapeError, where(OpKind::affine),
               ": bias '", b->name, "' has ", b->value.size(), " entries, expected ", out);
  }
  Node n;
  n.kind = OpKind::affine;
  n.inputs = {xr.id};
  n.params = {&w};
  if (b) n.params.push_back(b);
  n.label = w.name;
  n.value = Tensor<T>({B, out});
  std::vector<T> wt(static_cast<std::size_t>(in * out));
  kernels::transpose(out, in, w.value.ptr(), wt.data());
  T* y = n.value.ptr();
  if (b) {
    for (std::int64_t i = 0; i < B; ++i) std::copy_n(b->value.ptr(), out, y + i * out);
  }
  kernels::gemm_nn(B, out, in, x.ptr(), in, wt.data(), out, y, out);
  if (record_) {
    n.backward_fn = [B, in, out](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      const T* dy = node.grad.ptr();
      auto* w = node.params[0];
      const std::int32_t xi = node.inputs[0];
      if (!g.nodes_[xi].stop_grad) {
        auto& dx = g.grad_buffer(xi);
        kernels::gemm_nn(B, in, out, dy, out, w->value.ptr(), in, dx.ptr(), in);
      }
      if (w->requires_grad) {
        kernels::gemm_tn(out, in, B, dy, out, g.nodes_[xi].value.ptr(), in, w->grad.ptr(), in);
      }
      if (node.params.size() > 1 && node.params[1]->requires_grad) {
        T* db = node.params[1]->grad.ptr();
        for (std::int64_t i = 0; i < B; ++i)
          for (std::int64_t o = 0; o < out; ++o) db[o] += dy[i * out + o];
      }
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::conv2d(NodeRef xr, Parameter<T>& w, Parameter<T>* b, int stride, int pad) {
  const auto& x = value(xr);
  const auto& ws = w.value.shape();
  NCSL_CHECK(x.rank() == 4 && ws.size() == 4 && ws[1] == x.dim(1) && ws[2] == ws[3], ShapeError,
             where(OpKind::conv2d), ": input ", shape_str(x.shape()), " incompatible with weight '",
             w.name, "' ", shape_str(ws));
  NCSL_CHECK(stride >= 1 && pad >= 0, ShapeError, where(OpKind::conv2d), ": bad stride/padding");
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t Co = ws[0], K = ws[2];
  const std::int64_t Ho = (H + 2 * pad - K) / stride + 1, Wo = (W + 2 * pad - K) / stride + 1;
  NCSL_CHECK(H + 2 * pad >= K && W + 2 * pad >= K, ShapeError, where(OpKind::conv2d),
             ": kernel ", K, " larger than padded input ", H, "x", W);
  if (b) {
    NCSL_CHECK(b->value.size() == static_cast<std::size_t>(Co), ShapeError, where(OpKind::conv2d),
               ": bias '", b->name, "' size mismatch");
  }
  Node n;
  n.kind = OpKind::conv2d;
  n.inputs = {xr.id};
  n.params = {&w};
  if (b) n.params.push_back(b);
  n.label = w.name;
  n.value = Tensor<T>({B, Co, Ho, Wo});
  const std::int64_t CKK = C * K * K, HW = Ho * Wo;
  std::vector<T> cols(static_cast<std::size_t>(CKK * HW));
  for (std::int64_t i = 0; i < B; ++i) {
    T* y = n.value.ptr() + i * Co * HW;
    if (b) {
      for (std::int64_t o = 0; o < Co; ++o) std::fill_n(y + o * HW, HW, b->value[o]);
    }
    kernels::im2col(x.ptr() + i * C * H * W, C, H, W, K, stride, pad, Ho, Wo, cols.data());
    kernels::gemm_nn(Co, HW, CKK, w.value.ptr(), CKK, cols.data(), HW, y, HW);
  }
  if (record_) {
    n.backward_fn = [=](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      auto* wp = node.params[0];
      const std::int32_t xi = node.inputs[0];
      const bool need_dx = !g.nodes_[xi].stop_grad;
      const T* xv = g.nodes_[xi].value.ptr();
      std::vector<T> cols(static_cast<std::size_t>(CKK * HW));
      std::vector<T> cols_t(wp->requires_grad ? static_cast<std::size_t>(CKK * HW) : 0);
      std::vector<T> dcols(need_dx ? static_cast<std::size_t>(CKK * HW) : 0);
      T* dx = need_dx ? g.grad_buffer(xi).ptr() : nullptr;
      for (std::int64_t i = 0; i < B; ++i) {
        const T* dy = node.grad.ptr() + i * Co * HW;
        if (wp->requires_grad) {
          kernels::im2col(xv + i * C * H * W, C, H, W, K, stride, pad, Ho, Wo, cols.data());
          kernels::transpose(CKK, HW, cols.data(), cols_t.data());
          kernels::gemm_nn(Co, CKK, HW, dy, HW, cols_t.data(), CKK, wp->grad.ptr(), CKK);
        }
        if (need_dx) {
          std::fill(dcols.begin(), dcols.end(), T{0});
          kernels::gemm_tn(CKK, HW, Co, wp->value.ptr(), CKK, dy, HW, dcols.data(), HW);
          kernels::col2im_add(dcols.data(), C, H, W, K, stride, pad, Ho, Wo, dx + i * C * H * W);
        }
        if (node.params.size() > 1 && node.params[1]->requires_grad) {
          T* db = node.params[1]->grad.ptr();
          for (std::int64_t o = 0; o < Co; ++o) {
            T s = 0;
            for (std::int64_t p = 0; p < HW; ++p) s += dy[o * HW + p];
            db[o] += s;
          }
        }
      }
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::batchnorm(NodeRef xr, Parameter<T>& gamma, Parameter<T>& beta,
                            Parameter<T>& running_mean, Parameter<T>& running_var,
                            double momentum, double eps) {
  const auto& x = value(xr);
  NCSL_CHECK(x.rank() == 2 || x.rank() == 4, ShapeError, where(OpKind::batchnorm),
             ": expected rank 2 or 4 input, got ", shape_str(x.shape()));
  const std::int64_t B = x.dim(0), C = x.dim(1);
  const std::int64_t S = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  for (auto* p : {&gamma, &beta, &running_mean, &running_var}) {
    NCSL_CHECK(p->value.size() == static_cast<std::size_t>(C), ShapeError, where(OpKind::batchnorm),
               ": '", p->name, "' has ", p->value.size(), " entries, expected ", C);
  }
  const std::int64_t count = B * S;
  Node n;
  n.kind = OpKind::batchnorm;
  n.inputs = {xr.id};
  n.params = {&gamma, &beta};
  n.label = gamma.name;
  n.value = Tensor<T>(x.shape());
  std::vector<T> xhat(x.size());
  std::vector<T> inv_std(static_cast<std::size_t>(C));
  const T* xv = x.ptr();
  T* y = n.value.ptr();
  for (std::int64_t c = 0; c < C; ++c) {
    double mu, var;
    if (training_) {
      double s = 0.0;
      for (std::int64_t i = 0; i < B; ++i)
        for (std::int64_t p = 0; p < S; ++p) s += xv[(i * C + c) * S + p];
      mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::int64_t i = 0; i < B; ++i)
        for (std::int64_t p = 0; p < S; ++p) {
          const double d = xv[(i * C + c) * S + p] - mu;
          ss += d * d;
        }
      var = ss / static_cast<double>(count);
      const double unbiased = count > 1 ? ss / static_cast<double>(count - 1) : var;
      running_mean.value[c] =
          static_cast<T>(momentum * running_mean.value[c] + (1.0 - momentum) * mu);
      running_var.value[c] =
          static_cast<T>(momentum * running_var.value[c] + (1.0 - momentum) * unbiased);
    } else {
      mu = running_mean.value[c];
      var = running_var.value[c];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[c] = static_cast<T>(is);
    const T g = gamma.value[c], bt = beta.value[c];
    for (std::int64_t i = 0; i < B; ++i)
      for (std::int64_t p = 0; p < S; ++p) {
        const auto k = (i * C + c) * S + p;
        xhat[k] = static_cast<T>((xv[k] - mu) * is);
        y[k] = g * xhat[k] + bt;
      }
  }
  if (record_) {
    const bool train = training_;
    n.backward_fn = [B, C, S, count, train, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                        Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      auto* gp = node.params[0];
      auto* bp = node.params[1];
      const T* dy = node.grad.ptr();
      const std::int32_t xi = node.inputs[0];
      T* dx = g.nodes_[xi].stop_grad ? nullptr : g.grad_buffer(xi).ptr();
      for (std::int64_t c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::int64_t i = 0; i < B; ++i)
          for (std::int64_t p = 0; p < S; ++p) {
            const auto k = (i * C + c) * S + p;
            sum_dy += dy[k];
            sum_dy_xhat += static_cast<double>(dy[k]) * xhat[k];
          }
        if (gp->requires_grad) gp->grad[c] += static_cast<T>(sum_dy_xhat);
        if (bp->requires_grad) bp->grad[c] += static_cast<T>(sum_dy);
        if (!dx) continue;
        const double gm = gp->value[c], is = inv_std[c];
        if (train) {
          const double inv_n = 1.0 / static_cast<double>(count);
          for (std::int64_t i = 0; i < B; ++i)
            for (std::int64_t p = 0; p < S; ++p) {
              const auto k = (i * C + c) * S + p;
              dx[k] += static_cast<T>(gm * is * inv_n *
                                      (count * static_cast<double>(dy[k]) - sum_dy -
                                       xhat[k] * sum_dy_xhat));
            }
        } else {
          for (std::int64_t i = 0; i < B; ++i)
            for (std::int64_t p = 0; p < S; ++p) {
              const auto k = (i * C + c) * S + p;
              dx[k] += static_cast<T>(gm * is * dy[k]);
            }
        }
      }
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::relu(NodeRef xr) {
  const auto& x = value(xr);
  Node n;
  n.kind = OpKind::relu;
  n.inputs = {xr.id};
  n.value = Tensor<T>(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] > T{0} ? x[i] : T{0};
  if (record_) {
    n.backward_fn = [](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      const auto xi = node.inputs[0];
      if (g.nodes_[xi].stop_grad) return;
      auto& dx = g.grad_buffer(xi);
      const auto& xv = g.nodes_[xi].value;
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (xv[i] > T{0}) dx[i] += node.grad[i];
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::maxpool2d(NodeRef xr, int kernel, int stride) {
  const auto& x = value(xr);
  NCSL_CHECK(x.rank() == 4, ShapeError, where(OpKind::maxpool2d), ": expected rank-4 input, got ",
             shape_str(x.shape()));
  NCSL_CHECK(kernel >= 1 && stride >= 1 && x.dim(2) >= kernel && x.dim(3) >= kernel, ShapeError,
             where(OpKind::maxpool2d), ": kernel ", kernel, " does not fit input ",
             shape_str(x.shape()));
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t Ho = (H - kernel) / stride + 1, Wo = (W - kernel) / stride + 1;
  Node n;
  n.kind = OpKind::maxpool2d;
  n.inputs = {xr.id};
  n.value = Tensor<T>({B, C, Ho, Wo});
  std::vector<std::int64_t> argmax(n.value.size());
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    const T* src = x.ptr() + bc * H * W;
    for (std::int64_t oy = 0; oy < Ho; ++oy)
      for (std::int64_t ox = 0; ox < Wo; ++ox) {
        std::int64_t best = (oy * stride) * W + ox * stride;
        for (int ky = 0; ky < kernel; ++ky)
          for (int kx = 0; kx < kernel; ++kx) {
            const std::int64_t k = (oy * stride + ky) * W + ox * stride + kx;
            if (src[k] > src[best]) best = k;
          }
        const auto o = (bc * Ho + oy) * Wo + ox;
        n.value[o] = src[best];
        argmax[o] = bc * H * W + best;
      }
  }
  if (record_) {
    n.backward_fn = [argmax = std::move(argmax)](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      const auto xi = node.inputs[0];
      if (g.nodes_[xi].stop_grad) return;
      auto& dx = g.grad_buffer(xi);
      for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += node.grad[o];
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::global_avgpool(NodeRef xr) {
  const auto& x = value(xr);
  NCSL_CHECK(x.rank() == 4, ShapeError, where(OpKind::global_avgpool),
             ": expected rank-4 input, got ", shape_str(x.shape()));
  const std::int64_t B = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
  Node n;
  n.kind = OpKind::global_avgpool;
  n.inputs = {xr.id};
  n.value = Tensor<T>({B, C});
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    T s = 0;
    for (std::int64_t p = 0; p < S; ++p) s += x[bc * S + p];
    n.value[bc] = s / static_cast<T>(S);
  }
  if (record_) {
    n.backward_fn = [B, C, S](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      const auto xi = node.inputs[0];
      if (g.nodes_[xi].stop_grad) return;
      auto& dx = g.grad_buffer(xi);
      for (std::int64_t bc = 0; bc < B * C; ++bc) {
        const T d = node.grad[bc] / static_cast<T>(S);
        for (std::int64_t p = 0; p < S; ++p) dx[bc * S + p] += d;
      }
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::l2_normalize(NodeRef xr) {
  const auto& x = value(xr);
  NCSL_CHECK(x.rank() == 2, ShapeError, where(OpKind::l2_normalize),
             ": expected [B,D] input, got ", shape_str(x.shape()));
  const std::int64_t B = x.dim(0), D = x.dim(1);
  Node n;
  n.kind = OpKind::l2_normalize;
  n.inputs = {xr.id};
  n.value = Tensor<T>(x.shape());
  std::vector<T> norms(static_cast<std::size_t>(B));
  for (std::int64_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < D; ++j) s += static_cast<double>(x[i * D + j]) * x[i * D + j];
    const double nr = std::sqrt(s);
    NCSL_CHECK(nr >= 1e-12, NumericError, where(OpKind::l2_normalize), ": row ", i,
               " has zero norm");
    norms[i] = static_cast<T>(nr);
    for (std::int64_t j = 0; j < D; ++j) n.value[i * D + j] = static_cast<T>(x[i * D + j] / nr);
  }
  if (record_) {
    n.backward_fn = [B, D, norms = std::move(norms)](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      const auto xi = node.inputs[0];
      if (g.nodes_[xi].stop_grad) return;
      auto& dx = g.grad_buffer(xi);
      const auto& y = node.value;
      for (std::int64_t i = 0; i < B; ++i) {
        double dot = 0.0;
        for (std::int64_t j = 0; j < D; ++j) dot += static_cast<double>(y[i * D + j]) * node.grad[i * D + j];
        for (std::int64_t j = 0; j < D; ++j) {
          const auto k = i * D + j;
          dx[k] += static_cast<T>((node.grad[k] - y[k] * dot) / norms[i]);
        }
      }
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::rowdot(NodeRef ar, NodeRef br) {
  const auto& a = value(ar);
  const auto& b = value(br);
  NCSL_CHECK(a.rank() == 2 && a.shape() == b.shape(), ShapeError, where(OpKind::rowdot),
             ": operands ", shape_str(a.shape()), " and ", shape_str(b.shape()), " differ");
  const std::int64_t B = a.dim(0), D = a.dim(1);
  Node n;
  n.kind = OpKind::rowdot;
  n.inputs = {ar.id, br.id};
  n.value = Tensor<T>({B});
  for (std::int64_t i = 0; i < B; ++i) {
    T s = 0;
    for (std::int64_t j = 0; j < D; ++j) s += a[i * D + j] * b[i * D + j];
    n.value[i] = s;
  }
  if (record_) {
    n.backward_fn = [B, D](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      const auto ai = node.inputs[0], bi = node.inputs[1];
      for (int side = 0; side < 2; ++side) {
        const auto self = side == 0 ? ai : bi;
        const auto other = side == 0 ? bi : ai;
        if (g.nodes_[self].stop_grad) continue;
        auto& d = g.grad_buffer(self);
        const auto& ov = g.nodes_[other].value;
        for (std::int64_t i = 0; i < B; ++i)
          for (std::int64_t j = 0; j < D; ++j) d[i * D + j] += node.grad[i] * ov[i * D + j];
      }
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::mean(NodeRef xr) {
  const auto& x = value(xr);
  Node n;
  n.kind = OpKind::mean;
  n.inputs = {xr.id};
  double s = 0.0;
  for (auto v : x.data()) s += v;
  n.value = Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(x.size())));
  if (record_) {
    n.backward_fn = [](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      const auto xi = node.inputs[0];
      if (g.nodes_[xi].stop_grad) return;
      auto& dx = g.grad_buffer(xi);
      const T d = node.grad[0] / static_cast<T>(dx.size());
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d;
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::stop_grad(NodeRef xr) {
  Node n;
  n.kind = OpKind::stop_grad;
  n.inputs = {xr.id};
  n.stop_grad = true;
  n.value = value(xr);
  // No backward_fn: gradient arriving here is dropped.
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::reshape(NodeRef xr, Shape shape) {
  Node n;
  n.kind = OpKind::reshape;
  n.inputs = {xr.id};
  n.value = value(xr).reshaped(std::move(shape));
  if (record_) {
    n.backward_fn = [](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      const auto xi = node.inputs[0];
      if (g.nodes_[xi].stop_grad) return;
      auto& dx = g.grad_buffer(xi);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += node.grad[i];
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::flatten(NodeRef xr) {
  const auto& x = value(xr);
  if (x.rank() == 2) return xr;
  return reshape(xr, {x.dim(0), static_cast<std::int64_t>(x.size()) / x.dim(0)});
}

template <class T>
NodeRef Graph<T>::add(NodeRef ar, NodeRef br) {
  const auto& a = value(ar);
  const auto& b = value(br);
  NCSL_CHECK(a.shape() == b.shape(), ShapeError, where(OpKind::add), ": operands ",
             shape_str(a.shape()), " and ", shape_str(b.shape()), " differ");
  Node n;
  n.kind = OpKind::add;
  n.inputs = {ar.id, br.id};
  n.value = Tensor<T>(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] + b[i];
  if (record_) {
    n.backward_fn = [](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      for (auto xi : node.inputs) {
        if (g.nodes_[xi].stop_grad) continue;
        auto& dx = g.grad_buffer(xi);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += node.grad[i];
      }
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::sub(NodeRef ar, NodeRef br) {
  const auto& a = value(ar);
  const auto& b = value(br);
  NCSL_CHECK(a.shape() == b.shape(), ShapeError, where(OpKind::sub), ": operands ",
             shape_str(a.shape()), " and ", shape_str(b.shape()), " differ");
  Node n;
  n.kind = OpKind::sub;
  n.inputs = {ar.id, br.id};
  n.value = Tensor<T>(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] - b[i];
  if (record_) {
    n.backward_fn = [](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      for (int side = 0; side < 2; ++side) {
        const auto xi = node.inputs[side];
        if (g.nodes_[xi].stop_grad) continue;
        auto& dx = g.grad_buffer(xi);
        const T sign = side == 0 ? T{1} : T{-1};
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += sign * node.grad[i];
      }
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::scale(NodeRef xr, double factor) {
  const auto& x = value(xr);
  const T f = static_cast<T>(factor);
  Node n;
  n.kind = OpKind::scale;
  n.inputs = {xr.id};
  n.value = Tensor<T>(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = f * x[i];
  if (record_) {
    n.backward_fn = [f](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      const auto xi = node.inputs[0];
      if (g.nodes_[xi].stop_grad) return;
      auto& dx = g.grad_buffer(xi);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += f * node.grad[i];
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::square(NodeRef xr) {
  const auto& x = value(xr);
  Node n;
  n.kind = OpKind::square;
  n.inputs = {xr.id};
  n.value = Tensor<T>(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * x[i];
  if (record_) {
    n.backward_fn = [](Graph& g, std::int32_t id) {
      auto& node = g.nodes_[id];
      const auto xi = node.inputs[0];
      if (g.nodes_[xi].stop_grad) return;
      auto& dx = g.grad_buffer(xi);
      const auto& xv = g.nodes_[xi].value;
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += T{2} * xv[i] * node.grad[i];
    };
  }
  return push(std::move(n));
}

template <class T>
NodeRef Graph<T>::softmax_cross_entropy(NodeRef lr, std::vector<int> labels) {
  const auto& z = value(lr);
  NCSL_CHECK(z.rank() == 2 && static_cast<std::int64_t>(labels.size()) == z.dim(0), ShapeError,
             where(OpKind::softmax_xent), ": logits ", shape_str(z.shape()), " vs ", labels.size(),
             " labels");
  const std::int64_t B = z.dim(0), K = z.dim(1);
  std::vector<T> probs(z.size());
  double total = 0.0;
  for (std::int64_t i = 0; i < B; ++i) {
    NCSL_CHECK(labels[i] >= 0 && labels[i] < K, InvalidArgument, where(OpKind::softmax_xent),
               ": label ", labels[i], " out of range [0,", K, ")");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k < K; ++k) mx = std::max<double>(mx, z[i * K + k]);
    double se = 0.0;
    for (std::int64_t k = 0; k < K; ++k) se += std::exp(z[i * K + k] - mx);
    const double lse = mx + std::log(se);
    for (std::int64_t k = 0; k < K; ++k) probs[i * K + k] = static_cast<T>(std::exp(z[i * K + k] - lse));
    total += lse - z[i * K + labels[i]];
  }
  Node n;
  n.kind = OpKind::softmax_xent;
  n.inputs = {lr.id};
  n.value = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(B)));
  if (record_) {
    n.backward_fn = [B, K, probs = std::move(probs), labels = std::move(labels)](Graph& g,
                                                                                  std::int32_t id) {
      auto& node = g.nodes_[id];
      const auto xi = node.inputs[0];
      if (g.nodes_[xi].stop_grad) return;
      auto& dz = g.grad_buffer(xi);
      const T scale = node.grad[0] / static_cast<T>(B);
      for (std::int64_t i = 0; i < B; ++i)
        for (std::int64_t k = 0; k < K; ++k) {
          const T onehot = k == labels[i] ? T{1} : T{0};
          dz[i * K + k] += scale * (probs[i * K + k] - onehot);
        }
    };
  }
  return push(std::move(n));
}

template <class T>
void Graph<T>::backward(NodeRef loss) {
  NCSL_CHECK(!nodes_.empty(), StateError, "backward called before any forward pass");
  const auto root = checked(loss);
  NCSL_CHECK(record_, StateError, "backward called on a graph built without recording");
  NCSL_CHECK(nodes_[root].value.size() == 1, ShapeError, "backward target node ", root, " (",
             op_name(nodes_[root].kind), ") is not scalar: shape ",
             shape_str(nodes_[root].value.shape()));
  for (auto& n : nodes_) n.grad = Tensor<T>();
  grad_buffer(root)[0] = T{1};
  for (std::int32_t id = root; id >= 0; --id) {
    auto& n = nodes_[id];
    if (n.grad.empty() || !n.backward_fn) continue;
    n.backward_fn(*this, id);
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace ncsl::diff
