// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "common/rng.hpp"
#include "diff/gradcheck.hpp"
#include "diff/graph.hpp"
#include "diff/optim.hpp"
#include "diff/parameter_set.hpp"
#include "diff/tensor_file.hpp"
#include "doctest.h"

using namespace ncsl;
using namespace ncsl::diff;

namespace {

template <class T>
Tensor<T> random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor<T> t(std::move(s));
  for (auto& v : t.data()) v = static_cast<T>(scale * rng.normal());
  return t;
}

// Reduces any node to a scalar with a fixed random projection so every output
// coordinate carries a distinct gradient.
NodeRef project_to_scalar(Graph<double>& g, NodeRef x, std::uint64_t seed) {
  auto flat = g.flatten(x);
  if (g.value(flat).rank() == 1) flat = g.reshape(flat, {g.value(flat).dim(0), 1});
  Rng rng(seed);
  auto r = g.input(random_tensor<double>(g.value(flat).shape(), rng));
  return g.mean(g.rowdot(flat, r));
}

}  // namespace

TEST_CASE("relu and identity affine") {
  Graph<float> g(false, false);
  auto x = g.input(Tensor<float>({1, 2}, {-1.0f, 2.0f}));
  auto y = g.relu(x);
  CHECK(g.value(y)[0] == 0.0f);
  CHECK(g.value(y)[1] == 2.0f);

  Parameter<float> w("w", Tensor<float>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  Parameter<float> b("b", Tensor<float>({3}));
  auto in = g.input(Tensor<float>({2, 3}, {0.5f, -1.5f, 3.0f, 7.0f, 0.0f, -2.0f}));
  auto out = g.affine(in, w, &b);
  CHECK(g.value(out) == g.value(in));
}

TEST_CASE("three-layer MLP matches a straight-line forward pass") {
  Rng rng(0);
  const int B = 5, D0 = 7, D1 = 6, D2 = 4, D3 = 3;
  const int dims[] = {D0, D1, D2, D3};
  std::vector<Parameter<double>> ws, bs;
  for (int l = 0; l < 3; ++l) {
    ws.emplace_back("w" + std::to_string(l), random_tensor<double>({dims[l + 1], dims[l]}, rng, 0.5));
    bs.emplace_back("b" + std::to_string(l), random_tensor<double>({dims[l + 1]}, rng, 0.1));
  }
  auto x = random_tensor<double>({B, D0}, rng);
  Graph<double> g(true, false);
  auto h = g.input(x);
  for (int l = 0; l < 3; ++l) {
    h = g.affine(h, ws[l], &bs[l]);
    if (l < 2) h = g.relu(h);
  }
  // Oracle: explicit triple loops.
  std::vector<double> cur(x.storage());
  int width = D0;
  for (int l = 0; l < 3; ++l) {
    const int out = dims[l + 1];
    std::vector<double> nxt(static_cast<std::size_t>(B * out));
    for (int i = 0; i < B; ++i)
      for (int o = 0; o < out; ++o) {
        double s = bs[l].value[o];
        for (int k = 0; k < width; ++k) s += cur[i * width + k] * ws[l].value[o * width + k];
        nxt[i * out + o] = (l < 2 && s < 0) ? 0.0 : s;
      }
    cur = nxt;
    width = out;
  }
  for (int i = 0; i < B * D3; ++i) CHECK(g.value(h)[i] == doctest::Approx(cur[i]).epsilon(1e-6));
}

TEST_CASE("stop_grad branch contributes nothing") {
  // x rows all equal theta; loss = mean(sg(x) . x) = |theta|^2 with one live
  // branch, so d loss / d theta = theta rather than 2 theta.
  Parameter<double> theta("theta", Tensor<double>({3, 1}, {0.5, -1.0, 2.0}));
  Graph<double> g;
  auto ones = g.input(Tensor<double>({4, 1}, 1.0));
  auto x = g.affine(ones, theta, nullptr);
  auto loss = g.mean(g.rowdot(g.stop_grad(x), x));
  g.backward(loss);
  for (int i = 0; i < 3; ++i) CHECK(theta.grad[i] == doctest::Approx(theta.value[i]));

  // A parameter reachable only through stop_grad gets exactly zero.
  Parameter<double> phi("phi", Tensor<double>({3, 1}, {1.0, 2.0, 3.0}));
  Graph<double> g2;
  auto x2 = g2.affine(g2.input(Tensor<double>({4, 1}, 1.0)), phi, nullptr);
  auto l2 = g2.mean(g2.square(g2.stop_grad(x2)));
  g2.backward(l2);
  for (int i = 0; i < 3; ++i) CHECK(phi.grad[i] == 0.0);
}

TEST_CASE("scalar weight gradient equals mean of input") {
  Parameter<double> w("w", Tensor<double>({1, 1}, {3.0}));
  Graph<double> g;
  auto x = g.input(Tensor<double>({4, 1}, {1.0, 2.0, -4.0, 9.0}));
  g.backward(g.mean(g.affine(x, w, nullptr)));
  CHECK(w.grad[0] == doctest::Approx(2.0));
}

TEST_CASE("gradients accumulate across backward calls") {
  Parameter<double> w("w", Tensor<double>({1, 1}, {3.0}));
  for (int rep = 0; rep < 2; ++rep) {
    Graph<double> g;
    auto x = g.input(Tensor<double>({2, 1}, {1.0, 3.0}));
    g.backward(g.mean(g.affine(x, w, nullptr)));
  }
  CHECK(w.grad[0] == doctest::Approx(4.0));
  w.zero_grad();
  CHECK(w.grad[0] == 0.0);
}

TEST_CASE("backward and forward error paths") {
  Parameter<double> w("w", Tensor<double>({2, 3}, 1.0));
  Graph<double> g;
  auto x = g.input(Tensor<double>({4, 5}, 1.0), "x");
  try {
    g.affine(x, w, nullptr);
    FAIL("expected shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("node 1 (affine)") != std::string::npos);
    CHECK(std::string(e.what()).find("'w'") != std::string::npos);
  }
  CHECK_THROWS_AS(g.backward(x), ShapeError);  // not scalar

  Graph<double> empty;
  CHECK_THROWS_AS(empty.backward(NodeRef{0}), StateError);

  Graph<double> frozen(true, false);
  auto s = frozen.mean(frozen.input(Tensor<double>({2}, 1.0)));
  CHECK_THROWS_AS(frozen.backward(s), StateError);

  Graph<double> g3;
  auto big = g3.input(Tensor<double>({1, 1}, 1e200));
  try {
    g3.square(g3.square(big));
    FAIL("expected numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("node 1") != std::string::npos);
  }
}

TEST_CASE("sgd_step examples") {
  SUBCASE("plain SGD") {
    Parameter<double> p("p", Tensor<double>({1}, 1.0));
    p.grad[0] = 0.5;
    SgdMomentum<double> opt({&p}, 0.0, 0.0);
    opt.step(0.1);
    CHECK(p.value[0] == doctest::Approx(0.95));
  }
  SUBCASE("momentum recursion") {
    Parameter<double> p("p", Tensor<double>({1}, 0.0));
    SgdMomentum<double> opt({&p}, 0.9, 0.0);
    const double g = 0.3, lr = 0.1;
    p.grad[0] = g;
    opt.step(lr);
    const double after_first = p.value[0];
    opt.step(lr);
    CHECK(after_first - p.value[0] == doctest::Approx(1.9 * lr * g));
  }
  SUBCASE("non-finite gradient names the parameter") {
    Parameter<double> p("enc.w", Tensor<double>({2}, 0.0));
    p.grad[1] = std::nan("");
    SgdMomentum<double> opt({&p}, 0.9, 0.0);
    try {
      opt.step(0.1);
      FAIL("expected error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("enc.w") != std::string::npos);
    }
  }
}

TEST_CASE("sgd trajectory on a 1-D quadratic matches a scalar reference loop") {
  // f(v) = 0.5 * a * (v - c)^2
  const double a = 1.7, c = -0.4, mu = 0.9, wd = 0.01, lr = 0.05;
  Parameter<double> p("v", Tensor<double>({1, 1}, 2.0));
  SgdMomentum<double> opt({&p}, mu, wd);
  double v = 2.0, buf = 0.0;
  for (int step = 0; step < 10; ++step) {
    opt.zero_grad();
    Graph<double> g;
    auto x = g.input(Tensor<double>({1, 1}, 1.0));
    auto shifted = g.sub(g.affine(x, p, nullptr), g.input(Tensor<double>({1, 1}, c)));
    g.backward(g.scale(g.mean(g.square(shifted)), 0.5 * a));
    opt.step(lr);
    const double grad = a * (v - c);
    buf = mu * buf + (grad + wd * v);
    v -= lr * buf;
    CHECK(std::abs(p.value[0] - v) < 1e-10);
  }
}

TEST_CASE("cosine_lr") {
  CHECK(cosine_lr(0, 1000, 0.05) == 0.05);
  CHECK(cosine_lr(1000, 1000, 0.05) == 0.0);
  CHECK(cosine_lr(500, 1000, 0.05) == doctest::Approx(0.025).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_lr(1001, 1000, 0.05), InvalidArgument);
  CHECK_THROWS_AS(cosine_lr(-1, 1000, 0.05), InvalidArgument);
  for (long T : {1L, 7L, 100L, 1001L}) {
    double prev = cosine_lr(0, T, 0.3);
    for (long s = 1; s <= T; ++s) {
      const double cur = cosine_lr(s, T, 0.3);
      CHECK(cur <= prev);
      prev = cur;
    }
    CHECK(prev == 0.0);
  }
}

TEST_CASE("ema_update") {
  auto make = [](double v) {
    auto p = std::make_unique<Parameter<double>>("p", Tensor<double>({2}, v));
    return p;
  };
  auto t = make(1.0), o = make(0.0);
  auto rm_t = std::make_unique<Parameter<double>>("rm", Tensor<double>({2}, 5.0), false);
  auto rm_o = std::make_unique<Parameter<double>>("rm", Tensor<double>({2}, 7.0), false);
  std::vector<Parameter<double>*> tl{t.get(), rm_t.get()}, ol{o.get(), rm_o.get()};
  ema_update<double>(tl, ol, 1.0);
  CHECK(t->value[0] == 1.0);
  ema_update<double>(tl, ol, 0.9);
  CHECK(t->value[0] == doctest::Approx(0.9));
  CHECK(rm_t->value[0] == 7.0);
  ema_update<double>(tl, ol, 0.0);
  CHECK(t->value[0] == 0.0);

  auto bad = std::make_unique<Parameter<double>>("q", Tensor<double>({3}, 0.0));
  std::vector<Parameter<double>*> badl{bad.get(), rm_o.get()};
  CHECK_THROWS_AS(ema_update<double>(tl, badl, 0.5), ShapeError);

  // Convex bound, float precision, random values and tau.
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Parameter<float> tf("t", random_tensor<float>({16}, rng)), of("o", random_tensor<float>({16}, rng));
    const auto before = tf.value;
    std::vector<Parameter<float>*> a{&tf}, b{&of};
    ema_update<float>(a, b, rng.uniform());
    for (int i = 0; i < 16; ++i) {
      CHECK(tf.value[i] >= std::min(before[i], of.value[i]));
      CHECK(tf.value[i] <= std::max(before[i], of.value[i]));
    }
  }
}

TEST_CASE("grad_check on linear regression") {
  Rng rng(11);
  Parameter<double> w("w", random_tensor<double>({1, 4}, rng));
  Parameter<double> b("b", random_tensor<double>({1}, rng));
  auto X = random_tensor<double>({20, 4}, rng);
  auto y = random_tensor<double>({20, 1}, rng);
  std::vector<Parameter<double>*> ps{&w, &b};
  auto res = grad_check(
      [&](Graph<double>& g) {
        auto pred = g.affine(g.input(X), w, &b);
        return g.mean(g.square(g.sub(pred, g.input(y))));
      },
      ps);
  CHECK(res.coords_checked == 5);
  CHECK(res.max_rel_error < 1e-8);
}

TEST_CASE("grad_check with only stop_grad inputs upstream") {
  Parameter<double> w("w", Tensor<double>({2, 2}, {1.0, 2.0, 3.0, 4.0}));
  std::vector<Parameter<double>*> ps{&w};
  auto res = grad_check(
      [&](Graph<double>& g) {
        auto h = g.input(Tensor<double>({3, 2}, 0.5));
        return g.mean(g.square(g.stop_grad(h)));
      },
      ps);
  CHECK(res.max_rel_error == 0.0);
  for (auto v : w.grad.data()) CHECK(v == 0.0);
}

TEST_CASE("every node kind passes a finite-difference check on random shapes") {
  Rng rng(2024);
  for (int trial = 0; trial < 4; ++trial) {
    const int B = 2 + static_cast<int>(rng.below(3));
    const int Cin = 1 + static_cast<int>(rng.below(3));
    const int Cout = 2 + static_cast<int>(rng.below(3));
    const int H = 5 + static_cast<int>(rng.below(3));
    const int K = rng.bernoulli(0.5) ? 3 : 1;
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int pad = K == 3 ? 1 : 0;
    const int D = 3 + static_cast<int>(rng.below(4));
    const int classes = 3;
    const std::uint64_t pseed = rng.next_u64();

    Parameter<double> cw("conv.w", random_tensor<double>({Cout, Cin, K, K}, rng, 0.5));
    Parameter<double> cb("conv.b", random_tensor<double>({Cout}, rng, 0.1));
    Parameter<double> g2("bn2.gamma", random_tensor<double>({Cout}, rng, 0.3));
    Parameter<double> b2("bn2.beta", random_tensor<double>({Cout}, rng, 0.3));
    Parameter<double> rm2("bn2.rm", Tensor<double>({Cout}), false);
    Parameter<double> rv2("bn2.rv", Tensor<double>({Cout}, 1.0), false);
    Parameter<double> aw("fc.w", random_tensor<double>({D, Cout}, rng, 0.5));
    Parameter<double> ab("fc.b", random_tensor<double>({D}, rng, 0.1));
    Parameter<double> g1("bn1.gamma", random_tensor<double>({D}, rng, 0.3));
    Parameter<double> b1("bn1.beta", random_tensor<double>({D}, rng, 0.3));
    Parameter<double> rm1("bn1.rm", random_tensor<double>({D}, rng, 0.1), false);
    Parameter<double> rv1("bn1.rv", Tensor<double>({D}, 1.5), false);
    Parameter<double> hw("head.w", random_tensor<double>({classes, D}, rng, 0.5));
    Parameter<double> pw("pix.w", random_tensor<double>({1, Cin * H * H}, rng, 0.5));
    std::vector<Parameter<double>*> ps{&cw, &g2, &b2, &aw, &g1, &b1, &hw, &pw};
    std::vector<Parameter<double>*> ps_bias{&cw, &cb, &aw, &ab, &hw, &pw};
    auto x = random_tensor<double>({B, Cin, H, H}, rng);
    auto other = random_tensor<double>({B, D}, rng);
    std::vector<int> labels;
    for (int i = 0; i < B; ++i) labels.push_back(static_cast<int>(rng.below(classes)));

    // Biases feeding batch norm have an identically zero gradient, so they
    // are only used on BN-free paths.
    auto conv_trunk = [&](Graph<double>& g, bool pool, bool bn = true) {
      auto h = g.conv2d(g.input(x), cw, bn ? nullptr : &cb, stride, pad);
      if (bn) h = g.batchnorm(h, g2, b2, rm2, rv2);
      h = g.relu(h);
      if (pool && g.value(h).dim(2) >= 2) h = g.maxpool2d(h, 2, 1);
      return g.global_avgpool(h);
    };

    SUBCASE("conv / batchnorm2d / relu / maxpool / avgpool") {
      auto res = grad_check([&](Graph<double>& g) { return project_to_scalar(g, conv_trunk(g, true), pseed); }, ps);
      INFO(res.worst_param, " ", res.worst_analytic, " ", res.worst_numeric);
      INFO(res.worst_param, " ", res.worst_analytic, " ", res.worst_numeric);
      CHECK(res.max_rel_error < 1e-4);
    }
    SUBCASE("affine / batchnorm1d / l2_normalize / rowdot / add / sub / scale") {
      auto res = grad_check(
          [&](Graph<double>& g) {
            auto h = g.affine(conv_trunk(g, false), aw, nullptr);
            h = g.batchnorm(h, g1, b1, rm1, rv1);
            auto o = g.input(other);
            auto mixed = g.sub(g.add(h, o), g.scale(g.l2_normalize(h), 0.7));
            return g.mean(g.rowdot(g.l2_normalize(mixed), o));
          },
          ps);
      INFO(res.worst_param, " ", res.worst_analytic, " ", res.worst_numeric);
      CHECK(res.max_rel_error < 1e-4);
    }
    SUBCASE("square / softmax cross-entropy / reshape") {
      auto res = grad_check(
          [&](Graph<double>& g) {
            auto flat = g.reshape(g.input(x), {B, Cin * H * H});
            auto pix = g.affine(flat, pw, nullptr);
            auto h = g.affine(conv_trunk(g, false, false), aw, &ab);
            auto ce = g.softmax_cross_entropy(g.affine(g.square(h), hw, nullptr), labels);
            return g.add(ce, g.mean(g.square(pix)));
          },
          ps_bias);
      INFO(res.worst_param, " ", res.worst_analytic, " ", res.worst_numeric);
      CHECK(res.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("eval-mode batchnorm gradient") {
  Rng rng(5);
  const int D = 4;
  Parameter<double> w("w", random_tensor<double>({D, 3}, rng));
  Parameter<double> g1("g", random_tensor<double>({D}, rng));
  Parameter<double> b1("b", random_tensor<double>({D}, rng));
  Parameter<double> rm("rm", random_tensor<double>({D}, rng), false);
  Parameter<double> rv("rv", Tensor<double>({D}, 2.0), false);
  auto x = random_tensor<double>({6, 3}, rng);
  std::vector<Parameter<double>*> ps{&w, &g1, &b1};
  // grad_check runs in training mode; compare eval-mode backward directly
  // against finite differences here.
  auto loss_of = [&](bool record) {
    Graph<double> g(false, record);
    auto h = g.batchnorm(g.affine(g.input(x), w, nullptr), g1, b1, rm, rv);
    auto l = project_to_scalar(g, h, 9);
    if (record) g.backward(l);
    return g.value(l).item();
  };
  const auto rm_before = rm.value;
  for (auto* p : ps) p->zero_grad();
  loss_of(true);
  for (auto* p : ps) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + 1e-5;
      const double up = loss_of(false);
      p->value[i] = orig - 1e-5;
      const double down = loss_of(false);
      p->value[i] = orig;
      const double num = (up - down) / 2e-5;
      CHECK(std::abs(num - p->grad[i]) / std::max(1e-12, std::abs(num) + std::abs(p->grad[i])) < 1e-4);
    }
  }
  CHECK(rm.value == rm_before);  // eval mode leaves running stats untouched
}

TEST_CASE("batchnorm running statistics use momentum 0.9") {
  Parameter<float> g("g", Tensor<float>({1}, 1.0f)), b("b", Tensor<float>({1}, 0.0f));
  Parameter<float> rm("rm", Tensor<float>({1}, 0.0f), false), rv("rv", Tensor<float>({1}, 1.0f), false);
  Graph<float> gr(true, false);
  gr.batchnorm(gr.input(Tensor<float>({4, 1}, {1.0f, 2.0f, 3.0f, 4.0f})), g, b, rm, rv);
  CHECK(rm.value[0] == doctest::Approx(0.25));
  // unbiased variance of {1,2,3,4} is 5/3
  CHECK(rv.value[0] == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0));
}

TEST_CASE("forward passes are deterministic") {
  auto run = [] {
    Rng rng(42);
    Parameter<float> w("w", random_tensor<float>({8, 3, 3, 3}, rng));
    auto x = random_tensor<float>({4, 3, 9, 9}, rng);
    Graph<float> g(true, false);
    auto h = g.global_avgpool(g.relu(g.conv2d(g.input(x), w, nullptr, 2, 1)));
    return g.value(h);
  };
  CHECK(run() == run());
}

TEST_CASE("tensor file round trip and corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "ncsl_test_tensor_file";
  std::filesystem::create_directories(dir);
  const auto path = dir / "a.ncsl";
  Rng rng(1);
  std::vector<NamedTensor> entries{{"enc.w", random_tensor<float>({3, 2, 2}, rng)},
                                   {"stat", random_tensor<double>({5}, rng)}};
  write_tensor_file(path, entries);
  auto back = read_tensor_file(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "enc.w");
  CHECK(std::get<Tensor<float>>(back[0].tensor) == std::get<Tensor<float>>(entries[0].tensor));
  CHECK(std::get<Tensor<double>>(back[1].tensor) == std::get<Tensor<double>>(entries[1].tensor));
  CHECK(get_tensor<double>(back, "enc.w").shape() == Shape{3, 2, 2});

  // Header layout is fixed byte-for-byte.
  std::ifstream in(path, std::ios::binary);
  char head[4 + 4 + 8 + 2 + 5 + 1 + 1];
  in.read(head, sizeof head);
  CHECK(std::string(head, 4) == "NCSL");
  CHECK(head[4] == 1);
  CHECK(head[8] == 2);
  CHECK(head[16] == 5);
  CHECK(std::string(head + 18, 5) == "enc.w");
  CHECK(head[23] == 0);  // f32
  CHECK(head[24] == 3);  // rank

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 3);
  try {
    read_tensor_file(path);
    FAIL("expected format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
