// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "common/rng.hpp"
#include "diff/gradcheck.hpp"
#include "models/siamese.hpp"
#include "doctest.h"

using namespace ncsl;
using namespace ncsl::diff;
using namespace ncsl::models;

namespace {

template <class T>
Tensor<T> random_tensor(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<T> t(std::move(s));
  for (auto& v : t.data()) v = static_cast<T>(rng.normal());
  return t;
}

ModelConfig tiny_mlp(Variant v) {
  ModelConfig m;
  m.variant = v;
  m.encoder.kind = EncoderKind::mlp;
  m.encoder.depth = 1;
  m.encoder.width_multiplier = 0.1;
  m.encoder.repr_dim = 12;
  m.encoder.in_channels = 1;
  m.encoder.image_size = 2;
  m.head.projector = {12, 12, 12};
  m.head.predictor_bottleneck = 10;
  m.queue_capacity = 12;
  return m;
}

ModelConfig tiny_conv(Variant v) {
  ModelConfig m;
  m.variant = v;
  m.encoder.kind = EncoderKind::conv;
  m.encoder.depth = 2;
  m.encoder.width_multiplier = 0.125;
  m.encoder.repr_dim = 12;
  m.encoder.in_channels = 2;
  m.encoder.image_size = 4;
  m.head.projector = {12, 12, 12};
  m.head.predictor_bottleneck = 10;
  return m;
}

std::int64_t count_all_trainable(const EncoderConfig& e) {
  ModelConfig m;
  m.encoder = e;
  m.head = HeadConfig::defaults_for(e.repr_dim);
  ParameterSet<float> ps;
  Rng rng(0);
  Encoder<float> enc(e, ps, "encoder", rng);
  return ps.num_trainable();
}

}  // namespace

TEST_CASE("mlp encoder output shape is [B, repr_dim]") {
  ModelConfig m;
  m.encoder.kind = EncoderKind::mlp;
  m.encoder.depth = 3;
  m.encoder.repr_dim = 64;
  m.encoder.image_size = 8;
  m.head = HeadConfig::defaults_for(64);
  SiameseModel<float> model(m, 1);
  auto x = random_tensor<float>({5, 3, 8, 8}, 2);
  auto h = model.represent(x);
  CHECK(h.shape() == Shape{5, 64});

  Graph<float> g(true, true);
  auto z = model.project(g, model.encode(g, g.input(x)));
  CHECK(g.value(z).shape() == Shape{5, 64});
  CHECK(g.value(model.predict(g, z)).shape() == Shape{5, 64});
}

TEST_CASE("conv encoder output shape") {
  for (auto block : {BlockKind::basic, BlockKind::bottleneck}) {
    ModelConfig m = tiny_conv(Variant::simsiam);
    m.encoder.block = block;
    SiameseModel<float> model(m, 3);
    auto h = model.represent(random_tensor<float>({3, 2, 4, 4}, 4));
    CHECK(h.shape() == Shape{3, 12});
  }
}

TEST_CASE("byol target starts as an exact copy of online") {
  SiameseModel<float> model(tiny_conv(Variant::byol), 7);
  auto& t = model.target();
  CHECK(t.size() > 0);
  for (auto* p : t.all()) {
    const auto* o = model.online().find(p->name);
    REQUIRE(o != nullptr);
    CHECK(p->value == o->value);
  }
  // The target has no predictor.
  CHECK(t.find("predictor.0.fc.weight") == nullptr);
  CHECK(model.online().find("predictor.0.fc.weight") != nullptr);
}

TEST_CASE("initialisation follows the stated scheme") {
  SiameseModel<double> model(tiny_conv(Variant::simsiam), 5);
  for (auto* p : model.online().all()) {
    const auto& n = p->name;
    auto ends = [&](const std::string& s) { return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0; };
    if (ends(".gamma") || ends(".running_var")) {
      for (double v : p->value.data()) CHECK(v == 1.0);
    } else if (ends(".beta") || ends(".running_mean") || ends(".bias")) {
      for (double v : p->value.data()) CHECK(v == 0.0);
    } else {
      REQUIRE(ends(".weight"));
      const auto& s = p->value.shape();
      std::int64_t fan_in = 1;
      for (std::size_t i = 1; i < s.size(); ++i) fan_in *= s[i];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (double v : p->value.data()) CHECK(std::abs(v) <= bound);
    }
  }
  SiameseModel<double> again(tiny_conv(Variant::simsiam), 5);
  SiameseModel<double> other(tiny_conv(Variant::simsiam), 6);
  auto w = model.online().at("encoder.stem.conv.weight").value;
  CHECK(again.online().at("encoder.stem.conv.weight").value == w);
  CHECK_FALSE(other.online().at("encoder.stem.conv.weight").value == w);
}

TEST_CASE("conv parameter count matches a layer-by-layer tally") {
  // Default basic depth-4 encoder, width w, repr 128, 3 input channels:
  // stem 3->c0, block0 c0->c0 (identity shortcut), block1 c0->c1 stride 2,
  // block2 c1->c2 stride 2, block3 c2->128 stride 2. Projected shortcuts on 1..3.
  auto tally = [](std::int64_t c0, std::int64_t c1, std::int64_t c2) {
    const std::int64_t r = 128;
    std::int64_t n = 27 * c0 + 2 * c0;
    n += 2 * (9 * c0 * c0 + 2 * c0);
    n += 9 * c0 * c1 + 9 * c1 * c1 + 4 * c1 + c0 * c1 + 2 * c1;
    n += 9 * c1 * c2 + 9 * c2 * c2 + 4 * c2 + c1 * c2 + 2 * c2;
    n += 9 * c2 * r + 9 * r * r + 4 * r + c2 * r + 2 * r;
    return n;
  };
  EncoderConfig w1;
  EncoderConfig w2;
  w2.width_multiplier = 2.0;
  CHECK(count_all_trainable(w1) == tally(32, 64, 128));
  CHECK(count_all_trainable(w2) == tally(64, 128, 256));
  CHECK(count_all_trainable(w2) > count_all_trainable(w1));
  CHECK(encoder_param_count(w1) == tally(32, 64, 128));
}

TEST_CASE("parameter count strictly increases in depth and width") {
  for (auto kind : {EncoderKind::conv, EncoderKind::mlp}) {
    for (auto block : {BlockKind::basic, BlockKind::bottleneck}) {
      if (kind == EncoderKind::mlp && block == BlockKind::bottleneck) continue;
      std::int64_t prev_depth = 0;
      for (int depth = 1; depth <= 5; ++depth) {
        EncoderConfig e;
        e.kind = kind;
        e.block = block;
        e.depth = depth;
        e.repr_dim = 64;
        const auto n = count_all_trainable(e);
        CHECK(n == encoder_param_count(e));
        CHECK(n > prev_depth);
        prev_depth = n;
      }
      std::int64_t prev_width = 0;
      for (double w : {0.25, 0.5, 1.0, 1.5, 2.0, 4.0}) {
        EncoderConfig e;
        e.kind = kind;
        e.block = block;
        e.width_multiplier = w;
        e.repr_dim = 64;
        const auto n = count_all_trainable(e);
        CHECK(n == encoder_param_count(e));
        CHECK(n > prev_width);
        prev_width = n;
      }
    }
  }
}

TEST_CASE("bottleneck blocks expand channels fourfold") {
  EncoderConfig e;
  e.block = BlockKind::bottleneck;
  ParameterSet<float> ps;
  Rng rng(0);
  Encoder<float> enc(e, ps, "encoder", rng);
  // block0: 32 -> 8·... nominal 32, output 4·32 = 128 channels.
  CHECK(ps.at("encoder.block0.conv3.weight").value.dim(0) == 128);
  CHECK(ps.at("encoder.block1.conv3.weight").value.dim(0) == 256);
  CHECK(ps.at("encoder.block3.conv3.weight").value.dim(0) == e.repr_dim);
}

TEST_CASE("invalid configs are rejected") {
  ModelConfig m = tiny_mlp(Variant::nnsiam);
  m.queue_capacity = 0;
  CHECK_THROWS_AS(SiameseModel<float>(m, 0), ConfigError);
  m = tiny_mlp(Variant::simsiam);
  m.encoder.repr_dim = 4;
  CHECK_THROWS_AS(SiameseModel<float>(m, 0), ConfigError);
  m = tiny_mlp(Variant::simsiam);
  m.head.predictor_bottleneck = 12;
  CHECK_THROWS_AS(SiameseModel<float>(m, 0), ConfigError);
  m = tiny_mlp(Variant::simsiam);
  m.encoder.depth = 0;
  CHECK_THROWS_AS(SiameseModel<float>(m, 0), ConfigError);

  SiameseModel<float> s(tiny_mlp(Variant::simsiam), 0);
  CHECK_THROWS_AS(s.target(), StateError);
  CHECK_THROWS_AS(s.queue(), StateError);
}

TEST_CASE("negative cosine examples") {
  auto t = [](std::vector<double> v) { return Tensor<double>({1, static_cast<std::int64_t>(v.size())}, v); };
  CHECK(negative_cosine(t({0.3, -2.0, 5.0}), t({0.3, -2.0, 5.0})) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(negative_cosine(t({1, 0}), t({0, 1})) == 0.0);
  CHECK(negative_cosine(t({1, 0}), t({1, 1})) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(negative_cosine(t({1, 0}), t({1, 1})) == doctest::Approx(-0.70711).epsilon(1e-5));

  Tensor<double> p({2, 2}, {1, 0, 1, 0});
  Tensor<double> z({2, 2}, {1, 1, 0, 0});
  try {
    negative_cosine(p, z);
    FAIL("expected an error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }

  // Graph version agrees and stays in [-1, 1].
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto a = random_tensor<double>({4, 5}, s);
    auto b = random_tensor<double>({4, 5}, s + 100);
    Graph<double> g(true, false);
    auto v = g.value(negative_cosine(g, g.input(a), g.input(b))).item();
    CHECK(v == doctest::Approx(negative_cosine(a, b)).epsilon(1e-12));
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("simsiam loss is symmetric in the two views") {
  SiameseModel<double> model(tiny_mlp(Variant::simsiam), 11);
  auto x1 = random_tensor<double>({6, 1, 2, 2}, 1);
  auto x2 = random_tensor<double>({6, 1, 2, 2}, 2);
  {
    Graph<double> g;
    auto r = siamese_loss(model, g, x1, x1);
    CHECK(g.value(r.term12).item() == g.value(r.term21).item());
  }
  Graph<double> ga, gb;
  auto a = siamese_loss(model, ga, x1, x2);
  auto b = siamese_loss(model, gb, x2, x1);
  CHECK(ga.value(a.loss).item() == doctest::Approx(gb.value(b.loss).item()).epsilon(1e-14));
  CHECK(ga.value(a.loss).item() >= -1.0);
  CHECK(ga.value(a.loss).item() <= 1.0);
  CHECK(ga.value(a.loss).item() ==
        doctest::Approx(0.5 * ga.value(a.term12).item() + 0.5 * ga.value(a.term21).item()).epsilon(1e-15));
}

TEST_CASE("byol backward never touches the target") {
  SiameseModel<double> model(tiny_conv(Variant::byol), 13);
  auto x1 = random_tensor<double>({4, 2, 4, 4}, 1);
  auto x2 = random_tensor<double>({4, 2, 4, 4}, 2);
  Graph<double> g;
  auto r = siamese_loss(model, g, x1, x2);
  g.backward(r.loss);
  for (auto* p : model.target().all()) {
    for (double v : p->grad.data()) CHECK(v == 0.0);
  }
  double online_grad = 0.0;
  for (auto* p : model.online().trainable())
    for (double v : p->grad.data()) online_grad += std::abs(v);
  CHECK(online_grad > 0.0);
}

TEST_CASE("byol target terms use target projections") {
  SiameseModel<double> model(tiny_mlp(Variant::byol), 17);
  auto x1 = random_tensor<double>({6, 1, 2, 2}, 3);
  auto x2 = random_tensor<double>({6, 1, 2, 2}, 4);
  // Perturb the target so it differs from online.
  for (auto* p : model.target().trainable())
    for (auto& v : p->value.data()) v *= 1.5;
  Graph<double> g;
  auto r = siamese_loss(model, g, x1, x2);
  Graph<double> gp(true, false);
  auto p1 = model.predict(gp, model.project(gp, model.encode(gp, gp.input(x1))));
  auto tz2 = model.target_projection(x2, true);
  CHECK(g.value(r.term12).item() == doctest::Approx(negative_cosine(gp.value(p1), tz2)).epsilon(1e-12));
}

TEST_CASE("nnsiam with a queue of the batch projections equals simsiam") {
  auto cfg = tiny_mlp(Variant::nnsiam);
  cfg.queue_capacity = 12;
  SiameseModel<double> nn(cfg, 19);
  auto scfg = cfg;
  scfg.variant = Variant::simsiam;
  SiameseModel<double> ss(scfg, 19);
  auto x1 = random_tensor<double>({6, 1, 2, 2}, 5);
  auto x2 = random_tensor<double>({6, 1, 2, 2}, 6);

  // Before the queue fills the loss falls back to simsiam exactly.
  Graph<double> g0, s0;
  auto before = siamese_loss(nn, g0, x1, x2);
  auto simsiam = siamese_loss(ss, s0, x1, x2);
  CHECK(g0.value(before.loss).item() == s0.value(simsiam.loss).item());
  // That call pushed z1 then z2: 12 rows, capacity 12, so the queue now holds
  // exactly this batch's projections.
  REQUIRE(nn.queue().full());
  Graph<double> g1;
  auto after = siamese_loss(nn, g1, x1, x2, false);
  CHECK(g1.value(after.loss).item() == doctest::Approx(s0.value(simsiam.loss).item()).epsilon(1e-12));
}

TEST_CASE("nnsiam uses the nearest queued vector") {
  auto cfg = tiny_mlp(Variant::nnsiam);
  cfg.queue_capacity = 3;
  SiameseModel<double> model(cfg, 23);
  auto& q = model.queue();
  std::vector<double> a(12, 0.0), b(12, 0.0), c(12, 0.0);
  a[0] = 1;
  b[1] = 1;
  c[2] = 1;
  for (auto* v : {&a, &b, &c}) q.push(*v);
  auto x1 = random_tensor<double>({4, 1, 2, 2}, 7);
  auto x2 = random_tensor<double>({4, 1, 2, 2}, 8);
  Graph<double> g;
  auto r = siamese_loss(model, g, x1, x2, false);
  // Oracle: pick argmax-cosine basis vector for each z2 row by hand.
  Graph<double> h(true, false);
  auto z2 = h.value(model.project(h, model.encode(h, h.input(x2))));
  auto p1 = h.value(model.predict(h, model.project(h, model.encode(h, h.input(x1)))));
  Tensor<double> nn2({4, 12});
  for (int i = 0; i < 4; ++i) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (z2.data()[i * 12 + k] > z2.data()[i * 12 + best]) best = k;
    nn2.data()[i * 12 + best] = 1.0;
  }
  CHECK(g.value(r.term12).item() == doctest::Approx(negative_cosine(p1, nn2)).epsilon(1e-12));
  CHECK(q.fill() == 3);
  CHECK(q.head() == 0);
}

TEST_CASE("queue examples") {
  NNQueue q(3, 2);
  CHECK_THROWS_AS(q.lookup(std::vector<double>{1, 0}), StateError);
  q.push(std::vector<double>{3, 4});
  auto r = q.lookup(std::vector<double>{3, 4});
  CHECK(r[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(0.8).epsilon(1e-15));

  NNQueue q2(2, 2);
  q2.push(std::vector<double>{1, 0});
  q2.push(std::vector<double>{0, 1});
  auto nn = q2.lookup(std::vector<double>{0.9, 0.1});
  CHECK(nn == std::vector<double>{1, 0});
  // Equal cosines: lowest slot wins.
  CHECK(q2.lookup_index(std::vector<double>{1, 1}) == 0);

  NNQueue f(3, 2);
  f.push(std::vector<double>{1, 0});
  f.push(std::vector<double>{0, 1});
  f.push(std::vector<double>{-1, 0});
  f.push(std::vector<double>{0, -1});
  CHECK(f.fill() == 3);
  for (int i = 0; i < 3; ++i) CHECK_FALSE(f.slot(i)[0] == 1.0);
  CHECK(f.slot(0)[1] == -1.0);

  CHECK_THROWS_AS(q.push(std::vector<double>{0, 0}), NumericError);
  CHECK_THROWS_AS(q.push(std::vector<double>{1, 0, 0}), ShapeError);
  CHECK_THROWS_AS(NNQueue(0, 2), InvalidArgument);
}

TEST_CASE("queue invariants under random pushes") {
  Rng rng(99);
  NNQueue q(7, 5);
  for (int n = 0; n < 50; ++n) {
    std::vector<double> v(5);
    for (auto& x : v) x = rng.normal() * std::pow(10.0, rng.uniform(-3, 3));
    q.push(v);
    CHECK(q.fill() == std::min(n + 1, 7));
    for (int i = 0; i < q.fill(); ++i) {
      double s = 0.0;
      for (double x : q.slot(i)) s += x * x;
      CHECK(std::abs(std::sqrt(s) - 1.0) <= 1e-5);
    }
  }
  NNQueue r(7, 5);
  r.restore(q.storage(), q.fill(), q.head());
  CHECK(r.storage() == q.storage());
  CHECK_THROWS_AS(r.restore(std::vector<double>(35, 0.0), 7, 0), FormatError);
}

TEST_CASE("full loss gradients match finite differences") {
  for (auto variant : {Variant::simsiam, Variant::byol, Variant::nnsiam}) {
    for (bool conv : {false, true}) {
      const std::string vname = to_string(variant);
      CAPTURE(vname);
      CAPTURE(conv);
      auto cfg = conv ? tiny_conv(variant) : tiny_mlp(variant);
      cfg.queue_capacity = 5;
      SiameseModel<double> model(cfg, 29);
      const Shape s = conv ? Shape{6, 2, 4, 4} : Shape{6, 1, 2, 2};
      auto x1 = random_tensor<double>(s, 31);
      auto x2 = random_tensor<double>(s, 32);
      if (variant == Variant::byol) {
        for (auto* p : model.target().trainable())
          for (auto& v : p->value.data()) v *= 0.9;
      }
      if (variant == Variant::nnsiam) {
        Graph<double> warm;
        siamese_loss(model, warm, random_tensor<double>(s, 33), random_tensor<double>(s, 34));
        REQUIRE(model.queue().full());
      }
      auto params = model.online().trainable();
      // Analytic gradients of the library loss.
      model.online().zero_grad();
      Graph<double> base;
      auto r = siamese_loss(model, base, x1, x2, false);
      const auto t1 = base.value(r.t1);
      const auto t2 = base.value(r.t2);
      base.backward(r.loss);
      std::vector<Tensor<double>> lib_grads;
      for (auto* p : params) lib_grads.push_back(p->grad);

      // Oracle loss with the targets frozen as constants: stop-gradient means
      // exactly this, and finite differences can then see the same function.
      auto frozen = [&](Graph<double>& g) {
        auto p1 = model.predict(g, model.project(g, model.encode(g, g.input(x1))));
        auto p2 = model.predict(g, model.project(g, model.encode(g, g.input(x2))));
        auto d12 = negative_cosine(g, p1, g.input(t2));
        auto d21 = negative_cosine(g, p2, g.input(t1));
        return g.add(g.scale(d12, 0.5), g.scale(d21, 0.5));
      };
      {
        model.online().zero_grad();
        Graph<double> fg;
        auto l = frozen(fg);
        CHECK(fg.value(l).item() == doctest::Approx(base.value(r.loss).item()).epsilon(1e-13));
        fg.backward(l);
        for (std::size_t k = 0; k < params.size(); ++k)
          for (std::int64_t i = 0; i < params[k]->grad.size(); ++i)
            REQUIRE(params[k]->grad[i] == doctest::Approx(lib_grads[k][i]).epsilon(1e-12));
      }
      auto res = grad_check(frozen, params, 1e-6, 10000, 0, 1e-9);
      CAPTURE(res.worst_param);
      CAPTURE(res.worst_analytic);
      CAPTURE(res.worst_numeric);
      CHECK(res.max_rel_error < 1e-4);
      CAPTURE(res.zero_coords);
      CHECK(res.coords_checked - res.zero_coords > 100);
      // The last projector BN shift only moves z by a per-feature constant,
      // which the predictor's first BN removes; those must read as zero.
      CHECK(res.zero_coords >= 12);
    }
  }
}
