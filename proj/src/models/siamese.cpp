// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "models/siamese.hpp"

#include <cmath>

#include "common/rng.hpp"

namespace ncsl::models {

namespace {

std::vector<int> predictor_widths(const HeadConfig& h) { return {h.predictor_bottleneck, h.proj_dim()}; }

template <class T>
Encoder<T> make_encoder(const ModelConfig& cfg, ParameterSet<T>& ps, Rng& rng) {
  cfg.validate();
  return Encoder<T>(cfg.encoder, ps, "encoder", rng);
}

template <class T>
std::vector<double> row_as_double(const diff::Tensor<T>& t, std::int64_t i) {
  const auto d = t.dim(1);
  std::vector<double> r(static_cast<std::size_t>(d));
  for (std::int64_t j = 0; j < d; ++j) r[j] = static_cast<double>(t.data()[i * d + j]);
  return r;
}

}  // namespace

template <class T>
SiameseModel<T>::SiameseModel(const ModelConfig& cfg, std::uint64_t seed)
    : SiameseModel(cfg, seed, Rng(derive_seed({seed, 0x6d6f64656cULL}))) {}

template <class T>
SiameseModel<T>::SiameseModel(const ModelConfig& cfg, std::uint64_t seed, Rng&& rng)
    : cfg_(cfg),
      encoder_(make_encoder(cfg, online_, rng)),
      projector_(cfg.encoder.repr_dim, cfg.head.projector, false, online_, "projector", rng),
      predictor_(cfg.head.proj_dim(), predictor_widths(cfg.head), true, online_, "predictor", rng) {
  if (cfg_.variant == Variant::byol) {
    Rng scratch(seed);
    target_ = std::make_unique<ParameterSet<T>>();
    target_encoder_ = std::make_unique<Encoder<T>>(cfg_.encoder, *target_, "encoder", scratch);
    target_projector_ =
        std::make_unique<MlpHead<T>>(cfg_.encoder.repr_dim, cfg_.head.projector, false, *target_, "projector", scratch);
    for (auto* p : target_->all()) {
      const auto* src = online_.find(p->name);
      NCSL_CHECK(src != nullptr, StateError, "target parameter ", p->name, " missing from online set");
      p->value = src->value;
    }
  }
  if (cfg_.variant == Variant::nnsiam) queue_.emplace(cfg_.queue_capacity, cfg_.head.proj_dim());
}

template <class T>
ParameterSet<T>& SiameseModel<T>::target() {
  NCSL_CHECK(target_ != nullptr, StateError, "model variant ", to_string(cfg_.variant), " has no target network");
  return *target_;
}

template <class T>
NNQueue& SiameseModel<T>::queue() {
  NCSL_CHECK(queue_.has_value(), StateError, "model variant ", to_string(cfg_.variant), " has no queue");
  return *queue_;
}

template <class T>
diff::Tensor<T> SiameseModel<T>::target_projection(const diff::Tensor<T>& x, bool training) {
  NCSL_CHECK(target_ != nullptr, StateError, "model variant ", to_string(cfg_.variant), " has no target network");
  Graph<T> g(training, false);
  auto z = (*target_projector_)(g, (*target_encoder_)(g, g.input(x)));
  return g.value(z);
}

template <class T>
diff::Tensor<T> SiameseModel<T>::represent(const diff::Tensor<T>& x) {
  Graph<T> g(false, false);
  return g.value(encoder_(g, g.input(x)));
}

template <class T>
double negative_cosine(const diff::Tensor<T>& p, const diff::Tensor<T>& z) {
  NCSL_CHECK(p.rank() == 2 && p.shape() == z.shape(), ShapeError, "negative_cosine: shapes ",
             diff::shape_str(p.shape()), " and ", diff::shape_str(z.shape()), " must be equal [B,d]");
  const auto B = p.dim(0), D = p.dim(1);
  NCSL_CHECK(B >= 1, ShapeError, "negative_cosine: empty batch");
  double total = 0.0;
  for (std::int64_t i = 0; i < B; ++i) {
    double pp = 0.0, zz = 0.0, pz = 0.0;
    for (std::int64_t j = 0; j < D; ++j) {
      const double a = p.data()[i * D + j], b = z.data()[i * D + j];
      pp += a * a;
      zz += b * b;
      pz += a * b;
    }
    NCSL_CHECK(std::sqrt(pp) >= 1e-12, NumericError, "negative_cosine: row ", i, " of p has zero norm");
    NCSL_CHECK(std::sqrt(zz) >= 1e-12, NumericError, "negative_cosine: row ", i, " of z has zero norm");
    total += -pz / (std::sqrt(pp) * std::sqrt(zz));
  }
  return total / static_cast<double>(B);
}

template <class T>
NodeRef negative_cosine(Graph<T>& g, NodeRef p, NodeRef z) {
  return g.scale(g.mean(g.rowdot(g.l2_normalize(p), g.l2_normalize(z))), -1.0);
}

template <class T>
LossTerms<T> siamese_loss(SiameseModel<T>& model, Graph<T>& g, const diff::Tensor<T>& x1,
                          const diff::Tensor<T>& x2, bool update_queue) {
  NCSL_CHECK(x1.shape() == x2.shape(), ShapeError, "siamese_loss: views have shapes ",
             diff::shape_str(x1.shape()), " and ", diff::shape_str(x2.shape()));
  LossTerms<T> out;
  out.z1 = model.project(g, model.encode(g, g.input(x1, "x1")));
  out.z2 = model.project(g, model.encode(g, g.input(x2, "x2")));
  const auto p1 = out.p1 = model.predict(g, out.z1);
  const auto p2 = out.p2 = model.predict(g, out.z2);

  NodeRef t1, t2;
  switch (model.variant()) {
    case Variant::simsiam:
      t1 = g.stop_grad(out.z1);
      t2 = g.stop_grad(out.z2);
      break;
    case Variant::byol:
      NCSL_CHECK(model.has_target(), StateError, "byol loss needs target parameters");
      t1 = g.stop_grad(g.input(model.target_projection(x1, g.training()), "target_z1"));
      t2 = g.stop_grad(g.input(model.target_projection(x2, g.training()), "target_z2"));
      break;
    case Variant::nnsiam: {
      NCSL_CHECK(model.has_queue(), StateError, "nnsiam loss needs a queue");
      auto& q = model.queue();
      auto neighbours = [&](NodeRef z) {
        if (!q.full()) return g.stop_grad(z);
        const auto& zv = g.value(z);
        diff::Tensor<T> nn(zv.shape());
        const auto D = zv.dim(1);
        for (std::int64_t i = 0; i < zv.dim(0); ++i) {
          const auto v = q.lookup(row_as_double(zv, i));
          for (std::int64_t j = 0; j < D; ++j) nn.data()[i * D + j] = static_cast<T>(v[j]);
        }
        return g.stop_grad(g.input(std::move(nn), "nn"));
      };
      t1 = neighbours(out.z1);
      t2 = neighbours(out.z2);
      break;
    }
  }
  out.t1 = t1;
  out.t2 = t2;
  out.term12 = negative_cosine(g, p1, t2);
  out.term21 = negative_cosine(g, p2, t1);
  out.loss = g.add(g.scale(out.term12, 0.5), g.scale(out.term21, 0.5));

  if (model.variant() == Variant::nnsiam && update_queue) {
    auto& q = model.queue();
    for (auto z : {out.z1, out.z2}) {
      const auto& zv = g.value(z);
      for (std::int64_t i = 0; i < zv.dim(0); ++i) q.push(row_as_double(zv, i));
    }
  }
  return out;
}

template class SiameseModel<float>;
template class SiameseModel<double>;
template double negative_cosine<float>(const diff::Tensor<float>&, const diff::Tensor<float>&);
template double negative_cosine<double>(const diff::Tensor<double>&, const diff::Tensor<double>&);
template NodeRef negative_cosine<float>(Graph<float>&, NodeRef, NodeRef);
template NodeRef negative_cosine<double>(Graph<double>&, NodeRef, NodeRef);
template LossTerms<float> siamese_loss<float>(SiameseModel<float>&, Graph<float>&, const diff::Tensor<float>&,
                                              const diff::Tensor<float>&, bool);
template LossTerms<double> siamese_loss<double>(SiameseModel<double>&, Graph<double>&,
                                                const diff::Tensor<double>&, const diff::Tensor<double>&, bool);

}  // namespace ncsl::models
