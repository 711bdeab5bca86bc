// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "diff/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "common/rng.hpp"

namespace ncsl::diff {

GradCheckResult grad_check(const std::function<NodeRef(Graph<double>&)>& build,
                           std::span<Parameter<double>* const> params, double eps,
                           std::size_t max_coords, std::uint64_t seed, double zero_tol) {
  NCSL_CHECK(eps > 0.0, InvalidArgument, "eps must be positive");
  for (auto* p : params) p->zero_grad();
  {
    Graph<double> g(true, true);
    const auto loss = build(g);
    g.backward(loss);
  }
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k]->value.size(); ++i) coords.emplace_back(k, i);
  if (coords.size() > max_coords) {
    Rng rng(seed);
    rng.shuffle(coords.begin(), coords.end());
    coords.resize(max_coords);
  }
  auto eval = [&] {
    Graph<double> g(true, false);
    const auto loss = build(g);
    const double v = g.value(loss).item();
    NCSL_CHECK(std::isfinite(v), NumericError, "non-finite loss during finite differencing");
    return v;
  };
  GradCheckResult res;
  for (const auto& [k, i] : coords) {
    auto* p = params[k];
    const double orig = p->value[i];
    p->value[i] = orig + eps;
    const double up = eval();
    p->value[i] = orig - eps;
    const double down = eval();
    p->value[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = p->grad[i];
    ++res.coords_checked;
    if (std::abs(analytic) + std::abs(numeric) < zero_tol) {
      ++res.zero_coords;
      continue;
    }
    const double rel =
        std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_param = p->name;
      res.worst_index = i;
      res.worst_analytic = analytic;
      res.worst_numeric = numeric;
    }
  }
  return res;
}

}  // namespace ncsl::diff
