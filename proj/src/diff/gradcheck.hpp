// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "diff/graph.hpp"

namespace ncsl::diff {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t zero_coords = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Builds a fresh float64 graph with `build` (which must return the scalar
// loss), backpropagates once, then compares each parameter coordinate with a
// central difference of step eps. Above max_coords coordinates a random
// subsample of that size is checked. Relative error per coordinate is
// |a - n| / max(1e-12, |a| + |n|). Coordinates with |a| + |n| < zero_tol are
// taken as structurally zero (finite-difference roundoff only) and counted in
// zero_coords instead.
GradCheckResult grad_check(const std::function<NodeRef(Graph<double>&)>& build,
                           std::span<Parameter<double>* const> params, double eps = 1e-5,
                           std::size_t max_coords = 10000, std::uint64_t seed = 0,
                           double zero_tol = 0.0);

}  // namespace ncsl::diff
