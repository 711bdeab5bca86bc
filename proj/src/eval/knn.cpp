// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "eval/knn.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "common/error.hpp"

namespace ncsl::eval {

namespace {

std::vector<double> row_norms(std::span<const float> m, std::int64_t dim, const char* what) {
  const std::int64_t n = static_cast<std::int64_t>(m.size()) / dim;
  std::vector<double> out(n);
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < dim; ++j) s += static_cast<double>(m[i * dim + j]) * m[i * dim + j];
    out[i] = std::sqrt(s);
    NCSL_CHECK(out[i] >= 1e-12 && std::isfinite(out[i]), NumericError, "knn: ", what, " row ", i,
               " has zero or non-finite norm");
  }
  return out;
}

struct Neighbour {
  double sim;
  std::int64_t index;
};

// For every query, the max_k nearest training rows in rank order.
std::vector<std::vector<Neighbour>> neighbours(std::span<const float> train, std::span<const float> queries,
                                               std::int64_t dim, int max_k) {
  const auto tn = row_norms(train, dim, "train");
  const auto qn = row_norms(queries, dim, "query");
  const std::int64_t nt = static_cast<std::int64_t>(tn.size()), nq = static_cast<std::int64_t>(qn.size());
  auto closer = [](const Neighbour& a, const Neighbour& b) {
    return a.sim != b.sim ? a.sim > b.sim : a.index < b.index;
  };
  std::vector<std::vector<Neighbour>> out(nq);
  std::vector<Neighbour> all(nt);
  for (std::int64_t q = 0; q < nq; ++q) {
    const float* qr = queries.data() + q * dim;
    for (std::int64_t t = 0; t < nt; ++t) {
      const float* tr = train.data() + t * dim;
      double dot = 0.0;
      for (std::int64_t j = 0; j < dim; ++j) dot += static_cast<double>(qr[j]) * tr[j];
      all[t] = {dot / (qn[q] * tn[t]), t};
    }
    std::partial_sort(all.begin(), all.begin() + max_k, all.end(), closer);
    out[q].assign(all.begin(), all.begin() + max_k);
  }
  return out;
}

int vote(const std::vector<Neighbour>& nb, int k, std::span<const int> labels) {
  std::map<int, std::pair<int, double>> tally;  // label -> (count, summed sim)
  for (int i = 0; i < k; ++i) {
    auto& t = tally[labels[nb[i].index]];
    ++t.first;
    t.second += nb[i].sim;
  }
  int best = -1;
  std::pair<int, double> best_t{-1, 0.0};
  for (const auto& [label, t] : tally) {
    // Ascending label order, so strict comparisons keep the lowest id on ties.
    if (t.first > best_t.first || (t.first == best_t.first && t.second > best_t.second)) {
      best = label;
      best_t = t;
    }
  }
  return best;
}

void check_inputs(std::span<const float> train, std::span<const int> train_labels, std::span<const float> q,
                  std::int64_t dim) {
  NCSL_CHECK(dim >= 1, InvalidArgument, "knn: dim must be >= 1");
  NCSL_CHECK(train.size() % dim == 0 && q.size() % dim == 0, ShapeError, "knn: matrix sizes are not multiples of dim ",
             dim);
  NCSL_CHECK(static_cast<std::int64_t>(train.size()) / dim == static_cast<std::int64_t>(train_labels.size()),
             ShapeError, "knn: ", train.size() / dim, " training rows but ", train_labels.size(), " labels");
  NCSL_CHECK(!train_labels.empty(), InvalidArgument, "knn: empty training set");
}

}  // namespace

std::vector<int> default_k_candidates() { return {1, 2, 5, 10, 20, 50, 100, 200}; }

std::vector<int> knn_predict(std::span<const float> train, std::span<const int> train_labels,
                             std::span<const float> queries, std::int64_t dim, int k) {
  check_inputs(train, train_labels, queries, dim);
  NCSL_CHECK(k >= 1 && k <= static_cast<int>(train_labels.size()), InvalidArgument, "knn: k=", k, " outside [1, ",
             train_labels.size(), "]");
  const auto nb = neighbours(train, queries, dim, k);
  std::vector<int> out;
  out.reserve(nb.size());
  for (const auto& n : nb) out.push_back(vote(n, k, train_labels));
  return out;
}

KnnResult knn_evaluate(std::span<const float> train, std::span<const int> train_labels, std::span<const float> val,
                       std::span<const int> val_labels, std::int64_t dim, std::vector<int> k_candidates) {
  check_inputs(train, train_labels, val, dim);
  NCSL_CHECK(static_cast<std::int64_t>(val.size()) / dim == static_cast<std::int64_t>(val_labels.size()),
             ShapeError, "knn: ", val.size() / dim, " validation rows but ", val_labels.size(), " labels");
  NCSL_CHECK(!val_labels.empty(), InvalidArgument, "knn: empty validation set");
  NCSL_CHECK(!k_candidates.empty(), InvalidArgument, "knn: no k candidates");
  std::sort(k_candidates.begin(), k_candidates.end());
  k_candidates.erase(std::unique(k_candidates.begin(), k_candidates.end()), k_candidates.end());
  NCSL_CHECK(k_candidates.front() >= 1, InvalidArgument, "knn: k candidates must be >= 1");
  const int nt = static_cast<int>(train_labels.size());
  std::erase_if(k_candidates, [&](int k) { return k > nt; });
  NCSL_CHECK(!k_candidates.empty(), InvalidArgument, "knn: every k candidate exceeds the ", nt, " training rows");

  const auto nb = neighbours(train, val, dim, k_candidates.back());
  KnnResult r;
  r.ks = k_candidates;
  for (int k : k_candidates) {
    std::int64_t correct = 0;
    for (std::size_t q = 0; q < nb.size(); ++q) correct += vote(nb[q], k, train_labels) == val_labels[q];
    const double acc = static_cast<double>(correct) / static_cast<double>(nb.size());
    r.per_k_accuracy.push_back(acc);
    if (acc > r.accuracy || r.best_k == 0) {
      r.accuracy = acc;
      r.best_k = k;
    }
  }
  return r;
}

}  // namespace ncsl::eval
