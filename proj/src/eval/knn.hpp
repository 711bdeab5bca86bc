// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ncsl::eval {

struct KnnResult {
  int best_k = 0;
  double accuracy = 0.0;
  std::vector<int> ks;
  std::vector<double> per_k_accuracy;
};

std::vector<int> default_k_candidates();

// Cosine k-NN classification. Neighbours are ordered by similarity, then by
// lower training index. The vote goes to the most frequent label, then the
// larger summed similarity, then the lower label id. The best k is the one
// with the highest accuracy; ties go to the smaller k. Candidates above
// N_train are dropped (an error if none remain).
KnnResult knn_evaluate(std::span<const float> train, std::span<const int> train_labels,
                       std::span<const float> val, std::span<const int> val_labels, std::int64_t dim,
                       std::vector<int> k_candidates);

// Predicted label of every query row for one k.
std::vector<int> knn_predict(std::span<const float> train, std::span<const int> train_labels,
                             std::span<const float> queries, std::int64_t dim, int k);

}  // namespace ncsl::eval
