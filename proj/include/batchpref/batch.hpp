// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Batch selection over a scored candidate pool.
//
// Every diversity strategy starts from the same greedy preselection of the B
// highest-scoring candidates and then picks b of them: medoids of a b-way
// k-medoids clustering, medoids restricted to convex-hull vertices, or the
// survivors of successive closest-pair elimination. All ties resolve to the
// lowest index.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "batchpref/types.hpp"

namespace batchpref {

enum class Strategy {
  kGreedy,
  kMedoids,
  kBoundaryMedoids,
  kSuccessiveElimination,
  kRandom,
};

std::string_view to_string(Strategy s);
// Accepts snake_case and kebab-case spellings.
Strategy strategy_from_string(std::string_view name);
const std::vector<Strategy>& all_strategies();

struct BatchRequest {
  int b = 10;
  int B = 200;
  Strategy strategy = Strategy::kSuccessiveElimination;
  Seed seed = 0;
};

struct SelectedBatch {
  std::vector<int> indices;  // pool indices, exactly b, distinct
  std::vector<double> scores;
  Strategy strategy = Strategy::kGreedy;
  // (removed, kept) per successive-elimination step.
  std::optional<std::vector<std::pair<int, int>>> elimination_trace;
};

// Indices of the b largest scores, descending; equal scores by index.
std::vector<int> select_greedy(std::span<const double> scores, int b);

SelectedBatch select_medoids(const PointSet& pool_psi,
                             std::span<const double> scores, int b, int B,
                             Seed seed = 0);

SelectedBatch select_boundary_medoids(const PointSet& pool_psi,
                                      std::span<const double> scores, int b,
                                      int B, Seed seed = 0);

SelectedBatch select_successive_elimination(const PointSet& pool_psi,
                                            std::span<const double> scores,
                                            int b, int B, Seed seed = 0);

// b distinct indices drawn uniformly without replacement.
std::vector<int> select_random(int pool_size, int b, Seed seed);

SelectedBatch select_batch(const BatchRequest& request, const PointSet& pool_psi,
                           std::span<const double> scores);

// Index of the largest score, lowest index on ties.
int score_argmax(std::span<const double> scores);

void to_json(nlohmann::json& j, const SelectedBatch& batch);
void from_json(const nlohmann::json& j, SelectedBatch& batch);

}  // namespace batchpref
