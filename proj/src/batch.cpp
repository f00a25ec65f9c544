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

#include "batchpref/batch.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "batchpref/geometry.hpp"

namespace batchpref {

namespace {

void check_sizes(std::size_t pool_size, int b, int B) {
  require(b >= 1, "batch: b must be >= 1");
  require(b <= B, "batch: b must not exceed B");
  require(static_cast<std::size_t>(B) <= pool_size,
          "batch: B must not exceed the pool size");
}

PointSet gather_rows(const PointSet& pool_psi, const std::vector<int>& rows) {
  PointSet out(static_cast<Eigen::Index>(rows.size()), pool_psi.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = pool_psi.row(rows[r]);
  return out;
}

// Descending score, then ascending index.
void order_by_score(std::vector<int>& indices, std::span<const double> scores) {
  std::sort(indices.begin(), indices.end(), [&](int a, int b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
}

SelectedBatch make_batch(std::vector<int> indices, std::span<const double> scores,
                         Strategy strategy) {
  order_by_score(indices, scores);
  SelectedBatch out;
  out.strategy = strategy;
  for (int i : indices) out.scores.push_back(scores[static_cast<std::size_t>(i)]);
  out.indices = std::move(indices);
  return out;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kGreedy:
      return "greedy";
    case Strategy::kMedoids:
      return "medoids";
    case Strategy::kBoundaryMedoids:
      return "boundary_medoids";
    case Strategy::kSuccessiveElimination:
      return "successive_elimination";
    case Strategy::kRandom:
      return "random";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view name) {
  std::string norm(name);
  std::replace(norm.begin(), norm.end(), '-', '_');
  for (Strategy s : all_strategies()) {
    if (to_string(s) == norm) return s;
  }
  throw ConfigurationError("unknown strategy '" + std::string(name) + "'");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> kAll = {
      Strategy::kGreedy, Strategy::kMedoids, Strategy::kBoundaryMedoids,
      Strategy::kSuccessiveElimination, Strategy::kRandom};
  return kAll;
}

int score_argmax(std::span<const double> scores) {
  require(!scores.empty(), "score_argmax: empty scores");
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[static_cast<std::size_t>(best)])
      best = static_cast<int>(i);
  }
  return best;
}

std::vector<int> select_greedy(std::span<const double> scores, int b) {
  require(b >= 0, "select_greedy: b must be >= 0");
  require(static_cast<std::size_t>(b) <= scores.size(),
          "select_greedy: b exceeds pool size");
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto by_score = [&](int a, int c) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sc = scores[static_cast<std::size_t>(c)];
    if (sa != sc) return sa > sc;
    return a < c;
  };
  std::partial_sort(idx.begin(), idx.begin() + b, idx.end(), by_score);
  idx.resize(static_cast<std::size_t>(b));
  return idx;
}

SelectedBatch select_medoids(const PointSet& pool_psi,
                             std::span<const double> scores, int b, int B,
                             Seed seed) {
  require(pool_psi.rows() == static_cast<Eigen::Index>(scores.size()),
          "select_medoids: pool and scores disagree in size");
  check_sizes(scores.size(), b, B);
  const std::vector<int> pre = select_greedy(scores, B);
  const KMedoidsResult clusters = kmedoids(gather_rows(pool_psi, pre), b, seed);
  std::vector<int> chosen;
  for (int m : clusters.medoids) chosen.push_back(pre[static_cast<std::size_t>(m)]);
  return make_batch(std::move(chosen), scores, Strategy::kMedoids);
}

SelectedBatch select_boundary_medoids(const PointSet& pool_psi,
                                      std::span<const double> scores, int b,
                                      int B, Seed seed) {
  require(pool_psi.rows() == static_cast<Eigen::Index>(scores.size()),
          "select_boundary_medoids: pool and scores disagree in size");
  check_sizes(scores.size(), b, B);
  const std::vector<int> pre = select_greedy(scores, B);
  const PointSet pre_points = gather_rows(pool_psi, pre);
  const std::vector<int> boundary = hull_vertices(pre_points);

  std::vector<int> chosen;
  if (static_cast<int>(boundary.size()) >= b) {
    PointSet boundary_points(static_cast<Eigen::Index>(boundary.size()),
                             pool_psi.cols());
    for (std::size_t r = 0; r < boundary.size(); ++r)
      boundary_points.row(static_cast<Eigen::Index>(r)) =
          pre_points.row(boundary[r]);
    const KMedoidsResult clusters = kmedoids(boundary_points, b, seed);
    for (int m : clusters.medoids)
      chosen.push_back(pre[static_cast<std::size_t>(boundary[static_cast<std::size_t>(m)])]);
  } else {
    // Too few hull vertices: keep them all and top up from the preselection
    // in score order.
    std::vector<bool> taken(pre.size(), false);
    for (int v : boundary) {
      chosen.push_back(pre[static_cast<std::size_t>(v)]);
      taken[static_cast<std::size_t>(v)] = true;
    }
    for (std::size_t r = 0; r < pre.size() && static_cast<int>(chosen.size()) < b; ++r) {
      if (!taken[r]) chosen.push_back(pre[r]);
    }
  }
  return make_batch(std::move(chosen), scores, Strategy::kBoundaryMedoids);
}

SelectedBatch select_successive_elimination(const PointSet& pool_psi,
                                            std::span<const double> scores,
                                            int b, int B, Seed /*seed*/) {
  require(pool_psi.rows() == static_cast<Eigen::Index>(scores.size()),
          "select_successive_elimination: pool and scores disagree in size");
  check_sizes(scores.size(), b, B);
  std::vector<int> alive = select_greedy(scores, B);
  // Scan pairs in ascending pool-index order so the first strict minimum is
  // the lexicographically smallest closest pair.
  std::sort(alive.begin(), alive.end());
  const Eigen::MatrixXd dist = pairwise_distances(gather_rows(pool_psi, alive));
  std::vector<int> pos(alive.size());
  std::iota(pos.begin(), pos.end(), 0);

  std::vector<std::pair<int, int>> trace;
  trace.reserve(static_cast<std::size_t>(B - b));
  for (int round = 0; round < B - b; ++round) {
    std::size_t best_i = 0;
    std::size_t best_j = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pos.size(); ++i) {
      for (std::size_t j = i + 1; j < pos.size(); ++j) {
        const double d = dist(pos[i], pos[j]);
        if (d < best) {
          best = d;
          best_i = i;
          best_j = j;
        }
      }
    }
    const int pi = alive[static_cast<std::size_t>(pos[best_i])];
    const int pj = alive[static_cast<std::size_t>(pos[best_j])];
    const double si = scores[static_cast<std::size_t>(pi)];
    const double sj = scores[static_cast<std::size_t>(pj)];
    // pi < pj; on equal scores the higher index goes.
    const bool drop_i = si < sj;
    trace.emplace_back(drop_i ? pi : pj, drop_i ? pj : pi);
    pos.erase(pos.begin() + static_cast<std::ptrdiff_t>(drop_i ? best_i : best_j));
  }

  std::vector<int> survivors;
  for (int p : pos) survivors.push_back(alive[static_cast<std::size_t>(p)]);
  SelectedBatch out =
      make_batch(std::move(survivors), scores, Strategy::kSuccessiveElimination);
  out.elimination_trace = std::move(trace);
  return out;
}

std::vector<int> select_random(int pool_size, int b, Seed seed) {
  require(b >= 0 && b <= pool_size, "select_random: b must lie in [0, pool size]");
  std::vector<int> idx(static_cast<std::size_t>(pool_size));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < b; ++i) {
    std::uniform_int_distribution<int> pick(i, pool_size - 1);
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(b));
  return idx;
}

SelectedBatch select_batch(const BatchRequest& request, const PointSet& pool_psi,
                           std::span<const double> scores) {
  switch (request.strategy) {
    case Strategy::kGreedy: {
      check_sizes(scores.size(), request.b, request.B);
      return make_batch(select_greedy(scores, request.b), scores,
                        Strategy::kGreedy);
    }
    case Strategy::kMedoids:
      return select_medoids(pool_psi, scores, request.b, request.B, request.seed);
    case Strategy::kBoundaryMedoids:
      return select_boundary_medoids(pool_psi, scores, request.b, request.B,
                                     request.seed);
    case Strategy::kSuccessiveElimination:
      return select_successive_elimination(pool_psi, scores, request.b,
                                           request.B, request.seed);
    case Strategy::kRandom: {
      SelectedBatch out;
      out.strategy = Strategy::kRandom;
      out.indices = select_random(static_cast<int>(scores.size()), request.b,
                                  request.seed);
      for (int i : out.indices)
        out.scores.push_back(scores[static_cast<std::size_t>(i)]);
      return out;
    }
  }
  throw ConfigurationError("select_batch: unhandled strategy");
}

void to_json(nlohmann::json& j, const SelectedBatch& batch) {
  j = {{"indices", batch.indices},
       {"scores", batch.scores},
       {"strategy", std::string(to_string(batch.strategy))}};
  if (batch.elimination_trace) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& [removed, kept] : *batch.elimination_trace)
      trace.push_back({removed, kept});
    j["trace"] = std::move(trace);
  }
}

void from_json(const nlohmann::json& j, SelectedBatch& batch) {
  batch.indices = j.at("indices").get<std::vector<int>>();
  batch.scores = j.at("scores").get<std::vector<double>>();
  batch.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  batch.elimination_trace.reset();
  if (j.contains("trace")) {
    std::vector<std::pair<int, int>> trace;
    for (const auto& step : j.at("trace"))
      trace.emplace_back(step.at(0).get<int>(), step.at(1).get<int>());
    batch.elimination_trace = std::move(trace);
  }
}

}  // namespace batchpref
