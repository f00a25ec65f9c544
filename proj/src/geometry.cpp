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

#include "batchpref/geometry.hpp"

#include <algorithm>
#include <limits>
#include <iterator>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace batchpref {

namespace {

// Nearest medoid per point; a medoid always belongs to its own cluster.
double assign(const Eigen::MatrixXd& dist, const std::vector<int>& medoids,
              std::vector<int>& assignment) {
  const auto n = static_cast<int>(dist.rows());
  assignment.assign(static_cast<std::size_t>(n), -1);
  double objective = 0.0;
  for (std::size_t c = 0; c < medoids.size(); ++c)
    assignment[static_cast<std::size_t>(medoids[c])] = static_cast<int>(c);
  for (int i = 0; i < n; ++i) {
    if (assignment[static_cast<std::size_t>(i)] >= 0) continue;
    int best = 0;
    for (std::size_t c = 1; c < medoids.size(); ++c) {
      if (dist(i, medoids[c]) < dist(i, medoids[static_cast<std::size_t>(best)]))
        best = static_cast<int>(c);
    }
    assignment[static_cast<std::size_t>(i)] = best;
    objective += dist(i, medoids[static_cast<std::size_t>(best)]);
  }
  return objective;
}

// `medoids` sorted ascending, with `assignment` relabeled to match.
void sort_medoids(std::vector<int>& medoids, std::vector<int>& assignment) {
  std::vector<int> order(medoids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return medoids[a] < medoids[b]; });
  std::vector<int> relabel(medoids.size());
  std::vector<int> sorted(medoids.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    relabel[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos);
    sorted[pos] = medoids[static_cast<std::size_t>(order[pos])];
  }
  for (int& a : assignment) a = relabel[static_cast<std::size_t>(a)];
  medoids = std::move(sorted);
}

// Voronoi iteration from `medoids` to a fixed point.
KMedoidsResult voronoi_iteration(const Eigen::MatrixXd& dist,
                                 std::vector<int> medoids) {
  const auto n = static_cast<int>(dist.rows());
  std::sort(medoids.begin(), medoids.end());
  KMedoidsResult result;
  double objective = assign(dist, medoids, result.assignment);
  result.objective_trace.push_back(objective);

  std::set<std::vector<int>> seen{medoids};
  constexpr int kMaxIterations = 1000;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    // Recompute each cluster's medoid: the member of least summed distance
    // to the other members.
    std::vector<int> updated = medoids;
    for (std::size_t c = 0; c < medoids.size(); ++c) {
      int best = medoids[c];
      double best_cost = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (result.assignment[static_cast<std::size_t>(i)] != static_cast<int>(c))
          continue;
        double cost = 0.0;
        for (int j = 0; j < n; ++j) {
          if (result.assignment[static_cast<std::size_t>(j)] == static_cast<int>(c))
            cost += dist(i, j);
        }
        if (cost < best_cost) {
          best_cost = cost;
          best = i;
        }
      }
      updated[c] = best;
    }
    std::vector<int> updated_assignment;
    std::sort(updated.begin(), updated.end());
    const double updated_objective = assign(dist, updated, updated_assignment);
    ++result.iterations;
    // Fixed point, or no strict improvement (guards against tie cycles).
    if (updated == medoids || updated_objective > objective ||
        seen.count(updated) > 0) {
      result.objective_trace.push_back(objective);
      break;
    }
    seen.insert(updated);
    medoids = std::move(updated);
    result.assignment = std::move(updated_assignment);
    objective = updated_objective;
    result.objective_trace.push_back(objective);
  }

  sort_medoids(medoids, result.assignment);
  result.medoids = std::move(medoids);
  result.objective = objective;
  return result;
}

// Greedy BUILD start: the 1-medoid optimum, then repeatedly the point that
// lowers the total distance the most.
std::vector<int> build_start(const Eigen::MatrixXd& dist, int k) {
  const auto n = static_cast<int>(dist.rows());
  std::vector<double> nearest(static_cast<std::size_t>(n),
                              std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::vector<int> medoids;
  while (static_cast<int>(medoids.size()) < k) {
    int pick = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n; ++c) {
      if (chosen[static_cast<std::size_t>(c)]) continue;
      double total = 0.0;
      for (int i = 0; i < n; ++i)
        total += std::min(nearest[static_cast<std::size_t>(i)], dist(i, c));
      if (total < best) {
        best = total;
        pick = c;
      }
    }
    medoids.push_back(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    for (int i = 0; i < n; ++i)
      nearest[static_cast<std::size_t>(i)] =
          std::min(nearest[static_cast<std::size_t>(i)], dist(i, pick));
  }
  return medoids;
}

}  // namespace

KMedoidsResult kmedoids(const PointSet& points, int k, Seed seed) {
  return kmedoids(pairwise_distances(points), k, seed);
}

KMedoidsResult kmedoids(const Eigen::MatrixXd& dist, int k, Seed seed) {
  const auto n = static_cast<int>(dist.rows());
  require(n >= 1, "kmedoids: empty point set");
  require(k >= 1 && k <= n, "kmedoids: k must lie in [1, N]");
  require(dist.cols() == n, "kmedoids: distance matrix must be square");

  KMedoidsResult best = voronoi_iteration(dist, build_start(dist, k));
  if (k == n) return best;

  // A few seeded restarts; the BUILD run wins ties.
  std::mt19937_64 rng(seed);
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  for (int restart = 0; restart < kKMedoidsRestarts; ++restart) {
    std::vector<int> start;
    std::sample(all.begin(), all.end(), std::back_inserter(start), k, rng);
    KMedoidsResult r = voronoi_iteration(dist, std::move(start));
    if (r.objective < best.objective) best = std::move(r);
  }
  return best;
}

bool in_convex_hull(const PointSet& others,
                    const Eigen::Ref<const Eigen::VectorXd>& target,
                    double tolerance) {
  const auto n = static_cast<int>(others.rows());
  if (n == 0) return false;
  const auto d = static_cast<int>(others.cols());
  require(target.size() == d, "in_convex_hull: dimension mismatch");

  // Phase-one simplex for {lambda >= 0 : others^T lambda = target,
  // sum lambda = 1} with one artificial per row. Tableau columns:
  // [lambda (n) | artificial (m) | rhs].
  const int m = d + 1;
  const int cols = n + m + 1;
  Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m + 1, cols);
  for (int r = 0; r < d; ++r) {
    for (int j = 0; j < n; ++j) tab(r, j) = others(j, r);
    tab(r, cols - 1) = target(r);
  }
  for (int j = 0; j < n; ++j) tab(d, j) = 1.0;
  tab(d, cols - 1) = 1.0;
  for (int r = 0; r < m; ++r) {
    if (tab(r, cols - 1) < 0.0) tab.row(r) *= -1.0;
    tab(r, n + r) = 1.0;
  }
  const double scale = std::max(1.0, tab.col(cols - 1).head(m).cwiseAbs().maxCoeff());
  // Objective row holds reduced costs of sum(artificials); last entry is
  // minus the current objective value.
  for (int r = 0; r < m; ++r) tab.row(m) -= tab.row(r);
  for (int r = 0; r < m; ++r) tab(m, n + r) = 0.0;

  std::vector<int> basis(static_cast<std::size_t>(m));
  std::iota(basis.begin(), basis.end(), n);

  constexpr double kPivotTol = 1e-12;
  const int max_iterations = 50 * (n + m) + 100;
  for (int iter = 0; iter < max_iterations; ++iter) {
    // Bland's rule: lowest-index improving column, lowest-index basic row
    // among ratio ties.
    int enter = -1;
    for (int j = 0; j < n + m; ++j) {
      if (tab(m, j) < -kPivotTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return -tab(m, cols - 1) <= tolerance * scale;

    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int r = 0; r < m; ++r) {
      if (tab(r, enter) > kPivotTol) {
        const double ratio = tab(r, cols - 1) / tab(r, enter);
        if (ratio < best_ratio - 1e-15 ||
            (ratio <= best_ratio + 1e-15 && leave >= 0 &&
             basis[static_cast<std::size_t>(r)] <
                 basis[static_cast<std::size_t>(leave)])) {
          best_ratio = ratio;
          leave = r;
        }
      }
    }
    // Unbounded phase-one is impossible (objective >= 0); treat as converged.
    if (leave < 0) return -tab(m, cols - 1) <= tolerance * scale;

    tab.row(leave) /= tab(leave, enter);
    for (int r = 0; r <= m; ++r) {
      if (r != leave && tab(r, enter) != 0.0)
        tab.row(r) -= tab(r, enter) * tab.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }
  throw std::runtime_error("in_convex_hull: simplex iteration limit reached");
}

std::vector<int> hull_vertices(const PointSet& points) {
  const auto n = static_cast<int>(points.rows());
  require(n >= 1, "hull_vertices: empty point set");
  std::vector<int> vertices;
  for (int i = 0; i < n; ++i) {
    bool duplicate_of_lower = false;
    std::vector<Eigen::Index> others;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (points.row(j) == points.row(i)) {
        if (j < i) duplicate_of_lower = true;
        continue;
      }
      others.push_back(j);
    }
    if (duplicate_of_lower) continue;
    PointSet rest(static_cast<Eigen::Index>(others.size()), points.cols());
    for (std::size_t r = 0; r < others.size(); ++r)
      rest.row(static_cast<Eigen::Index>(r)) = points.row(others[r]);
    if (!in_convex_hull(rest, points.row(i).transpose())) vertices.push_back(i);
  }
  return vertices;
}

}  // namespace batchpref
