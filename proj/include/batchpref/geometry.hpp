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

// Diversity primitives over psi-space point sets (one point per row).

#pragma once

#include <vector>

#include "batchpref/types.hpp"

namespace batchpref {

// N x N Euclidean distance matrix.
template <typename Derived>
MatrixX<typename Derived::Scalar> pairwise_distances(
    const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = points.rows();
  MatrixX<Scalar> dist = MatrixX<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar d = (points.row(i) - points.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

inline constexpr int kKMedoidsRestarts = 8;

struct KMedoidsResult {
  std::vector<int> medoids;     // ascending point indices
  std::vector<int> assignment;  // per point: position in `medoids`
  double objective = 0.0;       // sum of point-to-medoid distances
  int iterations = 0;
  // Objective after initialization and after every Voronoi iteration.
  std::vector<double> objective_trace;
};

// Voronoi-iteration k-medoids with farthest-first initialization. Ties go to
// the lowest index. `seed` is accepted for interface stability; the
// initialization is fully deterministic and does not consume it.
KMedoidsResult kmedoids(const PointSet& points, int k, Seed seed = 0);

// Same, on a precomputed distance matrix (points still needed for the
// centroid used by initialization).
KMedoidsResult kmedoids(const Eigen::MatrixXd& dist, int k, Seed seed = 0);

// Indices (ascending) of the extreme points of conv(points). Among exact
// duplicates only the lowest index can be reported.
std::vector<int> hull_vertices(const PointSet& points);

// True iff `target` is a convex combination of the rows of `others`,
// decided by a phase-one simplex at feasibility tolerance `tolerance`.
bool in_convex_hull(const PointSet& others,
                    const Eigen::Ref<const Eigen::VectorXd>& target,
                    double tolerance = 1e-9);

}  // namespace batchpref
