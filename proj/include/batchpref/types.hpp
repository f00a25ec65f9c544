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

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace batchpref {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Row-per-item storage: posterior samples, pool psi vectors, point sets.
template <typename Scalar>
using RowMatrixX =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using WeightVector = VectorX<double>;
using FeatureVector = VectorX<double>;
using PointSet = RowMatrixX<double>;

using Seed = std::uint64_t;

// Precondition on an operation's inputs was not met.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A configuration record is internally inconsistent.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Metric requested on inputs where it has no value (e.g. cosine of zero).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

// Preference answer. +1: the first trajectory of the pair is preferred.
enum class Label : int { kPositive = 1, kNegative = -1 };

inline int to_int(Label l) { return static_cast<int>(l); }

inline Label label_from_int(int v) {
  if (v == 1) return Label::kPositive;
  if (v == -1) return Label::kNegative;
  throw ContractViolation("label must be +1 or -1, got " + std::to_string(v));
}

inline Label flip(Label l) {
  return l == Label::kPositive ? Label::kNegative : Label::kPositive;
}

// SplitMix64 finalizer; derives independent stream seeds from (seed, salt).
inline Seed derive_seed(Seed seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace batchpref
