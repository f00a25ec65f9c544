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

// Informativeness of a candidate query against posterior samples.

#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "batchpref/belief.hpp"
#include "batchpref/types.hpp"

namespace batchpref {

struct QueryScore {
  double entropy_bits = 0.0;
  double volume_removal = 0.0;
  double mean_prob_positive = 0.0;
  // Mutual information between answer and w: H(mean p) - entropy_bits.
  double information_gain_bits = 0.0;
  // Volume removal with the sampler's min(1, exp) likelihood:
  // min over I of mean(1 - min(1, exp(I w.psi))). Zero at psi = 0.
  double clipped_volume_removal = 0.0;
};

enum class ScoreKind { kEntropy, kVolume, kInformationGain, kClippedVolume };

std::string_view to_string(ScoreKind kind);
ScoreKind score_kind_from_string(std::string_view name);

// Binary entropy, in bits, of a logistic answer with the given margin.
// Written in terms of the margin so it stays finite for |margin| -> inf.
template <typename Scalar>
Scalar logistic_entropy_bits(Scalar margin) {
  using std::abs;
  using std::exp;
  using std::log1p;
  const Scalar z = abs(margin);
  const Scalar tail = exp(-z);                        // e^{-|x|}
  const Scalar p_minor = tail / (Scalar(1) + tail);   // sigma(-|x|)
  const Scalar nats = log1p(tail) + p_minor * z;
  return nats / std::numbers::ln2_v<Scalar>;
}

namespace detail {

template <typename DerivedP, typename DerivedS>
void check_score_inputs(const Eigen::MatrixBase<DerivedP>& psi,
                        const Eigen::MatrixBase<DerivedS>& samples) {
  require(samples.rows() > 0, "score: empty posterior sample set");
  require(psi.size() == samples.cols(), "score: dimension mismatch");
}

}  // namespace detail

// min(p, 1 - p) with p the posterior-averaged P(+1 | w, psi). Range [0, 0.5].
template <typename DerivedP, typename DerivedS>
typename DerivedS::Scalar volume_removal_score(
    const Eigen::MatrixBase<DerivedP>& psi,
    const Eigen::MatrixBase<DerivedS>& samples) {
  using Scalar = typename DerivedS::Scalar;
  detail::check_score_inputs(psi, samples);
  Scalar total(0);
  for (Eigen::Index m = 0; m < samples.rows(); ++m)
    total += likelihood(Label::kPositive, samples.row(m).transpose(), psi);
  const Scalar p = total / static_cast<Scalar>(samples.rows());
  return std::min(p, Scalar(1) - p);
}

template <typename Scalar>
Scalar binary_entropy_bits(Scalar p) {
  using std::log2;
  if (p <= Scalar(0) || p >= Scalar(1)) return Scalar(0);
  return -(p * log2(p) + (Scalar(1) - p) * log2(Scalar(1) - p));
}

// Posterior average of the answer's binary entropy H(I | w), in bits.
template <typename DerivedP, typename DerivedS>
typename DerivedS::Scalar conditional_entropy_score(
    const Eigen::MatrixBase<DerivedP>& psi,
    const Eigen::MatrixBase<DerivedS>& samples) {
  using Scalar = typename DerivedS::Scalar;
  detail::check_score_inputs(psi, samples);
  Scalar total(0);
  for (Eigen::Index m = 0; m < samples.rows(); ++m)
    total += logistic_entropy_bits<Scalar>(samples.row(m).dot(psi.transpose()));
  return total / static_cast<Scalar>(samples.rows());
}

template <typename DerivedP>
double volume_removal_score(const Eigen::MatrixBase<DerivedP>& psi,
                            const PosteriorSamples& posterior) {
  return volume_removal_score(psi, posterior.samples);
}

template <typename DerivedP>
double conditional_entropy_score(const Eigen::MatrixBase<DerivedP>& psi,
                                 const PosteriorSamples& posterior) {
  return conditional_entropy_score(psi, posterior.samples);
}

// One score per pool row (pool_psi is K x d), order-aligned with the pool.
std::vector<QueryScore> score_pool(const PointSet& pool_psi,
                                   const PosteriorSamples& posterior);

double ranking_value(const QueryScore& score, ScoreKind kind);
std::vector<double> ranking_values(const std::vector<QueryScore>& scores,
                                   ScoreKind kind);

}  // namespace batchpref
