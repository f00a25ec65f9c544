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

// Belief over linear reward weights w, learned from pairwise preferences.
//
// The human answer model is a logistic (softmax) on the reward difference
// <w, psi>. The sampler targets a uniform prior on the unit ball times the
// product of the clipped likelihood min(1, exp(label * <w, psi>)) over all
// responses, using an adaptive Metropolis random walk.

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "batchpref/types.hpp"

namespace batchpref {

// P(label | w) for one query with feature difference psi.
template <typename DerivedW, typename DerivedP>
typename DerivedW::Scalar likelihood(Label label,
                                     const Eigen::MatrixBase<DerivedW>& w,
                                     const Eigen::MatrixBase<DerivedP>& psi) {
  using Scalar = typename DerivedW::Scalar;
  require(w.size() == psi.size(), "likelihood: dimension mismatch");
  const Scalar margin = static_cast<Scalar>(to_int(label)) * w.dot(psi);
  return Scalar(1) / (Scalar(1) + std::exp(-margin));
}

// log min(1, exp(label * <w, psi>)); the sampler's likelihood term.
template <typename DerivedW, typename DerivedP>
typename DerivedW::Scalar log_likelihood_approx(
    Label label, const Eigen::MatrixBase<DerivedW>& w,
    const Eigen::MatrixBase<DerivedP>& psi) {
  using Scalar = typename DerivedW::Scalar;
  require(w.size() == psi.size(), "log_likelihood_approx: dimension mismatch");
  return std::min(Scalar(0), static_cast<Scalar>(to_int(label)) * w.dot(psi));
}

struct Response {
  FeatureVector psi;
  Label label = Label::kPositive;
};

struct AdaptiveMetropolisConfig {
  int total_steps = 21000;
  int burn_in = 1000;
  int thinning = 20;
  double initial_proposal_scale = 0.1;
  int adaptation_start = 500;
  double regularization_epsilon = 1e-8;

  // Throws ConfigurationError unless the chain can yield `num_samples` draws.
  void validate(int num_samples) const;
};

struct ChainDiagnostics {
  double acceptance_rate = 0.0;
  int chain_length = 0;
};

struct PosteriorSamples {
  RowMatrixX<double> samples;  // M x d, one draw per row
  Seed seed = 0;
  ChainDiagnostics diagnostics;

  int count() const { return static_cast<int>(samples.rows()); }
  int dim() const { return static_cast<int>(samples.cols()); }
};

// Draws `num_samples` weight vectors from the posterior given `responses`.
// The chain starts at `warm_start` when given (and inside the ball), else at
// the origin. Deterministic in (responses, cfg, seed, warm_start).
PosteriorSamples sample_posterior(std::span<const Response> responses, int dim,
                                  int num_samples,
                                  const AdaptiveMetropolisConfig& cfg,
                                  Seed seed,
                                  const std::optional<WeightVector>& warm_start =
                                      std::nullopt);

WeightVector posterior_mean(const PosteriorSamples& posterior);

// Sequential posterior refresh shared by simulated and interactive sessions:
// update k draws with seed derive_seed(seed, k) and warm-starts from the mean
// of update k-1. Replaying the same response prefixes reproduces every
// posterior bit for bit.
class PosteriorChain {
 public:
  PosteriorChain(int dim, int num_samples, AdaptiveMetropolisConfig cfg,
                 Seed seed);

  const PosteriorSamples& update(std::span<const Response> responses);

  const PosteriorSamples& current() const { return current_; }
  const WeightVector& mean() const { return mean_; }
  int updates() const { return updates_; }
  int dim() const { return dim_; }
  int num_samples() const { return num_samples_; }

 private:
  int dim_;
  int num_samples_;
  AdaptiveMetropolisConfig cfg_;
  Seed seed_;
  int updates_ = 0;
  PosteriorSamples current_;
  WeightVector mean_;
};

void to_json(nlohmann::json& j, const AdaptiveMetropolisConfig& cfg);
void from_json(const nlohmann::json& j, AdaptiveMetropolisConfig& cfg);
void to_json(nlohmann::json& j, const PosteriorSamples& p);
void from_json(const nlohmann::json& j, PosteriorSamples& p);
void to_json(nlohmann::json& j, const Response& r);
void from_json(const nlohmann::json& j, Response& r);

nlohmann::json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Eigen::Ref<const RowMatrixX<double>>& m);
RowMatrixX<double> matrix_from_json(const nlohmann::json& j);

}  // namespace batchpref
