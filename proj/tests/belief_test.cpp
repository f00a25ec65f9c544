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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "batchpref/belief.hpp"

namespace batchpref {
namespace {

Eigen::Vector2d v2(double a, double b) { return {a, b}; }

// Independent oracle for the chain's target: uniform draws on the d-ball,
// accepted with probability prod_i min(1, exp(l_i <w, psi_i>)).
Eigen::VectorXd rejection_mean(const std::vector<Response>& responses, int dim,
                               int accepted_target, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  int accepted = 0;
  Eigen::VectorXd w(dim);
  while (accepted < accepted_target) {
    for (int k = 0; k < dim; ++k) w(k) = uni(rng);
    if (w.squaredNorm() > 1.0) continue;
    double log_accept = 0.0;
    for (const auto& r : responses)
      log_accept += std::min(0.0, to_int(r.label) * w.dot(r.psi));
    if (std::log(u01(rng)) < log_accept) {
      sum += w;
      ++accepted;
    }
  }
  return sum / accepted;
}

TEST(Likelihood, ExamplesAndComplement) {
  const Eigen::Vector2d w = v2(1.0, 0.0);
  EXPECT_DOUBLE_EQ(likelihood(Label::kPositive, w, v2(0.0, 5.0)), 0.5);
  EXPECT_NEAR(likelihood(Label::kPositive, w, v2(std::log(3.0), 0.0)), 0.75, 1e-12);
  EXPECT_NEAR(likelihood(Label::kNegative, w, v2(std::log(3.0), 0.0)), 0.25, 1e-12);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d wi(n(rng), n(rng), n(rng));
    const Eigen::Vector3d psi(n(rng), n(rng), n(rng));
    EXPECT_NEAR(likelihood(Label::kPositive, wi, psi) + likelihood(Label::kNegative, wi, psi),
                1.0, 1e-12);
  }
}

TEST(Likelihood, StrictlyIncreasingInMargin) {
  const Eigen::Vector2d psi = v2(1.0, 0.0);
  double prev = 0.0;
  for (double x = -20.0; x <= 20.0; x += 0.25) {
    const double p = likelihood(Label::kPositive, v2(x, 0.0), psi);
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(Likelihood, DimensionMismatchThrows) {
  EXPECT_THROW(likelihood(Label::kPositive, Eigen::VectorXd::Zero(3), Eigen::VectorXd(v2(1, 0))),
               ContractViolation);
  EXPECT_THROW(log_likelihood_approx(Label::kPositive, Eigen::VectorXd::Zero(3), Eigen::VectorXd(v2(1, 0))),
               ContractViolation);
}

TEST(LogLikelihoodApprox, Examples) {
  const Eigen::Vector2d psi = v2(1.0, 0.0);
  EXPECT_EQ(log_likelihood_approx(Label::kPositive, v2(2.0, 0.0), psi), 0.0);
  EXPECT_EQ(log_likelihood_approx(Label::kPositive, v2(-2.0, 0.0), psi), -2.0);
  EXPECT_EQ(log_likelihood_approx(Label::kNegative, v2(0.0, 0.0), psi), 0.0);
}

TEST(LogLikelihoodApprox, DominatesSoftmaxWithinFactorTwo) {
  const Eigen::Vector2d psi = v2(1.0, 0.0);
  for (double x = -30.0; x <= 30.0; x += 0.1) {
    for (Label l : {Label::kPositive, Label::kNegative}) {
      const double approx = std::exp(log_likelihood_approx(l, v2(x, 0.0), psi));
      const double exact = likelihood(l, v2(x, 0.0), psi);
      EXPECT_GE(approx, exact);
      EXPECT_LE(approx, 2.0 * exact * (1.0 + 1e-12));
    }
  }
}

TEST(AdaptiveMetropolisConfig, RejectsDegenerateSettings) {
  AdaptiveMetropolisConfig cfg;
  EXPECT_NO_THROW(cfg.validate(1000));
  EXPECT_THROW(cfg.validate(1001), ConfigurationError);
  cfg.burn_in = cfg.total_steps;
  EXPECT_THROW(cfg.validate(1), ConfigurationError);
  cfg = {};
  cfg.thinning = 0;
  EXPECT_THROW(cfg.validate(1), ConfigurationError);
  cfg = {};
  cfg.initial_proposal_scale = 0.0;
  EXPECT_THROW(cfg.validate(1), ConfigurationError);
  EXPECT_THROW(sample_posterior({}, 2, 5000, AdaptiveMetropolisConfig{}, 1), ConfigurationError);
}

TEST(SamplePosterior, PriorIsCenteredAndInsideBall) {
  const PosteriorSamples p = sample_posterior({}, 2, 1000, {}, 11);
  ASSERT_EQ(p.count(), 1000);
  ASSERT_EQ(p.dim(), 2);
  const Eigen::VectorXd mean = posterior_mean(p);
  EXPECT_LT(std::abs(mean(0)), 0.1);
  EXPECT_LT(std::abs(mean(1)), 0.1);
  for (Eigen::Index m = 0; m < p.samples.rows(); ++m)
    EXPECT_LE(p.samples.row(m).norm(), 1.0);
}

TEST(SamplePosterior, ConsistentEvidenceMatchesRejectionOracle) {
  std::vector<Response> responses(50, Response{v2(1.0, 0.0), Label::kPositive});
  const PosteriorSamples p = sample_posterior(responses, 2, 1000, {}, 5);
  const Eigen::VectorXd mean = posterior_mean(p);
  const Eigen::VectorXd oracle = rejection_mean(responses, 2, 20000, 99);
  EXPECT_GT(mean(0), 0.0);
  EXPECT_NEAR(mean(0), oracle(0), 0.05);
  EXPECT_NEAR(mean(1), oracle(1), 0.05);
}

TEST(SamplePosterior, ContradictoryEvidenceCancels) {
  std::vector<Response> responses;
  for (int i = 0; i < 25; ++i) {
    responses.push_back({v2(1.0, 0.0), Label::kPositive});
    responses.push_back({v2(1.0, 0.0), Label::kNegative});
  }
  const PosteriorSamples p = sample_posterior(responses, 2, 1000, {}, 8);
  const Eigen::VectorXd oracle = rejection_mean(responses, 2, 5000, 17);
  EXPECT_LT(std::abs(posterior_mean(p)(0)), 0.15);
  EXPECT_LT(std::abs(oracle(0)), 0.15);
}

TEST(SamplePosterior, BitwiseDeterministic) {
  std::vector<Response> responses = {{Eigen::Vector4d(0.3, -0.2, 0.9, 0.1), Label::kPositive},
                                     {Eigen::Vector4d(-0.5, 0.4, 0.2, 0.7), Label::kNegative}};
  const PosteriorSamples a = sample_posterior(responses, 4, 200, {}, 21);
  const PosteriorSamples b = sample_posterior(responses, 4, 200, {}, 21);
  EXPECT_TRUE((a.samples.array() == b.samples.array()).all());
  const PosteriorSamples c = sample_posterior(responses, 4, 200, {}, 22);
  EXPECT_FALSE((a.samples.array() == c.samples.array()).all());
}

TEST(SamplePosterior, AcceptanceRateSanityBand) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  const Eigen::Vector4d w(0.5, -0.4, 0.3, 0.2);
  std::vector<Response> responses;
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector4d psi(uni(rng), uni(rng), uni(rng), uni(rng));
    responses.push_back({psi, w.dot(psi) >= 0 ? Label::kPositive : Label::kNegative});
  }
  const PosteriorSamples p = sample_posterior(responses, 4, 1000, {}, 3);
  EXPECT_GT(p.diagnostics.acceptance_rate, 0.05);
  EXPECT_LT(p.diagnostics.acceptance_rate, 0.8);
  EXPECT_EQ(p.diagnostics.chain_length, AdaptiveMetropolisConfig{}.total_steps);
}

TEST(PosteriorMean, Examples) {
  PosteriorSamples p;
  p.samples = PointSet(2, 2);
  p.samples << 1, 0, 0, 1;
  EXPECT_TRUE(posterior_mean(p).isApprox(Eigen::Vector2d(0.5, 0.5)));
  p.samples = PointSet(1, 2);
  p.samples << 0.3, -0.3;
  EXPECT_TRUE(posterior_mean(p).isApprox(Eigen::Vector2d(0.3, -0.3)));
  p.samples = PointSet(2, 3);
  p.samples << 0.2, -0.7, 0.1, -0.2, 0.7, -0.1;
  EXPECT_TRUE(posterior_mean(p).isZero());
  p.samples = PointSet(0, 2);
  EXPECT_THROW(posterior_mean(p), ContractViolation);
}

TEST(PosteriorChain, WarmStartsAndReseeds) {
  PosteriorChain chain(2, 100, {}, 9);
  chain.update({});
  const Seed first = chain.current().seed;
  std::vector<Response> r(5, Response{v2(0.0, 1.0), Label::kNegative});
  chain.update(r);
  EXPECT_NE(chain.current().seed, first);
  EXPECT_EQ(chain.updates(), 2);
  EXPECT_LT(chain.mean()(1), 0.0);
}

TEST(PosteriorSamplesJson, RoundTrip) {
  const PosteriorSamples p = sample_posterior({}, 3, 50, {}, 1);
  const nlohmann::json j = p;
  EXPECT_EQ(j.at("d"), 3);
  EXPECT_EQ(j.at("M"), 50);
  const auto back = j.get<PosteriorSamples>();
  EXPECT_TRUE((back.samples.array() == p.samples.array()).all());
  EXPECT_EQ(back.seed, p.seed);
}

}  // namespace
}  // namespace batchpref
