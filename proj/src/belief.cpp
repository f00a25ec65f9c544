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

#include "batchpref/belief.hpp"

#include <limits>
#include <random>
#include <string>

namespace batchpref {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Unnormalized log posterior: uniform ball prior times clipped likelihoods.
// `signed_psi` rows are label_i * psi_i.
double log_target(const RowMatrixX<double>& signed_psi,
                  const Eigen::VectorXd& w) {
  if (w.squaredNorm() > 1.0) return kNegInf;
  if (signed_psi.rows() == 0) return 0.0;
  return (signed_psi * w).cwiseMin(0.0).sum();
}

}  // namespace

void AdaptiveMetropolisConfig::validate(int num_samples) const {
  if (num_samples < 1) throw ConfigurationError("need at least one sample");
  if (total_steps < 1) throw ConfigurationError("total_steps must be >= 1");
  if (burn_in < 0 || burn_in >= total_steps)
    throw ConfigurationError("burn_in must lie in [0, total_steps)");
  if (thinning < 1) throw ConfigurationError("thinning must be >= 1");
  if ((total_steps - burn_in) / thinning < num_samples)
    throw ConfigurationError(
        "(total_steps - burn_in) / thinning yields fewer than " +
        std::to_string(num_samples) + " samples");
  if (!(initial_proposal_scale > 0.0))
    throw ConfigurationError("initial_proposal_scale must be > 0");
  if (adaptation_start < 2)
    throw ConfigurationError("adaptation_start must be >= 2");
  if (!(regularization_epsilon > 0.0))
    throw ConfigurationError("regularization_epsilon must be > 0");
}

PosteriorSamples sample_posterior(std::span<const Response> responses, int dim,
                                  int num_samples,
                                  const AdaptiveMetropolisConfig& cfg,
                                  Seed seed,
                                  const std::optional<WeightVector>& warm_start) {
  require(dim >= 1, "sample_posterior: dimension must be >= 1");
  cfg.validate(num_samples);

  RowMatrixX<double> signed_psi(static_cast<Eigen::Index>(responses.size()),
                                dim);
  for (std::size_t i = 0; i < responses.size(); ++i) {
    require(responses[i].psi.size() == dim,
            "sample_posterior: response dimension mismatch");
    signed_psi.row(static_cast<Eigen::Index>(i)) =
        static_cast<double>(to_int(responses[i].label)) *
        responses[i].psi.transpose();
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Eigen::VectorXd current = Eigen::VectorXd::Zero(dim);
  if (warm_start && warm_start->size() == dim &&
      warm_start->squaredNorm() <= 1.0) {
    current = *warm_start;
  }
  double current_logp = log_target(signed_psi, current);

  // Running moments of the chain history (Welford).
  Eigen::VectorXd history_mean = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd history_m2 = Eigen::MatrixXd::Zero(dim, dim);
  long history_count = 0;
  auto record = [&](const Eigen::VectorXd& x) {
    ++history_count;
    const Eigen::VectorXd delta = x - history_mean;
    history_mean += delta / static_cast<double>(history_count);
    history_m2 += delta * (x - history_mean).transpose();
  };
  record(current);

  const double haario_scale = 2.38 * 2.38 / static_cast<double>(dim);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd proposal_factor = cfg.initial_proposal_scale * identity;

  PosteriorSamples out;
  out.seed = seed;
  out.samples.resize(num_samples, dim);
  int stored = 0;
  long accepted = 0;

  Eigen::VectorXd step(dim);
  for (int t = 1; t <= cfg.total_steps; ++t) {
    if (t > cfg.adaptation_start) {
      const Eigen::MatrixXd cov =
          history_m2 / static_cast<double>(history_count - 1);
      Eigen::LLT<Eigen::MatrixXd> llt(
          haario_scale * (cov + cfg.regularization_epsilon * identity));
      if (llt.info() == Eigen::Success) proposal_factor = llt.matrixL();
    }
    for (int k = 0; k < dim; ++k) step(k) = normal(rng);
    const Eigen::VectorXd proposal = current + proposal_factor * step;
    const double proposal_logp = log_target(signed_psi, proposal);
    const double u = uniform(rng);
    if (proposal_logp != kNegInf && std::log(u) < proposal_logp - current_logp) {
      current = proposal;
      current_logp = proposal_logp;
      ++accepted;
    }
    record(current);

    if (t > cfg.burn_in && (t - cfg.burn_in) % cfg.thinning == 0 &&
        stored < num_samples) {
      out.samples.row(stored++) = current.transpose();
    }
  }

  out.diagnostics.acceptance_rate =
      static_cast<double>(accepted) / static_cast<double>(cfg.total_steps);
  out.diagnostics.chain_length = cfg.total_steps;
  return out;
}

WeightVector posterior_mean(const PosteriorSamples& posterior) {
  require(posterior.count() > 0, "posterior_mean: empty sample set");
  return posterior.samples.colwise().mean().transpose();
}

PosteriorChain::PosteriorChain(int dim, int num_samples,
                               AdaptiveMetropolisConfig cfg, Seed seed)
    : dim_(dim), num_samples_(num_samples), cfg_(cfg), seed_(seed) {
  require(dim >= 1, "PosteriorChain: dimension must be >= 1");
  cfg_.validate(num_samples);
  mean_ = WeightVector::Zero(dim);
}

const PosteriorSamples& PosteriorChain::update(
    std::span<const Response> responses) {
  std::optional<WeightVector> start;
  if (updates_ > 0) start = mean_;
  current_ = sample_posterior(responses, dim_, num_samples_, cfg_,
                              derive_seed(seed_, static_cast<std::uint64_t>(updates_)),
                              start);
  mean_ = posterior_mean(current_);
  ++updates_;
  return current_;
}

nlohmann::json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

nlohmann::json matrix_to_json(const Eigen::Ref<const RowMatrixX<double>>& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    j.push_back(vector_to_json(m.row(r).transpose()));
  return j;
}

RowMatrixX<double> matrix_from_json(const nlohmann::json& j) {
  if (j.empty()) return {};
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  RowMatrixX<double> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw ContractViolation("ragged matrix in JSON");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

void to_json(nlohmann::json& j, const AdaptiveMetropolisConfig& cfg) {
  j = {{"total_steps", cfg.total_steps},
       {"burn_in", cfg.burn_in},
       {"thinning", cfg.thinning},
       {"initial_proposal_scale", cfg.initial_proposal_scale},
       {"adaptation_start", cfg.adaptation_start},
       {"regularization_epsilon", cfg.regularization_epsilon}};
}

void from_json(const nlohmann::json& j, AdaptiveMetropolisConfig& cfg) {
  AdaptiveMetropolisConfig d;
  cfg.total_steps = j.value("total_steps", d.total_steps);
  cfg.burn_in = j.value("burn_in", d.burn_in);
  cfg.thinning = j.value("thinning", d.thinning);
  cfg.initial_proposal_scale =
      j.value("initial_proposal_scale", d.initial_proposal_scale);
  cfg.adaptation_start = j.value("adaptation_start", d.adaptation_start);
  cfg.regularization_epsilon =
      j.value("regularization_epsilon", d.regularization_epsilon);
}

void to_json(nlohmann::json& j, const PosteriorSamples& p) {
  j = {{"d", p.dim()},
       {"M", p.count()},
       {"seed", p.seed},
       {"samples", matrix_to_json(p.samples)},
       {"diagnostics",
        {{"acceptance_rate", p.diagnostics.acceptance_rate},
         {"chain_length", p.diagnostics.chain_length}}}};
}

void from_json(const nlohmann::json& j, PosteriorSamples& p) {
  p.seed = j.at("seed").get<Seed>();
  p.samples = matrix_from_json(j.at("samples"));
  if (p.count() != j.at("M").get<int>() ||
      (p.count() > 0 && p.dim() != j.at("d").get<int>()))
    throw ContractViolation("posterior JSON: shape does not match {d, M}");
  p.diagnostics.acceptance_rate =
      j.at("diagnostics").at("acceptance_rate").get<double>();
  p.diagnostics.chain_length =
      j.at("diagnostics").at("chain_length").get<int>();
}

void to_json(nlohmann::json& j, const Response& r) {
  j = {{"psi", vector_to_json(r.psi)}, {"label", to_int(r.label)}};
}

void from_json(const nlohmann::json& j, Response& r) {
  r.psi = vector_from_json(j.at("psi"));
  r.label = label_from_int(j.at("label").get<int>());
}

}  // namespace batchpref
