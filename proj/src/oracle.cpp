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

#include "batchpref/oracle.hpp"

#include <random>

#include "batchpref/belief.hpp"

namespace batchpref {

Oracle::Oracle(OracleConfig cfg) : cfg_(std::move(cfg)) {
  require(cfg_.w_true.size() >= 1, "oracle: empty w_true");
  require(cfg_.w_true.norm() <= 1.0 + 1e-12, "oracle: ||w_true|| must be <= 1");
}

Label Oracle::respond(const FeatureVector& psi) {
  return respond_at(psi, counter_++);
}

Label Oracle::respond_at(const FeatureVector& psi, std::uint64_t counter) const {
  require(psi.size() == cfg_.w_true.size(), "oracle: dimension mismatch");
  if (!cfg_.noisy)
    return cfg_.w_true.dot(psi) >= 0.0 ? Label::kPositive : Label::kNegative;
  std::mt19937_64 rng(derive_seed(cfg_.seed, counter));
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return u < likelihood(Label::kPositive, cfg_.w_true, psi) ? Label::kPositive
                                                            : Label::kNegative;
}

WeightVector random_true_weights(int dim, Seed seed) {
  require(dim >= 1, "random_true_weights: dimension must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  WeightVector w(dim);
  do {
    for (int k = 0; k < dim; ++k) w(k) = normal(rng);
  } while (w.norm() == 0.0);
  return 0.95 * w / w.norm();
}

void to_json(nlohmann::json& j, const OracleConfig& cfg) {
  j = {{"w_true", vector_to_json(cfg.w_true)},
       {"noisy", cfg.noisy},
       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, OracleConfig& cfg) {
  cfg.w_true = vector_from_json(j.at("w_true"));
  cfg.noisy = j.at("noisy").get<bool>();
  cfg.seed = j.at("seed").get<Seed>();
}

}  // namespace batchpref
