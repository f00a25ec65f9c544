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

#include <json.hpp>

#include "batchpref/types.hpp"

namespace batchpref {

struct OracleConfig {
  WeightVector w_true;
  bool noisy = true;
  Seed seed = 0;
};

// Simulated respondent. Noiseless: sign(<w_true, psi>) with 0 -> +1. Noisy:
// +1 with logistic probability, drawn from (seed, query counter).
class Oracle {
 public:
  explicit Oracle(OracleConfig cfg);

  Label respond(const FeatureVector& psi);
  // Stateless form used by `respond`; reproducible per (seed, counter).
  Label respond_at(const FeatureVector& psi, std::uint64_t counter) const;

  std::uint64_t queries_answered() const { return counter_; }
  const OracleConfig& config() const { return cfg_; }

 private:
  OracleConfig cfg_;
  std::uint64_t counter_ = 0;
};

// Uniform direction on the unit sphere scaled by 0.95.
WeightVector random_true_weights(int dim, Seed seed);

void to_json(nlohmann::json& j, const OracleConfig& cfg);
void from_json(const nlohmann::json& j, OracleConfig& cfg);

}  // namespace batchpref
