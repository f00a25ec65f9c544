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

// Dynamical systems, trajectory features and the discretized query pool.

#pragma once

#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "batchpref/types.hpp"

namespace batchpref {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct EnvironmentSpec {
  std::string name;
  int state_dim = 0;
  int control_dim = 0;
  int horizon = 1;
  int feature_dim = 0;
  std::vector<Interval> control_bounds;
  bool has_other_agent = false;
};

struct Trajectory {
  RowMatrixX<double> states;      // (T + 1) x state_dim
  RowMatrixX<double> controls_h;  // T x control_dim
  RowMatrixX<double> controls_r;  // T x control_dim, or empty
  Eigen::VectorXd x0;
};

class UnknownEnvironment : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvironmentSpec& spec() const = 0;

  // f_D: next state from the current state and this step's controls.
  // `u_r` is empty when the environment has no other agent.
  virtual Eigen::VectorXd step(const Eigen::VectorXd& state,
                               const Eigen::VectorXd& u_h,
                               const Eigen::VectorXd& u_r) const = 0;

  // Raw (unnormalized) feature vector phi of a trajectory.
  virtual FeatureVector features(const Trajectory& traj) const = 0;

  virtual Eigen::VectorXd sample_initial_state(std::mt19937_64& rng) const = 0;
  virtual RowMatrixX<double> sample_controls(std::mt19937_64& rng) const;
  // Fixed other-agent script; empty when there is none.
  virtual RowMatrixX<double> other_agent_controls() const { return {}; }
  // Whether pool features get rescaled to [-1, 1] per dimension.
  virtual bool normalizes_features() const { return true; }

  // Validates control bounds, then applies `step` T times.
  Trajectory rollout(const Eigen::VectorXd& x0,
                     const RowMatrixX<double>& u_h,
                     const RowMatrixX<double>& u_r = {}) const;

 protected:
  void check_controls(const RowMatrixX<double>& u, const char* who) const;
};

// x^{t+1} = A x^t + B u^t, y^t = C x^t + D u^t with A = B = C = 0, D = I;
// phi = y^0 = u^0. One step; controls in [-1, 1]^d.
class LinearDynamicalSystem final : public Environment {
 public:
  explicit LinearDynamicalSystem(int dim);
  const EnvironmentSpec& spec() const override { return spec_; }
  Eigen::VectorXd step(const Eigen::VectorXd& state, const Eigen::VectorXd& u_h,
                       const Eigen::VectorXd& u_r) const override;
  FeatureVector features(const Trajectory& traj) const override;
  Eigen::VectorXd sample_initial_state(std::mt19937_64& rng) const override;
  bool normalizes_features() const override { return false; }

 private:
  EnvironmentSpec spec_;
};

// Top-down kinematic car on a three-lane road next to a scripted car.
// State: ego (lateral, longitudinal, heading, speed) then the other car's.
// Controls per step: (steering, acceleration).
// Features: lane-center deviation, speed deviation, heading, proximity.
class Driver2D final : public Environment {
 public:
  static constexpr int kHorizon = 50;
  static constexpr double kDt = 0.1;
  static constexpr double kLaneWidth = 1.0;
  static constexpr double kNominalSpeed = 1.0;
  static constexpr int kControlSegments = 5;

  Driver2D();
  const EnvironmentSpec& spec() const override { return spec_; }
  Eigen::VectorXd step(const Eigen::VectorXd& state, const Eigen::VectorXd& u_h,
                       const Eigen::VectorXd& u_r) const override;
  FeatureVector features(const Trajectory& traj) const override;
  Eigen::VectorXd sample_initial_state(std::mt19937_64& rng) const override;
  RowMatrixX<double> sample_controls(std::mt19937_64& rng) const override;
  RowMatrixX<double> other_agent_controls() const override;

  // Other car's fixed starting state (lateral, longitudinal, heading, speed).
  static Eigen::Vector4d other_car_start();
  static double lane_offset(double lateral);

 private:
  EnvironmentSpec spec_;
};

// Planar throw from the origin over flat ground. Controls (held for the whole
// flight): release speed, release angle, spin rate. State: (time, x, y,
// orientation). The flight time is split into T equal steps.
// Features: max horizontal range, max altitude, summed angular displacement,
// final distance to the nearest basket.
class Tosser2D final : public Environment {
 public:
  static constexpr int kHorizon = 100;
  static constexpr double kGravity = 9.81;
  static constexpr double kBasketNear = 4.0;
  static constexpr double kBasketFar = 7.0;

  Tosser2D();
  const EnvironmentSpec& spec() const override { return spec_; }
  Eigen::VectorXd step(const Eigen::VectorXd& state, const Eigen::VectorXd& u_h,
                       const Eigen::VectorXd& u_r) const override;
  FeatureVector features(const Trajectory& traj) const override;
  Eigen::VectorXd sample_initial_state(std::mt19937_64& rng) const override;
  RowMatrixX<double> sample_controls(std::mt19937_64& rng) const override;

  static double flight_time(double speed, double angle);
  // Single release control held over the horizon.
  static RowMatrixX<double> hold(double speed, double angle, double spin);

 private:
  EnvironmentSpec spec_;
};

// "lds" (feature dimension `lds_dim`), "driver", "tosser".
std::unique_ptr<Environment> make_environment(const std::string& name,
                                              int lds_dim = 4);

// Per-dimension affine map of raw features onto [-1, 1].
struct FeatureNormalization {
  bool enabled = false;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  FeatureVector apply(const FeatureVector& raw) const;
  FeatureVector invert(const FeatureVector& normalized) const;
};

struct QueryCandidate {
  int idx = 0;
  Eigen::VectorXd x0;
  RowMatrixX<double> u_r;
  RowMatrixX<double> u_h_a;
  RowMatrixX<double> u_h_b;
  FeatureVector phi_a;  // normalized
  FeatureVector phi_b;  // normalized
  FeatureVector psi;    // phi_a - phi_b
};

struct QueryPool {
  std::string env_name;
  int dim = 0;
  int K = 0;
  Seed seed = 0;
  FeatureNormalization normalization;
  std::vector<QueryCandidate> candidates;

  // K x d, row i is candidates[i].psi.
  PointSet psi_matrix() const;
};

QueryPool sample_pool(const Environment& env, int K, Seed seed);

// Rolls out both sides of a candidate again.
std::pair<Trajectory, Trajectory> replay_candidate(const Environment& env,
                                                   const QueryCandidate& c);

// JSON-lines: header {v, env, K, seed, d, normalization}, then one
// {idx, x0, u_r, u_h_a, u_h_b, phi_a, phi_b, psi} per line.
void write_pool(const QueryPool& pool, std::ostream& out);
QueryPool read_pool(std::istream& in);
void save_pool(const QueryPool& pool, const std::string& path);
QueryPool load_pool(const std::string& path);

nlohmann::json trajectory_to_json(const Trajectory& traj);

}  // namespace batchpref
