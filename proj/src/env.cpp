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

#include "batchpref/env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "batchpref/belief.hpp"
#include "batchpref/io.hpp"

namespace batchpref {

// ---------------------------------------------------------------------------
// Environment

RowMatrixX<double> Environment::sample_controls(std::mt19937_64& rng) const {
  const EnvironmentSpec& s = spec();
  RowMatrixX<double> u(s.horizon, s.control_dim);
  for (int t = 0; t < s.horizon; ++t) {
    for (int k = 0; k < s.control_dim; ++k) {
      const Interval& b = s.control_bounds[static_cast<std::size_t>(k)];
      u(t, k) = std::uniform_real_distribution<double>(b.lo, b.hi)(rng);
    }
  }
  return u;
}

void Environment::check_controls(const RowMatrixX<double>& u,
                                 const char* who) const {
  const EnvironmentSpec& s = spec();
  require(u.rows() == s.horizon && u.cols() == s.control_dim,
          std::string(who) + ": control sequence must be T x control_dim");
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
      const Interval& b = s.control_bounds[static_cast<std::size_t>(k)];
      if (!(u(t, k) >= b.lo && u(t, k) <= b.hi))
        throw ContractViolation(std::string(who) + ": control " +
                                std::to_string(u(t, k)) + " out of bounds [" +
                                std::to_string(b.lo) + ", " +
                                std::to_string(b.hi) + "]");
    }
  }
}

Trajectory Environment::rollout(const Eigen::VectorXd& x0,
                                const RowMatrixX<double>& u_h,
                                const RowMatrixX<double>& u_r) const {
  const EnvironmentSpec& s = spec();
  require(x0.size() == s.state_dim, s.name + ": initial state dimension mismatch");
  check_controls(u_h, "rollout(u_h)");
  if (s.has_other_agent) check_controls(u_r, "rollout(u_r)");

  Trajectory traj;
  traj.x0 = x0;
  traj.controls_h = u_h;
  traj.controls_r = s.has_other_agent ? u_r : RowMatrixX<double>();
  traj.states.resize(s.horizon + 1, s.state_dim);
  traj.states.row(0) = x0.transpose();
  Eigen::VectorXd state = x0;
  const Eigen::VectorXd no_other;
  for (int t = 0; t < s.horizon; ++t) {
    const Eigen::VectorXd uh = u_h.row(t).transpose();
    const Eigen::VectorXd ur =
        s.has_other_agent ? Eigen::VectorXd(u_r.row(t).transpose()) : no_other;
    state = step(state, uh, ur);
    traj.states.row(t + 1) = state.transpose();
  }
  return traj;
}

// ---------------------------------------------------------------------------
// LDS

LinearDynamicalSystem::LinearDynamicalSystem(int dim) {
  require(dim >= 1, "lds: feature dimension must be >= 1");
  spec_.name = "lds";
  spec_.state_dim = dim;
  spec_.control_dim = dim;
  spec_.horizon = 1;
  spec_.feature_dim = dim;
  spec_.control_bounds.assign(static_cast<std::size_t>(dim), Interval{-1.0, 1.0});
  spec_.has_other_agent = false;
}

Eigen::VectorXd LinearDynamicalSystem::step(const Eigen::VectorXd& state,
                                            const Eigen::VectorXd& /*u_h*/,
                                            const Eigen::VectorXd& /*u_r*/) const {
  return Eigen::VectorXd::Zero(state.size());  // A = B = 0
}

FeatureVector LinearDynamicalSystem::features(const Trajectory& traj) const {
  return traj.controls_h.row(0).transpose();  // y^0 = D u^0, D = I
}

Eigen::VectorXd LinearDynamicalSystem::sample_initial_state(
    std::mt19937_64& /*rng*/) const {
  return Eigen::VectorXd::Zero(spec_.state_dim);
}

// ---------------------------------------------------------------------------
// Driver2D

Driver2D::Driver2D() {
  spec_.name = "driver";
  spec_.state_dim = 8;
  spec_.control_dim = 2;
  spec_.horizon = kHorizon;
  spec_.feature_dim = 4;
  spec_.control_bounds = {Interval{-0.5, 0.5}, Interval{-0.5, 0.5}};
  spec_.has_other_agent = true;
}

Eigen::Vector4d Driver2D::other_car_start() { return {0.0, 1.5, 0.0, 0.6}; }

double Driver2D::lane_offset(double lateral) {
  double best = std::abs(lateral + kLaneWidth);
  best = std::min(best, std::abs(lateral));
  best = std::min(best, std::abs(lateral - kLaneWidth));
  return best;
}

namespace {

// Kinematic car update for one vehicle block [lat, lon, heading, speed].
void advance_car(Eigen::Ref<Eigen::VectorXd> car, double steer, double accel) {
  const double heading = car(2);
  const double speed = car(3);
  car(0) += Driver2D::kDt * speed * std::sin(heading);
  car(1) += Driver2D::kDt * speed * std::cos(heading);
  car(2) += Driver2D::kDt * speed * steer;
  car(3) = std::max(0.0, speed + Driver2D::kDt * accel);
}

}  // namespace

Eigen::VectorXd Driver2D::step(const Eigen::VectorXd& state,
                               const Eigen::VectorXd& u_h,
                               const Eigen::VectorXd& u_r) const {
  Eigen::VectorXd next = state;
  advance_car(next.segment(0, 4), u_h(0), u_h(1));
  advance_car(next.segment(4, 4), u_r(0), u_r(1));
  return next;
}

FeatureVector Driver2D::features(const Trajectory& traj) const {
  const auto n = static_cast<double>(traj.states.rows());
  FeatureVector phi = FeatureVector::Zero(4);
  for (Eigen::Index t = 0; t < traj.states.rows(); ++t) {
    const auto s = traj.states.row(t);
    const double lane = lane_offset(s(0));
    const double dspeed = s(3) - kNominalSpeed;
    const double heading = std::sin(s(2));
    const double dlat = (s(0) - s(4)) / 0.3;
    const double dlon = (s(1) - s(5)) / 0.8;
    phi(0) += lane * lane;
    phi(1) += dspeed * dspeed;
    phi(2) += heading * heading;
    phi(3) += std::exp(-0.5 * (dlat * dlat + dlon * dlon));
  }
  return phi / n;
}

Eigen::VectorXd Driver2D::sample_initial_state(std::mt19937_64& rng) const {
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  Eigen::VectorXd x0(8);
  x0(0) = uni(-1.0, 1.0);
  x0(1) = 0.0;
  x0(2) = uni(-0.2, 0.2);
  x0(3) = uni(0.8, 1.2);
  x0.segment(4, 4) = other_car_start();
  return x0;
}

RowMatrixX<double> Driver2D::sample_controls(std::mt19937_64& rng) const {
  // Piecewise-constant over equal segments; each segment uniform in bounds.
  RowMatrixX<double> u(kHorizon, 2);
  const int seg_len = kHorizon / kControlSegments;
  for (int seg = 0; seg < kControlSegments; ++seg) {
    const double steer = std::uniform_real_distribution<double>(
        spec_.control_bounds[0].lo, spec_.control_bounds[0].hi)(rng);
    const double accel = std::uniform_real_distribution<double>(
        spec_.control_bounds[1].lo, spec_.control_bounds[1].hi)(rng);
    for (int t = seg * seg_len; t < (seg + 1) * seg_len; ++t) {
      u(t, 0) = steer;
      u(t, 1) = accel;
    }
  }
  return u;
}

RowMatrixX<double> Driver2D::other_agent_controls() const {
  // Drift toward the right lane during the first second, then hold.
  RowMatrixX<double> u = RowMatrixX<double>::Zero(kHorizon, 2);
  for (int t = 0; t < 10; ++t) u(t, 0) = 0.3;
  for (int t = 10; t < 20; ++t) u(t, 0) = -0.3;
  return u;
}

// ---------------------------------------------------------------------------
// Tosser2D

Tosser2D::Tosser2D() {
  spec_.name = "tosser";
  spec_.state_dim = 4;
  spec_.control_dim = 3;
  spec_.horizon = kHorizon;
  spec_.feature_dim = 4;
  spec_.control_bounds = {Interval{0.0, 10.0},
                          Interval{0.0, std::numbers::pi / 2.0},
                          Interval{-10.0, 10.0}};
  spec_.has_other_agent = false;
}

double Tosser2D::flight_time(double speed, double angle) {
  return 2.0 * speed * std::sin(angle) / kGravity;
}

RowMatrixX<double> Tosser2D::hold(double speed, double angle, double spin) {
  RowMatrixX<double> u(kHorizon, 3);
  u.col(0).setConstant(speed);
  u.col(1).setConstant(angle);
  u.col(2).setConstant(spin);
  return u;
}

Eigen::VectorXd Tosser2D::step(const Eigen::VectorXd& state,
                               const Eigen::VectorXd& u_h,
                               const Eigen::VectorXd& /*u_r*/) const {
  const double speed = u_h(0);
  const double angle = u_h(1);
  const double spin = u_h(2);
  const double dt = flight_time(speed, angle) / kHorizon;
  Eigen::VectorXd next(4);
  const double t = state(0) + dt;
  next(0) = t;
  next(1) = speed * std::cos(angle) * t;
  next(2) = speed * std::sin(angle) * t - 0.5 * kGravity * t * t;
  next(3) = state(3) + spin * dt;
  return next;
}

FeatureVector Tosser2D::features(const Trajectory& traj) const {
  const auto& s = traj.states;
  FeatureVector phi(4);
  phi(0) = s.col(1).maxCoeff();
  phi(1) = s.col(2).maxCoeff();
  double turn = 0.0;
  for (Eigen::Index t = 0; t + 1 < s.rows(); ++t)
    turn += std::abs(s(t + 1, 3) - s(t, 3));
  phi(2) = turn;
  const Eigen::Index last = s.rows() - 1;
  const double y = s(last, 2);
  const double near = std::hypot(s(last, 1) - kBasketNear, y);
  const double far = std::hypot(s(last, 1) - kBasketFar, y);
  phi(3) = std::min(near, far);
  return phi;
}

Eigen::VectorXd Tosser2D::sample_initial_state(std::mt19937_64& /*rng*/) const {
  return Eigen::VectorXd::Zero(4);
}

RowMatrixX<double> Tosser2D::sample_controls(std::mt19937_64& rng) const {
  double u[3];
  for (int k = 0; k < 3; ++k) {
    const Interval& b = spec_.control_bounds[static_cast<std::size_t>(k)];
    u[k] = std::uniform_real_distribution<double>(b.lo, b.hi)(rng);
  }
  return hold(u[0], u[1], u[2]);
}

std::unique_ptr<Environment> make_environment(const std::string& name,
                                              int lds_dim) {
  if (name == "lds") return std::make_unique<LinearDynamicalSystem>(lds_dim);
  if (name == "driver" || name == "driver2d") return std::make_unique<Driver2D>();
  if (name == "tosser" || name == "tosser2d") return std::make_unique<Tosser2D>();
  throw UnknownEnvironment("unknown environment '" + name + "'");
}

// ---------------------------------------------------------------------------
// Pool

FeatureVector FeatureNormalization::apply(const FeatureVector& raw) const {
  if (!enabled) return raw;
  FeatureVector out(raw.size());
  for (Eigen::Index k = 0; k < raw.size(); ++k) {
    const double span = hi(k) - lo(k);
    out(k) = span > 0.0 ? 2.0 * (raw(k) - lo(k)) / span - 1.0 : 0.0;
  }
  return out;
}

FeatureVector FeatureNormalization::invert(const FeatureVector& normalized) const {
  if (!enabled) return normalized;
  FeatureVector out(normalized.size());
  for (Eigen::Index k = 0; k < normalized.size(); ++k)
    out(k) = lo(k) + 0.5 * (normalized(k) + 1.0) * (hi(k) - lo(k));
  return out;
}

PointSet QueryPool::psi_matrix() const {
  PointSet out(static_cast<Eigen::Index>(candidates.size()), dim);
  for (std::size_t i = 0; i < candidates.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = candidates[i].psi.transpose();
  return out;
}

QueryPool sample_pool(const Environment& env, int K, Seed seed) {
  require(K >= 1, "sample_pool: K must be >= 1");
  const EnvironmentSpec& s = env.spec();
  QueryPool pool;
  pool.env_name = s.name;
  pool.dim = s.feature_dim;
  pool.K = K;
  pool.seed = seed;
  pool.candidates.resize(static_cast<std::size_t>(K));

  const RowMatrixX<double> u_r = env.other_agent_controls();
  std::vector<FeatureVector> raw_a(static_cast<std::size_t>(K));
  std::vector<FeatureVector> raw_b(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    QueryCandidate& c = pool.candidates[static_cast<std::size_t>(i)];
    c.idx = i;
    c.x0 = env.sample_initial_state(rng);
    c.u_r = u_r;
    c.u_h_a = env.sample_controls(rng);
    c.u_h_b = env.sample_controls(rng);
    raw_a[static_cast<std::size_t>(i)] = env.features(env.rollout(c.x0, c.u_h_a, c.u_r));
    raw_b[static_cast<std::size_t>(i)] = env.features(env.rollout(c.x0, c.u_h_b, c.u_r));
  }

  FeatureNormalization& norm = pool.normalization;
  norm.enabled = env.normalizes_features();
  norm.lo = Eigen::VectorXd::Constant(pool.dim, -1.0);
  norm.hi = Eigen::VectorXd::Constant(pool.dim, 1.0);
  if (norm.enabled) {
    norm.lo = raw_a[0];
    norm.hi = raw_a[0];
    for (int i = 0; i < K; ++i) {
      for (const auto* raw : {&raw_a[static_cast<std::size_t>(i)],
                              &raw_b[static_cast<std::size_t>(i)]}) {
        norm.lo = norm.lo.cwiseMin(*raw);
        norm.hi = norm.hi.cwiseMax(*raw);
      }
    }
  }
  for (int i = 0; i < K; ++i) {
    QueryCandidate& c = pool.candidates[static_cast<std::size_t>(i)];
    c.phi_a = norm.apply(raw_a[static_cast<std::size_t>(i)]);
    c.phi_b = norm.apply(raw_b[static_cast<std::size_t>(i)]);
    c.psi = c.phi_a - c.phi_b;
  }
  return pool;
}

std::pair<Trajectory, Trajectory> replay_candidate(const Environment& env,
                                                   const QueryCandidate& c) {
  return {env.rollout(c.x0, c.u_h_a, c.u_r), env.rollout(c.x0, c.u_h_b, c.u_r)};
}

void write_pool(const QueryPool& pool, std::ostream& out) {
  nlohmann::json header = {
      {"v", 1},
      {"env", pool.env_name},
      {"K", pool.K},
      {"seed", pool.seed},
      {"d", pool.dim},
      {"normalization",
       {{"enabled", pool.normalization.enabled},
        {"lo", vector_to_json(pool.normalization.lo)},
        {"hi", vector_to_json(pool.normalization.hi)}}}};
  out << header.dump() << '\n';
  for (const QueryCandidate& c : pool.candidates) {
    nlohmann::json line = {{"idx", c.idx},
                           {"x0", vector_to_json(c.x0)},
                           {"u_r", matrix_to_json(c.u_r)},
                           {"u_h_a", matrix_to_json(c.u_h_a)},
                           {"u_h_b", matrix_to_json(c.u_h_b)},
                           {"phi_a", vector_to_json(c.phi_a)},
                           {"phi_b", vector_to_json(c.phi_b)},
                           {"psi", vector_to_json(c.psi)}};
    out << line.dump() << '\n';
  }
}

QueryPool read_pool(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ContractViolation("pool file: missing header");
  const nlohmann::json header = nlohmann::json::parse(line);
  QueryPool pool;
  pool.env_name = header.at("env").get<std::string>();
  pool.K = header.at("K").get<int>();
  pool.seed = header.at("seed").get<Seed>();
  pool.dim = header.at("d").get<int>();
  const auto& norm = header.at("normalization");
  pool.normalization.enabled = norm.at("enabled").get<bool>();
  pool.normalization.lo = vector_from_json(norm.at("lo"));
  pool.normalization.hi = vector_from_json(norm.at("hi"));
  pool.candidates.reserve(static_cast<std::size_t>(pool.K));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    QueryCandidate c;
    c.idx = j.at("idx").get<int>();
    c.x0 = vector_from_json(j.at("x0"));
    c.u_r = matrix_from_json(j.at("u_r"));
    c.u_h_a = matrix_from_json(j.at("u_h_a"));
    c.u_h_b = matrix_from_json(j.at("u_h_b"));
    c.phi_a = vector_from_json(j.at("phi_a"));
    c.phi_b = vector_from_json(j.at("phi_b"));
    c.psi = vector_from_json(j.at("psi"));
    if (c.idx != static_cast<int>(pool.candidates.size()))
      throw ContractViolation("pool file: candidate indices out of order");
    if (c.psi.size() != pool.dim)
      throw ContractViolation("pool file: candidate dimension mismatch");
    pool.candidates.push_back(std::move(c));
  }
  if (static_cast<int>(pool.candidates.size()) != pool.K)
    throw ContractViolation("pool file: expected " + std::to_string(pool.K) +
                            " candidates, found " +
                            std::to_string(pool.candidates.size()));
  return pool;
}

void save_pool(const QueryPool& pool, const std::string& path) {
  std::ostringstream ss;
  write_pool(pool, ss);
  write_file_atomic(path, ss.str());
}

QueryPool load_pool(const std::string& path) {
  std::istringstream ss(read_file(path));
  return read_pool(ss);
}

nlohmann::json trajectory_to_json(const Trajectory& traj) {
  return {{"x0", vector_to_json(traj.x0)},
          {"states", matrix_to_json(traj.states)},
          {"controls_h", matrix_to_json(traj.controls_h)},
          {"controls_r", matrix_to_json(traj.controls_r)}};
}

}  // namespace batchpref
