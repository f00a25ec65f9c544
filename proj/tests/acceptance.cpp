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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Seeds and tolerances are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "batchpref/acquisition.hpp"
#include "batchpref/batch.hpp"
#include "batchpref/belief.hpp"
#include "batchpref/env.hpp"
#include "batchpref/geometry.hpp"
#include "batchpref/session.hpp"
#include "batchpref/stats.hpp"
#include "oracles.hpp"

namespace batchpref {
namespace {

constexpr Seed kPoolSeed = 7;
constexpr Seed kSuiteSeed = 1000;
constexpr Seed kNoiselessSeed = 2000;
constexpr int kRuns = 10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<double> diff(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const QueryPool& lds_pool() {
  static const QueryPool pool = sample_pool(LinearDynamicalSystem(4), 10000, kPoolSeed);
  return pool;
}

ExperimentConfig suite_config(Strategy s, int b = 10) {
  ExperimentConfig cfg;
  cfg.env_name = "lds";
  cfg.dim = 4;
  cfg.K = 10000;
  cfg.M = 1000;
  cfg.b = b;
  cfg.B = 20 * b;
  cfg.n_queries = 150;
  cfg.strategy = s;
  cfg.seed = kSuiteSeed;
  cfg.oracle.noisy = true;
  cfg.oracle.w_true = WeightVector::Zero(4);
  return cfg;
}

Outcome maximizer_containment() {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> normal(0.0, 1.0);
  int kept = 0, total = 0;
  for (int round = 0; round < 1000; ++round) {
    const int d = 2 + round % 5;
    PointSet pool(1000, d);
    for (Eigen::Index i = 0; i < pool.size(); ++i) pool.data()[i] = normal(rng);
    PosteriorSamples post;
    post.samples = PointSet(100, d);
    for (Eigen::Index i = 0; i < post.samples.size(); ++i) post.samples.data()[i] = 0.4 * normal(rng);
    std::vector<double> scores;
    for (const auto& s : score_pool(pool, post)) scores.push_back(ranking_value(s, ExperimentConfig{}.score_kind));
    if (round % 7 == 0) scores[3] = scores[500] = 2.0;  // tied maxima
    const int best = score_argmax(scores);
    for (Strategy s : {Strategy::kGreedy, Strategy::kSuccessiveElimination}) {
      const auto batch = select_batch({10, 200, s, static_cast<Seed>(round)}, pool, scores);
      ++total;
      kept += std::find(batch.indices.begin(), batch.indices.end(), best) != batch.indices.end();
    }
  }
  return {kept == total, fmt("%d/%d rounds keep the maximizer", kept, total)};
}

struct Suite {
  ComparisonResult batch;
  ComparisonResult nonbatch;
  int index(const std::string& label) const {
    const auto it = std::find(batch.labels.begin(), batch.labels.end(), label);
    return static_cast<int>(it - batch.labels.begin());
  }
  const std::vector<double>& finals(const std::string& label) const {
    return batch.final_alignment[static_cast<std::size_t>(index(label))];
  }
};

const Suite& lds_suite() {
  static const Suite suite = [] {
    const auto t0 = std::chrono::steady_clock::now();
    Suite s;
    std::vector<ExperimentConfig> cfgs;
    for (Strategy st : {Strategy::kSuccessiveElimination, Strategy::kBoundaryMedoids, Strategy::kMedoids,
                        Strategy::kGreedy, Strategy::kRandom})
      cfgs.push_back(suite_config(st));
    s.batch = run_paired(cfgs, kRuns, lds_pool());
    s.nonbatch = run_paired({suite_config(Strategy::kGreedy, 1)}, kRuns, lds_pool());
    std::printf("  (LDS suite: %.0f s)\n", seconds_since(t0));
    for (std::size_t i = 0; i < s.batch.labels.size(); ++i)
      std::printf("  %-24s mean final m %.4f\n", s.batch.labels[i].c_str(), mean(s.batch.final_alignment[i]));
    std::printf("  %-24s mean final m %.4f\n", "pool-nonbatch", mean(s.nonbatch.final_alignment[0]));
    return s;
  }();
  return suite;
}

Outcome lds_ordering() {
  const Suite& s = lds_suite();
  const auto& se = s.finals("successive_elimination");
  const auto& rnd = s.finals("random");
  const double p = wilcoxon_signed_rank(diff(se, rnd)).p_greater;
  const double nb = mean(s.nonbatch.final_alignment[0]);
  double worst_gap = INFINITY;
  std::string binding;
  for (std::size_t i = 0; i < s.batch.labels.size(); ++i) {
    const double gap = nb - mean(s.batch.final_alignment[i]);
    if (gap < worst_gap) {
      worst_gap = gap;
      binding = s.batch.labels[i];
    }
  }
  int se_wins = 0;
  for (std::size_t i = 0; i < se.size(); ++i) se_wins += se[i] >= rnd[i];
  const bool pass = mean(se) > mean(rnd) && p < 0.05 && worst_gap >= 0.0;
  return {pass, fmt("SE %.4f vs random %.4f (p=%.4f, SE>=random in %d/%d); nonbatch %.4f, margin over %s %+.4f",
                    mean(se), mean(rnd), p, se_wins, kRuns, nb, binding.c_str(), worst_gap)};
}

Outcome diversity_ordering() {
  const Suite& s = lds_suite();
  const auto& se = s.finals("successive_elimination");
  const auto& gr = s.finals("greedy");
  const double p = wilcoxon_signed_rank(diff(se, gr)).p_greater;
  const double g = mean(gr), m = mean(s.finals("medoids")), bm = mean(s.finals("boundary_medoids")),
               e = mean(se);
  const bool chain = g <= m && m <= bm && bm <= e;
  return {e > g && p < 0.05,
          fmt("greedy %.4f, medoids %.4f, boundary %.4f, SE %.4f (full chain %s); SE>greedy p=%.4f", g, m, bm,
              e, chain ? "holds" : "broken", p)};
}

Outcome timing_tradeoff() {
  std::vector<double> per_query;
  std::string detail;
  for (int b : {1, 2, 5, 10}) {
    ExperimentConfig cfg = suite_config(Strategy::kSuccessiveElimination, b);
    cfg.n_queries = 20;
    const SessionLog log = run_session(paired_run_config(cfg, 0), lds_pool());
    per_query.push_back(log.mean_per_query_seconds());
    detail += fmt("b=%d %.4fs ", b, per_query.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < per_query.size(); ++i) monotone &= per_query[i] <= per_query[i - 1];
  const double ratio = per_query.front() / per_query.back();
  return {monotone && ratio >= 3.0, detail + fmt("; b=1/b=10 ratio %.1fx", ratio)};
}

Outcome geometry_oracles() {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  int within = 0, instances = 0;
  double worst = 1.0;
  for (int trial = 0; instances < 200; ++trial) {
    const int n = 2 + trial % 7;
    const int k = 1 + trial % 3;
    if (k > n) continue;
    PointSet p(n, 1 + trial % 4);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = uni(rng);
    const double best = testing::brute_force_kmedoids_objective(p, k);
    const double got = kmedoids(p, k).objective;
    const double ratio = best > 0 ? got / best : (got == 0 ? 1.0 : INFINITY);
    worst = std::max(worst, ratio);
    within += got <= 1.1 * best + 1e-12;
    ++instances;
  }
  const auto fixture = testing::load_hull_fixture();
  int exact = 0;
  for (const auto& h : fixture) exact += hull_vertices(h.points) == h.vertices;
  const bool pass = within == instances && exact == static_cast<int>(fixture.size()) && fixture.size() == 100;
  return {pass, fmt("k-medoids within 10%% on %d/%d (worst ratio %.4f); hull exact on %d/%zu", within, instances,
                    worst, exact, fixture.size())};
}

Outcome likelihood_entropy() {
  int failures = 0;
  auto check = [&](bool ok) { failures += !ok; };
  const Eigen::Vector2d e1(1.0, 0.0);
  const double ln3 = std::log(3.0);
  check(likelihood(Label::kPositive, e1, Eigen::Vector2d(0.0, 5.0)) == 0.5);
  check(std::abs(likelihood(Label::kPositive, e1, Eigen::Vector2d(ln3, 0.0)) - 0.75) <= 1e-12);
  check(std::abs(likelihood(Label::kNegative, e1, Eigen::Vector2d(ln3, 0.0)) - 0.25) <= 1e-12);
  check(log_likelihood_approx(Label::kPositive, Eigen::Vector2d(2.0, 0.0), e1) == 0.0);
  check(log_likelihood_approx(Label::kPositive, Eigen::Vector2d(-2.0, 0.0), e1) == -2.0);

  PointSet at_ln3(3, 2);
  at_ln3.col(0).setConstant(ln3);
  at_ln3.col(1).setZero();
  check(std::abs(conditional_entropy_score(Eigen::Vector2d(e1), at_ln3) - (2.0 - 0.75 * std::log2(3.0))) <= 1e-12);
  check(std::abs(volume_removal_score(Eigen::Vector2d(e1), at_ln3) - 0.25) <= 1e-12);
  check(conditional_entropy_score(Eigen::Vector2d(Eigen::Vector2d::Zero()), at_ln3) == 1.0);
  check(volume_removal_score(Eigen::Vector2d(Eigen::Vector2d::Zero()), at_ln3) == 0.5);

  std::mt19937_64 rng(55);
  std::normal_distribution<double> n(0.0, 2.0);
  double complement = 0.0, symmetry = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Eigen::Vector4d w, psi;
    for (int k = 0; k < 4; ++k) {
      w(k) = n(rng);
      psi(k) = n(rng);
    }
    complement = std::max(complement, std::abs(likelihood(Label::kPositive, w, psi) +
                                               likelihood(Label::kNegative, w, psi) - 1.0));
  }
  for (int i = 0; i < 200; ++i) {
    PointSet s(50, 4);
    for (Eigen::Index k = 0; k < s.size(); ++k) s.data()[k] = 0.5 * n(rng);
    const Eigen::Vector4d psi(n(rng), n(rng), n(rng), n(rng));
    symmetry = std::max(symmetry, std::abs(conditional_entropy_score(Eigen::Vector4d(psi), s) -
                                           conditional_entropy_score(Eigen::Vector4d(-psi), s)));
  }
  const bool pass = failures == 0 && complement <= 1e-12 && symmetry <= 1e-12;
  return {pass, fmt("%d example failures; complement err %.1e; negation err %.1e", failures, complement, symmetry)};
}

Outcome posterior_sanity() {
  ExperimentConfig cfg = suite_config(Strategy::kSuccessiveElimination);
  cfg.n_queries = 100;
  cfg.seed = kNoiselessSeed;
  cfg.oracle.noisy = false;
  int good = 0;
  std::string ms;
  double first_m = 0.0;
  for (int run = 0; run < kRuns; ++run) {
    const SessionLog log = run_session(paired_run_config(cfg, run), lds_pool());
    const double m = log.final_alignment();
    if (run == 0) first_m = m;
    good += m >= 0.85;
    ms += fmt("%.3f ", m);
  }
  const SessionLog again = run_session(paired_run_config(cfg, 0), lds_pool());
  const bool bitwise = again.final_alignment() == first_m && (replay_posterior_mean(again).array() == again.w_hat.array()).all();
  return {good >= 8 && bitwise,
          fmt("m>=0.85 in %d/%d (%s); rerun bitwise %s", good, kRuns, ms.c_str(), bitwise ? "yes" : "no")};
}

}  // namespace
}  // namespace batchpref

int main() {
  using namespace batchpref;
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"maximizer_containment", maximizer_containment},
      {"oracle_equivalences", geometry_oracles},
      {"likelihood_entropy_suite", likelihood_entropy},
      {"timing_tradeoff", timing_tradeoff},
      {"posterior_sanity", posterior_sanity},
      {"lds_convergence_ordering", lds_ordering},
      {"diversity_ordering", diversity_ordering},
  };
  std::printf("ranking score: %s\n", std::string(to_string(ExperimentConfig{}.score_kind)).c_str());
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
