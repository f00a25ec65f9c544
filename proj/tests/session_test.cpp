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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "batchpref/session.hpp"

namespace batchpref {
namespace {

const QueryPool& small_pool() {
  static const QueryPool pool = sample_pool(LinearDynamicalSystem(3), 500, 4);
  return pool;
}

ExperimentConfig small_config(Strategy s = Strategy::kSuccessiveElimination, int n = 30) {
  ExperimentConfig cfg;
  cfg.dim = 3;
  cfg.K = 500;
  cfg.b = 10;
  cfg.B = 50;
  cfg.M = 200;
  cfg.n_queries = n;
  cfg.strategy = s;
  cfg.seed = 21;
  cfg.oracle = {random_true_weights(3, 5), true, 6};
  return cfg;
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

TEST(Alignment, Examples) {
  const Eigen::Vector2d w(0.3, -0.8);
  EXPECT_DOUBLE_EQ(alignment(w, w), 1.0);
  EXPECT_DOUBLE_EQ(alignment(w, Eigen::Vector2d(-w)), -1.0);
  EXPECT_NEAR(alignment(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1)), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(alignment(w, Eigen::Vector2d(7.0 * w)), alignment(w, w));
  EXPECT_THROW(alignment(w, Eigen::Vector2d::Zero().eval()), UndefinedMetric);
  EXPECT_THROW(alignment(Eigen::VectorXd(w), Eigen::VectorXd(Eigen::Vector3d(1, 0, 0))), UndefinedMetric);
}

TEST(ExperimentConfig, ValidationAndLabel) {
  auto cfg = small_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.n_queries = 25;
  EXPECT_THROW(cfg.validate(), ConfigurationError);
  cfg = small_config();
  cfg.B = 5;
  EXPECT_THROW(cfg.validate(), ConfigurationError);
  cfg = small_config();
  cfg.oracle.w_true = Eigen::Vector2d(1, 0);
  EXPECT_THROW(cfg.validate(), ConfigurationError);

  cfg = small_config();
  EXPECT_EQ(cfg.label(), "successive_elimination");
  cfg.b = 1;
  EXPECT_EQ(cfg.label(), "pool-nonbatch");
  cfg.strategy = Strategy::kRandom;
  EXPECT_EQ(cfg.label(), "random");
}

TEST(RunSession, ZeroQueriesGivesPriorMean) {
  const SessionLog log = run_session(small_config(Strategy::kSuccessiveElimination, 0), small_pool());
  EXPECT_TRUE(log.complete);
  EXPECT_TRUE(log.iterations.empty());
  EXPECT_EQ(log.w_hat.size(), 3);
  EXPECT_LT(log.w_hat.norm(), 0.15);
}

TEST(RunSession, BookkeepingAndDeterminism) {
  const auto cfg = small_config();
  const SessionLog a = run_session(cfg, small_pool());
  ASSERT_TRUE(a.complete) << a.error;
  ASSERT_EQ(a.iterations.size(), 3u);

  std::set<int> asked;
  for (std::size_t r = 0; r < a.iterations.size(); ++r) {
    const auto& it = a.iterations[r];
    EXPECT_EQ(it.batch_index, static_cast<int>(r));
    ASSERT_EQ(it.responses.size(), 10u);
    ASSERT_EQ(it.selected.indices.size(), 10u);
    for (std::size_t q = 0; q < 10; ++q) {
      const int idx = it.selected.indices[q];
      EXPECT_TRUE(asked.insert(idx).second) << "asked twice: " << idx;
      EXPECT_TRUE(same_bits(it.responses[q].psi, small_pool().candidates[static_cast<std::size_t>(idx)].psi));
    }
    EXPECT_LE(it.alignment, 1.0 + 1e-12);
    EXPECT_NEAR(it.wall.per_query, (it.wall.scoring + it.wall.selection + it.wall.sampling) / 10.0, 1e-12);
  }
  EXPECT_EQ(a.all_responses().size(), 30u);
  EXPECT_DOUBLE_EQ(a.final_alignment(), a.iterations.back().alignment);

  const SessionLog b = run_session(cfg, small_pool());
  EXPECT_TRUE(same_bits(a.w_hat, b.w_hat));
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(a.iterations[r].selected.indices, b.iterations[r].selected.indices);
}

TEST(RunSession, ReplayReproducesPosteriorMeanBitwise) {
  for (Strategy s : {Strategy::kSuccessiveElimination, Strategy::kRandom, Strategy::kBoundaryMedoids}) {
    const SessionLog log = run_session(small_config(s), small_pool());
    ASSERT_TRUE(log.complete);
    EXPECT_TRUE(same_bits(replay_posterior_mean(log), log.w_hat)) << to_string(s);

    std::stringstream io;
    write_session_log(log, io);
    const SessionLog back = read_session_log(io);
    EXPECT_TRUE(same_bits(replay_posterior_mean(back), log.w_hat));
  }
}

TEST(RunSession, MismatchedPoolIsRejected) {
  auto cfg = small_config();
  cfg.K = 400;
  cfg.B = 40;
  EXPECT_THROW(run_session(cfg, small_pool()), ConfigurationError);
  cfg = small_config();
  cfg.env_name = "tosser";
  EXPECT_THROW(run_session(cfg, small_pool()), ConfigurationError);
}

TEST(RunSession, CanAskEveryCandidateOnce) {
  const QueryPool tiny = sample_pool(LinearDynamicalSystem(3), 25, 1);
  auto cfg = small_config(Strategy::kGreedy, 25);
  cfg.K = 25;
  cfg.b = 5;
  cfg.B = 5;
  const SessionLog log = run_session(cfg, tiny);
  ASSERT_TRUE(log.complete) << log.error;
  std::set<int> asked;
  for (const auto& it : log.iterations) asked.insert(it.selected.indices.begin(), it.selected.indices.end());
  EXPECT_EQ(asked.size(), 25u);
  cfg.n_queries = 30;
  EXPECT_THROW(cfg.validate(), ConfigurationError);
}

TEST(SessionLog, JsonLinesRoundTrip) {
  const SessionLog log = run_session(small_config(Strategy::kMedoids, 20), small_pool());
  std::stringstream io;
  write_session_log(log, io);
  const std::string text = io.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);

  const SessionLog back = read_session_log(io);
  EXPECT_EQ(back.format_version, kLogFormatVersion);
  EXPECT_EQ(back.config.strategy, Strategy::kMedoids);
  EXPECT_EQ(back.config.oracle.seed, log.config.oracle.seed);
  ASSERT_EQ(back.iterations.size(), 2u);
  EXPECT_EQ(back.iterations[1].selected.indices, log.iterations[1].selected.indices);
  EXPECT_DOUBLE_EQ(back.iterations[1].alignment, log.iterations[1].alignment);
  EXPECT_TRUE(same_bits(back.w_hat, log.w_hat));
  EXPECT_TRUE(back.complete);

  std::stringstream again;
  write_session_log(back, again);
  EXPECT_EQ(again.str(), text);

  const auto path = std::filesystem::temp_directory_path() / "session_roundtrip.jsonl";
  save_session_log(log, path.string());
  EXPECT_EQ(load_session_log(path.string()).iterations.size(), 2u);
  std::filesystem::remove(path);

  std::istringstream headless("{\"type\":\"iteration\"}\n");
  EXPECT_ANY_THROW(read_session_log(headless));
}

TEST(CompareMethods, SelfComparisonIsNotSignificant) {
  const auto finals = std::vector<std::vector<double>>{{0.1, 0.5, 0.3, 0.9, 0.7}, {0.1, 0.5, 0.3, 0.9, 0.7}};
  const auto p = pairwise_p_values(finals);
  EXPECT_EQ(p[0][1], 1.0);
  EXPECT_EQ(p[1][0], 1.0);
  EXPECT_EQ(p[0][0], 1.0);

  const auto all_pos = pairwise_p_values({{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}});
  EXPECT_DOUBLE_EQ(all_pos[0][1], 1.0 / 1024.0);
  EXPECT_DOUBLE_EQ(all_pos[1][0], 1.0);
}

TEST(CompareMethods, PairsRunsAndChecksConfigs) {
  auto se = small_config(Strategy::kSuccessiveElimination, 10);
  auto rnd = small_config(Strategy::kRandom, 10);
  EXPECT_THROW(compare_methods({se, rnd}, 4, small_pool()), ConfigurationError);
  EXPECT_THROW(compare_methods({se}, 5, small_pool()), ConfigurationError);
  auto odd = rnd;
  odd.M = 100;
  EXPECT_THROW(compare_methods({se, odd}, 5, small_pool()), ConfigurationError);

  const ComparisonResult r = compare_methods({se, rnd}, 5, small_pool(), 2);
  ASSERT_EQ(r.labels, (std::vector<std::string>{"successive_elimination", "random"}));
  EXPECT_EQ(r.runs, 5);
  ASSERT_EQ(r.details.size(), 10u);
  for (int run = 0; run < 5; ++run) {
    const auto& a = r.details[static_cast<std::size_t>(run)].log.config;
    const auto& b = r.details[static_cast<std::size_t>(5 + run)].log.config;
    EXPECT_EQ(a.oracle.seed, b.oracle.seed);
    EXPECT_TRUE(same_bits(a.oracle.w_true, b.oracle.w_true));
  }
  EXPECT_EQ(r.p_values[0][0], 1.0);
  EXPECT_EQ(r.p_values[1][1], 1.0);

  std::vector<SessionLog> logs;
  for (const auto& d : r.details) logs.push_back(d.log);
  const ComparisonResult again = compare_logs(logs);
  EXPECT_EQ(again.p_values, r.p_values);
  // Runs come back ordered by oracle seed; the pairing must survive.
  auto pairs = [](const ComparisonResult& c) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < c.final_alignment[0].size(); ++i)
      out.emplace_back(c.final_alignment[0][i], c.final_alignment[1][i]);
    std::sort(out.begin(), out.end());
    return out;
  };
  EXPECT_EQ(pairs(again), pairs(r));

  std::ostringstream csv;
  write_comparison_csv(r, csv);
  const std::string text = csv.str();
  EXPECT_EQ(text.rfind("strategy,run,round,n_queries,m,per_query_seconds\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 11);

  const auto j = p_value_json(r);
  EXPECT_EQ(j.at("labels").size(), 2u);
  EXPECT_EQ(j.at("p_values")[0][0], 1.0);
}

TEST(Report, AggregatesPerQueryCount) {
  const SessionLog one = run_session(small_config(Strategy::kRandom, 30), small_pool());
  auto rows = aggregate_report({one});
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i].n_queries, 10 * static_cast<int>(i + 1));
    EXPECT_EQ(rows[i].runs, 1);
    EXPECT_DOUBLE_EQ(rows[i].mean_m, one.iterations[i].alignment);
    EXPECT_EQ(rows[i].se_m, 0.0);
  }
  auto cfg2 = small_config(Strategy::kRandom, 30);
  cfg2.oracle.seed = 77;
  const SessionLog two = run_session(cfg2, small_pool());
  rows = aggregate_report({one, two});
  EXPECT_NEAR(rows[2].mean_m, 0.5 * (one.final_alignment() + two.final_alignment()), 1e-12);
  EXPECT_NEAR(rows[2].se_m, std::abs(one.final_alignment() - two.final_alignment()) / 2.0, 1e-12);

  std::ostringstream csv;
  write_report_csv(rows, csv);
  EXPECT_EQ(csv.str().rfind("strategy,n_queries,runs,mean_m,se_m\n", 0), 0u);
}

TEST(BatchLearner, ProposeAbsorbContract) {
  const auto cfg = small_config();
  BatchLearner learner(cfg, small_pool());
  EXPECT_EQ(learner.active_size(), 500);
  IterationRecord rec = learner.propose();
  EXPECT_EQ(learner.active_size(), 490);
  EXPECT_EQ(learner.rounds_proposed(), 1);
  std::vector<Response> short_batch(3, Response{Eigen::Vector3d(1, 0, 0), Label::kPositive});
  EXPECT_THROW(learner.absorb(rec, short_batch), ContractViolation);
  std::vector<Response> full;
  for (int idx : rec.selected.indices)
    full.push_back({small_pool().candidates[static_cast<std::size_t>(idx)].psi, Label::kPositive});
  learner.absorb(rec, full);
  EXPECT_EQ(learner.responses().size(), 10u);
  EXPECT_EQ(learner.chain().updates(), 2);
}

}  // namespace
}  // namespace batchpref
