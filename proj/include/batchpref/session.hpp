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

// The learning loop: score the pool, select a batch, query, re-sample.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "batchpref/acquisition.hpp"
#include "batchpref/batch.hpp"
#include "batchpref/belief.hpp"
#include "batchpref/env.hpp"
#include "batchpref/oracle.hpp"

namespace batchpref {

inline constexpr int kLogFormatVersion = 1;

// Cosine between the true and estimated weights.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar alignment(const Eigen::MatrixBase<DerivedA>& w_true,
                                    const Eigen::MatrixBase<DerivedB>& w_hat) {
  using Scalar = typename DerivedA::Scalar;
  if (w_true.size() != w_hat.size())
    throw UndefinedMetric("alignment: dimension mismatch");
  const Scalar norms = w_true.norm() * w_hat.norm();
  if (norms == Scalar(0)) throw UndefinedMetric("alignment: zero vector");
  return w_true.dot(w_hat) / norms;
}

struct ExperimentConfig {
  std::string env_name = "lds";
  int dim = 4;
  int K = 10000;
  int b = 10;
  int B = 200;
  int M = 1000;
  Strategy strategy = Strategy::kSuccessiveElimination;
  ScoreKind score_kind = ScoreKind::kInformationGain;
  int n_queries = 150;
  OracleConfig oracle;
  AdaptiveMetropolisConfig am;
  Seed seed = 0;

  // "pool-nonbatch" for b = 1, else the strategy name.
  std::string label() const;
  void validate() const;
};

struct WallTimes {
  double scoring = 0.0;
  double selection = 0.0;
  double sampling = 0.0;
  double per_query = 0.0;  // (scoring + selection + sampling) / b
};

struct IterationRecord {
  int batch_index = 0;
  SelectedBatch selected;
  std::vector<QueryScore> selected_scores;
  std::vector<Response> responses;
  double alignment = 0.0;
  WeightVector w_hat;
  WallTimes wall;
};

struct SessionLog {
  int format_version = kLogFormatVersion;
  ExperimentConfig config;
  std::vector<IterationRecord> iterations;
  WeightVector w_hat;
  bool complete = true;
  std::string error;

  double final_alignment() const;
  double mean_per_query_seconds() const;
  // All responses in the order they were collected.
  std::vector<Response> all_responses() const;
};

// One learner's round state: the active pool, the posterior chain and the
// accumulated responses. run_session and the interactive server both drive
// rounds through this, so their posteriors agree bitwise.
class BatchLearner {
 public:
  // cfg.oracle is ignored. The pool must outlive the learner.
  BatchLearner(const ExperimentConfig& cfg, const QueryPool& pool);

  // Scores the active pool and selects the next batch. The selected
  // candidates leave the active pool. Fills batch_index, selected,
  // selected_scores and the scoring/selection wall times.
  IterationRecord propose();

  // Adds the batch's responses and re-samples the posterior. Fills
  // responses, w_hat and the sampling/per-query wall times.
  void absorb(IterationRecord& record, std::vector<Response> responses);

  const PosteriorChain& chain() const { return chain_; }
  const std::vector<Response>& responses() const { return responses_; }
  int rounds_proposed() const { return round_; }
  int active_size() const { return static_cast<int>(active_.size()); }

 private:
  ExperimentConfig cfg_;
  PointSet full_psi_;
  std::vector<int> active_;
  PosteriorChain chain_;
  std::vector<Response> responses_;
  Seed batch_seed_base_;
  int round_ = 0;
};

SessionLog run_session(const ExperimentConfig& cfg, const QueryPool& pool);

// Re-derives the final posterior mean from the logged responses, batch by
// batch, through the same posterior update path as run_session.
WeightVector replay_posterior_mean(const SessionLog& log);

// ---------------------------------------------------------------------------
// Method comparison

struct RunSummary {
  std::string label;
  int run = 0;
  SessionLog log;
};

struct ComparisonResult {
  std::vector<std::string> labels;
  int runs = 0;
  // final_alignment[s][r]
  std::vector<std::vector<double>> final_alignment;
  // mean_alignment[s][round], averaged over runs
  std::vector<std::vector<double>> mean_alignment;
  // p_values[i][j]: one-sided Wilcoxon p that method i ends above method j.
  std::vector<std::vector<double>> p_values;
  std::vector<RunSummary> details;
};

// Per-run configuration: shares w_true, oracle stream and chain seed across
// every method for the same run index.
ExperimentConfig paired_run_config(const ExperimentConfig& base, int run);

// Runs every config for `runs` paired runs (up to `jobs` concurrently) and
// tabulates alignments and pairwise tests. No config-equality check.
ComparisonResult run_paired(const std::vector<ExperimentConfig>& configs,
                            int runs, const QueryPool& pool, int jobs = 1);

// As run_paired, but configs must agree on everything except the strategy.
ComparisonResult compare_methods(const std::vector<ExperimentConfig>& configs,
                                 int runs, const QueryPool& pool, int jobs = 1);

// Builds the table and tests from finished logs grouped by label; logs of
// one label are paired with the others by their order after sorting on the
// oracle seed.
ComparisonResult compare_logs(const std::vector<SessionLog>& logs);

// Pairwise one-sided p-value matrix over per-method samples.
std::vector<std::vector<double>> pairwise_p_values(
    const std::vector<std::vector<double>>& finals);

// CSV: strategy,run,round,n_queries,m,per_query_seconds
void write_comparison_csv(const ComparisonResult& result, std::ostream& out);
nlohmann::json p_value_json(const ComparisonResult& result);

struct ReportRow {
  std::string label;
  int n_queries = 0;
  int runs = 0;
  double mean_m = 0.0;
  double se_m = 0.0;
};

// Mean and standard error of m per (label, query count) across logs.
std::vector<ReportRow> aggregate_report(const std::vector<SessionLog>& logs);
void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out);

// ---------------------------------------------------------------------------
// Serialization

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);
void to_json(nlohmann::json& j, const IterationRecord& rec);
void from_json(const nlohmann::json& j, IterationRecord& rec);

// JSON-lines: header {v, type: "header", config}, one iteration per line,
// then {type: "final", w_hat, complete}.
void write_session_log(const SessionLog& log, std::ostream& out);
SessionLog read_session_log(std::istream& in);
void save_session_log(const SessionLog& log, const std::string& path);
SessionLog load_session_log(const std::string& path);

}  // namespace batchpref
