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

#include "batchpref/session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "batchpref/io.hpp"
#include "batchpref/stats.hpp"

namespace batchpref {

namespace {

constexpr std::uint64_t kChainSalt = 1;
constexpr std::uint64_t kBatchSalt = 2;
constexpr std::uint64_t kRunSeedSalt = 0x100;
constexpr std::uint64_t kRunWeightSalt = 0x200;
constexpr std::uint64_t kRunOracleSalt = 0x300;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

std::string ExperimentConfig::label() const {
  if (b == 1 && strategy != Strategy::kRandom) return "pool-nonbatch";
  return std::string(to_string(strategy));
}

void ExperimentConfig::validate() const {
  if (dim < 1) throw ConfigurationError("dim must be >= 1");
  if (K < 1) throw ConfigurationError("K must be >= 1");
  if (b < 1) throw ConfigurationError("b must be >= 1");
  if (B < b) throw ConfigurationError("B must be >= b");
  if (B > K) throw ConfigurationError("B must not exceed K");
  if (M < 1) throw ConfigurationError("M must be >= 1");
  if (n_queries < 0 || n_queries % b != 0)
    throw ConfigurationError("number of queries must be a non-negative multiple of b");
  if (n_queries > K) throw ConfigurationError("more queries than pool candidates");
  if (oracle.w_true.size() != dim)
    throw ConfigurationError("oracle w_true dimension does not match dim");
  am.validate(M);
}

// ---------------------------------------------------------------------------
// SessionLog

double SessionLog::final_alignment() const {
  if (iterations.empty()) return alignment(config.oracle.w_true, w_hat);
  return iterations.back().alignment;
}

double SessionLog::mean_per_query_seconds() const {
  if (iterations.empty()) return 0.0;
  double total = 0.0;
  for (const auto& it : iterations) total += it.wall.per_query;
  return total / static_cast<double>(iterations.size());
}

std::vector<Response> SessionLog::all_responses() const {
  std::vector<Response> out;
  for (const auto& it : iterations)
    out.insert(out.end(), it.responses.begin(), it.responses.end());
  return out;
}

// ---------------------------------------------------------------------------
// BatchLearner

BatchLearner::BatchLearner(const ExperimentConfig& cfg, const QueryPool& pool)
    : cfg_(cfg),
      full_psi_(pool.psi_matrix()),
      chain_(cfg.dim, cfg.M, cfg.am, derive_seed(cfg.seed, kChainSalt)),
      batch_seed_base_(derive_seed(cfg.seed, kBatchSalt)) {
  if (pool.env_name != cfg.env_name)
    throw ConfigurationError("pool environment '" + pool.env_name +
                             "' does not match '" + cfg.env_name + "'");
  if (pool.dim != cfg.dim) throw ConfigurationError("pool dimension mismatch");
  if (pool.K != cfg.K) throw ConfigurationError("pool size does not match K");
  active_.resize(static_cast<std::size_t>(pool.K));
  for (int i = 0; i < pool.K; ++i) active_[static_cast<std::size_t>(i)] = i;
  chain_.update({});
}

IterationRecord BatchLearner::propose() {
  if (active_size() < cfg_.b)
    throw ContractViolation("pool exhausted: fewer active candidates than b");
  IterationRecord rec;
  rec.batch_index = round_;

  auto t0 = Clock::now();
  PointSet active_psi(static_cast<Eigen::Index>(active_.size()), cfg_.dim);
  for (std::size_t r = 0; r < active_.size(); ++r)
    active_psi.row(static_cast<Eigen::Index>(r)) = full_psi_.row(active_[r]);
  const std::vector<QueryScore> scores = score_pool(active_psi, chain_.current());
  const std::vector<double> ranking = ranking_values(scores, cfg_.score_kind);
  rec.wall.scoring = seconds_since(t0);

  t0 = Clock::now();
  BatchRequest request;
  request.b = cfg_.b;
  request.B = std::min(cfg_.B, active_size());
  request.strategy = cfg_.strategy;
  request.seed = derive_seed(batch_seed_base_, static_cast<std::uint64_t>(round_));
  const SelectedBatch local = select_batch(request, active_psi, ranking);
  rec.wall.selection = seconds_since(t0);

  // Active-pool positions to pool indices.
  rec.selected = local;
  for (std::size_t q = 0; q < local.indices.size(); ++q) {
    const auto pos = static_cast<std::size_t>(local.indices[q]);
    rec.selected.indices[q] = active_[pos];
    rec.selected_scores.push_back(scores[pos]);
  }
  if (rec.selected.elimination_trace) {
    for (auto& [removed, kept] : *rec.selected.elimination_trace) {
      removed = active_[static_cast<std::size_t>(removed)];
      kept = active_[static_cast<std::size_t>(kept)];
    }
  }

  std::vector<int> asked = local.indices;
  std::sort(asked.begin(), asked.end());
  for (auto it = asked.rbegin(); it != asked.rend(); ++it)
    active_.erase(active_.begin() + *it);
  ++round_;
  return rec;
}

void BatchLearner::absorb(IterationRecord& rec, std::vector<Response> responses) {
  require(static_cast<int>(responses.size()) == cfg_.b,
          "absorb: expected exactly b responses");
  responses_.insert(responses_.end(), responses.begin(), responses.end());
  rec.responses = std::move(responses);
  const auto t0 = Clock::now();
  chain_.update(responses_);
  rec.wall.sampling = seconds_since(t0);
  rec.wall.per_query = (rec.wall.scoring + rec.wall.selection + rec.wall.sampling) / cfg_.b;
  rec.w_hat = chain_.mean();
}

// ---------------------------------------------------------------------------
// run_session

SessionLog run_session(const ExperimentConfig& cfg, const QueryPool& pool) {
  cfg.validate();
  SessionLog log;
  log.config = cfg;

  Oracle oracle(cfg.oracle);
  BatchLearner learner(cfg, pool);
  log.w_hat = learner.chain().mean();

  const int rounds = cfg.n_queries / cfg.b;
  for (int round = 0; round < rounds; ++round) {
    try {
      IterationRecord rec = learner.propose();
      std::vector<Response> answers;
      for (int idx : rec.selected.indices) {
        const FeatureVector& psi = pool.candidates[static_cast<std::size_t>(idx)].psi;
        answers.push_back(Response{psi, oracle.respond(psi)});
      }
      learner.absorb(rec, std::move(answers));
      rec.alignment = alignment(cfg.oracle.w_true, rec.w_hat);
      log.w_hat = rec.w_hat;
      log.iterations.push_back(std::move(rec));
    } catch (const std::exception& e) {
      log.complete = false;
      log.error = "round " + std::to_string(round) + ": " + e.what();
      return log;
    }
  }
  return log;
}

WeightVector replay_posterior_mean(const SessionLog& log) {
  const ExperimentConfig& cfg = log.config;
  PosteriorChain chain(cfg.dim, cfg.M, cfg.am, derive_seed(cfg.seed, kChainSalt));
  chain.update({});
  std::vector<Response> responses;
  for (const auto& it : log.iterations) {
    responses.insert(responses.end(), it.responses.begin(), it.responses.end());
    chain.update(responses);
  }
  return chain.mean();
}

// ---------------------------------------------------------------------------
// Comparison

ExperimentConfig paired_run_config(const ExperimentConfig& base, int run) {
  ExperimentConfig cfg = base;
  const auto r = static_cast<std::uint64_t>(run);
  cfg.seed = derive_seed(base.seed, kRunSeedSalt + r);
  cfg.oracle.w_true =
      random_true_weights(base.dim, derive_seed(base.seed, kRunWeightSalt + r));
  cfg.oracle.seed = derive_seed(base.seed, kRunOracleSalt + r);
  return cfg;
}

std::vector<std::vector<double>> pairwise_p_values(
    const std::vector<std::vector<double>>& finals) {
  const std::size_t s = finals.size();
  std::vector<std::vector<double>> p(s, std::vector<double>(s, 1.0));
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      if (finals[i].size() != finals[j].size())
        throw ConfigurationError("pairwise test needs equal run counts");
      std::vector<double> diff(finals[i].size());
      for (std::size_t r = 0; r < diff.size(); ++r)
        diff[r] = finals[i][r] - finals[j][r];
      p[i][j] = wilcoxon_signed_rank(diff).p_greater;
    }
  }
  return p;
}

namespace {

ComparisonResult tabulate(std::vector<std::string> labels,
                          std::vector<std::vector<SessionLog>> logs) {
  ComparisonResult out;
  out.labels = std::move(labels);
  out.runs = logs.empty() ? 0 : static_cast<int>(logs[0].size());
  for (std::size_t s = 0; s < logs.size(); ++s) {
    std::vector<double> finals;
    std::vector<double> mean;
    for (std::size_t r = 0; r < logs[s].size(); ++r) {
      const SessionLog& log = logs[s][r];
      finals.push_back(log.final_alignment());
      if (mean.size() < log.iterations.size()) mean.resize(log.iterations.size(), 0.0);
      for (std::size_t k = 0; k < log.iterations.size(); ++k)
        mean[k] += log.iterations[k].alignment / static_cast<double>(logs[s].size());
      out.details.push_back(RunSummary{out.labels[s], static_cast<int>(r), log});
    }
    out.final_alignment.push_back(std::move(finals));
    out.mean_alignment.push_back(std::move(mean));
  }
  out.p_values = pairwise_p_values(out.final_alignment);
  return out;
}

}  // namespace

ComparisonResult run_paired(const std::vector<ExperimentConfig>& configs,
                            int runs, const QueryPool& pool, int jobs) {
  if (configs.empty()) throw ConfigurationError("no configurations to compare");
  if (runs < 1) throw ConfigurationError("runs must be >= 1");
  jobs = std::max(1, jobs);

  struct Task {
    std::size_t config;
    int run;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < configs.size(); ++c)
    for (int r = 0; r < runs; ++r) tasks.push_back({c, r});

  std::vector<std::vector<SessionLog>> logs(
      configs.size(), std::vector<SessionLog>(static_cast<std::size_t>(runs)));
  std::size_t next = 0;
  while (next < tasks.size()) {
    std::vector<std::future<void>> wave;
    for (int k = 0; k < jobs && next < tasks.size(); ++k, ++next) {
      const Task t = tasks[next];
      wave.push_back(std::async(std::launch::async, [&, t] {
        logs[t.config][static_cast<std::size_t>(t.run)] =
            run_session(paired_run_config(configs[t.config], t.run), pool);
      }));
    }
    for (auto& f : wave) f.get();
  }

  std::vector<std::string> labels;
  for (const auto& c : configs) labels.push_back(c.label());
  return tabulate(std::move(labels), std::move(logs));
}

ComparisonResult compare_methods(const std::vector<ExperimentConfig>& configs,
                                 int runs, const QueryPool& pool, int jobs) {
  if (runs < 5) throw ConfigurationError("compare_methods needs at least 5 runs");
  if (configs.size() < 2) throw ConfigurationError("need at least two methods");
  auto stripped = [](const ExperimentConfig& c) {
    nlohmann::json j = c;
    j.erase("strategy");
    return j;
  };
  const nlohmann::json reference = stripped(configs[0]);
  for (const auto& c : configs) {
    if (stripped(c) != reference)
      throw ConfigurationError(
          "compare_methods: configurations differ in more than the strategy");
  }
  return run_paired(configs, runs, pool, jobs);
}

ComparisonResult compare_logs(const std::vector<SessionLog>& logs) {
  std::map<std::string, std::vector<SessionLog>> groups;
  std::vector<std::string> order;
  for (const auto& log : logs) {
    const std::string label = log.config.label();
    if (!groups.count(label)) order.push_back(label);
    groups[label].push_back(log);
  }
  std::vector<std::vector<SessionLog>> grouped;
  if (order.empty()) throw ConfigurationError("no logs to compare");
  const std::size_t runs = groups[order.at(0)].size();
  for (const auto& label : order) {
    auto& g = groups[label];
    if (g.size() < 2)
      throw ConfigurationError("need at least two logs for '" + label + "'");
    if (g.size() != runs)
      throw ConfigurationError("every method needs the same number of logs");
    std::stable_sort(g.begin(), g.end(), [](const SessionLog& a, const SessionLog& b) {
      return a.config.oracle.seed < b.config.oracle.seed;
    });
    grouped.push_back(std::move(g));
  }
  return tabulate(order, std::move(grouped));
}

void write_comparison_csv(const ComparisonResult& result, std::ostream& out) {
  out << "strategy,run,round,n_queries,m,per_query_seconds\n";
  out.precision(17);
  for (const auto& d : result.details) {
    for (const auto& it : d.log.iterations) {
      out << d.label << ',' << d.run << ',' << it.batch_index << ','
          << (it.batch_index + 1) * d.log.config.b << ',' << it.alignment << ','
          << it.wall.per_query << '\n';
    }
  }
}

nlohmann::json p_value_json(const ComparisonResult& result) {
  nlohmann::json finals = nlohmann::json::object();
  for (std::size_t s = 0; s < result.labels.size(); ++s)
    finals[result.labels[s]] = result.final_alignment[s];
  return {{"v", kLogFormatVersion},
          {"labels", result.labels},
          {"runs", result.runs},
          {"alternative", "row_greater_than_column"},
          {"p_values", result.p_values},
          {"final_alignment", finals}};
}

std::vector<ReportRow> aggregate_report(const std::vector<SessionLog>& logs) {
  struct Acc {
    std::vector<double> values;
  };
  std::map<std::pair<std::string, int>, Acc> acc;
  std::vector<std::string> order;
  for (const auto& log : logs) {
    const std::string label = log.config.label();
    if (std::find(order.begin(), order.end(), label) == order.end())
      order.push_back(label);
    for (const auto& it : log.iterations)
      acc[{label, (it.batch_index + 1) * log.config.b}].values.push_back(it.alignment);
  }
  std::vector<ReportRow> rows;
  for (const auto& label : order) {
    for (const auto& [key, a] : acc) {
      if (key.first != label) continue;
      ReportRow row;
      row.label = label;
      row.n_queries = key.second;
      row.runs = static_cast<int>(a.values.size());
      double sum = 0.0;
      for (double v : a.values) sum += v;
      row.mean_m = sum / row.runs;
      if (row.runs > 1) {
        double ss = 0.0;
        for (double v : a.values) ss += (v - row.mean_m) * (v - row.mean_m);
        row.se_m = std::sqrt(ss / (row.runs - 1)) / std::sqrt(static_cast<double>(row.runs));
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out) {
  out << "strategy,n_queries,runs,mean_m,se_m\n";
  out.precision(17);
  for (const auto& r : rows)
    out << r.label << ',' << r.n_queries << ',' << r.runs << ',' << r.mean_m << ','
        << r.se_m << '\n';
}

// ---------------------------------------------------------------------------
// Serialization

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
  j = {{"env", cfg.env_name},
       {"dim", cfg.dim},
       {"K", cfg.K},
       {"b", cfg.b},
       {"B", cfg.B},
       {"M", cfg.M},
       {"strategy", std::string(to_string(cfg.strategy))},
       {"score_kind", std::string(to_string(cfg.score_kind))},
       {"n_queries", cfg.n_queries},
       {"oracle", cfg.oracle},
       {"am", cfg.am},
       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  cfg.env_name = j.at("env").get<std::string>();
  cfg.dim = j.at("dim").get<int>();
  cfg.K = j.at("K").get<int>();
  cfg.b = j.at("b").get<int>();
  cfg.B = j.at("B").get<int>();
  cfg.M = j.at("M").get<int>();
  cfg.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  cfg.score_kind = score_kind_from_string(j.at("score_kind").get<std::string>());
  cfg.n_queries = j.at("n_queries").get<int>();
  cfg.oracle = j.at("oracle").get<OracleConfig>();
  cfg.am = j.at("am").get<AdaptiveMetropolisConfig>();
  cfg.seed = j.at("seed").get<Seed>();
}

void to_json(nlohmann::json& j, const IterationRecord& rec) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& s : rec.selected_scores)
    scores.push_back({{"entropy_bits", s.entropy_bits},
                      {"volume_removal", s.volume_removal},
                      {"mean_prob_positive", s.mean_prob_positive},
                      {"information_gain_bits", s.information_gain_bits},
                      {"clipped_volume_removal", s.clipped_volume_removal}});
  j = {{"batch_index", rec.batch_index},
       {"selected", rec.selected},
       {"query_scores", scores},
       {"responses", rec.responses},
       {"m", rec.alignment},
       {"w_hat", vector_to_json(rec.w_hat)},
       {"wall_times",
        {{"scoring_s", rec.wall.scoring},
         {"selection_s", rec.wall.selection},
         {"sampling_s", rec.wall.sampling},
         {"per_query_s", rec.wall.per_query}}}};
}

void from_json(const nlohmann::json& j, IterationRecord& rec) {
  rec.batch_index = j.at("batch_index").get<int>();
  rec.selected = j.at("selected").get<SelectedBatch>();
  rec.selected_scores.clear();
  for (const auto& s : j.at("query_scores")) {
    QueryScore q;
    q.entropy_bits = s.at("entropy_bits").get<double>();
    q.volume_removal = s.at("volume_removal").get<double>();
    q.mean_prob_positive = s.at("mean_prob_positive").get<double>();
    q.information_gain_bits = s.value("information_gain_bits", 0.0);
    q.clipped_volume_removal = s.value("clipped_volume_removal", 0.0);
    rec.selected_scores.push_back(q);
  }
  rec.responses = j.at("responses").get<std::vector<Response>>();
  rec.alignment = j.at("m").get<double>();
  rec.w_hat = vector_from_json(j.at("w_hat"));
  const auto& w = j.at("wall_times");
  rec.wall.scoring = w.at("scoring_s").get<double>();
  rec.wall.selection = w.at("selection_s").get<double>();
  rec.wall.sampling = w.at("sampling_s").get<double>();
  rec.wall.per_query = w.at("per_query_s").get<double>();
}

void write_session_log(const SessionLog& log, std::ostream& out) {
  nlohmann::json header = {{"v", log.format_version},
                           {"type", "header"},
                           {"label", log.config.label()},
                           {"config", log.config}};
  out << header.dump() << '\n';
  for (const auto& it : log.iterations) {
    nlohmann::json line = it;
    line["type"] = "iteration";
    out << line.dump() << '\n';
  }
  nlohmann::json footer = {{"type", "final"},
                           {"w_hat", vector_to_json(log.w_hat)},
                           {"complete", log.complete},
                           {"error", log.error}};
  out << footer.dump() << '\n';
}

SessionLog read_session_log(std::istream& in) {
  SessionLog log;
  std::string line;
  bool have_header = false;
  bool have_footer = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      log.format_version = j.at("v").get<int>();
      log.config = j.at("config").get<ExperimentConfig>();
      have_header = true;
    } else if (type == "iteration") {
      log.iterations.push_back(j.get<IterationRecord>());
    } else if (type == "final") {
      log.w_hat = vector_from_json(j.at("w_hat"));
      log.complete = j.at("complete").get<bool>();
      log.error = j.value("error", "");
      have_footer = true;
    }
  }
  if (!have_header) throw ContractViolation("session log: missing header");
  if (!have_footer) {
    log.complete = false;
    if (!log.iterations.empty()) log.w_hat = log.iterations.back().w_hat;
  }
  return log;
}

void save_session_log(const SessionLog& log, const std::string& path) {
  std::ostringstream ss;
  write_session_log(log, ss);
  write_file_atomic(path, ss.str());
}

SessionLog load_session_log(const std::string& path) {
  std::istringstream ss(read_file(path));
  return read_session_log(ss);
}

}  // namespace batchpref
