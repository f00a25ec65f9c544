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

// prefbatch: pool generation, simulated experiments, comparisons, reports
// and the interactive session server.
//
// Exit codes: 0 success, 1 internal failure, 2 usage or validation error.

#include <csignal>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "batchpref/io.hpp"
#include "batchpref/server.hpp"
#include "batchpref/session.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines a `_res` macro.
#include <httplib.h>

namespace bp = batchpref;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SharedFlags {
  std::string env = "lds";
  int dim = 4;
  int k = 10000;
  int b = 10;
  int big_b = 200;
  int m = 1000;
  int n = 150;
  std::string strategy = "successive-elimination";
  std::string score_kind = "information_gain";
  bp::Seed seed = 0;
  std::string w_true;
  bool noiseless = false;
  int am_steps = 0;  // 0: default chain length
  bool dim_given = false;
  bool k_given = false;
};

void add_experiment_flags(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--b,--batch-size", f.b, "queries per batch (b)");
  cmd->add_option("--big-b,--preselect", f.big_b, "preselection size (B)");
  cmd->add_option("--m,--num-samples", f.m, "posterior samples (M)");
  cmd->add_option("--n,--num-queries", f.n, "total queries (N)");
  cmd->add_option("--strategy", f.strategy,
                  "greedy | medoids | boundary-medoids | successive-elimination | random");
  cmd->add_option("--score-kind", f.score_kind,
                  "information_gain | clipped_volume | entropy | volume");
  cmd->add_option("--w-true", f.w_true, "comma-separated true weights (default: random)");
  cmd->add_flag("--noiseless", f.noiseless, "deterministic oracle");
  cmd->add_option("--am-steps", f.am_steps, "total adaptive Metropolis steps");
}

bp::WeightVector parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in --w-true");
    }
  }
  return Eigen::Map<bp::WeightVector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

bp::ExperimentConfig make_config(const SharedFlags& f, const bp::QueryPool& pool) {
  if (f.dim_given && pool.env_name == "lds" && f.dim != pool.dim)
    throw UsageError("--dim " + std::to_string(f.dim) + " does not match the pool (d=" +
                     std::to_string(pool.dim) + ")");
  if (f.k_given && f.k != pool.K)
    throw UsageError("--k " + std::to_string(f.k) + " does not match the pool (K=" +
                     std::to_string(pool.K) + ")");
  bp::ExperimentConfig cfg;
  cfg.env_name = pool.env_name;
  cfg.dim = pool.dim;
  cfg.K = pool.K;
  cfg.b = f.b;
  cfg.B = f.big_b;
  cfg.M = f.m;
  cfg.n_queries = f.n;
  cfg.strategy = bp::strategy_from_string(f.strategy);
  cfg.score_kind = bp::score_kind_from_string(f.score_kind);
  cfg.seed = f.seed;
  if (f.am_steps > 0) cfg.am.total_steps = f.am_steps;
  cfg.oracle.noisy = !f.noiseless;
  cfg.oracle.seed = bp::derive_seed(f.seed, 0x0ac1e);
  cfg.oracle.w_true = f.w_true.empty()
                          ? bp::random_true_weights(pool.dim, bp::derive_seed(f.seed, 0x3e16))
                          : parse_vector(f.w_true);
  cfg.validate();
  return cfg;
}

bp::QueryPool load_pool_checked(const std::string& path, const std::string& env) {
  bp::QueryPool pool = bp::load_pool(path);
  const std::string canonical = bp::make_environment(env, pool.dim)->spec().name;
  if (canonical != pool.env_name)
    throw UsageError("pool " + path + " is for '" + pool.env_name + "', not '" + env + "'");
  return pool;
}

template <typename Writer>
void write_atomic(const std::string& path, Writer&& writer) {
  std::ostringstream ss;
  writer(ss);
  bp::write_file_atomic(path, ss.str());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

int cmd_pool(const SharedFlags& f, const std::string& out) {
  const auto t0 = std::chrono::steady_clock::now();
  auto env = bp::make_environment(f.env, f.dim);
  const bp::QueryPool pool = bp::sample_pool(*env, f.k, f.seed);
  bp::save_pool(pool, out);
  std::printf("wrote %s: K=%d d=%d elapsed=%.3fs\n", out.c_str(), pool.K, pool.dim,
              seconds_since(t0));
  return 0;
}

int cmd_simulate(const SharedFlags& f, const std::string& pool_path, const std::string& out) {
  const bp::QueryPool pool = load_pool_checked(pool_path, f.env);
  const bp::ExperimentConfig cfg = make_config(f, pool);
  const bp::SessionLog log = bp::run_session(cfg, pool);
  bp::save_session_log(log, out);
  if (!log.complete) {
    std::fprintf(stderr, "session incomplete: %s\n", log.error.c_str());
    return kExitInternal;
  }
  std::printf("label=%s rounds=%zu final_m=%.6f mean_per_query_s=%.6f\n",
              cfg.label().c_str(), log.iterations.size(), log.final_alignment(),
              log.mean_per_query_seconds());
  return 0;
}

void emit_comparison(const bp::ComparisonResult& result, const std::string& out_csv,
                     const std::string& out_p) {
  write_atomic(out_csv, [&](std::ostream& os) { bp::write_comparison_csv(result, os); });
  write_atomic(out_p, [&](std::ostream& os) { os << bp::p_value_json(result).dump(2) << '\n'; });
  for (std::size_t s = 0; s < result.labels.size(); ++s) {
    double mean = 0.0;
    for (double v : result.final_alignment[s]) mean += v;
    mean /= static_cast<double>(result.final_alignment[s].size());
    std::printf("%-24s final_m=%.4f\n", result.labels[s].c_str(), mean);
  }
}

int cmd_compare(SharedFlags f, const std::vector<std::string>& logs,
                const std::string& pool_path, const std::vector<std::string>& strategies,
                int runs, int jobs, const std::string& out_csv, const std::string& out_p) {
  if (!logs.empty()) {
    std::vector<bp::SessionLog> loaded;
    for (const auto& path : logs) loaded.push_back(bp::load_session_log(path));
    emit_comparison(bp::compare_logs(loaded), out_csv, out_p);
    return 0;
  }
  if (pool_path.empty()) throw UsageError("compare needs --logs or --pool");
  if (strategies.size() < 2) throw UsageError("compare needs at least two --strategies");
  const bp::QueryPool pool = load_pool_checked(pool_path, f.env);
  std::vector<bp::ExperimentConfig> configs;
  for (const auto& name : strategies) {
    f.strategy = name;
    configs.push_back(make_config(f, pool));
  }
  emit_comparison(bp::compare_methods(configs, runs, pool, jobs), out_csv, out_p);
  return 0;
}

int cmd_report(const std::vector<std::string>& logs, const std::string& out) {
  std::vector<bp::SessionLog> loaded;
  for (const auto& path : logs) loaded.push_back(bp::load_session_log(path));
  const auto rows = bp::aggregate_report(loaded);
  write_atomic(out, [&](std::ostream& os) { bp::write_report_csv(rows, os); });
  std::printf("wrote %s: %zu rows from %zu logs\n", out.c_str(), rows.size(), loaded.size());
  return 0;
}

httplib::Server* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int cmd_serve(const SharedFlags& f, const std::vector<std::string>& pool_paths,
              const std::string& host, int port, const std::string& data_dir) {
  bp::ServerOptions options;
  options.data_dir = data_dir;
  options.score_kind = bp::score_kind_from_string(f.score_kind);
  if (f.am_steps > 0) options.am.total_steps = f.am_steps;
  if (pool_paths.empty()) {
    auto env = bp::make_environment(f.env, f.dim);
    auto pool = std::make_shared<bp::QueryPool>(bp::sample_pool(*env, f.k, f.seed));
    options.pools[pool->env_name] = pool;
  }
  for (const auto& path : pool_paths) {
    auto pool = std::make_shared<bp::QueryPool>(bp::load_pool(path));
    options.pools[pool->env_name] = pool;
  }

  bp::SessionStore store(options);
  const int restored = store.restore();
  httplib::Server server;
  bp::register_routes(server, store);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::printf("serving on http://%s:%d (%zu environments, %d sessions restored)\n",
              host.c_str(), port, options.pools.size(), restored);
  std::fflush(stdout);
  if (!server.listen(host, port)) {
    std::fprintf(stderr, "cannot listen on %s:%d\n", host.c_str(), port);
    return kExitInternal;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch active preference-based reward learning"};
  app.require_subcommand(1);

  SharedFlags f;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--env", f.env, "lds | driver | tosser");
    cmd->add_option("--dim", f.dim, "LDS feature dimension")
        ->each([&](const std::string&) { f.dim_given = true; });
    cmd->add_option("--k,--pool-size", f.k, "pool size (K)")
        ->each([&](const std::string&) { f.k_given = true; });
    cmd->add_option("--seed", f.seed, "seed")->envname("PREF_SEED");
  };

  std::string out;
  std::string pool_path;
  std::vector<std::string> logs;
  std::vector<std::string> strategies;
  std::vector<std::string> pool_paths;
  int runs = 10;
  int jobs = 1;
  std::string out_csv = "comparison.csv";
  std::string out_p = "p_values.json";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "sessions";

  auto* pool_cmd = app.add_subcommand("pool", "sample a query pool");
  add_common(pool_cmd);
  pool_cmd->add_option("--out,-o", out, "pool file")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "run one simulated session");
  add_common(sim_cmd);
  add_experiment_flags(sim_cmd, f);
  sim_cmd->add_option("--pool", pool_path, "pool file")->required();
  sim_cmd->add_option("--out,-o", out, "session log")->required();

  auto* cmp_cmd = app.add_subcommand("compare", "compare strategies over paired runs");
  add_common(cmp_cmd);
  add_experiment_flags(cmp_cmd, f);
  cmp_cmd->add_option("--logs", logs, "finished session logs");
  cmp_cmd->add_option("--pool", pool_path, "pool file (run mode)");
  cmp_cmd->add_option("--strategies", strategies, "strategies to run")->delimiter(',');
  cmp_cmd->add_option("--runs", runs, "paired runs per strategy");
  cmp_cmd->add_option("--jobs,-j", jobs, "concurrent runs");
  cmp_cmd->add_option("--out-csv", out_csv, "alignment CSV");
  cmp_cmd->add_option("--out-p", out_p, "p-value JSON");

  auto* rep_cmd = app.add_subcommand("report", "aggregate m by query count");
  rep_cmd->add_option("--logs", logs, "session logs")->required();
  rep_cmd->add_option("--out,-o", out, "report CSV")->required();

  auto* srv_cmd = app.add_subcommand("serve", "interactive session server");
  add_common(srv_cmd);
  srv_cmd->add_option("--pool", pool_paths, "pool files (default: sample one)");
  srv_cmd->add_option("--host", host);
  srv_cmd->add_option("--port", port);
  srv_cmd->add_option("--data-dir", data_dir, "session event logs");
  srv_cmd->add_option("--score-kind", f.score_kind);
  srv_cmd->add_option("--am-steps", f.am_steps);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*pool_cmd) return cmd_pool(f, out);
    if (*sim_cmd) return cmd_simulate(f, pool_path, out);
    if (*cmp_cmd)
      return cmd_compare(f, logs, pool_path, strategies, runs, jobs, out_csv, out_p);
    if (*rep_cmd) return cmd_report(logs, out);
    if (*srv_cmd) return cmd_serve(f, pool_paths, host, port, data_dir);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const bp::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {  // configuration, contract, env
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: malformed input: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
