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

#include "batchpref/server.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "batchpref/io.hpp"

namespace batchpref {

struct SessionStore::Session {
  mutable std::mutex mu;
  mutable std::condition_variable idle;
  std::string id;
  ExperimentConfig cfg;
  std::shared_ptr<const QueryPool> pool;
  std::unique_ptr<BatchLearner> learner;
  IterationRecord pending;
  std::map<int, Label> answers;  // query id -> label, pending batch only
  std::vector<IterationRecord> history;
  PosteriorSamples posterior;  // snapshot for readers during re-sampling
  bool resampling = false;
  std::string error;
  std::thread worker;
};

namespace {

nlohmann::json versioned(nlohmann::json j) {
  j["v"] = kApiVersion;
  return j;
}

Label label_from_choice(const std::string& choice) {
  if (choice == "A" || choice == "a") return Label::kPositive;
  if (choice == "B" || choice == "b") return Label::kNegative;
  throw ContractViolation("choice must be \"A\" or \"B\"");
}

std::string choice_from_label(Label label) {
  return label == Label::kPositive ? "A" : "B";
}

}  // namespace

nlohmann::json posterior_summary(const PosteriorSamples& posterior) {
  const auto& s = posterior.samples;
  const Eigen::Index m = s.rows();
  nlohmann::json mean = nlohmann::json::array();
  nlohmann::json stdev = nlohmann::json::array();
  nlohmann::json counts = nlohmann::json::array();
  for (Eigen::Index k = 0; k < s.cols(); ++k) {
    const auto col = s.col(k);
    const double mu = m > 0 ? col.mean() : 0.0;
    const double var = m > 0 ? (col.array() - mu).square().mean() : 0.0;
    mean.push_back(mu);
    stdev.push_back(std::sqrt(var));
    std::vector<int> bins(kHistogramBins, 0);
    for (Eigen::Index r = 0; r < m; ++r) {
      const double u = (col(r) + 1.0) / 2.0 * kHistogramBins;
      const int bin = std::clamp(static_cast<int>(std::floor(u)), 0, kHistogramBins - 1);
      ++bins[static_cast<std::size_t>(bin)];
    }
    counts.push_back(bins);
  }
  return {{"dim", s.cols()},
          {"M", m},
          {"mean", mean},
          {"std", stdev},
          {"histogram", {{"lo", -1.0}, {"hi", 1.0}, {"bins", kHistogramBins}, {"counts", counts}}}};
}

// ---------------------------------------------------------------------------

SessionStore::SessionStore(ServerOptions options)
    : options_(std::move(options)), id_state_(std::random_device{}()) {
  id_state_ = (id_state_ << 32) ^ std::random_device{}();
  for (const auto& [name, pool] : options_.pools) {
    require(pool != nullptr, "server: null pool for " + name);
    envs_.emplace(name, make_environment(pool->env_name, pool->dim));
  }
  if (!options_.data_dir.empty()) std::filesystem::create_directories(options_.data_dir);
}

SessionStore::~SessionStore() {
  std::unique_lock lock(map_mutex_);
  for (auto& [id, s] : sessions_) {
    if (s->worker.joinable()) s->worker.join();
  }
}

std::size_t SessionStore::size() const {
  std::shared_lock lock(map_mutex_);
  return sessions_.size();
}

std::string SessionStore::fresh_id() {
  std::ostringstream ss;
  ss << std::hex << derive_seed(id_state_++, 0x5e55);
  return ss.str();
}

std::shared_ptr<SessionStore::Session> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
  return it->second;
}

void SessionStore::persist(const Session& s, const nlohmann::json& event) const {
  if (options_.data_dir.empty()) return;
  const auto path = std::filesystem::path(options_.data_dir) / (s.id + ".jsonl");
  append_line_durable(path.string(), versioned(event).dump());
}

nlohmann::json SessionStore::batch_payload(const Session& s) const {
  if (s.resampling) return versioned({{"session_id", s.id}, {"status", "pending"}});
  if (!s.error.empty())
    return versioned({{"session_id", s.id}, {"status", "failed"}, {"error", s.error}});
  const Environment& env = *envs_.at(s.cfg.env_name);
  nlohmann::json queries = nlohmann::json::array();
  for (int idx : s.pending.selected.indices) {
    const QueryCandidate& c = s.pool->candidates[static_cast<std::size_t>(idx)];
    const auto [a, b] = replay_candidate(env, c);
    nlohmann::json q = {{"query_id", idx},
                        {"a", {{"states", matrix_to_json(a.states)}}},
                        {"b", {{"states", matrix_to_json(b.states)}}}};
    if (auto it = s.answers.find(idx); it != s.answers.end())
      q["answer"] = choice_from_label(it->second);
    queries.push_back(std::move(q));
  }
  return versioned({{"session_id", s.id},
                    {"status", "ready"},
                    {"batch_index", s.pending.batch_index},
                    {"b", s.cfg.b},
                    {"answered", s.answers.size()},
                    {"queries", queries}});
}

SessionStore::Advance SessionStore::advance(Session& s, IterationRecord pending,
                                            const std::map<int, Label>& answers) {
  std::vector<Response> responses;
  for (int idx : pending.selected.indices) {
    responses.push_back(
        Response{s.pool->candidates[static_cast<std::size_t>(idx)].psi, answers.at(idx)});
  }
  s.learner->absorb(pending, std::move(responses));
  return Advance{std::move(pending), s.learner->propose(), s.learner->chain().current()};
}

void SessionStore::install(Session& s, Advance step) {
  s.history.push_back(std::move(step.done));
  s.pending = std::move(step.next);
  s.posterior = std::move(step.posterior);
  s.answers.clear();
}

nlohmann::json SessionStore::create(const nlohmann::json& body) {
  const std::string env_name =
      make_environment(body.at("env").get<std::string>(), 1)->spec().name;
  auto pool_it = options_.pools.find(env_name);
  if (pool_it == options_.pools.end())
    throw NotFound("no query pool for environment '" + env_name + "'");
  const auto& pool = pool_it->second;

  ExperimentConfig cfg;
  cfg.env_name = pool->env_name;
  cfg.dim = pool->dim;
  cfg.K = pool->K;
  cfg.b = body.value("b", 10);
  cfg.B = body.value("B", std::min(200, pool->K));
  cfg.M = body.value("M", 1000);
  cfg.strategy = strategy_from_string(body.value("strategy", "successive_elimination"));
  cfg.score_kind = body.contains("score_kind")
                       ? score_kind_from_string(body.at("score_kind").get<std::string>())
                       : options_.score_kind;
  cfg.seed = body.value("seed", Seed{0});
  cfg.am = options_.am;
  cfg.n_queries = 0;
  cfg.oracle.w_true = WeightVector::Zero(cfg.dim);  // no oracle: humans answer
  cfg.validate();

  auto s = std::make_shared<Session>();
  s->cfg = cfg;
  s->pool = pool;
  s->learner = std::make_unique<BatchLearner>(cfg, *pool);
  s->pending = s->learner->propose();
  s->posterior = s->learner->chain().current();

  {
    std::unique_lock lock(map_mutex_);
    do {
      s->id = fresh_id();
    } while (sessions_.count(s->id));
    persist(*s, {{"type", "create"},
                 {"id", s->id},
                 {"config", cfg},
                 {"pool", {{"env", pool->env_name}, {"K", pool->K}, {"seed", pool->seed}}}});
    persist(*s, {{"type", "batch"},
                 {"batch_index", s->pending.batch_index},
                 {"indices", s->pending.selected.indices}});
    sessions_.emplace(s->id, s);
  }
  std::lock_guard lock(s->mu);
  return versioned({{"session_id", s->id}, {"batch", batch_payload(*s)}});
}

nlohmann::json SessionStore::info(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  const int answered = static_cast<int>(s->history.size()) * s->cfg.b +
                       static_cast<int>(s->answers.size());
  return versioned({{"session_id", s->id},
                    {"env", s->cfg.env_name},
                    {"strategy", to_string(s->cfg.strategy)},
                    {"b", s->cfg.b},
                    {"B", s->cfg.B},
                    {"M", s->cfg.M},
                    {"K", s->cfg.K},
                    {"seed", s->cfg.seed},
                    {"score_kind", to_string(s->cfg.score_kind)},
                    {"rounds_completed", s->history.size()},
                    {"queries_answered", answered},
                    {"status", s->resampling ? "pending" : (s->error.empty() ? "ready" : "failed")}});
}

nlohmann::json SessionStore::batch(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return batch_payload(*s);
}

nlohmann::json SessionStore::submit(const std::string& id, int query_id,
                                    const std::string& choice, bool wait) {
  auto s = find(id);
  const Label label = label_from_choice(choice);
  std::unique_lock lock(s->mu);
  if (s->resampling) throw Conflict("batch complete; next batch not ready yet");
  if (!s->error.empty()) throw Conflict("session failed: " + s->error);
  const auto& indices = s->pending.selected.indices;
  if (std::find(indices.begin(), indices.end(), query_id) == indices.end())
    throw NotFound("query " + std::to_string(query_id) + " is not in the pending batch");
  if (s->answers.count(query_id))
    throw Conflict("query " + std::to_string(query_id) + " already answered");

  persist(*s, {{"type", "response"},
               {"batch_index", s->pending.batch_index},
               {"query_id", query_id},
               {"choice", choice_from_label(label)}});
  s->answers.emplace(query_id, label);

  nlohmann::json out = {{"session_id", s->id},
                        {"query_id", query_id},
                        {"accepted", true},
                        {"answered", s->answers.size()},
                        {"remaining", s->cfg.b - static_cast<int>(s->answers.size())},
                        {"batch_complete", false}};
  if (static_cast<int>(s->answers.size()) < s->cfg.b) return versioned(out);

  out["batch_complete"] = true;
  if (wait) {
    try {
      install(*s, advance(*s, s->pending, s->answers));
      persist(*s, {{"type", "batch"},
                   {"batch_index", s->pending.batch_index},
                   {"indices", s->pending.selected.indices}});
    } catch (const std::exception& e) {
      s->error = e.what();
    }
    out["status"] = s->error.empty() ? "ready" : "failed";
    out["next_batch"] = batch_payload(*s);
    out["posterior"] = posterior_summary(s->posterior);
    return versioned(out);
  }

  // Background re-sampling. The learner is only touched by the worker while
  // `resampling` is set, so the session lock is not held during sampling.
  s->resampling = true;
  if (s->worker.joinable()) s->worker.join();
  s->worker = std::thread([this, s, pending = s->pending, answers = s->answers] {
    std::optional<Advance> step;
    std::string error;
    try {
      step = advance(*s, pending, answers);
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::lock_guard inner(s->mu);
    s->error = error;
    if (step) {
      install(*s, std::move(*step));
      try {
        persist(*s, {{"type", "batch"},
                     {"batch_index", s->pending.batch_index},
                     {"indices", s->pending.selected.indices}});
      } catch (const std::exception&) {
        // The batch is re-derived from the responses on restore.
      }
    }
    s->resampling = false;
    s->idle.notify_all();
  });
  out["status"] = "pending";
  return versioned(out);
}

void SessionStore::wait_idle(const std::string& id) const {
  auto s = find(id);
  std::unique_lock lock(s->mu);
  s->idle.wait(lock, [&] { return !s->resampling; });
}

nlohmann::json SessionStore::posterior(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  nlohmann::json out = posterior_summary(s->posterior);
  out["session_id"] = s->id;
  out["queries"] = static_cast<int>(s->history.size()) * s->cfg.b;
  out["rounds_completed"] = s->history.size();
  return versioned(out);
}

nlohmann::json SessionStore::trajectories(const std::string& id, int query_id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  if (query_id < 0 || query_id >= s->pool->K)
    throw NotFound("unknown query " + std::to_string(query_id));
  const QueryCandidate& c = s->pool->candidates[static_cast<std::size_t>(query_id)];
  const auto [a, b] = replay_candidate(*envs_.at(s->cfg.env_name), c);
  return versioned({{"session_id", s->id},
                    {"query_id", query_id},
                    {"env", s->cfg.env_name},
                    {"a", trajectory_to_json(a)},
                    {"b", trajectory_to_json(b)}});
}

nlohmann::json SessionStore::environments() const {
  nlohmann::json envs = nlohmann::json::array();
  for (const auto& [name, pool] : options_.pools)
    envs.push_back({{"env", name}, {"K", pool->K}, {"dim", pool->dim}});
  return versioned({{"environments", envs}});
}

int SessionStore::restore() {
  if (options_.data_dir.empty()) return 0;
  int restored = 0;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(options_.data_dir))
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  for (const auto& path : files) {
    std::ifstream in(path);
    std::string line;
    std::shared_ptr<Session> s;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json ev;
      try {
        ev = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        break;  // torn trailing write
      }
      const std::string type = ev.at("type").get<std::string>();
      if (type == "create") {
        const auto cfg = ev.at("config").get<ExperimentConfig>();
        auto pool_it = options_.pools.find(cfg.env_name);
        if (pool_it == options_.pools.end() || pool_it->second->K != cfg.K ||
            pool_it->second->seed != ev.at("pool").at("seed").get<Seed>())
          throw ConfigurationError("cannot restore " + path.string() +
                                   ": its query pool is not loaded");
        s = std::make_shared<Session>();
        s->id = ev.at("id").get<std::string>();
        s->cfg = cfg;
        s->pool = pool_it->second;
        s->learner = std::make_unique<BatchLearner>(cfg, *s->pool);
        s->pending = s->learner->propose();
        s->posterior = s->learner->chain().current();
      } else if (!s) {
        throw ConfigurationError("event log " + path.string() + " lacks a create event");
      } else if (type == "batch") {
        if (ev.at("batch_index").get<int>() != s->pending.batch_index ||
            ev.at("indices").get<std::vector<int>>() != s->pending.selected.indices)
          throw ConfigurationError("event log " + path.string() +
                                   " does not replay to the recorded batch");
      } else if (type == "response") {
        s->answers.emplace(ev.at("query_id").get<int>(),
                           label_from_choice(ev.at("choice").get<std::string>()));
        if (static_cast<int>(s->answers.size()) == s->cfg.b)
          install(*s, advance(*s, s->pending, s->answers));
      }
    }
    if (!s) continue;
    std::unique_lock lock(map_mutex_);
    sessions_[s->id] = s;
    ++restored;
  }
  return restored;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, versioned({{"error", message}}));
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NotFound& e) {
    send_error(res, 404, e.what());
  } catch (const UnknownEnvironment& e) {
    send_error(res, 404, e.what());
  } catch (const Conflict& e) {
    send_error(res, 409, e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, std::string("bad request: ") + e.what());
  } catch (const std::invalid_argument& e) {
    send_error(res, 400, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  return nlohmann::json::parse(req.body);
}

}  // namespace

void register_routes(httplib::Server& server, SessionStore& store) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, versioned({{"status", "ok"}}));
  });
  server.Get("/envs", [&store](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, store.environments()); });
  });
  server.Post("/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, store.create(parse_body(req))); });
  });
  server.Get(R"(/sessions/([^/]+))", [&store](const httplib::Request& req,
                                             httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, store.info(req.matches[1])); });
  });
  auto get_batch = [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      nlohmann::json body = store.batch(req.matches[1]);
      send_json(res, body.at("status") == "pending" ? 202 : 200, body);
    });
  };
  server.Get(R"(/sessions/([^/]+)/batch)", get_batch);
  server.Get(R"(/sessions/([^/]+)/next)", get_batch);
  server.Post(R"(/sessions/([^/]+)/responses)", [&store](const httplib::Request& req,
                                                        httplib::Response& res) {
    guarded(res, [&] {
      const nlohmann::json body = parse_body(req);
      send_json(res, 200,
                store.submit(req.matches[1], body.at("query_id").get<int>(),
                             body.at("choice").get<std::string>(), body.value("wait", true)));
    });
  });
  server.Get(R"(/sessions/([^/]+)/posterior)", [&store](const httplib::Request& req,
                                                       httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, store.posterior(req.matches[1])); });
  });
  server.Get(R"(/sessions/([^/]+)/queries/(\d+)/trajectories)",
             [&store](const httplib::Request& req, httplib::Response& res) {
               guarded(res, [&] {
                 send_json(res, 200,
                           store.trajectories(req.matches[1], std::stoi(req.matches[2])));
               });
             });
}

}  // namespace batchpref
