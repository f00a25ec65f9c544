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

// Interactive elicitation sessions for human respondents, over HTTP.
//
// Every session keeps an append-only event log (<data_dir>/<id>.jsonl) of
// create, batch and response events. A response is written and fsynced
// before it is applied or acknowledged, and sessions are rebuilt from their
// logs on startup.

#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "batchpref/env.hpp"
#include "batchpref/session.hpp"

namespace httplib {
class Server;
}

namespace batchpref {

inline constexpr int kApiVersion = 1;
inline constexpr int kHistogramBins = 41;

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Conflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServerOptions {
  std::string data_dir;  // empty: no persistence
  std::map<std::string, std::shared_ptr<const QueryPool>> pools;  // by env name
  AdaptiveMetropolisConfig am;
  ScoreKind score_kind = ScoreKind::kInformationGain;
};

// Per-dimension mean, standard deviation and a 41-bin histogram over
// [-1, 1] of the posterior samples.
nlohmann::json posterior_summary(const PosteriorSamples& posterior);

class SessionStore {
 public:
  explicit SessionStore(ServerOptions options);
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  // body: {env, strategy?, b?, B?, M?, seed?, score_kind?}. Returns
  // {v, session_id, batch}.
  nlohmann::json create(const nlohmann::json& body);

  nlohmann::json info(const std::string& id) const;

  // {v, status: "ready", batch_index, queries: [...]} or
  // {v, status: "pending"} while the posterior is being re-sampled.
  nlohmann::json batch(const std::string& id) const;

  // choice "A" maps to label +1, "B" to -1. With wait = true the call that
  // completes a batch returns the next batch and the posterior summary;
  // with wait = false it returns at once and re-sampling runs in the
  // background (poll batch()).
  nlohmann::json submit(const std::string& id, int query_id,
                        const std::string& choice, bool wait = true);

  nlohmann::json posterior(const std::string& id) const;
  nlohmann::json trajectories(const std::string& id, int query_id) const;
  nlohmann::json environments() const;

  // Blocks until no background re-sampling is running for the session.
  void wait_idle(const std::string& id) const;

  // Rebuilds sessions from the event logs in data_dir. Returns the count.
  int restore();

  std::size_t size() const;

 private:
  struct Session;
  struct Advance {
    IterationRecord done;
    IterationRecord next;
    PosteriorSamples posterior;
  };
  std::shared_ptr<Session> find(const std::string& id) const;
  // Re-samples with the completed batch and proposes the next one. Touches
  // only the session's learner, so it may run without the session lock.
  Advance advance(Session& s, IterationRecord pending,
                  const std::map<int, Label>& answers);
  static void install(Session& s, Advance step);
  nlohmann::json batch_payload(const Session& s) const;
  void persist(const Session& s, const nlohmann::json& event) const;
  std::string fresh_id();

  ServerOptions options_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::unique_ptr<Environment>> envs_;
  std::uint64_t id_state_;
};

// Routes: POST /sessions, GET /sessions/{id}, GET /sessions/{id}/batch,
// GET /sessions/{id}/next, POST /sessions/{id}/responses,
// GET /sessions/{id}/posterior, GET /sessions/{id}/queries/{qid}/trajectories,
// GET /envs, GET /health.
void register_routes(httplib::Server& server, SessionStore& store);

}  // namespace batchpref
