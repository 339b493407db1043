#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rag/config.hpp"
#include "rag/orchestrator.hpp"

namespace rag {

/// Append-only JSONL log of pipeline runs. Existing records are loaded on
/// open so run ids survive restarts.
class RunLog {
 public:
  explicit RunLog(std::string path = {});

  void append(const PipelineRun& run);
  std::optional<PipelineRun> find(const std::string& run_id) const;
  std::size_t size() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  mutable std::mutex mutex_;
  std::vector<PipelineRun> runs_;
  std::map<std::string, std::size_t> by_id_;
};

struct Session {
  std::string session_id;
  std::vector<ChatTurn> history;
  std::int64_t created_at = 0;  // unix seconds
  Mode mode_default = Mode::arag;
};

nlohmann::ordered_json session_to_json(const Session& s);
Session session_from_json(const nlohmann::json& j);

struct AskResponse {
  std::string answer;
  std::vector<std::string> citations;  // cited source links
  std::optional<int> qa_score;
  std::vector<std::string> retrieved_links_top5;
  std::int64_t latency_ms = 0;
  std::string run_id;
};

nlohmann::ordered_json ask_response_to_json(const AskResponse& r);

/// Raised by ask() when the pipeline fails. The partial run was logged
/// under run_id.
class AskError : public Error {
 public:
  AskError(ErrorCode code, const std::string& message, std::string run_id)
      : Error(code, message), run_id_(std::move(run_id)) {}
  const std::string& run_id() const { return run_id_; }

 private:
  std::string run_id_;
};

class SessionManager {
 public:
  /// `sessions_dir` enables file-backed sessions (one JSON file per id).
  SessionManager(Engine& engine, RunLog& log, std::size_t history_turns = 10, std::string sessions_dir = {});

  Session create_session(Mode mode_default);
  std::optional<Session> get_session(const std::string& session_id) const;

  /// Runs the pipeline with the last `history_turns` turns of the session.
  /// Calls for one session are serialized; different sessions run in
  /// parallel (the gateway backend must tolerate that).
  AskResponse ask(const std::string& session_id, const std::string& question,
                  std::optional<Mode> mode_override = std::nullopt);

  PipelineRun get_trace(const std::string& run_id) const;

 private:
  struct Slot {
    std::mutex mutex;
    Session session;
    std::size_t asks = 0;
  };

  std::shared_ptr<Slot> slot(const std::string& session_id) const;
  void persist(const Session& s) const;

  Engine& engine_;
  RunLog& log_;
  std::size_t history_turns_;
  std::string sessions_dir_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t counter_ = 0;
  // The engine's gateway is shared; the scripted backend needs one caller
  // at a time, so pipeline runs go through this lock when it is ordered.
  std::mutex pipeline_mutex_;
};

/// HTTP front end:
///   POST /v1/sessions            {mode_default}      -> {session_id}
///   POST /v1/sessions/{id}/ask   {question, mode?}   -> AskResponse
///   GET  /v1/runs/{run_id}                           -> PipelineRun
///   GET  /v1/health                                  -> {status, index_size, glossary_size}
/// Errors are {code, message, run_id?}.
class HttpService {
 public:
  HttpService(Engine& engine, SessionManager& sessions, std::string static_dir = {});
  ~HttpService();

  /// Binds and serves until stop(). Port 0 picks an ephemeral port, which
  /// port() reports once listening.
  void listen(const std::string& host, int port);
  /// Binds, then serves on a background thread. Returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

int http_status(ErrorCode code);

}  // namespace rag
