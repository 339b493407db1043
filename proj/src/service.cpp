#include "rag/service.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "httplib.h"

namespace rag {

// --- run log -----------------------------------------------------------------

RunLog::RunLog(std::string path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  runs_ = load_run_log(path_);
  for (std::size_t i = 0; i < runs_.size(); ++i) by_id_[runs_[i].run_id] = i;
}

void RunLog::append(const PipelineRun& run) {
  std::lock_guard lock(mutex_);
  if (!path_.empty()) {
    auto parent = std::filesystem::path(path_).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot append to run log " + path_);
    out << run_to_jsonl(run) << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::io, "write failed on run log " + path_);
  }
  runs_.push_back(run);
  by_id_[run.run_id] = runs_.size() - 1;
}

std::optional<PipelineRun> RunLog::find(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  auto it = by_id_.find(run_id);
  if (it == by_id_.end()) return std::nullopt;
  return runs_[it->second];
}

std::size_t RunLog::size() const {
  std::lock_guard lock(mutex_);
  return runs_.size();
}

// --- sessions ----------------------------------------------------------------

nlohmann::ordered_json session_to_json(const Session& s) {
  nlohmann::ordered_json j;
  j["session_id"] = s.session_id;
  j["created_at"] = s.created_at;
  j["mode_default"] = std::string(to_string(s.mode_default));
  j["history"] = nlohmann::ordered_json::array();
  for (const auto& t : s.history)
    j["history"].push_back({{"role", std::string(to_string(t.role))}, {"content", t.content}});
  return j;
}

Session session_from_json(const nlohmann::json& j) {
  Session s;
  s.session_id = j.at("session_id").get<std::string>();
  s.created_at = j.value("created_at", std::int64_t{0});
  s.mode_default = mode_from_string(j.value("mode_default", std::string("arag")));
  for (const auto& t : j.value("history", nlohmann::json::array()))
    s.history.push_back(ChatTurn{role_from_string(t.at("role").get<std::string>()), t.at("content").get<std::string>()});
  return s;
}

nlohmann::ordered_json ask_response_to_json(const AskResponse& r) {
  nlohmann::ordered_json j;
  j["answer"] = r.answer;
  j["citations"] = r.citations;
  j["qa_score"] = r.qa_score ? nlohmann::ordered_json(*r.qa_score) : nlohmann::ordered_json(nullptr);
  j["retrieved_links_top5"] = r.retrieved_links_top5;
  j["latency_ms"] = r.latency_ms;
  j["run_id"] = r.run_id;
  return j;
}

namespace {

std::string random_suffix() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  return to_hex(rng()).substr(0, 8);
}

std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

SessionManager::SessionManager(Engine& engine, RunLog& log, std::size_t history_turns, std::string sessions_dir)
    : engine_(engine), log_(log), history_turns_(history_turns), sessions_dir_(std::move(sessions_dir)) {
  if (history_turns_ == 0) throw Error(ErrorCode::invalid_argument, "history_turns must be positive");
  if (!sessions_dir_.empty()) std::filesystem::create_directories(sessions_dir_);
}

Session SessionManager::create_session(Mode mode_default) {
  auto s = std::make_shared<Slot>();
  {
    std::lock_guard lock(mutex_);
    s->session.session_id = "s" + std::to_string(++counter_) + "-" + random_suffix();
    s->session.created_at = unix_now();
    s->session.mode_default = mode_default;
    sessions_[s->session.session_id] = s;
  }
  persist(s->session);
  return s->session;
}

std::shared_ptr<SessionManager::Slot> SessionManager::slot(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  if (auto it = sessions_.find(session_id); it != sessions_.end()) return it->second;
  if (!sessions_dir_.empty() && session_id.find_first_of("/\\.") == std::string::npos) {
    auto file = std::filesystem::path(sessions_dir_) / (session_id + ".json");
    if (std::filesystem::exists(file)) {
      auto s = std::make_shared<Slot>();
      s->session = session_from_json(nlohmann::json::parse(read_file(file.string())));
      s->asks = s->session.history.size() / 2;
      sessions_[session_id] = s;
      return s;
    }
  }
  return nullptr;
}

std::optional<Session> SessionManager::get_session(const std::string& session_id) const {
  auto s = slot(session_id);
  if (!s) return std::nullopt;
  std::lock_guard lock(s->mutex);
  return s->session;
}

void SessionManager::persist(const Session& s) const {
  if (sessions_dir_.empty()) return;
  auto file = std::filesystem::path(sessions_dir_) / (s.session_id + ".json");
  write_file_atomic(file.string(), session_to_json(s).dump(2) + "\n");
}

AskResponse SessionManager::ask(const std::string& session_id, const std::string& question,
                                std::optional<Mode> mode_override) {
  auto s = slot(session_id);
  if (!s) throw Error(ErrorCode::not_found, "unknown session: " + session_id);
  if (trim(question).empty()) throw Error(ErrorCode::invalid_argument, "question must not be empty");

  std::lock_guard session_lock(s->mutex);
  auto& history = s->session.history;
  std::vector<ChatTurn> window(history.end() - static_cast<std::ptrdiff_t>(std::min(history.size(), history_turns_)),
                               history.end());

  PipelineConfig cfg = engine_.settings.pipeline;
  cfg.mode = mode_override.value_or(s->session.mode_default);
  std::string run_id = derive_run_id(cfg.mode, question, window) + "-" + session_id + "-" + std::to_string(++s->asks);

  PipelineRun run;
  {
    std::unique_lock<std::mutex> pipeline_lock(pipeline_mutex_, std::defer_lock);
    if (engine_.gateway->chat_is_ordered()) pipeline_lock.lock();
    try {
      run = run_pipeline(question, window, cfg, engine_.deps(), run_id);
    } catch (const PipelineError& e) {
      PipelineRun partial = e.run();
      if (partial.run_id.empty()) partial.run_id = run_id;
      if (!partial.error) partial.error = e.what();
      log_.append(partial);
      throw AskError(e.code(), e.what(), partial.run_id);
    } catch (const Error& e) {
      PipelineRun partial;
      partial.run_id = run_id;
      partial.mode = cfg.mode;
      partial.question = question;
      partial.error = e.what();
      log_.append(partial);
      throw AskError(e.code(), e.what(), run_id);
    }
  }
  log_.append(run);

  history.push_back(ChatTurn{Role::user, question});
  history.push_back(ChatTurn{Role::assistant, run.final_answer.text});
  persist(s->session);

  AskResponse r;
  r.answer = run.final_answer.text;
  r.citations = run.final_answer.citations;
  if (run.final_score) r.qa_score = run.final_score->score;
  r.retrieved_links_top5 = run.retrieved_links_top5;
  r.latency_ms = run.total_latency_ms;
  r.run_id = run.run_id;
  return r;
}

PipelineRun SessionManager::get_trace(const std::string& run_id) const {
  auto run = log_.find(run_id);
  if (!run) throw Error(ErrorCode::not_found, "unknown run: " + run_id);
  return *run;
}

// --- HTTP ----------------------------------------------------------------------

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::parse:
      return 400;
    case ErrorCode::not_found:
      return 404;
    case ErrorCode::transport:
      return 502;
    case ErrorCode::budget_exceeded:
    case ErrorCode::script_exhausted:
    case ErrorCode::empty_corpus:
      return 422;
    default:
      return 500;
  }
}

struct HttpService::Impl {
  Engine& engine;
  SessionManager& sessions;
  httplib::Server server;
  std::thread thread;

  Impl(Engine& e, SessionManager& s) : engine(e), sessions(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message,
                const std::string& run_id = {}) {
  nlohmann::ordered_json body;
  body["code"] = std::string(to_string(code));
  body["message"] = message;
  if (!run_id.empty()) body["run_id"] = run_id;
  send_json(res, http_status(code), body);
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("malformed JSON body: ") + e.what());
  }
}

template <typename Fn>
auto guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const AskError& e) {
      send_error(res, e.code(), e.what(), e.run_id());
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, ErrorCode::invalid_argument, e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::internal, e.what());
    }
  };
}

std::string string_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string())
    throw Error(ErrorCode::invalid_argument, std::string("field '") + key + "' must be a string");
  return j[key].get<std::string>();
}

}  // namespace

HttpService::HttpService(Engine& engine, SessionManager& sessions, std::string static_dir)
    : impl_(std::make_unique<Impl>(engine, sessions)) {
  auto& srv = impl_->server;
  auto* impl = impl_.get();

  srv.Post("/v1/sessions", guarded([impl](const httplib::Request& req, httplib::Response& res) {
             auto body = parse_body(req);
             Mode mode = impl->engine.settings.pipeline.mode;
             if (body.contains("mode_default")) mode = mode_from_string(string_field(body, "mode_default"));
             auto s = impl->sessions.create_session(mode);
             send_json(res, 201, {{"session_id", s.session_id}});
           }));

  srv.Post(R"(/v1/sessions/([^/]+)/ask)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
             auto body = parse_body(req);
             std::string question = string_field(body, "question");
             std::optional<Mode> mode;
             if (body.contains("mode") && !body["mode"].is_null()) mode = mode_from_string(string_field(body, "mode"));
             auto r = impl->sessions.ask(req.matches[1], question, mode);
             send_json(res, 200, ask_response_to_json(r));
           }));

  srv.Get(R"(/v1/runs/([^/]+))", guarded([impl](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, run_to_json(impl->sessions.get_trace(req.matches[1])));
          }));

  srv.Get("/v1/health", guarded([impl](const httplib::Request&, httplib::Response& res) {
            nlohmann::ordered_json j;
            j["status"] = "ok";
            j["index_size"] = impl->engine.index.size();
            j["glossary_size"] = impl->engine.glossary.size();
            send_json(res, 200, j);
          }));

  if (!static_dir.empty()) {
    if (!srv.set_mount_point("/", static_dir))
      throw Error(ErrorCode::not_found, "static directory not found: " + static_dir);
  }
}

HttpService::~HttpService() { stop(); }

void HttpService::listen(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    port_ = srv.bind_to_any_port(host);
  } else {
    if (!srv.bind_to_port(host, port)) port_ = -1;
    else port_ = port;
  }
  if (port_ < 0) throw Error(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
  srv.listen_after_bind();
}

int HttpService::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  port_ = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw Error(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void HttpService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace rag
