#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rag/common.hpp"
#include "rag/prompts.hpp"

namespace rag {

enum class Role { system, user, assistant };
std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

struct ChatTurn {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatTurn&) const = default;
};

struct ModelRequest {
  std::vector<ChatTurn> turns;
  double temperature = 0.0;
  int max_tokens = 512;
  std::string tag;  // issuing agent, used for tracing and script matching

  /// Throws unless there is at least one turn, the last one is a user turn
  /// and every turn has content.
  void validate() const;
};

struct ModelResponse {
  std::string text;
  std::int64_t latency_ms = 0;
  std::string backend_id;
};

struct RerankCandidate {
  std::string chunk_id;
  std::string text;
  double relevance = 0.0;
};

// Transport backends. Implementations throw rag::Error(ErrorCode::transport)
// for failures worth retrying.

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string send(const ModelRequest& request) = 0;
  /// Backends whose replies depend on call order (scripts) must be driven
  /// sequentially.
  virtual bool ordered() const { return false; }
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

/// Dedicated cross-encoder endpoint: one relevance score per document.
class RerankBackend {
 public:
  virtual ~RerankBackend() = default;
  virtual std::vector<double> score(const std::string& query, const std::vector<std::string>& documents) = 0;
};

/// Per-run hook. The orchestrator uses it to count calls, enforce its
/// completion budget and collect per-call latencies.
class CallObserver {
 public:
  virtual ~CallObserver() = default;
  /// Called before a completion is sent; may throw to veto it.
  virtual void before_completion(const std::string& tag) = 0;
  virtual void after_completion(const std::string& tag, std::int64_t latency_ms) = 0;
  virtual void after_embed(std::size_t texts) = 0;
};

struct GatewayOptions {
  std::size_t llm_retries = 2;
  std::int64_t backoff_ms = 200;  // doubled after each failed attempt
  std::size_t embed_batch = 32;
  std::size_t llm_parallelism = 4;
  double temperature = 0.0;
  int max_tokens = 512;
};

struct RerankOutcome {
  std::vector<RerankCandidate> candidates;
  std::vector<std::string> warnings;
};

/// Uniform entry point for chat completion, embedding and re-ranking.
/// Copies share backends and the fixed embedding dimension; `scoped`
/// returns a copy reporting to a per-run observer.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedder,
          std::shared_ptr<RerankBackend> reranker = nullptr, GatewayOptions options = {},
          std::shared_ptr<const Clock> clock = nullptr, PromptSet prompts = PromptSet::defaults());

  Gateway scoped(CallObserver& observer) const;

  ModelResponse complete(const ModelRequest& request);

  /// One vector per text, in order. Retries the whole batch `retries` times
  /// on transport failure. The dimension of the first response is fixed for
  /// the lifetime of the gateway; later mismatches are errors.
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                         std::optional<std::size_t> retries = std::nullopt);

  /// Sorted by relevance descending, ties by ascending chunk_id. Uses the
  /// cross-encoder endpoint when configured, otherwise one pairwise-scoring
  /// completion per candidate.
  RerankOutcome rerank(const std::string& query, std::vector<RerankCandidate> candidates);

  const Clock& clock() const { return *clock_; }
  std::shared_ptr<const Clock> clock_ptr() const { return clock_; }
  const GatewayOptions& options() const { return options_; }
  const PromptSet& prompts() const { return *prompts_; }
  bool has_cross_encoder() const { return reranker_ != nullptr; }
  bool chat_is_ordered() const { return chat_ && chat_->ordered(); }
  std::optional<std::size_t> embedding_dim() const;

  /// Request with a single user turn built from a template.
  ModelRequest make_request(const std::string& tag, std::string prompt) const;

 private:
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<EmbeddingBackend> embedder_;
  std::shared_ptr<RerankBackend> reranker_;
  GatewayOptions options_;
  std::shared_ptr<const Clock> clock_;
  std::shared_ptr<const PromptSet> prompts_;
  std::shared_ptr<std::atomic<std::size_t>> dim_;
  CallObserver* observer_ = nullptr;
};

// ---------------------------------------------------------------------------
// Scripted backends for deterministic runs without any model.

struct ScriptEntry {
  std::string tag_pattern;  // ECMAScript regex, must match the whole tag
  std::string reply;
  std::int64_t latency_ms = 0;  // simulated; advances a ManualClock if given
  bool fail = false;            // simulate a transport failure
};

std::vector<ScriptEntry> parse_script(std::string_view jsonl);
std::vector<ScriptEntry> load_script(const std::string& path);

/// Replays script entries strictly in order. Throws
/// ErrorCode::script_exhausted when the script runs out or the next entry
/// does not match the request tag.
class ScriptedChatBackend final : public ChatBackend {
 public:
  explicit ScriptedChatBackend(std::vector<ScriptEntry> script, std::shared_ptr<ManualClock> clock = nullptr);

  std::string id() const override { return "scripted"; }
  std::string send(const ModelRequest& request) override;
  bool ordered() const override { return true; }

  std::size_t consumed() const;
  std::size_t remaining() const;
  std::vector<std::string> tags_seen() const;

 private:
  mutable std::mutex mu_;
  std::vector<ScriptEntry> script_;
  std::size_t next_ = 0;
  std::vector<std::string> tags_;
  std::shared_ptr<ManualClock> clock_;
};

/// Feature-hashing bag-of-words embedder: equal texts map to equal vectors
/// and lexically similar texts land close together.
class HashingEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HashingEmbeddingBackend(std::size_t dim = 256) : dim_(dim) {}
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
  std::vector<double> embed_one(std::string_view text) const;

 private:
  std::size_t dim_;
};

/// Deterministic cross-encoder stand-in: content-word overlap between query
/// and document, scaled to [0, 10].
class LexicalRerankBackend final : public RerankBackend {
 public:
  std::vector<double> score(const std::string& query, const std::vector<std::string>& documents) override;
};

// ---------------------------------------------------------------------------
// HTTP backends (chat-completions convention).

struct HttpEndpoint {
  std::string base_url;  // scheme://host[:port]
  std::string path;
  std::string model;
  std::string api_key;  // sent as a bearer token when non-empty
  int timeout_s = 60;
};

nlohmann::json chat_request_body(const ModelRequest& request, const std::string& model);
std::string parse_chat_response(const nlohmann::json& body);
std::vector<std::vector<double>> parse_embedding_response(const nlohmann::json& body, std::size_t expected);
std::vector<double> parse_rerank_response(const nlohmann::json& body, std::size_t expected);

class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string id() const override { return "http:" + endpoint_.model; }
  std::string send(const ModelRequest& request) override;

 private:
  HttpEndpoint endpoint_;
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  HttpEndpoint endpoint_;
};

class HttpRerankBackend final : public RerankBackend {
 public:
  explicit HttpRerankBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::vector<double> score(const std::string& query, const std::vector<std::string>& documents) override;

 private:
  HttpEndpoint endpoint_;
};

}  // namespace rag
