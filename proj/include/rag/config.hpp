#pragma once

#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "rag/corpus.hpp"
#include "rag/gateway.hpp"
#include "rag/glossary.hpp"
#include "rag/index.hpp"
#include "rag/orchestrator.hpp"

namespace rag {

/// Every setting the CLI and service understand. The config file is a JSON
/// object of sections holding scalar keys; see README for the key list.
struct Settings {
  ChunkingConfig chunking;
  PipelineConfig pipeline;

  struct Chat {
    std::string backend = "scripted";  // scripted | http
    std::string base_url = "http://127.0.0.1:8000";
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    std::string api_key_env = "RAG_API_KEY";
    std::string script;
    int timeout_s = 60;
  } chat;

  struct Embedding {
    std::string backend = "hashing";  // hashing | http
    std::string base_url = "http://127.0.0.1:8000";
    std::string path = "/v1/embeddings";
    std::string model = "default";
    std::string api_key_env = "RAG_API_KEY";
    std::size_t dim = 256;
    int timeout_s = 60;
  } embedding;

  struct Rerank {
    std::string backend = "llm";  // llm | http | lexical
    std::string base_url = "http://127.0.0.1:8000";
    std::string path = "/v1/rerank";
    std::string model;
    std::string api_key_env = "RAG_API_KEY";
    int timeout_s = 60;
  } rerank;

  struct GatewaySection {
    std::size_t llm_retries = 2;
    std::int64_t backoff_ms = 200;
    std::size_t embed_batch = 32;
    std::size_t embed_retries = 2;
    std::size_t llm_parallelism = 4;
    std::size_t embed_parallelism = 4;
    double temperature = 0.0;
    int max_tokens = 512;
    std::string clock = "auto";  // auto | steady | logical
  } gateway;

  struct Paths {
    std::string corpus_dir = "corpus";
    std::string chunk_store = "work/chunks.jsonl";
    std::string stats = "work/stats.json";
    std::string index = "work/index.jsonl";
    std::string glossary = "glossary.jsonl";
    std::string run_log = "work/runs.jsonl";
    std::string prompts_dir;
    std::string sessions_dir;
    std::string static_dir;
  } paths;

  struct Service {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t history_turns = 10;
  } service;

  /// Overlays a config file object. Unknown sections or keys are errors.
  void apply_json(const nlohmann::json& j);
  /// Applies one "section.key=value" override.
  void apply_override(const std::string& assignment);
  nlohmann::ordered_json to_json() const;
  void validate() const;

  /// Relative paths are resolved against `base` (the config file directory).
  void resolve_paths(const std::string& base);
};

Settings load_settings(const std::optional<std::string>& config_path);

/// Clock selection: "auto" is logical for the scripted chat backend.
std::shared_ptr<const Clock> make_clock(const Settings& s, std::shared_ptr<ManualClock>* logical = nullptr);

/// Builds the gateway and its backends from settings. `script_override`
/// replaces chat.script when non-empty.
Gateway make_gateway(const Settings& s, const std::string& script_override = {});

/// Everything a pipeline run needs, loaded from the configured paths.
struct Engine {
  Settings settings;
  std::unique_ptr<Gateway> gateway;
  VectorIndex index;
  ChunkLookup chunks;
  Glossary glossary;

  static Engine open(const Settings& settings, const std::string& script_override = {});
  PipelineDeps deps() { return PipelineDeps{*gateway, index, chunks, glossary}; }
};

}  // namespace rag
