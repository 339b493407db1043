#include "rag/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>

namespace rag {

namespace {

struct Binding {
  std::function<void(Settings&, const nlohmann::json&)> set;
  std::function<nlohmann::ordered_json(const Settings&)> get;
};

template <typename T, typename Access>
Binding bind(Access access) {
  return Binding{
      [access](Settings& s, const nlohmann::json& v) { access(s) = v.get<T>(); },
      [access](const Settings& s) { return nlohmann::ordered_json(access(const_cast<Settings&>(s))); },
  };
}

using Table = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Binding>>>>;

const Table& bindings() {
  static const Table table = {
      {"chunking",
       {{"target_words", bind<std::size_t>([](Settings& s) -> auto& { return s.chunking.target_words; })},
        {"overlap_words", bind<std::size_t>([](Settings& s) -> auto& { return s.chunking.overlap_words; })}}},
      {"pipeline",
       {{"mode", Binding{[](Settings& s, const nlohmann::json& v) { s.pipeline.mode = mode_from_string(v.get<std::string>()); },
                         [](const Settings& s) { return nlohmann::ordered_json(std::string(to_string(s.pipeline.mode))); }}},
        {"top_k", bind<std::size_t>([](Settings& s) -> auto& { return s.pipeline.top_k; })},
        {"qa_threshold", bind<int>([](Settings& s) -> auto& { return s.pipeline.qa_threshold; })},
        {"max_refinements", bind<std::size_t>([](Settings& s) -> auto& { return s.pipeline.max_refinements; })},
        {"broad_sweep_multiplier", bind<std::size_t>([](Settings& s) -> auto& { return s.pipeline.broad_sweep_multiplier; })},
        {"low_retrieval_score", bind<double>([](Settings& s) -> auto& { return s.pipeline.low_retrieval_score; })},
        {"completion_budget", bind<std::size_t>([](Settings& s) -> auto& { return s.pipeline.completion_budget; })}}},
      {"chat",
       {{"backend", bind<std::string>([](Settings& s) -> auto& { return s.chat.backend; })},
        {"base_url", bind<std::string>([](Settings& s) -> auto& { return s.chat.base_url; })},
        {"path", bind<std::string>([](Settings& s) -> auto& { return s.chat.path; })},
        {"model", bind<std::string>([](Settings& s) -> auto& { return s.chat.model; })},
        {"api_key_env", bind<std::string>([](Settings& s) -> auto& { return s.chat.api_key_env; })},
        {"script", bind<std::string>([](Settings& s) -> auto& { return s.chat.script; })},
        {"timeout_s", bind<int>([](Settings& s) -> auto& { return s.chat.timeout_s; })}}},
      {"embedding",
       {{"backend", bind<std::string>([](Settings& s) -> auto& { return s.embedding.backend; })},
        {"base_url", bind<std::string>([](Settings& s) -> auto& { return s.embedding.base_url; })},
        {"path", bind<std::string>([](Settings& s) -> auto& { return s.embedding.path; })},
        {"model", bind<std::string>([](Settings& s) -> auto& { return s.embedding.model; })},
        {"api_key_env", bind<std::string>([](Settings& s) -> auto& { return s.embedding.api_key_env; })},
        {"dim", bind<std::size_t>([](Settings& s) -> auto& { return s.embedding.dim; })},
        {"timeout_s", bind<int>([](Settings& s) -> auto& { return s.embedding.timeout_s; })}}},
      {"rerank",
       {{"backend", bind<std::string>([](Settings& s) -> auto& { return s.rerank.backend; })},
        {"base_url", bind<std::string>([](Settings& s) -> auto& { return s.rerank.base_url; })},
        {"path", bind<std::string>([](Settings& s) -> auto& { return s.rerank.path; })},
        {"model", bind<std::string>([](Settings& s) -> auto& { return s.rerank.model; })},
        {"api_key_env", bind<std::string>([](Settings& s) -> auto& { return s.rerank.api_key_env; })},
        {"timeout_s", bind<int>([](Settings& s) -> auto& { return s.rerank.timeout_s; })}}},
      {"gateway",
       {{"llm_retries", bind<std::size_t>([](Settings& s) -> auto& { return s.gateway.llm_retries; })},
        {"backoff_ms", bind<std::int64_t>([](Settings& s) -> auto& { return s.gateway.backoff_ms; })},
        {"embed_batch", bind<std::size_t>([](Settings& s) -> auto& { return s.gateway.embed_batch; })},
        {"embed_retries", bind<std::size_t>([](Settings& s) -> auto& { return s.gateway.embed_retries; })},
        {"llm_parallelism", bind<std::size_t>([](Settings& s) -> auto& { return s.gateway.llm_parallelism; })},
        {"embed_parallelism", bind<std::size_t>([](Settings& s) -> auto& { return s.gateway.embed_parallelism; })},
        {"temperature", bind<double>([](Settings& s) -> auto& { return s.gateway.temperature; })},
        {"max_tokens", bind<int>([](Settings& s) -> auto& { return s.gateway.max_tokens; })},
        {"clock", bind<std::string>([](Settings& s) -> auto& { return s.gateway.clock; })}}},
      {"paths",
       {{"corpus_dir", bind<std::string>([](Settings& s) -> auto& { return s.paths.corpus_dir; })},
        {"chunk_store", bind<std::string>([](Settings& s) -> auto& { return s.paths.chunk_store; })},
        {"stats", bind<std::string>([](Settings& s) -> auto& { return s.paths.stats; })},
        {"index", bind<std::string>([](Settings& s) -> auto& { return s.paths.index; })},
        {"glossary", bind<std::string>([](Settings& s) -> auto& { return s.paths.glossary; })},
        {"run_log", bind<std::string>([](Settings& s) -> auto& { return s.paths.run_log; })},
        {"prompts_dir", bind<std::string>([](Settings& s) -> auto& { return s.paths.prompts_dir; })},
        {"sessions_dir", bind<std::string>([](Settings& s) -> auto& { return s.paths.sessions_dir; })},
        {"static_dir", bind<std::string>([](Settings& s) -> auto& { return s.paths.static_dir; })}}},
      {"service",
       {{"host", bind<std::string>([](Settings& s) -> auto& { return s.service.host; })},
        {"port", bind<int>([](Settings& s) -> auto& { return s.service.port; })},
        {"history_turns", bind<std::size_t>([](Settings& s) -> auto& { return s.service.history_turns; })}}},
  };
  return table;
}

const Binding& find_binding(const std::string& section, const std::string& key) {
  for (const auto& [name, keys] : bindings()) {
    if (name != section) continue;
    for (const auto& [k, b] : keys)
      if (k == key) return b;
    throw Error(ErrorCode::invalid_argument, "unknown config key: " + section + "." + key);
  }
  throw Error(ErrorCode::invalid_argument, "unknown config section: " + section);
}

void set_value(Settings& s, const std::string& section, const std::string& key, const nlohmann::json& value) {
  const auto& b = find_binding(section, key);
  try {
    b.set(s, value);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, "bad value for " + section + "." + key + ": " + e.what());
  }
}

std::string api_key(const std::string& env) {
  if (env.empty()) return {};
  const char* v = std::getenv(env.c_str());
  return v ? v : "";
}

}  // namespace

void Settings::apply_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "config must be a JSON object");
  for (const auto& [section, keys] : j.items()) {
    if (!keys.is_object()) throw Error(ErrorCode::invalid_argument, "config section " + section + " must be an object");
    for (const auto& [key, value] : keys.items()) set_value(*this, section, key, value);
  }
}

void Settings::apply_override(const std::string& assignment) {
  auto eq = assignment.find('=');
  auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw Error(ErrorCode::invalid_argument, "override must look like section.key=value: " + assignment);
  std::string section = assignment.substr(0, dot);
  std::string key = assignment.substr(dot + 1, eq - dot - 1);
  std::string raw = assignment.substr(eq + 1);
  // Current value decides how the text is interpreted.
  auto current = find_binding(section, key).get(*this);
  nlohmann::json value;
  if (current.is_string()) {
    value = raw;
  } else {
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::invalid_argument, "override " + section + "." + key + " expects a number or boolean");
    }
  }
  set_value(*this, section, key, value);
}

nlohmann::ordered_json Settings::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [section, keys] : bindings())
    for (const auto& [key, b] : keys) j[section][key] = b.get(*this);
  return j;
}

void Settings::validate() const {
  chunking.validate();
  pipeline.validate();
  auto one_of = [](const std::string& v, std::initializer_list<const char*> allowed, const char* key) {
    for (auto a : allowed)
      if (v == a) return;
    throw Error(ErrorCode::invalid_argument, std::string("invalid value for ") + key + ": " + v);
  };
  one_of(chat.backend, {"scripted", "http"}, "chat.backend");
  one_of(embedding.backend, {"hashing", "http"}, "embedding.backend");
  one_of(rerank.backend, {"llm", "http", "lexical"}, "rerank.backend");
  one_of(gateway.clock, {"auto", "steady", "logical"}, "gateway.clock");
  if (embedding.dim == 0) throw Error(ErrorCode::invalid_argument, "embedding.dim must be positive");
  if (gateway.embed_batch == 0) throw Error(ErrorCode::invalid_argument, "gateway.embed_batch must be positive");
  if (gateway.temperature < 0) throw Error(ErrorCode::invalid_argument, "gateway.temperature must be >= 0");
  if (service.history_turns == 0) throw Error(ErrorCode::invalid_argument, "service.history_turns must be positive");
}

void Settings::resolve_paths(const std::string& base) {
  namespace fs = std::filesystem;
  auto fix = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (fs::path(base) / p).lexically_normal().string();
  };
  fix(paths.corpus_dir);
  fix(paths.chunk_store);
  fix(paths.stats);
  fix(paths.index);
  fix(paths.glossary);
  fix(paths.run_log);
  fix(paths.prompts_dir);
  fix(paths.sessions_dir);
  fix(paths.static_dir);
  fix(chat.script);
}

Settings load_settings(const std::optional<std::string>& config_path) {
  Settings s;
  if (config_path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(*config_path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "config " + *config_path + ": " + e.what());
    }
    s.apply_json(j);
    auto parent = std::filesystem::path(*config_path).parent_path();
    s.resolve_paths(parent.empty() ? "." : parent.string());
  }
  return s;
}

std::shared_ptr<const Clock> make_clock(const Settings& s, std::shared_ptr<ManualClock>* logical) {
  bool use_logical = s.gateway.clock == "logical" || (s.gateway.clock == "auto" && s.chat.backend == "scripted");
  if (use_logical) {
    auto clock = std::make_shared<ManualClock>();
    if (logical) *logical = clock;
    return clock;
  }
  return std::make_shared<SteadyClock>();
}

Gateway make_gateway(const Settings& s, const std::string& script_override) {
  std::shared_ptr<ManualClock> logical;
  auto clock = make_clock(s, &logical);

  std::shared_ptr<ChatBackend> chat;
  if (s.chat.backend == "scripted") {
    std::string script = script_override.empty() ? s.chat.script : script_override;
    std::vector<ScriptEntry> entries;
    if (!script.empty()) entries = load_script(script);
    chat = std::make_shared<ScriptedChatBackend>(std::move(entries), logical);
  } else {
    chat = std::make_shared<HttpChatBackend>(
        HttpEndpoint{s.chat.base_url, s.chat.path, s.chat.model, api_key(s.chat.api_key_env), s.chat.timeout_s});
  }

  std::shared_ptr<EmbeddingBackend> embedder;
  if (s.embedding.backend == "hashing") {
    embedder = std::make_shared<HashingEmbeddingBackend>(s.embedding.dim);
  } else {
    embedder = std::make_shared<HttpEmbeddingBackend>(HttpEndpoint{s.embedding.base_url, s.embedding.path,
                                                                   s.embedding.model, api_key(s.embedding.api_key_env),
                                                                   s.embedding.timeout_s});
  }

  std::shared_ptr<RerankBackend> reranker;
  if (s.rerank.backend == "lexical") {
    reranker = std::make_shared<LexicalRerankBackend>();
  } else if (s.rerank.backend == "http") {
    reranker = std::make_shared<HttpRerankBackend>(HttpEndpoint{s.rerank.base_url, s.rerank.path, s.rerank.model,
                                                                api_key(s.rerank.api_key_env), s.rerank.timeout_s});
  }

  GatewayOptions opts;
  opts.llm_retries = s.gateway.llm_retries;
  opts.backoff_ms = s.gateway.backoff_ms;
  opts.embed_batch = s.gateway.embed_batch;
  opts.llm_parallelism = s.gateway.llm_parallelism;
  opts.temperature = s.gateway.temperature;
  opts.max_tokens = s.gateway.max_tokens;

  auto prompts = s.paths.prompts_dir.empty() ? PromptSet::defaults() : PromptSet::from_directory(s.paths.prompts_dir);
  return Gateway(std::move(chat), std::move(embedder), std::move(reranker), opts, std::move(clock), std::move(prompts));
}

Engine Engine::open(const Settings& settings, const std::string& script_override) {
  namespace fs = std::filesystem;
  settings.validate();
  Engine e;
  e.settings = settings;
  e.gateway = std::make_unique<Gateway>(make_gateway(settings, script_override));

  if (!fs::exists(settings.paths.chunk_store))
    throw Error(ErrorCode::not_found,
                "chunk store not found: " + settings.paths.chunk_store + " (run `ragctl ingest` first)");
  if (!fs::exists(settings.paths.index))
    throw Error(ErrorCode::not_found, "index not found: " + settings.paths.index + " (run `ragctl index` first)");
  e.chunks = ChunkLookup(load_chunk_store(settings.paths.chunk_store));
  e.index = VectorIndex::load(settings.paths.index);
  if (!settings.paths.glossary.empty() && fs::exists(settings.paths.glossary))
    e.glossary = Glossary::load(settings.paths.glossary);
  return e;
}

}  // namespace rag
