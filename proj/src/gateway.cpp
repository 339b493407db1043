#include "rag/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>
#include <thread>

namespace rag {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw Error(ErrorCode::invalid_argument, "unknown role: " + std::string(s));
}

void ModelRequest::validate() const {
  if (turns.empty()) throw Error(ErrorCode::invalid_argument, "request has no turns");
  if (turns.back().role != Role::user) throw Error(ErrorCode::invalid_argument, "last turn must be a user turn");
  for (const auto& t : turns)
    if (t.content.empty()) throw Error(ErrorCode::invalid_argument, "empty turn content");
  if (temperature < 0.0) throw Error(ErrorCode::invalid_argument, "negative temperature");
  if (max_tokens <= 0) throw Error(ErrorCode::invalid_argument, "max_tokens must be positive");
}

Gateway::Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedder,
                 std::shared_ptr<RerankBackend> reranker, GatewayOptions options,
                 std::shared_ptr<const Clock> clock, PromptSet prompts)
    : chat_(std::move(chat)),
      embedder_(std::move(embedder)),
      reranker_(std::move(reranker)),
      options_(options),
      clock_(clock ? std::move(clock) : std::make_shared<SteadyClock>()),
      prompts_(std::make_shared<const PromptSet>(std::move(prompts))),
      dim_(std::make_shared<std::atomic<std::size_t>>(0)) {}

Gateway Gateway::scoped(CallObserver& observer) const {
  Gateway copy = *this;
  copy.observer_ = &observer;
  return copy;
}

std::optional<std::size_t> Gateway::embedding_dim() const {
  auto d = dim_->load();
  if (d == 0) return std::nullopt;
  return d;
}

ModelRequest Gateway::make_request(const std::string& tag, std::string prompt) const {
  ModelRequest req;
  req.tag = tag;
  req.temperature = options_.temperature;
  req.max_tokens = options_.max_tokens;
  req.turns.push_back({Role::user, std::move(prompt)});
  return req;
}

ModelResponse Gateway::complete(const ModelRequest& request) {
  if (!chat_) throw Error(ErrorCode::invalid_argument, "no chat backend configured [" + request.tag + "]");
  request.validate();
  if (observer_) observer_->before_completion(request.tag);

  const auto start = clock_->now_ms();
  std::int64_t backoff = options_.backoff_ms;
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      ModelResponse resp;
      resp.text = chat_->send(request);
      resp.backend_id = chat_->id();
      resp.latency_ms = std::max<std::int64_t>(0, clock_->now_ms() - start);
      if (observer_) observer_->after_completion(request.tag, resp.latency_ms);
      return resp;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::transport) throw;
      if (attempt >= options_.llm_retries)
        throw Error(ErrorCode::transport, "completion failed after " + std::to_string(attempt + 1) +
                                              " attempt(s) [" + request.tag + "]: " + e.what());
      if (backoff > 0) std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
}

std::vector<std::vector<double>> Gateway::embed(const std::vector<std::string>& texts,
                                                std::optional<std::size_t> retries) {
  if (texts.empty()) return {};
  if (!embedder_) throw Error(ErrorCode::invalid_argument, "no embedding backend configured");
  if (texts.size() > options_.embed_batch)
    throw Error(ErrorCode::invalid_argument, "embedding batch of " + std::to_string(texts.size()) +
                                                 " exceeds embed_batch " + std::to_string(options_.embed_batch));
  for (const auto& t : texts)
    if (t.empty()) throw Error(ErrorCode::invalid_argument, "cannot embed empty text");

  const std::size_t max_retries = retries.value_or(options_.llm_retries);
  std::int64_t backoff = options_.backoff_ms;
  std::vector<std::vector<double>> vectors;
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      vectors = embedder_->embed(texts);
      if (vectors.size() != texts.size())
        throw Error(ErrorCode::transport, "embedding backend returned " + std::to_string(vectors.size()) +
                                              " vectors for " + std::to_string(texts.size()) + " texts");
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::transport) throw;
      if (attempt >= max_retries) throw;
      if (backoff > 0) std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }

  for (const auto& v : vectors) {
    if (v.empty()) throw Error(ErrorCode::parse, "embedding backend returned an empty vector");
    for (double x : v)
      if (!std::isfinite(x)) throw Error(ErrorCode::parse, "embedding has non-finite components");
    std::size_t expected = 0;
    if (!dim_->compare_exchange_strong(expected, v.size()) && expected != v.size())
      throw Error(ErrorCode::invalid_argument, "embedding dimension changed from " + std::to_string(expected) +
                                                   " to " + std::to_string(v.size()));
  }
  if (observer_) observer_->after_embed(texts.size());
  return vectors;
}

RerankOutcome Gateway::rerank(const std::string& query, std::vector<RerankCandidate> candidates) {
  RerankOutcome out;
  if (candidates.empty()) throw Error(ErrorCode::invalid_argument, "rerank needs at least one candidate");

  if (reranker_) {
    std::vector<std::string> docs;
    docs.reserve(candidates.size());
    for (const auto& c : candidates) docs.push_back(c.text);
    auto scores = reranker_->score(query, docs);
    if (scores.size() != candidates.size())
      throw Error(ErrorCode::parse, "cross-encoder returned " + std::to_string(scores.size()) + " scores for " +
                                        std::to_string(candidates.size()) + " documents");
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!std::isfinite(scores[i])) throw Error(ErrorCode::parse, "cross-encoder returned a non-finite score");
      candidates[i].relevance = scores[i];
    }
  } else {
    std::vector<std::optional<int>> parsed(candidates.size());
    std::size_t limit = chat_is_ordered() ? 1 : options_.llm_parallelism;
    parallel_for(candidates.size(), limit, [&](std::size_t i) {
      auto prompt = prompts_->render("rerank_pairwise", {{"query", query}, {"context", candidates[i].text}});
      auto resp = complete(make_request("rerank", std::move(prompt)));
      parsed[i] = parse_bounded_integer(resp.text, 0, 10);
    });
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (parsed[i]) {
        candidates[i].relevance = *parsed[i];
      } else {
        candidates[i].relevance = 0.0;
        out.warnings.push_back("unparsable relevance score for " + candidates[i].chunk_id);
      }
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(), [](const RerankCandidate& a, const RerankCandidate& b) {
    if (a.relevance != b.relevance) return a.relevance > b.relevance;
    return a.chunk_id < b.chunk_id;
  });
  out.candidates = std::move(candidates);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<ScriptEntry> parse_script(std::string_view jsonl) {
  std::vector<ScriptEntry> entries;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(jsonl)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ScriptEntry e;
      e.tag_pattern = j.at("tag_pattern").get<std::string>();
      e.reply = j.at("reply").get<std::string>();
      e.latency_ms = j.value("latency_ms", std::int64_t{0});
      e.fail = j.value("fail", false);
      std::regex check(e.tag_pattern);
      entries.push_back(std::move(e));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::parse, "script line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return entries;
}

std::vector<ScriptEntry> load_script(const std::string& path) { return parse_script(read_file(path)); }

ScriptedChatBackend::ScriptedChatBackend(std::vector<ScriptEntry> script, std::shared_ptr<ManualClock> clock)
    : script_(std::move(script)), clock_(std::move(clock)) {}

std::string ScriptedChatBackend::send(const ModelRequest& request) {
  std::lock_guard lock(mu_);
  tags_.push_back(request.tag);
  if (next_ >= script_.size())
    throw Error(ErrorCode::script_exhausted,
                "script exhausted after " + std::to_string(script_.size()) + " entries [" + request.tag + "]");
  const auto& entry = script_[next_];
  if (!std::regex_match(request.tag, std::regex(entry.tag_pattern)))
    throw Error(ErrorCode::script_exhausted, "script entry " + std::to_string(next_ + 1) + " expects tag /" +
                                                 entry.tag_pattern + "/ but request is [" + request.tag + "]");
  ++next_;
  if (clock_) clock_->advance(entry.latency_ms);
  if (entry.fail) throw Error(ErrorCode::transport, "scripted transport failure");
  return entry.reply;
}

std::size_t ScriptedChatBackend::consumed() const {
  std::lock_guard lock(mu_);
  return next_;
}

std::size_t ScriptedChatBackend::remaining() const {
  std::lock_guard lock(mu_);
  return script_.size() - next_;
}

std::vector<std::string> ScriptedChatBackend::tags_seen() const {
  std::lock_guard lock(mu_);
  return tags_;
}

namespace {

std::vector<std::string> content_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::vector<double> HashingEmbeddingBackend::embed_one(std::string_view text) const {
  std::vector<double> v(dim_, 0.0);
  bool any = false;
  for (const auto& tok : content_tokens(text)) {
    auto h = fnv1a64(tok);
    v[h % dim_] += (h >> 63) ? 1.0 : -1.0;
    any = true;
  }
  // Texts without word tokens still need a non-zero, deterministic vector.
  if (!any || std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[fnv1a64(text) % dim_] += 1.0;
  return v;
}

std::vector<std::vector<double>> HashingEmbeddingBackend::embed(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::vector<double> LexicalRerankBackend::score(const std::string& query, const std::vector<std::string>& documents) {
  auto q = content_tokens(query);
  std::set<std::string> qset(q.begin(), q.end());
  std::vector<double> scores;
  scores.reserve(documents.size());
  for (const auto& d : documents) {
    auto toks = content_tokens(d);
    std::set<std::string> dset(toks.begin(), toks.end());
    std::size_t shared = 0;
    for (const auto& t : qset) shared += dset.count(t);
    scores.push_back(qset.empty() ? 0.0 : 10.0 * static_cast<double>(shared) / static_cast<double>(qset.size()));
  }
  return scores;
}

}  // namespace rag
