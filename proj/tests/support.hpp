#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rag/config.hpp"
#include "rag/corpus.hpp"
#include "rag/gateway.hpp"
#include "rag/glossary.hpp"
#include "rag/index.hpp"
#include "rag/orchestrator.hpp"

namespace rag::test {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("ragtest-" + to_hex(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline ScriptEntry entry(std::string tag, std::string reply, std::int64_t latency_ms = 0) {
  return ScriptEntry{std::move(tag), std::move(reply), latency_ms, false};
}

inline ScriptEntry failing(std::string tag) { return ScriptEntry{std::move(tag), "", 0, true}; }

/// Small fixed corpus: a handful of documentation pages with a table, code
/// and acronyms.
inline std::vector<Document> sample_documents() {
  const std::vector<std::pair<std::string, std::string>> pages = {
      {"risk/cvar.md",
       "<!-- link: https://docs.example.internal/risk/cvar -->\n# CVaR limits\n\nCVaR is measured at the 97.5 "
       "percent level over one day. Limits are set per trading book and reviewed quarterly by the risk "
       "committee.\n\n| Book | Limit |\n| --- | --- |\n| Rates | 12.5 |\n| FX | 4.5 |\n"},
      {"risk/irrbb.md",
       "<!-- link: https://docs.example.internal/risk/irrbb -->\n# IRRBB\n\nIRRBB figures are produced on the fifth "
       "business day after month end. Six shock scenarios are run every month by treasury.\n"},
      {"apps/cma.md",
       "<!-- link: https://docs.example.internal/apps/cma -->\n# CMA\n\nBranch staff use CMA to open accounts and "
       "update addresses. Every change is written to the audit trail.\n"},
      {"eng/rollback.md",
       "<!-- link: https://docs.example.internal/eng/rollback -->\n# Rollback\n\nRun the rollback job with the "
       "previous release tag.\n\n```\ndeployctl rollback --to v1.2.3\n```\n\nMigrations are not reverted "
       "automatically.\n"},
      {"eng/logging.md",
       "<!-- link: https://docs.example.internal/eng/logging -->\n# Logging\n\nServices log structured JSON with "
       "timestamp, level, service and trace id. Card numbers must never appear in logs. Retention is thirty days "
       "in the hot store and one year in the archive.\n"},
      {"support/severity.md",
       "<!-- link: https://docs.example.internal/support/severity -->\n# Severity\n\n| Severity | Response |\n| "
       "--- | --- |\n| SEV1 | 15 minutes |\n| SEV2 | 1 hour |\n| SEV3 | 1 business day |\n"},
  };
  std::vector<Document> docs;
  for (const auto& [id, text] : pages) docs.push_back(make_document(id, text));
  return docs;
}

inline std::vector<Chunk> sample_chunks(const ChunkingConfig& cfg = {30, 8}) {
  std::vector<Chunk> chunks;
  for (const auto& d : sample_documents()) {
    auto c = chunk_document(d, cfg);
    chunks.insert(chunks.end(), c.begin(), c.end());
  }
  return chunks;
}

inline Glossary sample_glossary() {
  return Glossary({
      {"CMA", {"Consumer Management Application", "Cardholder Management Architecture"}, std::nullopt},
      {"CVaR", {"Conditional Value at Risk"}, std::nullopt},
      {"IRRBB", {"Interest Rate Risk in the Banking Book"}, std::nullopt},
  });
}

/// In-memory engine over the sample corpus with a scripted chat backend and
/// a logical clock.
struct Harness {
  std::vector<Chunk> chunks;
  ChunkLookup lookup;
  VectorIndex index;
  Glossary glossary;
  std::shared_ptr<ManualClock> clock;
  std::shared_ptr<ScriptedChatBackend> chat;
  std::unique_ptr<Gateway> gateway;

  explicit Harness(std::vector<ScriptEntry> script, bool cross_encoder = true) {
    chunks = sample_chunks();
    lookup = ChunkLookup(chunks);
    glossary = sample_glossary();
    clock = std::make_shared<ManualClock>();
    chat = std::make_shared<ScriptedChatBackend>(std::move(script), clock);
    auto embedder = std::make_shared<HashingEmbeddingBackend>(128);
    std::shared_ptr<RerankBackend> reranker;
    if (cross_encoder) reranker = std::make_shared<LexicalRerankBackend>();
    GatewayOptions opts;
    opts.backoff_ms = 0;
    gateway = std::make_unique<Gateway>(chat, embedder, reranker, opts, clock);
    Gateway indexer(nullptr, embedder, nullptr, opts, clock);
    index = build_index(chunks, indexer);
  }

  PipelineDeps deps() { return PipelineDeps{*gateway, index, lookup, glossary}; }
};

/// Script for one A-RAG run whose assess replies follow `scores`.
inline std::vector<ScriptEntry> arag_script(const std::vector<int>& scores, const std::string& search = "query: cvar limits") {
  std::vector<ScriptEntry> s;
  s.push_back(entry("intent", "retrieval", 100));
  s.push_back(entry("reformulate", "continuation: no\n" + search, 200));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == 1) s.push_back(entry("subquery", "cvar confidence level\ntrading book limits", 150));
    s.push_back(entry("synthesize", "Answer attempt " + std::to_string(i + 1) + " [1].", 700));
    s.push_back(entry("assess", "Score: " + std::to_string(scores[i]) + "\nrationale", 100));
  }
  return s;
}

inline std::vector<ScriptEntry> brag_script(const std::string& search = "query: cvar limits") {
  return {entry("reformulate", "continuation: no\n" + search, 200), entry("synthesize", "Single pass answer [1].", 600)};
}

inline std::vector<Stage> stages_of(const PipelineRun& run) {
  std::vector<Stage> out;
  for (const auto& e : run.events) out.push_back(e.stage);
  return out;
}

}  // namespace rag::test
