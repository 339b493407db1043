#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rag/agents.hpp"
#include "rag/corpus.hpp"
#include "rag/gateway.hpp"
#include "rag/glossary.hpp"
#include "rag/index.hpp"

namespace rag {

enum class Mode { brag, arag };
std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view s);

enum class Stage { intent, reformulate, retrieve, subquery, rerank, synthesize, assess, broad_sweep, fallback };
std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view s);

struct PipelineConfig {
  Mode mode = Mode::arag;
  std::size_t top_k = 5;
  int qa_threshold = 6;
  std::size_t max_refinements = 2;  // 1 = sub-query pass, 2 = plus broad sweep
  std::size_t broad_sweep_multiplier = 3;
  double low_retrieval_score = 0.35;
  std::size_t completion_budget = 0;  // 0 derives the cap from the other fields

  void validate() const;
  /// Upper bound on completions for one A-RAG run.
  std::size_t effective_budget(bool cross_encoder_available) const;
};

struct TraceEvent {
  std::size_t seq = 0;
  Stage stage = Stage::retrieve;
  std::string detail;
  std::int64_t latency_ms = 0;

  bool operator==(const TraceEvent&) const = default;
};

struct ModelCall {
  std::string tag;
  std::int64_t latency_ms = 0;

  bool operator==(const ModelCall&) const = default;
};

struct PipelineRun {
  std::string run_id;
  Mode mode = Mode::arag;
  std::string question;
  std::string item_id;  // set when the run answers an evaluation item
  agents::SynthesizedAnswer final_answer;
  std::optional<agents::QaAssessment> final_score;
  std::vector<std::string> retrieved_links_top5;
  std::vector<std::string> retrieved_links;  // full deduplicated final ranking
  std::vector<TraceEvent> events;
  std::vector<ModelCall> model_calls;
  std::vector<Resolution> acronym_resolutions;
  std::int64_t total_latency_ms = 0;
  std::size_t refinements_used = 0;
  std::size_t completions = 0;
  std::size_t embedded_texts = 0;
  std::optional<std::string> error;
};

nlohmann::ordered_json run_to_json(const PipelineRun& run);
PipelineRun run_from_json(const nlohmann::json& j);
std::string run_to_jsonl(const PipelineRun& run);
std::vector<PipelineRun> parse_run_log(std::string_view content);
std::vector<PipelineRun> load_run_log(const std::string& path);

/// Thrown when a stage fails; carries the partial trace.
class PipelineError : public Error {
 public:
  PipelineError(ErrorCode code, const std::string& message, PipelineRun partial)
      : Error(code, message), run_(std::move(partial)) {}
  const PipelineRun& run() const { return run_; }

 private:
  PipelineRun run_;
};

struct PipelineDeps {
  Gateway& gateway;
  const VectorIndex& index;
  const ChunkLookup& chunks;
  const Glossary& glossary;
};

/// Deduplicates links by first (best) rank.
std::vector<std::string> ranked_links(const std::vector<RetrievalHit>& hits);

/// Deterministic id derived from mode, question and history.
std::string derive_run_id(Mode mode, const std::string& question, const std::vector<ChatTurn>& history);

/// Single pass: reformulate -> retrieve -> synthesize. No acronym
/// expansion, re-ranking or assessment.
PipelineRun run_brag(const std::string& question, const std::vector<ChatTurn>& history, const PipelineConfig& cfg,
                     PipelineDeps deps, std::string run_id = {});

/// Agentic pipeline with the QA-score feedback loop: first pass, sub-query
/// refinement, broad sweep, then an uncertainty fallback.
PipelineRun run_arag(const std::string& question, const std::vector<ChatTurn>& history, const PipelineConfig& cfg,
                     PipelineDeps deps, std::string run_id = {});

/// Dispatches on cfg.mode.
PipelineRun run_pipeline(const std::string& question, const std::vector<ChatTurn>& history,
                         const PipelineConfig& cfg, PipelineDeps deps, std::string run_id = {});

}  // namespace rag
