#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "rag/corpus.hpp"
#include "rag/gateway.hpp"
#include "rag/orchestrator.hpp"

namespace rag::eval {

enum class Category { procedural, definitional, acronym, synthetic };
enum class Origin { generated, human };
std::string_view to_string(Category c);
std::string_view to_string(Origin o);
Category category_from_string(std::string_view s);
Origin origin_from_string(std::string_view s);

struct EvalItem {
  std::string id;
  std::string question;
  std::string ground_truth_answer;
  std::vector<std::string> ground_truth_links;
  Category category = Category::synthetic;
  Origin origin = Origin::human;
  std::string source_chunk_id;  // generated items only

  /// Non-empty links; generated items carry exactly one.
  void validate() const;
};

struct JudgeScore {
  std::string item_id;
  Mode system = Mode::arag;
  int score = 0;  // 1..10
  std::string rationale;
};

struct AdjustedOverride {
  std::string item_id;
  std::vector<std::string> accepted_links;
  std::string reviewer_note;
};

struct CategoryBreakdown {
  std::size_t n_questions = 0;
  std::size_t gt_links = 0;
  std::size_t retrieved_links = 0;
  std::optional<double> coverage;
  std::optional<double> mean_score;
};

struct CoverageResult {
  double overall = 0.0;
  std::size_t retrieved = 0;  // |R|
  std::size_t total = 0;      // |G|
  std::map<Category, CategoryBreakdown> per_category;
};

struct Comparison {
  std::vector<std::pair<std::string, int>> deltas;  // item_id -> s_a - s_b, sorted by item_id
  double win = 0.0;
  double tie = 0.0;
  double loss = 0.0;
  double median_delta = 0.0;
  int min_delta = 0;
  int max_delta = 0;
};

struct EvalReport {
  std::string system;
  std::size_t n_questions = 0;
  std::size_t k = 5;
  std::size_t hits = 0;
  double hit_at_k = 0.0;
  std::optional<double> adjusted_hit_at_k;
  std::optional<double> mean_judge_score;
  std::optional<CoverageResult> coverage;
  std::map<Category, CategoryBreakdown> per_category;
  double mean_latency_ms = 0.0;
};

// --- dataset files ---------------------------------------------------------

std::vector<EvalItem> parse_dataset(std::string_view jsonl);
std::vector<EvalItem> load_dataset(const std::string& path);
std::string serialize_dataset(const std::vector<EvalItem>& items);

std::vector<AdjustedOverride> parse_overrides(std::string_view jsonl);
std::vector<AdjustedOverride> load_overrides(const std::string& path);

std::vector<JudgeScore> parse_judge_scores(std::string_view jsonl);
std::vector<JudgeScore> load_judge_scores(const std::string& path);
std::string serialize_judge_scores(const std::vector<JudgeScore>& scores);

// --- dataset construction --------------------------------------------------

/// True when the chunk carries the "col: val;" signature of a linearized table.
bool looks_like_table(std::string_view text);

/// Parses "Q: ...\nA: ..." (the answer may span several lines).
std::optional<std::pair<std::string, std::string>> parse_qa_reply(std::string_view reply);

struct GenerationResult {
  std::vector<EvalItem> items;
  std::vector<std::string> warnings;
};

/// One completion per chunk with the narrative or the table template.
/// Chunks whose reply cannot be parsed are skipped.
GenerationResult generate_eval_items(const std::vector<Chunk>& sample, Gateway& gateway);

enum class Verdict { yes, no, unparsable };

struct QcRecord {
  std::string item_id;
  Verdict specificity = Verdict::unparsable;
  Verdict faithfulness = Verdict::unparsable;
  Verdict completeness = Verdict::unparsable;
  bool retained = false;
};

struct QcResult {
  std::vector<EvalItem> retained;
  std::vector<QcRecord> log;
  std::vector<std::string> warnings;
};

Verdict parse_verdict(std::string_view reply);

/// Three yes/no judgments per item (specificity, faithfulness,
/// completeness); only items passing all three are kept.
QcResult qc_filter(const std::vector<EvalItem>& items, Gateway& gateway, const ChunkLookup& chunks);

// --- metrics -----------------------------------------------------------------

/// Trims, and lowercases the scheme and host of URLs.
std::string normalize_link(std::string_view link);

/// Pairs each item with its run (by item_id, else by question text).
/// Throws listing the ids of items without a run.
std::vector<const PipelineRun*> join_runs(const std::vector<PipelineRun>& runs, const std::vector<EvalItem>& items);

/// First k links of a run's final ranking.
std::vector<std::string> top_links(const PipelineRun& run, std::size_t k);

std::size_t count_hits(const std::vector<PipelineRun>& runs, const std::vector<EvalItem>& items, std::size_t k = 5);
double hit_at_k(const std::vector<PipelineRun>& runs, const std::vector<EvalItem>& items, std::size_t k = 5);
double adjusted_hit_at_k(const std::vector<PipelineRun>& runs, const std::vector<EvalItem>& items,
                         const std::vector<AdjustedOverride>& overrides, std::size_t k = 5);
CoverageResult coverage(const std::vector<PipelineRun>& runs, const std::vector<EvalItem>& items, std::size_t k = 5);

double semantic_accuracy(const std::vector<JudgeScore>& scores);
Comparison compare(const std::vector<JudgeScore>& scores_a, const std::vector<JudgeScore>& scores_b);

// --- judge -----------------------------------------------------------------------

struct JudgeResult {
  std::vector<JudgeScore> scores;                           // sorted by item_id
  std::vector<std::pair<std::string, std::string>> failures;  // item_id, reason
};

/// One completion per item (plus one retry for out-of-band or unparsable
/// replies) using the rubric template. Calls fan out up to the gateway's
/// llm_parallelism unless the chat backend is order-sensitive.
JudgeResult judge(const std::vector<EvalItem>& items, const std::vector<PipelineRun>& runs, Gateway& gateway);

// --- reporting ---------------------------------------------------------------

EvalReport build_report(const std::string& system, const std::vector<PipelineRun>& runs,
                        const std::vector<EvalItem>& items, const std::vector<AdjustedOverride>* overrides,
                        const std::vector<JudgeScore>* scores, std::size_t k = 5);

nlohmann::ordered_json report_to_json(const EvalReport& report);
nlohmann::ordered_json comparison_to_json(const Comparison& cmp);
/// Table layout: System | Category | #Questions | Coverage (%) | Semantic Acc.
std::string render_report(const std::vector<EvalReport>& reports);
std::string render_comparison(const Comparison& cmp, const std::string& label_a, const std::string& label_b);

/// Rounds to `places` decimals (half away from zero).
double round_to(double value, int places);

}  // namespace rag::eval
