#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rag/corpus.hpp"
#include "rag/gateway.hpp"
#include "rag/glossary.hpp"
#include "rag/index.hpp"

// The pipeline agents. Each is a stateless function that issues at most one
// gateway completion; warnings are returned to the caller for tracing.
namespace rag::agents {

enum class Intent { retrieval, summary };
std::string_view to_string(Intent intent);

struct IntentResult {
  Intent intent = Intent::retrieval;
  std::vector<std::string> warnings;
};

struct ReformulatedQuery {
  std::string original;
  std::string search_string;
  std::vector<std::pair<std::string, std::string>> expansions_applied;  // acronym -> expansion text
  bool is_continuation = false;
  std::vector<Resolution> resolutions;
  std::vector<std::string> warnings;
};

struct SubQuerySet {
  std::vector<std::string> sub_queries;  // 2 or 3, distinct, non-empty
  std::string derived_from;
};

struct SynthesizedAnswer {
  std::string text;
  std::vector<std::string> citations;  // source links, first-cited order
  std::vector<std::string> used_chunk_ids;
  bool insufficient_context = false;
  std::vector<std::string> warnings;

  bool operator==(const SynthesizedAnswer&) const = default;
};

struct QaAssessment {
  int score = 0;  // 0..10
  std::string rationale;
  std::vector<std::string> warnings;

  bool operator==(const QaAssessment&) const = default;
};

/// Renders history as "role: content" lines, or "(none)".
std::string format_history(const std::vector<ChatTurn>& history);

/// Renders hits as "[n] (source: link)\ntext" blocks, numbered from 1.
std::string format_context(const std::vector<RetrievalHit>& context, const ChunkLookup& chunks);

IntentResult classify_intent(Gateway& gateway, const std::string& user_input, const std::vector<ChatTurn>& history);

/// With a glossary the question is expanded before the model call and the
/// model's search string is expanded again. Without one (single-pass mode)
/// no acronym handling takes place.
ReformulatedQuery reformulate(Gateway& gateway, const std::string& user_input, const std::vector<ChatTurn>& history,
                              const Glossary* glossary);

SubQuerySet generate_subqueries(Gateway& gateway, const std::string& query,
                                const std::vector<RetrievalHit>& context_so_far, const ChunkLookup& chunks);

/// Parses a sub-query reply: strips list markers and quotes, removes
/// duplicates, keeps at most three and pads with `query` to at least two.
SubQuerySet parse_subqueries(std::string_view reply, const std::string& query);

SynthesizedAnswer synthesize(Gateway& gateway, const std::string& query, const std::vector<RetrievalHit>& context,
                             const ChunkLookup& chunks);

/// Maps "[n]" citations in `reply` back onto the context.
SynthesizedAnswer parse_synthesis(std::string_view reply, const std::vector<RetrievalHit>& context);

/// Compresses the conversation when the intent is "summary".
SynthesizedAnswer summarize_history(Gateway& gateway, const std::string& user_input,
                                    const std::vector<ChatTurn>& history);

QaAssessment assess(Gateway& gateway, const std::string& query, const SynthesizedAnswer& answer,
                    const std::vector<RetrievalHit>& context, const ChunkLookup& chunks);

/// First standalone integer in [0, 10]; anything else scores 0 with a warning.
QaAssessment parse_assessment(std::string_view reply);

}  // namespace rag::agents
