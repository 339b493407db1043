#include "rag/agents.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "rag/prompts.hpp"

namespace rag::agents {

std::string_view to_string(Intent intent) { return intent == Intent::summary ? "summary" : "retrieval"; }

std::string format_history(const std::vector<ChatTurn>& history) {
  if (history.empty()) return "(none)";
  std::vector<std::string> lines;
  lines.reserve(history.size());
  for (const auto& t : history) lines.push_back(std::string(rag::to_string(t.role)) + ": " + t.content);
  return join(lines, "\n");
}

std::string format_context(const std::vector<RetrievalHit>& context, const ChunkLookup& chunks) {
  if (context.empty()) return "(none)";
  std::vector<std::string> blocks;
  for (std::size_t i = 0; i < context.size(); ++i) {
    const auto* chunk = chunks.find(context[i].chunk_id);
    blocks.push_back("[" + std::to_string(i + 1) + "] (source: " + context[i].source_link + ")\n" +
                     (chunk ? chunk->text : std::string("(missing chunk ") + context[i].chunk_id + ")"));
  }
  return join(blocks, "\n\n");
}

IntentResult classify_intent(Gateway& gateway, const std::string& user_input, const std::vector<ChatTurn>& history) {
  if (trim(user_input).empty()) throw Error(ErrorCode::invalid_argument, "empty user input");
  auto prompt = gateway.prompts().render("intent", {{"query", user_input}, {"history", format_history(history)}});
  auto reply = to_lower(gateway.complete(gateway.make_request("intent", std::move(prompt))).text);

  IntentResult result;
  static const std::regex word(R"(\b(retrieval|summary)\b)");
  std::smatch m;
  if (std::regex_search(reply, m, word)) {
    result.intent = m[1].str() == "summary" ? Intent::summary : Intent::retrieval;
  } else {
    result.intent = Intent::retrieval;
    result.warnings.push_back("unparsable intent reply; defaulting to retrieval");
  }
  return result;
}

ReformulatedQuery reformulate(Gateway& gateway, const std::string& user_input, const std::vector<ChatTurn>& history,
                              const Glossary* glossary) {
  ReformulatedQuery out;
  out.original = user_input;

  std::string question = user_input;
  std::string expansions_text = "(none)";
  if (glossary) {
    auto expanded = glossary->expand(user_input);
    question = expanded.text;
    out.resolutions = expanded.resolutions;
    std::vector<std::string> lines;
    for (const auto& r : expanded.resolutions) {
      if (r.expansions.empty()) continue;
      auto text = join(r.expansions, " | ");
      out.expansions_applied.emplace_back(r.acronym, text);
      lines.push_back(r.acronym + ": " + text + (r.ambiguous ? " (ambiguous)" : ""));
    }
    if (!lines.empty()) expansions_text = join(lines, "\n");
  }

  auto prompt = gateway.prompts().render("reformulate", {{"query", question},
                                                         {"history", format_history(history)},
                                                         {"glossary_expansions", expansions_text}});
  auto reply = gateway.complete(gateway.make_request("reformulate", std::move(prompt))).text;

  bool continuation = false;
  std::string search;
  std::vector<std::string> loose;
  for (const auto& raw : split_lines(reply)) {
    auto line = trim(raw);
    if (line.empty()) continue;
    if (starts_with_ci(line, "continuation:")) {
      continuation = starts_with_ci(trim(line.substr(13)), "yes");
    } else if (starts_with_ci(line, "query:")) {
      search = trim(line.substr(6));
    } else {
      loose.push_back(line);
    }
  }
  if (search.empty()) search = join(loose, " ");

  if (search.empty()) {
    out.search_string = question;
    out.warnings.push_back("empty reformulation reply; searching with the expanded question");
  } else {
    out.search_string = glossary ? glossary->expand(search).text : search;
  }
  out.is_continuation = !history.empty() && continuation;
  return out;
}

SubQuerySet parse_subqueries(std::string_view reply, const std::string& query) {
  static const std::regex marker(R"(^\s*(?:[-*+•]|\d+[.)]|q\d+:)\s*)", std::regex::icase);
  SubQuerySet set;
  set.derived_from = query;
  std::set<std::string> seen;

  auto add = [&](std::string q) {
    q = trim(q);
    if (q.empty() || set.sub_queries.size() >= 3) return;
    if (seen.insert(to_lower(q)).second) set.sub_queries.push_back(std::move(q));
  };

  for (const auto& raw : split_lines(reply)) {
    auto line = std::regex_replace(raw, marker, "");
    line = trim(line);
    // Strip one layer of straight or typographic quotes.
    for (std::string_view open : {"\"", "'", "\xE2\x80\x9C"}) {
      std::string_view close = open == "\xE2\x80\x9C" ? "\xE2\x80\x9D" : open;
      if (line.size() >= open.size() + close.size() && line.compare(0, open.size(), open) == 0 &&
          line.compare(line.size() - close.size(), close.size(), close) == 0) {
        line = trim(line.substr(open.size(), line.size() - open.size() - close.size()));
        break;
      }
    }
    add(line);
  }
  if (set.sub_queries.size() < 2) add(query);
  if (set.sub_queries.size() < 2) add(trim(query) + " details");
  return set;
}

SubQuerySet generate_subqueries(Gateway& gateway, const std::string& query,
                                const std::vector<RetrievalHit>& context_so_far, const ChunkLookup& chunks) {
  auto prompt = gateway.prompts().render("subquery", {{"query", query}, {"context", format_context(context_so_far, chunks)}});
  auto reply = gateway.complete(gateway.make_request("subquery", std::move(prompt))).text;
  return parse_subqueries(reply, query);
}

SynthesizedAnswer parse_synthesis(std::string_view reply, const std::vector<RetrievalHit>& context) {
  SynthesizedAnswer out;
  out.text = trim(reply);
  if (out.text.empty()) {
    out.text = std::string(kInsufficientContextNotice);
    out.insufficient_context = true;
    out.warnings.push_back("empty synthesis reply");
    return out;
  }
  out.insufficient_context = out.text.find(kInsufficientContextNotice) != std::string::npos;

  static const std::regex citation(R"(\[(\d+(?:\s*,\s*\d+)*)\])");
  static const std::regex number(R"(\d+)");
  std::set<std::string> links, ids;
  for (auto it = std::sregex_iterator(out.text.begin(), out.text.end(), citation); it != std::sregex_iterator(); ++it) {
    std::string group = (*it)[1].str();
    for (auto n = std::sregex_iterator(group.begin(), group.end(), number); n != std::sregex_iterator(); ++n) {
      auto digits = n->str();
      std::size_t idx = digits.size() > 6 ? 0 : std::stoul(digits);
      if (idx < 1 || idx > context.size()) {
        out.warnings.push_back("citation [" + digits + "] out of range for " + std::to_string(context.size()) +
                               " context passages; dropped");
        continue;
      }
      const auto& hit = context[idx - 1];
      if (links.insert(hit.source_link).second) out.citations.push_back(hit.source_link);
      if (ids.insert(hit.chunk_id).second) out.used_chunk_ids.push_back(hit.chunk_id);
    }
  }
  return out;
}

SynthesizedAnswer synthesize(Gateway& gateway, const std::string& query, const std::vector<RetrievalHit>& context,
                             const ChunkLookup& chunks) {
  if (context.empty()) {
    SynthesizedAnswer out;
    out.text = std::string(kInsufficientContextNotice);
    out.insufficient_context = true;
    return out;
  }
  auto prompt = gateway.prompts().render("synthesize", {{"query", query},
                                                        {"context", format_context(context, chunks)},
                                                        {"insufficient_notice", std::string(kInsufficientContextNotice)}});
  auto reply = gateway.complete(gateway.make_request("synthesize", std::move(prompt))).text;
  return parse_synthesis(reply, context);
}

SynthesizedAnswer summarize_history(Gateway& gateway, const std::string& user_input,
                                    const std::vector<ChatTurn>& history) {
  SynthesizedAnswer out;
  if (history.empty()) {
    out.text = "There is no earlier conversation to summarize yet.";
    return out;
  }
  auto prompt = gateway.prompts().render("summarize_history", {{"query", user_input}, {"history", format_history(history)}});
  out.text = trim(gateway.complete(gateway.make_request("summary", std::move(prompt))).text);
  if (out.text.empty()) {
    out.text = "There is no earlier conversation to summarize yet.";
    out.warnings.push_back("empty summary reply");
  }
  return out;
}

QaAssessment parse_assessment(std::string_view reply) {
  QaAssessment out;
  out.rationale = trim(reply);
  if (auto score = parse_bounded_integer(reply, 0, 10)) {
    out.score = *score;
  } else {
    out.score = 0;
    out.warnings.push_back("no score in 0-10 found in assessment reply; scoring 0");
  }
  return out;
}

QaAssessment assess(Gateway& gateway, const std::string& query, const SynthesizedAnswer& answer,
                    const std::vector<RetrievalHit>& context, const ChunkLookup& chunks) {
  auto prompt = gateway.prompts().render(
      "assess", {{"query", query}, {"answer", answer.text}, {"context", format_context(context, chunks)}});
  return parse_assessment(gateway.complete(gateway.make_request("assess", std::move(prompt))).text);
}

}  // namespace rag::agents
