#include "rag/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "rag/prompts.hpp"

namespace rag::eval {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::procedural: return "procedural";
    case Category::definitional: return "definitional";
    case Category::acronym: return "acronym";
    case Category::synthetic: return "synthetic";
  }
  return "synthetic";
}

std::string_view to_string(Origin o) { return o == Origin::generated ? "generated" : "human"; }

Category category_from_string(std::string_view s) {
  for (auto c : {Category::procedural, Category::definitional, Category::acronym, Category::synthetic})
    if (to_string(c) == s) return c;
  throw Error(ErrorCode::invalid_argument, "unknown category: " + std::string(s));
}

Origin origin_from_string(std::string_view s) {
  if (s == "generated") return Origin::generated;
  if (s == "human") return Origin::human;
  throw Error(ErrorCode::invalid_argument, "unknown origin: " + std::string(s));
}

void EvalItem::validate() const {
  if (id.empty()) throw Error(ErrorCode::invalid_argument, "eval item without id");
  if (trim(question).empty()) throw Error(ErrorCode::invalid_argument, "eval item " + id + " has no question");
  if (ground_truth_links.empty()) throw Error(ErrorCode::invalid_argument, "eval item " + id + " has no links");
  if (origin == Origin::generated && ground_truth_links.size() != 1)
    throw Error(ErrorCode::invalid_argument, "generated eval item " + id + " must have exactly one link");
}

// ---------------------------------------------------------------------------
// Files

namespace {

template <typename T, typename Fn>
std::vector<T> parse_lines(std::string_view jsonl, const char* what, Fn&& fn) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(jsonl)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(fn(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<EvalItem> parse_dataset(std::string_view jsonl) {
  auto items = parse_lines<EvalItem>(jsonl, "dataset", [](const nlohmann::json& j) {
    EvalItem it;
    it.id = j.at("id").get<std::string>();
    it.question = j.at("question").get<std::string>();
    it.ground_truth_answer = j.value("ground_truth_answer", std::string());
    it.ground_truth_links = j.at("ground_truth_links").get<std::vector<std::string>>();
    it.category = category_from_string(j.at("category").get<std::string>());
    it.origin = origin_from_string(j.at("origin").get<std::string>());
    it.source_chunk_id = j.value("source_chunk_id", std::string());
    it.validate();
    return it;
  });
  std::set<std::string> ids;
  for (const auto& it : items)
    if (!ids.insert(it.id).second) throw Error(ErrorCode::invalid_argument, "duplicate eval item id: " + it.id);
  return items;
}

std::vector<EvalItem> load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

std::string serialize_dataset(const std::vector<EvalItem>& items) {
  std::string out;
  for (const auto& it : items) {
    nlohmann::ordered_json j;
    j["id"] = it.id;
    j["question"] = it.question;
    j["ground_truth_answer"] = it.ground_truth_answer;
    j["ground_truth_links"] = it.ground_truth_links;
    j["category"] = std::string(to_string(it.category));
    j["origin"] = std::string(to_string(it.origin));
    if (!it.source_chunk_id.empty()) j["source_chunk_id"] = it.source_chunk_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<AdjustedOverride> parse_overrides(std::string_view jsonl) {
  return parse_lines<AdjustedOverride>(jsonl, "overrides", [](const nlohmann::json& j) {
    AdjustedOverride o;
    o.item_id = j.at("item_id").get<std::string>();
    o.accepted_links = j.at("accepted_links").get<std::vector<std::string>>();
    o.reviewer_note = j.value("reviewer_note", std::string());
    return o;
  });
}

std::vector<AdjustedOverride> load_overrides(const std::string& path) { return parse_overrides(read_file(path)); }

std::vector<JudgeScore> parse_judge_scores(std::string_view jsonl) {
  return parse_lines<JudgeScore>(jsonl, "judge scores", [](const nlohmann::json& j) {
    JudgeScore s;
    s.item_id = j.at("item_id").get<std::string>();
    s.system = mode_from_string(j.at("system").get<std::string>());
    s.score = j.at("score").get<int>();
    s.rationale = j.value("rationale", std::string());
    if (s.score < 1 || s.score > 10)
      throw Error(ErrorCode::invalid_argument, "judge score for " + s.item_id + " outside 1-10");
    return s;
  });
}

std::vector<JudgeScore> load_judge_scores(const std::string& path) { return parse_judge_scores(read_file(path)); }

std::string serialize_judge_scores(const std::vector<JudgeScore>& scores) {
  std::string out;
  for (const auto& s : scores) {
    nlohmann::ordered_json j;
    j["item_id"] = s.item_id;
    j["system"] = std::string(to_string(s.system));
    j["score"] = s.score;
    j["rationale"] = s.rationale;
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset construction

bool looks_like_table(std::string_view text) {
  static const std::regex signature(R"((^|\n)[^:;\n]{1,80}: [^;\n]*; [^:;\n]{1,80}: )");
  return std::regex_search(text.begin(), text.end(), signature);
}

std::optional<std::pair<std::string, std::string>> parse_qa_reply(std::string_view reply) {
  std::string question, answer;
  bool in_answer = false;
  for (const auto& raw : split_lines(reply)) {
    auto line = trim(raw);
    if (!in_answer && starts_with_ci(line, "Q:")) {
      question = trim(line.substr(2));
    } else if (!in_answer && starts_with_ci(line, "A:") && !question.empty()) {
      answer = trim(line.substr(2));
      in_answer = true;
    } else if (in_answer && !line.empty()) {
      answer += (answer.empty() ? "" : " ") + line;
    }
  }
  if (question.empty() || answer.empty()) return std::nullopt;
  return std::make_pair(question, answer);
}

GenerationResult generate_eval_items(const std::vector<Chunk>& sample, Gateway& gateway) {
  if (sample.empty()) throw Error(ErrorCode::invalid_argument, "empty chunk sample");
  GenerationResult out;
  for (const auto& chunk : sample) {
    const char* tmpl = looks_like_table(chunk.text) ? "evalgen_table" : "evalgen_narrative";
    auto prompt = gateway.prompts().render(tmpl, {{"context", chunk.text}});
    auto reply = gateway.complete(gateway.make_request("evalgen", std::move(prompt))).text;
    auto qa = parse_qa_reply(reply);
    if (!qa) {
      out.warnings.push_back("unparsable generation reply for " + chunk.chunk_id + "; skipped");
      continue;
    }
    EvalItem it;
    it.id = "gen:" + chunk.chunk_id;
    it.question = qa->first;
    it.ground_truth_answer = qa->second;
    it.ground_truth_links = {chunk.source_link};
    it.category = Category::synthetic;
    it.origin = Origin::generated;
    it.source_chunk_id = chunk.chunk_id;
    out.items.push_back(std::move(it));
  }
  return out;
}

Verdict parse_verdict(std::string_view reply) {
  std::string word;
  for (char c : reply) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!word.empty()) {
      break;
    }
  }
  if (word == "yes") return Verdict::yes;
  if (word == "no") return Verdict::no;
  return Verdict::unparsable;
}

QcResult qc_filter(const std::vector<EvalItem>& items, Gateway& gateway, const ChunkLookup& chunks) {
  static const char* criteria[] = {"qc_specificity", "qc_faithfulness", "qc_completeness"};
  QcResult out;
  for (const auto& it : items) {
    const Chunk* chunk = chunks.find(it.source_chunk_id);
    if (!chunk) throw Error(ErrorCode::not_found, "source chunk not found for eval item " + it.id);

    QcRecord rec;
    rec.item_id = it.id;
    Verdict* slots[] = {&rec.specificity, &rec.faithfulness, &rec.completeness};
    bool all_yes = true;
    for (int c = 0; c < 3; ++c) {
      auto prompt = gateway.prompts().render(
          criteria[c], {{"context", chunk->text}, {"question", it.question}, {"answer", it.ground_truth_answer}});
      *slots[c] = parse_verdict(gateway.complete(gateway.make_request(criteria[c], std::move(prompt))).text);
      if (*slots[c] == Verdict::unparsable)
        out.warnings.push_back("unparsable " + std::string(criteria[c]) + " verdict for " + it.id + "; treated as no");
      all_yes = all_yes && *slots[c] == Verdict::yes;
    }
    rec.retained = all_yes;
    if (all_yes) out.retained.push_back(it);
    out.log.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

std::string normalize_link(std::string_view link) {
  static const std::regex url(R"(^([A-Za-z][A-Za-z0-9+.\-]*)://([^/?#]*)(.*)$)");
  auto t = trim(link);
  std::smatch m;
  if (std::regex_match(t, m, url)) return to_lower(m[1].str()) + "://" + to_lower(m[2].str()) + m[3].str();
  return t;
}

std::vector<const PipelineRun*> join_runs(const std::vector<PipelineRun>& runs, const std::vector<EvalItem>& items) {
  std::map<std::string, const PipelineRun*> by_item, by_question;
  for (const auto& r : runs) {
    if (!r.item_id.empty()) by_item[r.item_id] = &r;
    by_question[r.question] = &r;
  }
  std::vector<const PipelineRun*> joined;
  std::vector<std::string> missing;
  for (const auto& it : items) {
    const PipelineRun* run = nullptr;
    if (auto f = by_item.find(it.id); f != by_item.end()) {
      run = f->second;
    } else if (auto q = by_question.find(it.question); q != by_question.end() && q->second->item_id.empty()) {
      run = q->second;
    }
    if (!run) missing.push_back(it.id);
    joined.push_back(run);
  }
  if (!missing.empty()) throw Error(ErrorCode::not_found, "no run for eval item(s): " + join(missing, ", "));
  return joined;
}

std::vector<std::string> top_links(const PipelineRun& run, std::size_t k) {
  const auto& links = run.retrieved_links.empty() ? run.retrieved_links_top5 : run.retrieved_links;
  std::vector<std::string> out;
  for (const auto& l : links) {
    if (out.size() >= k) break;
    out.push_back(normalize_link(l));
  }
  return out;
}

namespace {

bool any_in(const std::vector<std::string>& needles, const std::set<std::string>& haystack) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](const std::string& n) { return haystack.count(normalize_link(n)) > 0; });
}

}  // namespace

std::size_t count_hits(const std::vector<PipelineRun>& runs, const std::vector<EvalItem>& items, std::size_t k) {
  auto joined = join_runs(runs, items);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto links = top_links(*joined[i], k);
    if (any_in(items[i].ground_truth_links, std::set<std::string>(links.begin(), links.end()))) ++hits;
  }
  return hits;
}

double hit_at_k(const std::vector<PipelineRun>& runs, const std::vector<EvalItem>& items, std::size_t k) {
  if (items.empty()) throw Error(ErrorCode::invalid_argument, "no eval items");
  return static_cast<double>(count_hits(runs, items, k)) / static_cast<double>(items.size());
}

double adjusted_hit_at_k(const std::vector<PipelineRun>& runs, const std::vector<EvalItem>& items,
                         const std::vector<AdjustedOverride>& overrides, std::size_t k) {
  if (items.empty()) throw Error(ErrorCode::invalid_argument, "no eval items");
  std::map<std::string, std::vector<std::string>> accepted;
  for (const auto& o : overrides) {
    auto it = std::find_if(items.begin(), items.end(), [&](const EvalItem& e) { return e.id == o.item_id; });
    if (it == items.end()) throw Error(ErrorCode::not_found, "override references unknown item: " + o.item_id);
    std::set<std::string> gt;
    for (const auto& l : it->ground_truth_links) gt.insert(normalize_link(l));
    for (const auto& l : o.accepted_links) {
      if (gt.count(normalize_link(l)))
        throw Error(ErrorCode::invalid_argument, "override for " + o.item_id + " repeats ground-truth link " + l);
      accepted[o.item_id].push_back(l);
    }
  }

  auto joined = join_runs(runs, items);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto links = top_links(*joined[i], k);
    std::set<std::string> top(links.begin(), links.end());
    bool hit = any_in(items[i].ground_truth_links, top);
    if (!hit)
      if (auto a = accepted.find(items[i].id); a != accepted.end()) hit = any_in(a->second, top);
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

CoverageResult coverage(const std::vector<PipelineRun>& runs, const std::vector<EvalItem>& items, std::size_t k) {
  std::set<std::string> ground_truth;
  std::map<Category, std::set<std::string>> per_cat_links;
  std::map<Category, std::size_t> per_cat_questions;
  for (const auto& it : items) {
    ++per_cat_questions[it.category];
    for (const auto& l : it.ground_truth_links) {
      ground_truth.insert(normalize_link(l));
      per_cat_links[it.category].insert(normalize_link(l));
    }
  }
  if (ground_truth.empty()) throw Error(ErrorCode::invalid_argument, "coverage: empty ground-truth link set");

  std::set<std::string> retrieved;
  for (const auto* run : join_runs(runs, items))
    for (auto& l : top_links(*run, k)) retrieved.insert(std::move(l));

  auto count_in = [&](const std::set<std::string>& g) {
    return static_cast<std::size_t>(std::count_if(g.begin(), g.end(), [&](const auto& l) { return retrieved.count(l) > 0; }));
  };

  CoverageResult out;
  out.total = ground_truth.size();
  out.retrieved = count_in(ground_truth);
  out.overall = static_cast<double>(out.retrieved) / static_cast<double>(out.total);
  for (const auto& [cat, links] : per_cat_links) {
    CategoryBreakdown b;
    b.n_questions = per_cat_questions[cat];
    b.gt_links = links.size();
    b.retrieved_links = count_in(links);
    b.coverage = static_cast<double>(b.retrieved_links) / static_cast<double>(b.gt_links);
    out.per_category[cat] = b;
  }
  return out;
}

double semantic_accuracy(const std::vector<JudgeScore>& scores) {
  if (scores.empty()) throw Error(ErrorCode::invalid_argument, "semantic accuracy of an empty score list");
  long long sum = 0;
  for (const auto& s : scores) sum += s.score;
  return static_cast<double>(sum) / static_cast<double>(scores.size());
}

Comparison compare(const std::vector<JudgeScore>& scores_a, const std::vector<JudgeScore>& scores_b) {
  std::map<std::string, int> a, b;
  for (const auto& s : scores_a)
    if (!a.emplace(s.item_id, s.score).second) throw Error(ErrorCode::invalid_argument, "duplicate score for " + s.item_id);
  for (const auto& s : scores_b)
    if (!b.emplace(s.item_id, s.score).second) throw Error(ErrorCode::invalid_argument, "duplicate score for " + s.item_id);
  if (a.empty()) throw Error(ErrorCode::invalid_argument, "compare: no scores");

  std::vector<std::string> mismatched;
  for (const auto& [id, _] : a)
    if (!b.count(id)) mismatched.push_back(id);
  for (const auto& [id, _] : b)
    if (!a.count(id)) mismatched.push_back(id);
  if (!mismatched.empty())
    throw Error(ErrorCode::invalid_argument, "compare: item sets differ on " + join(mismatched, ", "));

  Comparison out;
  std::size_t wins = 0, ties = 0, losses = 0;
  std::vector<int> sorted;
  for (const auto& [id, sa] : a) {
    int d = sa - b.at(id);
    out.deltas.emplace_back(id, d);
    sorted.push_back(d);
    (d > 0 ? wins : d == 0 ? ties : losses)++;
  }
  const double n = static_cast<double>(out.deltas.size());
  out.win = static_cast<double>(wins) / n;
  out.tie = static_cast<double>(ties) / n;
  out.loss = static_cast<double>(losses) / n;
  std::sort(sorted.begin(), sorted.end());
  std::size_t m = sorted.size() / 2;
  out.median_delta = sorted.size() % 2 ? sorted[m] : (sorted[m - 1] + sorted[m]) / 2.0;
  out.min_delta = sorted.front();
  out.max_delta = sorted.back();
  return out;
}

// ---------------------------------------------------------------------------
// Judge

JudgeResult judge(const std::vector<EvalItem>& items, const std::vector<PipelineRun>& runs, Gateway& gateway) {
  auto joined = join_runs(runs, items);
  std::vector<std::optional<JudgeScore>> scores(items.size());
  std::vector<std::string> errors(items.size());

  std::size_t limit = gateway.chat_is_ordered() ? 1 : gateway.options().llm_parallelism;
  parallel_for(items.size(), limit, [&](std::size_t i) {
    const auto& item = items[i];
    const auto& run = *joined[i];
    auto prompt = gateway.prompts().render("judge", {{"question", item.question},
                                                     {"ground_truth", item.ground_truth_answer},
                                                     {"answer", run.final_answer.text}});
    std::string last_reply;
    for (int attempt = 0; attempt < 2; ++attempt) {
      try {
        last_reply = gateway.complete(gateway.make_request("judge", prompt)).text;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::script_exhausted) throw;
        errors[i] = e.what();
        return;
      }
      if (auto s = parse_bounded_integer(last_reply, 1, 10)) {
        scores[i] = JudgeScore{item.id, run.mode, *s, trim(last_reply)};
        return;
      }
    }
    errors[i] = "no score in 1-10 after retry (last reply: \"" + trim(last_reply) + "\")";
  });

  JudgeResult out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (scores[i])
      out.scores.push_back(*scores[i]);
    else
      out.failures.emplace_back(items[i].id, errors[i]);
  }
  std::sort(out.scores.begin(), out.scores.end(),
            [](const JudgeScore& x, const JudgeScore& y) { return x.item_id < y.item_id; });
  std::sort(out.failures.begin(), out.failures.end());
  return out;
}

// ---------------------------------------------------------------------------
// Reports

double round_to(double value, int places) {
  double scale = std::pow(10.0, places);
  return std::round(value * scale) / scale;
}

EvalReport build_report(const std::string& system, const std::vector<PipelineRun>& runs,
                        const std::vector<EvalItem>& items, const std::vector<AdjustedOverride>* overrides,
                        const std::vector<JudgeScore>* scores, std::size_t k) {
  if (items.empty()) throw Error(ErrorCode::invalid_argument, "no eval items");
  EvalReport rep;
  rep.system = system;
  rep.k = k;
  rep.n_questions = items.size();
  rep.hits = count_hits(runs, items, k);
  rep.hit_at_k = static_cast<double>(rep.hits) / static_cast<double>(items.size());
  if (overrides) rep.adjusted_hit_at_k = adjusted_hit_at_k(runs, items, *overrides, k);

  auto cov = coverage(runs, items, k);
  rep.per_category = cov.per_category;
  rep.coverage = std::move(cov);

  if (scores && !scores->empty()) {
    std::map<std::string, const EvalItem*> item_by_id;
    for (const auto& it : items) item_by_id[it.id] = &it;
    std::vector<JudgeScore> relevant;
    std::map<Category, std::vector<JudgeScore>> per_cat;
    for (const auto& s : *scores) {
      auto f = item_by_id.find(s.item_id);
      if (f == item_by_id.end()) continue;
      relevant.push_back(s);
      per_cat[f->second->category].push_back(s);
    }
    if (!relevant.empty()) rep.mean_judge_score = semantic_accuracy(relevant);
    for (auto& [cat, list] : per_cat) rep.per_category[cat].mean_score = semantic_accuracy(list);
  }

  double latency = 0.0;
  for (const auto* run : join_runs(runs, items)) latency += static_cast<double>(run->total_latency_ms);
  rep.mean_latency_ms = latency / static_cast<double>(items.size());
  return rep;
}

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(round_to(*v, 6)) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json j;
  j["system"] = r.system;
  j["n_questions"] = r.n_questions;
  j["k"] = r.k;
  j["hits"] = r.hits;
  j["hit_at_k"] = round_to(r.hit_at_k, 6);
  j["adjusted_hit_at_k"] = opt(r.adjusted_hit_at_k);
  j["mean_judge_score"] = opt(r.mean_judge_score);
  if (r.coverage) {
    j["coverage"] = round_to(r.coverage->overall, 6);
    j["coverage_retrieved"] = r.coverage->retrieved;
    j["coverage_total"] = r.coverage->total;
  } else {
    j["coverage"] = nullptr;
  }
  j["per_category"] = nlohmann::ordered_json::object();
  for (const auto& [cat, b] : r.per_category) {
    nlohmann::ordered_json c;
    c["n"] = b.n_questions;
    c["gt_links"] = b.gt_links;
    c["retrieved_links"] = b.retrieved_links;
    c["coverage"] = opt(b.coverage);
    c["mean_score"] = opt(b.mean_score);
    j["per_category"][std::string(to_string(cat))] = std::move(c);
  }
  j["mean_latency_ms"] = round_to(r.mean_latency_ms, 3);
  return j;
}

nlohmann::ordered_json comparison_to_json(const Comparison& cmp) {
  nlohmann::ordered_json j;
  j["n"] = cmp.deltas.size();
  j["win"] = round_to(cmp.win, 6);
  j["tie"] = round_to(cmp.tie, 6);
  j["loss"] = round_to(cmp.loss, 6);
  j["median_delta"] = cmp.median_delta;
  j["min_delta"] = cmp.min_delta;
  j["max_delta"] = cmp.max_delta;
  j["deltas"] = nlohmann::ordered_json::array();
  for (const auto& [id, d] : cmp.deltas) j["deltas"].push_back({{"item_id", id}, {"delta", d}});
  return j;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", round_to(v * 100.0, 2));
  return buf;
}

std::string num(double v, int places) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", places, round_to(v, places));
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_report(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "Retrieval and answer quality\n";
  out << pad("System", 10) << pad("N", 6) << pad("Hit@k (%)", 12) << pad("Adjusted (%)", 14)
      << pad("Semantic Acc.", 15) << "Mean latency (s)\n";
  for (const auto& r : reports) {
    out << pad(r.system, 10) << pad(std::to_string(r.n_questions), 6) << pad(pct(r.hit_at_k), 12)
        << pad(r.adjusted_hit_at_k ? pct(*r.adjusted_hit_at_k) : "-", 14)
        << pad(r.mean_judge_score ? num(*r.mean_judge_score, 2) : "-", 15) << num(r.mean_latency_ms / 1000.0, 2)
        << "\n";
  }
  out << "\nCoverage by category (k=" << (reports.empty() ? 5 : reports.front().k) << ")\n";
  out << pad("System", 10) << pad("Category", 14) << pad("#Questions", 12) << pad("Coverage (%)", 14)
      << "Semantic Acc.\n";
  for (const auto& r : reports) {
    if (!r.coverage) continue;
    out << pad(r.system, 10) << pad("Overall", 14) << pad(std::to_string(r.n_questions), 12)
        << pad(pct(r.coverage->overall) + " (" + std::to_string(r.coverage->retrieved) + "/" +
                   std::to_string(r.coverage->total) + ")",
               14)
        << (r.mean_judge_score ? num(*r.mean_judge_score, 2) : "-") << "\n";
    for (const auto& [cat, b] : r.per_category) {
      std::string name(to_string(cat));
      name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
      out << pad("", 10) << pad(name, 14) << pad(std::to_string(b.n_questions), 12)
          << pad(b.coverage ? pct(*b.coverage) : "-", 14) << (b.mean_score ? num(*b.mean_score, 2) : "-") << "\n";
    }
  }
  return out.str();
}

std::string render_comparison(const Comparison& cmp, const std::string& label_a, const std::string& label_b) {
  std::ostringstream out;
  out << "Per-question score difference (" << label_a << " - " << label_b << "), n=" << cmp.deltas.size() << "\n";
  std::map<int, std::size_t> histogram;
  for (const auto& [id, d] : cmp.deltas) ++histogram[d];
  for (const auto& [d, count] : histogram)
    out << (d > 0 ? "+" : "") << d << "\t" << count << "\t" << std::string(count, '#') << "\n";
  out << label_a << " better: " << pct(cmp.win) << "%, tie: " << pct(cmp.tie) << "%, " << label_b
      << " better: " << pct(cmp.loss) << "%\n";
  out << "median delta: " << num(cmp.median_delta, 1) << ", min: " << cmp.min_delta << ", max: " << cmp.max_delta
      << "\n";
  return out.str();
}

}  // namespace rag::eval
