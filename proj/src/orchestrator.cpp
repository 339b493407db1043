#include "rag/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>

#include "rag/prompts.hpp"

namespace rag {

std::string_view to_string(Mode mode) { return mode == Mode::brag ? "brag" : "arag"; }

Mode mode_from_string(std::string_view s) {
  if (s == "brag") return Mode::brag;
  if (s == "arag") return Mode::arag;
  throw Error(ErrorCode::invalid_argument, "invalid mode '" + std::string(s) + "' (expected brag or arag)");
}

namespace {
constexpr std::pair<Stage, std::string_view> kStageNames[] = {
    {Stage::intent, "intent"},       {Stage::reformulate, "reformulate"}, {Stage::retrieve, "retrieve"},
    {Stage::subquery, "subquery"},   {Stage::rerank, "rerank"},           {Stage::synthesize, "synthesize"},
    {Stage::assess, "assess"},       {Stage::broad_sweep, "broad_sweep"}, {Stage::fallback, "fallback"},
};
}  // namespace

std::string_view to_string(Stage stage) {
  for (auto [s, name] : kStageNames)
    if (s == stage) return name;
  return "retrieve";
}

Stage stage_from_string(std::string_view s) {
  for (auto [stage, name] : kStageNames)
    if (name == s) return stage;
  throw Error(ErrorCode::parse, "unknown stage: " + std::string(s));
}

void PipelineConfig::validate() const {
  if (top_k == 0) throw Error(ErrorCode::invalid_argument, "top_k must be positive");
  if (qa_threshold < 0 || qa_threshold > 10) throw Error(ErrorCode::invalid_argument, "qa_threshold must be in [0, 10]");
  if (max_refinements > 2) throw Error(ErrorCode::invalid_argument, "max_refinements must be 0, 1 or 2");
  if (broad_sweep_multiplier < 2) throw Error(ErrorCode::invalid_argument, "broad_sweep_multiplier must be >= 2");
}

std::size_t PipelineConfig::effective_budget(bool cross_encoder_available) const {
  if (completion_budget > 0) return completion_budget;
  // intent + reformulate + (synthesize + assess) per attempt + sub-query generation
  std::size_t cap = 2 + 2 * (1 + max_refinements) + (max_refinements >= 1 ? 1 : 0);
  if (!cross_encoder_available) {
    // one pairwise-scoring completion per rerank candidate
    if (max_refinements >= 1) cap += top_k * 4;  // first pass + up to 3 sub-queries
    if (max_refinements >= 2) cap += top_k * broad_sweep_multiplier;
  }
  return cap;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::ordered_json answer_to_json(const agents::SynthesizedAnswer& a) {
  nlohmann::ordered_json j;
  j["text"] = a.text;
  j["citations"] = a.citations;
  j["used_chunk_ids"] = a.used_chunk_ids;
  j["insufficient_context"] = a.insufficient_context;
  return j;
}

agents::SynthesizedAnswer answer_from_json(const nlohmann::json& j) {
  agents::SynthesizedAnswer a;
  a.text = j.at("text").get<std::string>();
  a.citations = j.value("citations", std::vector<std::string>{});
  a.used_chunk_ids = j.value("used_chunk_ids", std::vector<std::string>{});
  a.insufficient_context = j.value("insufficient_context", false);
  return a;
}

}  // namespace

nlohmann::ordered_json run_to_json(const PipelineRun& run) {
  nlohmann::ordered_json j;
  j["run_id"] = run.run_id;
  j["mode"] = std::string(to_string(run.mode));
  j["question"] = run.question;
  if (!run.item_id.empty()) j["item_id"] = run.item_id;
  j["final_answer"] = answer_to_json(run.final_answer);
  if (run.final_score)
    j["final_score"] = {{"score", run.final_score->score}, {"rationale", run.final_score->rationale}};
  else
    j["final_score"] = nullptr;
  j["retrieved_links_top5"] = run.retrieved_links_top5;
  j["retrieved_links"] = run.retrieved_links;
  j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : run.events) {
    nlohmann::ordered_json ej;
    ej["seq"] = e.seq;
    ej["stage"] = std::string(to_string(e.stage));
    ej["detail"] = e.detail;
    ej["latency_ms"] = e.latency_ms;
    j["events"].push_back(std::move(ej));
  }
  j["model_calls"] = nlohmann::ordered_json::array();
  for (const auto& c : run.model_calls) j["model_calls"].push_back({{"tag", c.tag}, {"latency_ms", c.latency_ms}});
  j["acronym_resolutions"] = nlohmann::ordered_json::array();
  for (const auto& r : run.acronym_resolutions) {
    nlohmann::ordered_json rj;
    rj["acronym"] = r.acronym;
    rj["expansions"] = r.expansions;
    rj["ambiguous"] = r.ambiguous;
    j["acronym_resolutions"].push_back(std::move(rj));
  }
  j["total_latency_ms"] = run.total_latency_ms;
  j["refinements_used"] = run.refinements_used;
  j["completions"] = run.completions;
  j["embedded_texts"] = run.embedded_texts;
  j["error"] = run.error ? nlohmann::ordered_json(*run.error) : nlohmann::ordered_json(nullptr);
  return j;
}

PipelineRun run_from_json(const nlohmann::json& j) {
  PipelineRun run;
  run.run_id = j.at("run_id").get<std::string>();
  run.mode = mode_from_string(j.at("mode").get<std::string>());
  run.question = j.at("question").get<std::string>();
  run.item_id = j.value("item_id", std::string());
  run.final_answer = answer_from_json(j.at("final_answer"));
  if (j.contains("final_score") && !j["final_score"].is_null()) {
    agents::QaAssessment qa;
    qa.score = j["final_score"].at("score").get<int>();
    qa.rationale = j["final_score"].value("rationale", std::string());
    run.final_score = qa;
  }
  run.retrieved_links_top5 = j.at("retrieved_links_top5").get<std::vector<std::string>>();
  run.retrieved_links = j.value("retrieved_links", run.retrieved_links_top5);
  for (const auto& ej : j.value("events", nlohmann::json::array())) {
    TraceEvent e;
    e.seq = ej.at("seq").get<std::size_t>();
    e.stage = stage_from_string(ej.at("stage").get<std::string>());
    e.detail = ej.value("detail", std::string());
    e.latency_ms = ej.value("latency_ms", std::int64_t{0});
    run.events.push_back(std::move(e));
  }
  for (const auto& cj : j.value("model_calls", nlohmann::json::array()))
    run.model_calls.push_back({cj.at("tag").get<std::string>(), cj.value("latency_ms", std::int64_t{0})});
  for (const auto& rj : j.value("acronym_resolutions", nlohmann::json::array()))
    run.acronym_resolutions.push_back({rj.at("acronym").get<std::string>(),
                                       rj.value("expansions", std::vector<std::string>{}),
                                       rj.value("ambiguous", false)});
  run.total_latency_ms = j.value("total_latency_ms", std::int64_t{0});
  run.refinements_used = j.value("refinements_used", std::size_t{0});
  run.completions = j.value("completions", std::size_t{0});
  run.embedded_texts = j.value("embedded_texts", std::size_t{0});
  if (j.contains("error") && !j["error"].is_null()) run.error = j["error"].get<std::string>();
  return run;
}

std::string run_to_jsonl(const PipelineRun& run) { return run_to_json(run).dump(); }

std::vector<PipelineRun> parse_run_log(std::string_view content) {
  std::vector<PipelineRun> runs;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(content)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      runs.push_back(run_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "run log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return runs;
}

std::vector<PipelineRun> load_run_log(const std::string& path) { return parse_run_log(read_file(path)); }

// ---------------------------------------------------------------------------

std::vector<std::string> ranked_links(const std::vector<RetrievalHit>& hits) {
  std::vector<std::string> links;
  for (const auto& h : hits)
    if (std::find(links.begin(), links.end(), h.source_link) == links.end()) links.push_back(h.source_link);
  return links;
}

std::string derive_run_id(Mode mode, const std::string& question, const std::vector<ChatTurn>& history) {
  std::uint64_t h = fnv1a64(to_string(mode));
  h = fnv1a64(question, h);
  for (const auto& t : history) {
    h = fnv1a64(to_string(t.role), h);
    h = fnv1a64(t.content, h);
  }
  return "run-" + to_hex(h);
}

namespace {

std::string fmt_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", s);
  return buf;
}

class RunMeter final : public CallObserver {
 public:
  explicit RunMeter(std::size_t budget) : budget_(budget) {}

  void before_completion(const std::string& tag) override {
    std::lock_guard lock(mu_);
    if (issued_ >= budget_)
      throw Error(ErrorCode::budget_exceeded, "budget exceeded: completion cap of " + std::to_string(budget_) +
                                                  " reached before [" + tag + "]");
    ++issued_;
  }
  void after_completion(const std::string& tag, std::int64_t latency_ms) override {
    std::lock_guard lock(mu_);
    calls_.push_back({tag, latency_ms});
  }
  void after_embed(std::size_t texts) override {
    std::lock_guard lock(mu_);
    embedded_ += texts;
  }

  std::vector<ModelCall> calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::size_t issued() const {
    std::lock_guard lock(mu_);
    return issued_;
  }
  std::size_t embedded() const {
    std::lock_guard lock(mu_);
    return embedded_;
  }

 private:
  mutable std::mutex mu_;
  std::size_t budget_;
  std::size_t issued_ = 0;
  std::size_t embedded_ = 0;
  std::vector<ModelCall> calls_;
};

struct Attempt {
  agents::SynthesizedAnswer answer;
  agents::QaAssessment assessment;
  std::vector<RetrievalHit> context;
};

// Single-owner state for one run.
class Runner {
 public:
  Runner(Mode mode, const std::string& question, const PipelineConfig& cfg, PipelineDeps deps, std::string run_id,
         const std::vector<ChatTurn>& history, std::size_t budget)
      : cfg_(cfg), deps_(deps), meter_(budget), gateway_(deps.gateway.scoped(meter_)) {
    run_.mode = mode;
    run_.question = question;
    run_.run_id = run_id.empty() ? derive_run_id(mode, question, history) : std::move(run_id);
    start_ms_ = clock().now_ms();
  }

  const Clock& clock() const { return deps_.gateway.clock(); }
  Gateway& gateway() { return gateway_; }
  PipelineRun& run() { return run_; }
  const PipelineConfig& cfg() const { return cfg_; }
  PipelineDeps& deps() { return deps_; }

  /// Runs `body` as one traced stage. `detail` is filled in by the body.
  template <typename Fn>
  auto stage(Stage s, Fn&& body) {
    std::string detail;
    auto t0 = clock().now_ms();
    try {
      if constexpr (std::is_void_v<decltype(body(detail))>) {
        body(detail);
        record(s, std::move(detail), clock().now_ms() - t0);
      } else {
        auto result = body(detail);
        record(s, std::move(detail), clock().now_ms() - t0);
        return result;
      }
    } catch (const PipelineError&) {
      throw;
    } catch (const Error& e) {
      record(s, "failed: " + std::string(e.what()), clock().now_ms() - t0);
      fail(e.code(), e.what());
    } catch (const std::exception& e) {
      record(s, "failed: " + std::string(e.what()), clock().now_ms() - t0);
      fail(ErrorCode::internal, e.what());
    }
  }

  std::vector<RetrievalHit> retrieve(const std::vector<double>& query_vec, std::size_t k) {
    if (deps_.index.empty()) return {};
    return deps_.index.search(query_vec, k);
  }

  std::vector<double> embed_query(const std::string& text) {
    if (deps_.index.empty()) return {};
    return gateway_.embed({text}).at(0);
  }

  PipelineRun finish() {
    run_.total_latency_ms = clock().now_ms() - start_ms_;
    run_.model_calls = meter_.calls();
    run_.completions = meter_.issued();
    run_.embedded_texts = meter_.embedded();
    return run_;
  }

 private:
  void record(Stage s, std::string detail, std::int64_t latency) {
    run_.events.push_back({run_.events.size() + 1, s, std::move(detail), std::max<std::int64_t>(0, latency)});
  }

  [[noreturn]] void fail(ErrorCode code, const std::string& message) {
    run_.error = message;
    throw PipelineError(code, message, finish());
  }

  PipelineConfig cfg_;
  PipelineDeps deps_;
  RunMeter meter_;
  Gateway gateway_;
  PipelineRun run_;
  std::int64_t start_ms_ = 0;
};

std::string with_warnings(std::string detail, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) detail += " | warning: " + w;
  return detail;
}

std::string describe_hits(const std::vector<RetrievalHit>& hits) {
  if (hits.empty()) return "0 hits";
  return std::to_string(hits.size()) + " hits, top " + hits.front().chunk_id + " score=" + fmt_score(hits.front().score);
}

std::vector<RetrievalHit> rerank_hits(Runner& r, const std::string& query, std::vector<RetrievalHit> hits,
                                      std::string& detail) {
  std::vector<RerankCandidate> candidates;
  candidates.reserve(hits.size());
  for (const auto& h : hits) {
    const auto* chunk = r.deps().chunks.find(h.chunk_id);
    candidates.push_back({h.chunk_id, chunk ? chunk->text : std::string(), 0.0});
  }
  std::vector<RetrievalHit> ordered;
  if (candidates.empty()) {
    detail = "no candidates";
    return ordered;
  }
  try {
    auto outcome = r.gateway().rerank(query, std::move(candidates));
    std::map<std::string, RetrievalHit> by_id;
    for (auto& h : hits) by_id.emplace(h.chunk_id, h);
    for (const auto& c : outcome.candidates) ordered.push_back(by_id.at(c.chunk_id));
    detail = with_warnings(std::to_string(ordered.size()) + " candidates reranked, top " +
                               (ordered.empty() ? std::string("-") : ordered.front().chunk_id),
                           outcome.warnings);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::budget_exceeded || e.code() == ErrorCode::script_exhausted) throw;
    ordered = std::move(hits);
    detail = "warning: rerank failed (" + std::string(e.what()) + "); keeping retrieval order";
  }
  if (ordered.size() > r.cfg().top_k) ordered.resize(r.cfg().top_k);
  for (std::size_t i = 0; i < ordered.size(); ++i) ordered[i].rank = i + 1;
  return ordered;
}

void finalize_links(PipelineRun& run, const std::vector<RetrievalHit>& context) {
  run.retrieved_links = ranked_links(context);
  run.retrieved_links_top5.assign(run.retrieved_links.begin(),
                                  run.retrieved_links.begin() +
                                      static_cast<std::ptrdiff_t>(std::min<std::size_t>(5, run.retrieved_links.size())));
}

}  // namespace

PipelineRun run_brag(const std::string& question, const std::vector<ChatTurn>& history, const PipelineConfig& cfg,
                     PipelineDeps deps, std::string run_id) {
  cfg.validate();
  if (trim(question).empty()) throw Error(ErrorCode::invalid_argument, "empty question");
  Runner r(Mode::brag, question, cfg, deps, std::move(run_id), history, 2);

  auto query = r.stage(Stage::reformulate, [&](std::string& detail) {
    auto q = agents::reformulate(r.gateway(), question, history, nullptr);
    detail = with_warnings("search: " + q.search_string + (q.is_continuation ? " (continuation)" : ""), q.warnings);
    return q;
  });

  auto hits = r.stage(Stage::retrieve, [&](std::string& detail) {
    auto h = r.retrieve(r.embed_query(query.search_string), cfg.top_k);
    detail = "k=" + std::to_string(cfg.top_k) + ": " + describe_hits(h);
    return h;
  });

  auto answer = r.stage(Stage::synthesize, [&](std::string& detail) {
    auto a = agents::synthesize(r.gateway(), question, hits, deps.chunks);
    detail = with_warnings(std::to_string(a.citations.size()) + " citation(s)" +
                               (a.insufficient_context ? ", insufficient context" : ""),
                           a.warnings);
    return a;
  });

  r.run().final_answer = std::move(answer);
  finalize_links(r.run(), hits);
  return r.finish();
}

PipelineRun run_arag(const std::string& question, const std::vector<ChatTurn>& history, const PipelineConfig& cfg,
                     PipelineDeps deps, std::string run_id) {
  cfg.validate();
  if (trim(question).empty()) throw Error(ErrorCode::invalid_argument, "empty question");
  Runner r(Mode::arag, question, cfg, deps, std::move(run_id), history,
           cfg.effective_budget(deps.gateway.has_cross_encoder()));
  auto& run = r.run();

  auto intent = r.stage(Stage::intent, [&](std::string& detail) {
    auto res = agents::classify_intent(r.gateway(), question, history);
    detail = with_warnings(std::string(agents::to_string(res.intent)), res.warnings);
    return res.intent;
  });

  if (intent == agents::Intent::summary) {
    run.final_answer = r.stage(Stage::synthesize, [&](std::string& detail) {
      auto a = agents::summarize_history(r.gateway(), question, history);
      detail = with_warnings("history summary over " + std::to_string(history.size()) + " turn(s)", a.warnings);
      return a;
    });
    return r.finish();
  }

  auto query = r.stage(Stage::reformulate, [&](std::string& detail) {
    auto q = agents::reformulate(r.gateway(), question, history, &deps.glossary);
    std::vector<std::string> exp;
    for (const auto& [acr, text] : q.expansions_applied) exp.push_back(acr + "=" + text);
    detail = with_warnings("search: " + q.search_string + (q.is_continuation ? " (continuation)" : "") +
                               (exp.empty() ? "" : "; expansions: " + join(exp, ", ")),
                           q.warnings);
    return q;
  });
  run.acronym_resolutions = query.resolutions;
  const std::string expanded_question = deps.glossary.expand(question).text;

  std::vector<double> query_vec;
  auto first_hits = r.stage(Stage::retrieve, [&](std::string& detail) {
    query_vec = r.embed_query(query.search_string);
    auto h = r.retrieve(query_vec, cfg.top_k);
    detail = "k=" + std::to_string(cfg.top_k) + ": " + describe_hits(h);
    if (h.empty() || h.front().score < cfg.low_retrieval_score) detail += "; low initial retrieval";
    return h;
  });

  std::vector<Attempt> attempts;
  auto attempt = [&](std::vector<RetrievalHit> context) {
    auto answer = r.stage(Stage::synthesize, [&](std::string& detail) {
      auto a = agents::synthesize(r.gateway(), expanded_question, context, deps.chunks);
      detail = with_warnings(std::to_string(a.citations.size()) + " citation(s)" +
                                 (a.insufficient_context ? ", insufficient context" : ""),
                             a.warnings);
      return a;
    });
    auto qa = r.stage(Stage::assess, [&](std::string& detail) {
      auto q = agents::assess(r.gateway(), expanded_question, answer, context, deps.chunks);
      detail = with_warnings("score=" + std::to_string(q.score) + " threshold=" + std::to_string(cfg.qa_threshold),
                             q.warnings);
      return q;
    });
    attempts.push_back({std::move(answer), std::move(qa), std::move(context)});
    return attempts.back().assessment.score >= cfg.qa_threshold;
  };

  auto conclude = [&](const Attempt& a) {
    run.final_answer = a.answer;
    run.final_score = a.assessment;
    finalize_links(run, a.context);
    return r.finish();
  };

  if (attempt(first_hits)) return conclude(attempts.back());

  if (cfg.max_refinements >= 1) {
    auto subs = r.stage(Stage::subquery, [&](std::string& detail) {
      auto s = agents::generate_subqueries(r.gateway(), expanded_question, first_hits, deps.chunks);
      detail = join(s.sub_queries, " || ");
      return s;
    });

    auto union_hits = r.stage(Stage::retrieve, [&](std::string& detail) {
      std::vector<std::vector<RetrievalHit>> per_query(subs.sub_queries.size());
      parallel_for(subs.sub_queries.size(), r.gateway().options().llm_parallelism, [&](std::size_t i) {
        per_query[i] = r.retrieve(r.embed_query(subs.sub_queries[i]), cfg.top_k);
      });
      std::map<std::string, RetrievalHit> best;
      for (const auto& h : first_hits) best.emplace(h.chunk_id, h);
      std::vector<std::string> parts;
      for (std::size_t i = 0; i < per_query.size(); ++i) {
        parts.push_back("\"" + subs.sub_queries[i] + "\": " + describe_hits(per_query[i]));
        for (const auto& h : per_query[i]) {
          auto [it, inserted] = best.emplace(h.chunk_id, h);
          if (!inserted && h.score > it->second.score) it->second = h;
        }
      }
      std::vector<RetrievalHit> merged;
      for (auto& [id, h] : best) merged.push_back(h);
      std::sort(merged.begin(), merged.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        return hit_order(a.score, a.chunk_id, b.score, b.chunk_id);
      });
      for (std::size_t i = 0; i < merged.size(); ++i) merged[i].rank = i + 1;
      detail = "k=" + std::to_string(cfg.top_k) + " per sub-query; " + join(parts, "; ") + "; union " +
               std::to_string(merged.size());
      return merged;
    });

    auto context = r.stage(Stage::rerank, [&](std::string& detail) {
      return rerank_hits(r, expanded_question, union_hits, detail);
    });
    run.refinements_used = 1;
    if (attempt(std::move(context))) return conclude(attempts.back());
  }

  if (cfg.max_refinements >= 2) {
    const std::size_t wide_k = cfg.top_k * cfg.broad_sweep_multiplier;
    auto wide = r.stage(Stage::broad_sweep, [&](std::string& detail) {
      auto h = r.retrieve(query_vec, wide_k);
      detail = "k=" + std::to_string(wide_k) + ": " + describe_hits(h);
      return h;
    });
    auto context = r.stage(Stage::rerank, [&](std::string& detail) {
      return rerank_hits(r, expanded_question, wide, detail);
    });
    run.refinements_used = 2;
    if (attempt(std::move(context))) return conclude(attempts.back());
  }

  // No attempt reached the threshold: return the earliest best-scoring one,
  // flagged as uncertain.
  std::size_t best = 0;
  for (std::size_t i = 1; i < attempts.size(); ++i)
    if (attempts[i].assessment.score > attempts[best].assessment.score) best = i;
  r.stage(Stage::fallback, [&](std::string& detail) {
    detail = "best attempt " + std::to_string(best + 1) + " of " + std::to_string(attempts.size()) +
             " score=" + std::to_string(attempts[best].assessment.score) + " below threshold " +
             std::to_string(cfg.qa_threshold);
  });
  Attempt chosen = attempts[best];
  chosen.answer.text += "\n\n" + std::string(kUncertaintyNotice);
  return conclude(chosen);
}

PipelineRun run_pipeline(const std::string& question, const std::vector<ChatTurn>& history,
                         const PipelineConfig& cfg, PipelineDeps deps, std::string run_id) {
  return cfg.mode == Mode::brag ? run_brag(question, history, cfg, deps, std::move(run_id))
                                : run_arag(question, history, cfg, deps, std::move(run_id));
}

}  // namespace rag
