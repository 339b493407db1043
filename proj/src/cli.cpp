#include "rag/cli.hpp"

#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "rag/config.hpp"
#include "rag/evaluation.hpp"
#include "rag/service.hpp"

namespace rag {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::vector<std::string> overrides;
  bool json = false;
};

Settings settings_from(const Globals& g) {
  Settings s = load_settings(g.config.empty() ? std::nullopt : std::optional<std::string>(g.config));
  for (const auto& o : g.overrides) s.apply_override(o);
  s.validate();
  return s;
}

void print_run(std::ostream& out, const PipelineRun& run) {
  out << "answer: " << run.final_answer.text << "\n";
  out << "citations:";
  if (run.final_answer.citations.empty()) out << " (none)";
  out << "\n";
  for (std::size_t i = 0; i < run.final_answer.citations.size(); ++i)
    out << "  [" << i + 1 << "] " << run.final_answer.citations[i] << "\n";
  if (run.final_score) out << "qa_score: " << run.final_score->score << "/10\n";
  out << "top-5 links:\n";
  for (std::size_t i = 0; i < run.retrieved_links_top5.size(); ++i)
    out << "  " << i + 1 << ". " << run.retrieved_links_top5[i] << "\n";
  out << "refinements: " << run.refinements_used << "\n";
  out << "latency_ms: " << run.total_latency_ms << "\n";
  out << "run_id: " << run.run_id << "\n";
}

std::string system_label(Mode m) { return m == Mode::brag ? "B-RAG" : "A-RAG"; }

// --- commands ------------------------------------------------------------------

struct IngestArgs {
  std::string input;
};

int cmd_ingest(const Globals& g, const IngestArgs& a, std::ostream& out, std::ostream& err) {
  Settings s = settings_from(g);
  std::string input = a.input.empty() ? s.paths.corpus_dir : a.input;
  auto build = build_corpus(input, s.chunking, s.gateway.embed_parallelism);
  for (const auto& w : build.warnings) err << "warning: " << w << "\n";
  save_chunk_store(s.paths.chunk_store, build.chunks);
  auto stats_json = stats_to_json(build.stats);
  write_file_atomic(s.paths.stats, stats_json.dump(2) + "\n");
  if (g.json) {
    out << stats_json.dump(2) << "\n";
  } else {
    out << "documents: " << build.stats.doc_count << "\n";
    out << "chunks: " << build.stats.chunk_count << "\n";
    out << "mean chunks/doc: " << eval::round_to(build.stats.mean_chunks_per_doc, 2) << "\n";
    out << "chunk store: " << s.paths.chunk_store << "\n";
  }
  return kExitOk;
}

int cmd_index(const Globals& g, std::ostream& out) {
  Settings s = settings_from(g);
  if (!fs::exists(s.paths.chunk_store))
    throw Error(ErrorCode::not_found, "chunk store not found: " + s.paths.chunk_store + " (run `ragctl ingest` first)");
  auto chunks = load_chunk_store(s.paths.chunk_store);
  auto gateway = make_gateway(s);
  IndexBuildOptions opts;
  opts.embed_batch = s.gateway.embed_batch;
  opts.embed_parallelism = s.gateway.embed_parallelism;
  opts.embed_retries = s.gateway.embed_retries;
  auto index = build_index(chunks, gateway, opts);
  index.save(s.paths.index);
  if (g.json) {
    out << nlohmann::ordered_json{{"count", index.size()}, {"dim", index.dim()}, {"path", s.paths.index}}.dump()
        << "\n";
  } else {
    out << "indexed " << index.size() << " chunks (dim " << index.dim() << ") -> " << s.paths.index << "\n";
  }
  return kExitOk;
}

struct AskArgs {
  std::string question;
  std::string dataset;
  std::string mode;
  std::string script;
  std::string out;
};

int cmd_ask(const Globals& g, const AskArgs& a, std::ostream& out, std::ostream& err) {
  Settings s = settings_from(g);
  if (!a.mode.empty()) s.pipeline.mode = mode_from_string(a.mode);
  auto engine = Engine::open(s, a.script);

  if (!a.question.empty()) {
    PipelineRun run;
    int code = kExitOk;
    try {
      run = run_pipeline(a.question, {}, s.pipeline, engine.deps());
    } catch (const PipelineError& e) {
      run = e.run();
      code = kExitFailure;
      err << "error: " << e.what() << " (run " << run.run_id << ")\n";
    }
    if (!a.out.empty()) RunLog(a.out).append(run);
    if (g.json)
      out << run_to_json(run).dump(2) << "\n";
    else if (code == kExitOk)
      print_run(out, run);
    return code;
  }

  auto items = eval::load_dataset(a.dataset);
  std::string log_path = a.out.empty() ? s.paths.run_log : a.out;
  std::string content;
  std::size_t failures = 0;
  for (const auto& item : items) {
    PipelineRun run;
    try {
      run = run_pipeline(item.question, {}, s.pipeline, engine.deps());
    } catch (const PipelineError& e) {
      run = e.run();
      ++failures;
      err << "error: " << item.id << ": " << e.what() << "\n";
    }
    run.item_id = item.id;
    content += run_to_jsonl(run) + "\n";
    if (!g.json)
      out << item.id << "\t" << run.run_id << "\t" << (run.final_score ? std::to_string(run.final_score->score) : "-")
          << "\t" << run.total_latency_ms << "ms\n";
  }
  if (auto parent = fs::path(log_path).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_file_atomic(log_path, content);
  if (g.json)
    out << nlohmann::ordered_json{{"runs", items.size()}, {"failures", failures}, {"log", log_path}}.dump() << "\n";
  else
    out << items.size() << " runs (" << failures << " failed) -> " << log_path << "\n";
  return failures ? kExitPartial : kExitOk;
}

struct ChatArgs {
  std::string mode;
  std::string script;
};

int cmd_chat(const Globals& g, const ChatArgs& a, std::ostream& out, std::ostream& err, std::istream& in) {
  Settings s = settings_from(g);
  auto engine = Engine::open(s, a.script);
  RunLog log(s.paths.run_log);
  SessionManager sessions(engine, log, s.service.history_turns, s.paths.sessions_dir);
  Mode mode = a.mode.empty() ? s.pipeline.mode : mode_from_string(a.mode);
  auto session = sessions.create_session(mode);
  out << "session " << session.session_id << " (" << to_string(mode)
      << "). Commands: :mode brag|arag, :trace, :quit\n";

  std::string last_run;
  std::string line;
  while (out << "> " << std::flush, std::getline(in, line)) {
    std::string text = trim(line);
    if (text.empty()) continue;
    if (text == ":quit" || text == ":q") break;
    if (text.rfind(":mode", 0) == 0) {
      try {
        mode = mode_from_string(trim(text.substr(5)));
        out << "mode: " << to_string(mode) << "\n";
      } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
      }
      continue;
    }
    if (text == ":trace") {
      if (last_run.empty()) {
        out << "no run yet\n";
        continue;
      }
      for (const auto& ev : sessions.get_trace(last_run).events)
        out << ev.seq << "\t" << to_string(ev.stage) << "\t" << ev.latency_ms << "ms\t" << ev.detail << "\n";
      continue;
    }
    try {
      auto r = sessions.ask(session.session_id, text, mode);
      last_run = r.run_id;
      print_run(out, sessions.get_trace(r.run_id));
    } catch (const AskError& e) {
      last_run = e.run_id();
      err << "error: " << e.what() << " (run " << e.run_id() << ")\n";
    }
  }
  return kExitOk;
}

struct EvalgenArgs {
  std::size_t count = 100;
  std::uint64_t seed = 42;
  std::string out;
  std::string qc_log;
  std::string script;
  bool no_qc = false;
};

// Fisher-Yates with a fixed generator so a seed reproduces the same sample
// on every platform.
std::vector<Chunk> sample_chunks(std::vector<Chunk> chunks, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = chunks.size(); i > 1; --i) std::swap(chunks[i - 1], chunks[rng() % i]);
  if (chunks.size() > count) chunks.resize(count);
  return chunks;
}

std::string verdict_str(eval::Verdict v) {
  switch (v) {
    case eval::Verdict::yes:
      return "yes";
    case eval::Verdict::no:
      return "no";
    default:
      return "unparsable";
  }
}

int cmd_evalgen(const Globals& g, const EvalgenArgs& a, std::ostream& out, std::ostream& err) {
  Settings s = settings_from(g);
  if (!fs::exists(s.paths.chunk_store))
    throw Error(ErrorCode::not_found, "chunk store not found: " + s.paths.chunk_store + " (run `ragctl ingest` first)");
  auto chunks = load_chunk_store(s.paths.chunk_store);
  auto gateway = make_gateway(s, a.script);
  auto sample = sample_chunks(chunks, a.count, a.seed);
  auto gen = eval::generate_eval_items(sample, gateway);
  for (const auto& w : gen.warnings) err << "warning: " << w << "\n";

  std::vector<eval::EvalItem> items = gen.items;
  std::size_t rejected = 0;
  if (!a.no_qc) {
    ChunkLookup lookup(chunks);
    auto qc = eval::qc_filter(gen.items, gateway, lookup);
    for (const auto& w : qc.warnings) err << "warning: " << w << "\n";
    rejected = gen.items.size() - qc.retained.size();
    items = qc.retained;
    if (!a.qc_log.empty()) {
      std::string log;
      for (const auto& r : qc.log) {
        nlohmann::ordered_json j;
        j["item_id"] = r.item_id;
        j["specificity"] = verdict_str(r.specificity);
        j["faithfulness"] = verdict_str(r.faithfulness);
        j["completeness"] = verdict_str(r.completeness);
        j["retained"] = r.retained;
        log += j.dump() + "\n";
      }
      write_file_atomic(a.qc_log, log);
    }
  }
  write_file_atomic(a.out, eval::serialize_dataset(items));
  if (g.json)
    out << nlohmann::ordered_json{{"sampled", sample.size()},
                                  {"generated", gen.items.size()},
                                  {"rejected", rejected},
                                  {"retained", items.size()},
                                  {"out", a.out}}
               .dump()
        << "\n";
  else
    out << "sampled " << sample.size() << ", generated " << gen.items.size() << ", rejected " << rejected
        << ", retained " << items.size() << " -> " << a.out << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string runs;
  std::string dataset;
  std::string overrides;
  std::vector<std::string> scores;
  bool judge = false;
  std::string scores_out;
  std::string script;
  std::size_t k = 5;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  Settings s = settings_from(g);
  auto runs = load_run_log(a.runs);
  auto items = eval::load_dataset(a.dataset);
  std::optional<std::vector<eval::AdjustedOverride>> overrides;
  if (!a.overrides.empty()) overrides = eval::load_overrides(a.overrides);

  std::map<Mode, std::vector<PipelineRun>> by_mode;
  for (auto& r : runs) by_mode[r.mode].push_back(std::move(r));
  if (by_mode.empty()) throw Error(ErrorCode::invalid_argument, "run log is empty: " + a.runs);

  std::vector<eval::JudgeScore> scores;
  for (const auto& f : a.scores) {
    auto loaded = eval::load_judge_scores(f);
    scores.insert(scores.end(), loaded.begin(), loaded.end());
  }

  int code = kExitOk;
  if (a.judge) {
    auto gateway = make_gateway(s, a.script);
    scores.clear();
    for (const auto& [mode, list] : by_mode) {
      auto res = eval::judge(items, list, gateway);
      for (const auto& [id, reason] : res.failures) err << "judge failed for " << id << ": " << reason << "\n";
      if (!res.failures.empty()) code = kExitPartial;
      scores.insert(scores.end(), res.scores.begin(), res.scores.end());
    }
    if (!a.scores_out.empty()) write_file_atomic(a.scores_out, eval::serialize_judge_scores(scores));
  }

  std::vector<eval::EvalReport> reports;
  for (const auto& [mode, list] : by_mode) {
    std::vector<eval::JudgeScore> mine;
    for (const auto& sc : scores)
      if (sc.system == mode) mine.push_back(sc);
    reports.push_back(eval::build_report(system_label(mode), list, items, overrides ? &*overrides : nullptr,
                                         mine.empty() ? nullptr : &mine, a.k));
  }

  if (g.json) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : reports) j.push_back(eval::report_to_json(r));
    out << nlohmann::ordered_json{{"reports", j}}.dump(2) << "\n";
  } else {
    out << eval::render_report(reports);
  }
  return code;
}

struct CompareArgs {
  std::string a;
  std::string b;
  std::string system_a;
  std::string system_b;
  std::string label_a = "A-RAG";
  std::string label_b = "B-RAG";
};

std::vector<eval::JudgeScore> load_scores_for(const std::string& path, const std::string& system) {
  auto all = eval::load_judge_scores(path);
  if (system.empty()) return all;
  Mode m = mode_from_string(system);
  std::vector<eval::JudgeScore> out;
  for (const auto& s : all)
    if (s.system == m) out.push_back(s);
  return out;
}

int cmd_compare(const Globals& g, const CompareArgs& a, std::ostream& out) {
  auto cmp = eval::compare(load_scores_for(a.a, a.system_a), load_scores_for(a.b, a.system_b));
  if (g.json)
    out << eval::comparison_to_json(cmp).dump(2) << "\n";
  else
    out << eval::render_comparison(cmp, a.label_a, a.label_b);
  return kExitOk;
}

struct ServeArgs {
  std::string host;
  int port = -1;
  std::string static_dir;
  std::string script;
};

int cmd_serve(const Globals& g, const ServeArgs& a, std::ostream& out) {
  Settings s = settings_from(g);
  auto engine = Engine::open(s, a.script);
  RunLog log(s.paths.run_log);
  SessionManager sessions(engine, log, s.service.history_turns, s.paths.sessions_dir);
  HttpService service(engine, sessions, a.static_dir.empty() ? s.paths.static_dir : a.static_dir);
  std::string host = a.host.empty() ? s.service.host : a.host;
  int port = a.port < 0 ? s.service.port : a.port;
  out << "serving on " << host << ":" << port << "\n" << std::flush;
  service.listen(host, port);
  return kExitOk;
}

struct GlossaryArgs {
  std::string acronym;
  std::vector<std::string> expansions;
  std::string note;
};

int cmd_glossary_list(const Globals& g, std::ostream& out) {
  Settings s = settings_from(g);
  Glossary glossary = fs::exists(s.paths.glossary) ? Glossary::load(s.paths.glossary) : Glossary{};
  if (g.json) {
    out << glossary.serialize();
    return kExitOk;
  }
  for (const auto& e : glossary.entries()) {
    out << e.acronym << "\t" << join(e.expansions, " | ");
    if (e.domain_note) out << "\t(" << *e.domain_note << ")";
    out << "\n";
  }
  return kExitOk;
}

int cmd_glossary_add(const Globals& g, const GlossaryArgs& a, std::ostream& out) {
  Settings s = settings_from(g);
  Glossary glossary = fs::exists(s.paths.glossary) ? Glossary::load(s.paths.glossary) : Glossary{};
  AcronymEntry entry{a.acronym, a.expansions, a.note.empty() ? std::nullopt : std::optional<std::string>(a.note)};
  auto updated = glossary.with_entry(entry);
  updated.save(s.paths.glossary);
  out << "glossary: " << updated.size() << " entries -> " << s.paths.glossary << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Retrieval-augmented question answering over a local documentation corpus", "ragctl"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("-c,--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Override a setting, e.g. --set pipeline.top_k=8");
  app.add_flag("--json", g.json, "Machine-readable output");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Linearize and chunk the corpus");
  c_ingest->add_option("--input", ingest.input, "Corpus directory (default: paths.corpus_dir)");

  auto* c_index = app.add_subcommand("index", "Embed the chunk store and build the vector index");

  AskArgs ask;
  auto* c_ask = app.add_subcommand("ask", "Answer one question or every item of a dataset");
  auto* o_q = c_ask->add_option("-q,--question", ask.question, "Question text");
  auto* o_ds = c_ask->add_option("--dataset", ask.dataset, "Evaluation dataset (JSONL)")->check(CLI::ExistingFile);
  o_q->excludes(o_ds);
  c_ask->add_option("--mode", ask.mode, "brag or arag")->check(CLI::IsMember({"brag", "arag"}));
  c_ask->add_option("--script", ask.script, "Scripted chat transcript (overrides chat.script)");
  c_ask->add_option("--out", ask.out, "Run log to write (dataset) or append to (question)");

  ChatArgs chat;
  auto* c_chat = app.add_subcommand("chat", "Interactive session in the terminal");
  c_chat->add_option("--mode", chat.mode, "brag or arag")->check(CLI::IsMember({"brag", "arag"}));
  c_chat->add_option("--script", chat.script, "Scripted chat transcript");

  EvalgenArgs evalgen;
  auto* c_evalgen = app.add_subcommand("evalgen", "Generate and filter a synthetic evaluation set");
  c_evalgen->add_option("-n,--count", evalgen.count, "Chunks to sample")->check(CLI::PositiveNumber);
  c_evalgen->add_option("--seed", evalgen.seed, "Sampling seed");
  c_evalgen->add_option("-o,--out", evalgen.out, "Dataset output (JSONL)")->required();
  c_evalgen->add_option("--qc-log", evalgen.qc_log, "Per-item quality-control verdicts (JSONL)");
  c_evalgen->add_option("--script", evalgen.script, "Scripted chat transcript");
  c_evalgen->add_flag("--no-qc", evalgen.no_qc, "Skip the quality-control filter");

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Score a run log against a dataset");
  c_eval->add_option("--runs", evaluate.runs, "Run log (JSONL)")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--dataset", evaluate.dataset, "Dataset (JSONL)")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--overrides", evaluate.overrides, "Accepted alternative links (JSONL)")
      ->check(CLI::ExistingFile);
  auto* o_scores = c_eval->add_option("--scores", evaluate.scores, "Judge scores (JSONL)")->check(CLI::ExistingFile);
  auto* o_judge = c_eval->add_flag("--judge", evaluate.judge, "Score answers with the LLM judge");
  o_judge->excludes(o_scores);
  c_eval->add_option("--scores-out", evaluate.scores_out, "Write judge scores here")->needs(o_judge);
  c_eval->add_option("--script", evaluate.script, "Scripted chat transcript for the judge");
  c_eval->add_option("-k", evaluate.k, "Cutoff for hit and coverage")->check(CLI::PositiveNumber);

  CompareArgs compare;
  auto* c_compare = app.add_subcommand("compare", "Per-question judge score differences");
  c_compare->add_option("--a", compare.a, "Scores of the first system")->required()->check(CLI::ExistingFile);
  c_compare->add_option("--b", compare.b, "Scores of the second system")->required()->check(CLI::ExistingFile);
  c_compare->add_option("--system-a", compare.system_a, "Only rows of this system from --a")
      ->check(CLI::IsMember({"brag", "arag"}));
  c_compare->add_option("--system-b", compare.system_b, "Only rows of this system from --b")
      ->check(CLI::IsMember({"brag", "arag"}));
  c_compare->add_option("--label-a", compare.label_a, "Display name of the first system");
  c_compare->add_option("--label-b", compare.label_b, "Display name of the second system");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP service");
  c_serve->add_option("--host", serve.host, "Bind address (default: service.host)");
  c_serve->add_option("--port", serve.port, "Port (default: service.port)");
  c_serve->add_option("--static", serve.static_dir, "Directory served at /");
  c_serve->add_option("--script", serve.script, "Scripted chat transcript");

  GlossaryArgs gl;
  auto* c_glossary = app.add_subcommand("glossary", "Inspect or extend the acronym glossary");
  c_glossary->require_subcommand(1);
  auto* c_gl_list = c_glossary->add_subcommand("list", "Print all entries");
  auto* c_gl_add = c_glossary->add_subcommand("add", "Add an entry or merge expansions into one");
  c_gl_add->add_option("acronym", gl.acronym, "Acronym")->required();
  c_gl_add->add_option("-e,--expansion", gl.expansions, "Expansion (repeatable)")->required();
  c_gl_add->add_option("--note", gl.note, "Domain note");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_ingest->parsed()) return cmd_ingest(g, ingest, out, err);
    if (c_index->parsed()) return cmd_index(g, out);
    if (c_ask->parsed()) {
      if (ask.dataset.empty() && trim(ask.question).empty()) {
        err << "usage error: ask needs a non-empty --question or a --dataset\n";
        return kExitUsage;
      }
      return cmd_ask(g, ask, out, err);
    }
    if (c_chat->parsed()) return cmd_chat(g, chat, out, err, in);
    if (c_evalgen->parsed()) return cmd_evalgen(g, evalgen, out, err);
    if (c_eval->parsed()) return cmd_evaluate(g, evaluate, out, err);
    if (c_compare->parsed()) return cmd_compare(g, compare, out);
    if (c_serve->parsed()) return cmd_serve(g, serve, out);
    if (c_gl_list->parsed()) return cmd_glossary_list(g, out);
    if (c_gl_add->parsed()) return cmd_glossary_add(g, gl, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::invalid_argument ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace rag
