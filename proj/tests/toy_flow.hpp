#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "rag/cli.hpp"

namespace rag::test {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult cli(std::vector<std::string> args, const std::string& input = {}) {
  args.insert(args.begin(), "ragctl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  std::istringstream in(input);
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err, in);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// Toy corpus config with every generated file redirected under `work`.
inline std::vector<std::string> toy_args(const std::string& source_dir, const std::string& work) {
  return {"--config", source_dir + "/data/toy/config.json",
          "--set", "paths.chunk_store=" + work + "/chunks.jsonl",
          "--set", "paths.stats=" + work + "/stats.json",
          "--set", "paths.index=" + work + "/index.jsonl",
          "--set", "paths.run_log=" + work + "/runs.jsonl"};
}

inline std::vector<std::string> with(std::vector<std::string> base, std::initializer_list<std::string> more) {
  base.insert(base.end(), more);
  return base;
}

struct ToyFlow {
  std::vector<CliResult> steps;
  std::string report;
  bool ok = true;
};

/// ingest -> index -> ask (A-RAG, whole dataset) -> evaluate with the judge.
inline ToyFlow run_toy_flow(const std::string& source_dir, const std::string& work) {
  auto base = toy_args(source_dir, work);
  std::string toy = source_dir + "/data/toy";
  ToyFlow f;
  f.steps.push_back(cli(with(base, {"ingest"})));
  f.steps.push_back(cli(with(base, {"index"})));
  f.steps.push_back(cli(with(base, {"ask", "--mode", "arag", "--dataset", toy + "/dataset.jsonl", "--script",
                                    toy + "/scripts/arag_dataset.jsonl", "--out", work + "/arag.jsonl"})));
  f.steps.push_back(cli(with(base, {"evaluate", "--runs", work + "/arag.jsonl", "--dataset", toy + "/dataset.jsonl",
                                    "--overrides", toy + "/overrides.jsonl", "--judge", "--script",
                                    toy + "/scripts/judge_arag.jsonl", "--scores-out", work + "/scores.jsonl"})));
  for (const auto& s : f.steps) f.ok = f.ok && s.code == kExitOk;
  f.report = f.steps.back().out;
  return f;
}

}  // namespace rag::test
