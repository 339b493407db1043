#pragma once

#include <string>
#include <vector>

#include "rag/evaluation.hpp"

namespace rag::fixture {

struct MetricFixture {
  std::vector<PipelineRun> runs;
  std::vector<eval::EvalItem> items;
  std::vector<eval::AdjustedOverride> overrides;
};

inline std::string link(const std::string& kind, std::size_t i) {
  return "https://docs.example.internal/" + kind + "/" + std::to_string(i);
}

inline PipelineRun run_for(const std::string& item_id, std::vector<std::string> links) {
  PipelineRun r;
  r.item_id = item_id;
  r.question = "question " + item_id;
  r.retrieved_links = links;
  if (links.size() > 5) links.resize(5);
  r.retrieved_links_top5 = std::move(links);
  return r;
}

/// `n` items with one link each. The first `strict` runs rank the gold link
/// third; the next `rescued` runs rank only an equivalent page, which is
/// listed as an accepted override.
inline MetricFixture hit_fixture(std::size_t n, std::size_t strict, std::size_t rescued = 0) {
  MetricFixture f;
  for (std::size_t i = 0; i < n; ++i) {
    eval::EvalItem it;
    it.id = "q" + std::to_string(1000 + i);
    it.question = "question " + it.id;
    it.ground_truth_answer = "answer";
    it.ground_truth_links = {link("gold", i)};
    f.items.push_back(it);
    std::vector<std::string> ranked{link("noise", 2 * i), link("noise", 2 * i + 1)};
    if (i < strict) {
      ranked.push_back(link("gold", i));
    } else if (i < strict + rescued) {
      ranked.push_back(link("equivalent", i));
      f.overrides.push_back({it.id, {link("equivalent", i)}, "same procedure, newer page"});
    } else {
      ranked.push_back(link("noise", 5000 + i));
    }
    ranked.push_back(link("noise", 9000 + i));
    ranked.push_back(link("gold", i) + "-archive");
    ranked.push_back(link("gold", i));  // rank 6: outside the top 5
    f.runs.push_back(run_for(it.id, i < strict ? std::vector<std::string>(ranked.begin(), ranked.end() - 1) : ranked));
  }
  return f;
}

struct CategorySplit {
  eval::Category category;
  std::size_t questions;
  std::size_t links;
  std::size_t retrieved;
};

/// Human-benchmark shaped fixture: 17 questions over 33 distinct links.
/// Question q of a category owns links j with j % questions == q; the
/// retrieved links are the first `retrieved` of each category, each returned
/// by its owner's run.
inline MetricFixture coverage_fixture(const std::vector<CategorySplit>& splits) {
  MetricFixture f;
  for (const auto& s : splits) {
    std::string kind(eval::to_string(s.category));
    for (std::size_t q = 0; q < s.questions; ++q) {
      eval::EvalItem it;
      it.id = kind + "-" + std::to_string(q);
      it.question = "question " + it.id;
      it.ground_truth_answer = "answer";
      it.category = s.category;
      std::vector<std::string> ranked;
      for (std::size_t j = q; j < s.links; j += s.questions) {
        it.ground_truth_links.push_back(link(kind, j));
        if (j < s.retrieved) ranked.push_back(link(kind, j));
      }
      while (ranked.size() < 5) ranked.push_back(link("unrelated", f.runs.size() * 5 + ranked.size()));
      f.items.push_back(it);
      f.runs.push_back(run_for(it.id, ranked));
    }
  }
  return f;
}

/// Link counts per category reconstructed from the published percentages.
inline MetricFixture brag_coverage_fixture() {
  return coverage_fixture({{eval::Category::definitional, 9, 19, 14},
                           {eval::Category::procedural, 4, 7, 4},
                           {eval::Category::acronym, 4, 7, 4}});
}

inline MetricFixture arag_coverage_fixture() {
  return coverage_fixture({{eval::Category::definitional, 9, 19, 13},
                           {eval::Category::procedural, 4, 7, 7},
                           {eval::Category::acronym, 4, 7, 3}});
}

/// 100 paired scores: 64 where a wins, 25 ties, 11 where b wins.
inline std::pair<std::vector<eval::JudgeScore>, std::vector<eval::JudgeScore>> paired_scores() {
  std::vector<eval::JudgeScore> a, b;
  for (int i = 0; i < 100; ++i) {
    std::string id = "item-" + std::to_string(100 + i);
    int sb = 3 + i % 5;
    int d = i < 64 ? 1 + i % 3 : i < 89 ? 0 : -(1 + i % 2);
    a.push_back({id, Mode::arag, sb + d, ""});
    b.push_back({id, Mode::brag, sb, ""});
  }
  return {a, b};
}

}  // namespace rag::fixture
