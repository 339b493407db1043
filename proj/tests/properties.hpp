#pragma once

// Randomized property checks shared by the unit tests and the acceptance
// binary. Each returns the number of cases run and the first violation.

#include <algorithm>
#include <chrono>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rag/agents.hpp"
#include "rag/corpus.hpp"
#include "rag/evaluation.hpp"
#include "rag/glossary.hpp"
#include "rag/index.hpp"
#include "support.hpp"

namespace rag::prop {

struct Check {
  bool ok = true;
  std::size_t cases = 0;
  std::string detail;
  double seconds = 0;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Count formula and overlap reconstruction over random (W, target, overlap).
inline Check chunking_algebra(std::uint32_t seed, std::size_t samples) {
  Timer timer;
  Check c;
  constexpr std::size_t kMaxWords = 10000;
  std::string all;
  std::vector<std::size_t> ends;  // ends[w] = length of the first w+1 words
  for (std::size_t i = 0; i < kMaxWords; ++i) {
    all += (i ? " w" : "w") + std::to_string(i);
    ends.push_back(all.size());
  }

  std::mt19937 rng(seed);
  std::uniform_int_distribution<std::size_t> words(1, kMaxWords), target(20, 500);
  for (std::size_t n = 0; n < samples && c.ok; ++n) {
    std::size_t w = words(rng), t = target(rng);
    std::size_t o = std::uniform_int_distribution<std::size_t>(0, t - 1)(rng);
    std::ostringstream where;
    where << "W=" << w << " target=" << t << " overlap=" << o;
    ++c.cases;

    ChunkingConfig cfg{t, o};
    std::size_t expected = oracle::window_count(w, t, o);
    if (expected_chunk_count(w, cfg) != expected) {
      c.fail("count formula: " + where.str());
      break;
    }
    Document doc{"p.md", "p", all.substr(0, ends[w - 1]), "p"};
    auto chunks = chunk_document(doc, cfg);
    if (chunks.size() != expected) {
      c.fail("chunk_document count: " + where.str());
      break;
    }
    // Rebuild the text: all of chunk 0, then each later chunk minus its
    // first `o` words.
    std::string rebuilt;
    for (std::size_t k = 0; k < chunks.size() && c.ok; ++k) {
      std::string_view text = chunks[k].text;
      std::size_t count = text.empty() ? 0 : 1 + static_cast<std::size_t>(std::count(text.begin(), text.end(), ' '));
      if (count > t || count != chunks[k].word_count) c.fail("chunk size: " + where.str());
      if (k == 0) {
        rebuilt.assign(text);
        continue;
      }
      if (count <= o) {
        c.fail("later chunk adds no new words: " + where.str());
        break;
      }
      std::size_t cut = 0;
      for (std::size_t skipped = 0; skipped < o && cut != std::string_view::npos; ++skipped) {
        cut = text.find(' ', cut);
        if (cut != std::string_view::npos) ++cut;
      }
      rebuilt += ' ';
      rebuilt.append(text.substr(cut));
    }
    std::string_view original(all.data(), ends[w - 1]);
    if (c.ok && rebuilt != original) c.fail("reconstruction: " + where.str());
  }
  c.seconds = timer.seconds();
  return c;
}

/// Index search vs an exhaustive long-double scan, including exact ties from
/// duplicated and power-of-two scaled vectors.
inline Check index_exactness(std::uint32_t seed, std::size_t count, std::size_t dim, std::size_t queries,
                             std::size_t k) {
  Timer timer;
  Check c;
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::pair<std::string, std::vector<double>>> raw;
  std::vector<IndexEntry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v(dim);
    if (i % 10 == 9) {
      v = raw[i - 1 - i % 7].second;  // exact copy of an earlier vector
      if (i % 20 == 19)
        for (auto& x : v) x *= 2.0;
    } else {
      for (auto& x : v) x = normal(rng);
      auto u = normalized(v);
      v = u;
    }
    char id[16];
    std::snprintf(id, sizeof id, "c%05zu", (i * 7919) % 100000);
    raw.emplace_back(id, v);
    entries.push_back({id, id, EmbeddingVector{v}});
  }
  auto index = VectorIndex::from_entries(std::move(entries));

  for (std::size_t q = 0; q < queries && c.ok; ++q) {
    ++c.cases;
    std::vector<double> query(dim);
    if (q % 4 == 0) {
      query = raw[(q * 37) % count].second;  // lands on a tie group
    } else {
      for (auto& x : query) x = normal(rng);
    }
    auto got = index.search(query, k);
    auto want = oracle::exhaustive_top_k(raw, query, k);
    if (got.size() != want.size()) {
      c.fail("size mismatch at query " + std::to_string(q));
      break;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].chunk_id != want[i].id || std::abs(got[i].score - static_cast<double>(want[i].score)) > 1e-12 ||
          got[i].rank != i + 1) {
        c.fail("query " + std::to_string(q) + " rank " + std::to_string(i + 1) + ": got " + got[i].chunk_id +
               " want " + want[i].id);
        break;
      }
    }
  }
  c.seconds = timer.seconds();
  return c;
}

/// Top-k is a prefix of top-(k+1), and scaling the query changes nothing.
inline Check index_truncation_and_scaling(std::uint32_t seed) {
  Check c;
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<IndexEntry> entries;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(16);
    for (auto& x : v) x = normal(rng);
    entries.push_back({"c" + std::to_string(i), "", EmbeddingVector{v}});
  }
  auto index = VectorIndex::from_entries(std::move(entries));
  for (int q = 0; q < 50 && c.ok; ++q) {
    ++c.cases;
    std::vector<double> query(16);
    for (auto& x : query) x = normal(rng);
    auto full = index.search(query, 30);
    for (std::size_t k = 1; k < 30 && c.ok; ++k) {
      auto part = index.search(query, k);
      if (!std::equal(part.begin(), part.end(), full.begin())) c.fail("top-" + std::to_string(k) + " not a prefix");
    }
    auto scaled = query;
    for (auto& x : scaled) x *= 8.0;
    auto s = index.search(scaled, 30);
    for (std::size_t i = 0; i < s.size() && c.ok; ++i)
      if (s[i].chunk_id != full[i].chunk_id) c.fail("scaled query reorders results");
  }
  return c;
}

/// expand() is idempotent and only inserts text.
inline Check glossary_idempotence(std::uint32_t seed, std::size_t samples) {
  Check c;
  auto g = test::sample_glossary();
  const std::vector<std::string> vocab{"CMA",  "CVaR", "IRRBB", "the",   "limit", "(",      ")",    "API",
                                       "SEV1", "book", "of",    "rates", "CMA(", "IRRBB,", "cvar", "x"};
  std::mt19937 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), len(1, 14);
  for (std::size_t n = 0; n < samples && c.ok; ++n) {
    ++c.cases;
    std::string text;
    for (std::size_t i = 0, m = len(rng); i < m; ++i) text += (i ? " " : "") + vocab[pick(rng)];
    auto once = g.expand(text).text;
    if (g.expand(once).text != once) c.fail("not idempotent: \"" + text + "\"");
    std::size_t j = 0;
    for (char ch : once)
      if (j < text.size() && text[j] == ch) ++j;
    if (j != text.size()) c.fail("input is not a subsequence of the expansion: \"" + text + "\"");
  }
  auto cma = g.expand("What does CMA cover?");
  ++c.cases;
  if (cma.resolutions.size() != 1 || !cma.resolutions[0].ambiguous || cma.resolutions[0].expansions.size() != 2 ||
      cma.text.find("Consumer Management Application") == std::string::npos ||
      cma.text.find("Cardholder Management Architecture") == std::string::npos)
    c.fail("CMA ambiguity not flagged with both expansions: " + cma.text);
  return c;
}

/// Mean score equals a summation loop; concatenation is the weighted mean.
inline Check mean_score_identities(std::uint32_t seed, std::size_t lists) {
  Check c;
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> score(1, 10), size(1, 120);
  auto make = [&](int n) {
    std::vector<eval::JudgeScore> out;
    for (int i = 0; i < n; ++i) out.push_back({"i" + std::to_string(i), Mode::arag, score(rng), ""});
    return out;
  };
  for (std::size_t n = 0; n < lists && c.ok; ++n) {
    ++c.cases;
    auto a = make(size(rng));
    auto b = make(size(rng));
    long long sum = 0;
    for (const auto& s : a) sum += s.score;
    double expected = static_cast<double>(sum) / static_cast<double>(a.size());
    if (eval::semantic_accuracy(a) != expected) c.fail("mean differs from summation loop");
    auto ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    double weighted = (a.size() * eval::semantic_accuracy(a) + b.size() * eval::semantic_accuracy(b)) /
                      static_cast<double>(a.size() + b.size());
    if (std::abs(eval::semantic_accuracy(ab) - weighted) > 1e-12) c.fail("concatenation identity");
  }
  return c;
}

/// Every parse yields two or three distinct non-empty sub-queries.
inline Check subquery_cardinality(std::uint32_t seed, std::size_t samples) {
  Check c;
  std::mt19937 rng(seed);
  const std::vector<std::string> lines{"", "  ", "1. cvar", "- irrbb shocks", "\"limits\"", "cvar", "Q", "x y z"};
  std::uniform_int_distribution<std::size_t> pick(0, lines.size() - 1), len(0, 7);
  for (std::size_t n = 0; n < samples && c.ok; ++n) {
    ++c.cases;
    std::string reply;
    for (std::size_t i = 0, m = len(rng); i < m; ++i) reply += lines[pick(rng)] + "\n";
    auto s = agents::parse_subqueries(reply, "original question").sub_queries;
    if (s.size() < 2 || s.size() > 3) c.fail("cardinality " + std::to_string(s.size()) + " for reply: " + reply);
    for (const auto& q : s)
      if (trim(q).empty()) c.fail("empty sub-query");
  }
  return c;
}

}  // namespace rag::prop
