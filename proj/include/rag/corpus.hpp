#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

namespace rag {

struct Document {
  std::string doc_id;  // path relative to the corpus root
  std::string title;
  std::string body;    // linearized plain text
  std::string source_link;
};

struct Chunk {
  std::string chunk_id;  // doc_id + "#" + seq
  std::string doc_id;
  std::size_t seq = 0;
  std::string text;
  std::size_t word_count = 0;
  std::string source_link;

  bool operator==(const Chunk&) const = default;
};

struct ChunkingConfig {
  std::size_t target_words = 100;
  std::size_t overlap_words = 20;

  /// Throws rag::Error when target is zero or overlap >= target.
  void validate() const;
};

struct CorpusStats {
  std::size_t doc_count = 0;
  std::size_t chunk_count = 0;
  double mean_chunks_per_doc = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> chunk_length_histogram;
  std::vector<std::pair<std::string, std::size_t>> top_terms;
};

inline constexpr std::size_t kHistogramBucketWords = 10;
inline constexpr std::size_t kTopTermCount = 20;

/// Result of linearizing one markup document.
struct Linearized {
  std::string text;
  std::vector<std::string> warnings;
};

/// Converts the supported markup subset (headings, pipe tables, fenced code,
/// lists, paragraphs) into plain text. Table rows become "h1: c1; h2: c2",
/// code lines become "code: <line>". Idempotent.
Linearized linearize_markup(std::string_view markup);
inline std::string linearize(std::string_view markup) { return linearize_markup(markup).text; }

/// Number of chunks a W-word body yields under `cfg`.
std::size_t expected_chunk_count(std::size_t word_count, const ChunkingConfig& cfg);

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg);

/// Builds a Document from raw markup. The optional first-line directive
/// `<!-- link: ... -->` overrides the source link.
Document make_document(const std::string& doc_id, std::string_view markup,
                       std::vector<std::string>* warnings = nullptr);

CorpusStats corpus_stats(const std::vector<Chunk>& chunks);
double mean_chunks_per_doc(std::size_t chunk_count, std::size_t doc_count);
const std::vector<std::string>& stop_words();

struct CorpusBuild {
  std::vector<Document> documents;
  std::vector<Chunk> chunks;
  CorpusStats stats;
  std::vector<std::string> warnings;
};

/// Ingests every *.md / *.markdown file under `input_dir` (sorted by
/// relative path). Throws ErrorCode::empty_corpus when nothing is readable.
CorpusBuild build_corpus(const std::string& input_dir, const ChunkingConfig& cfg,
                         std::size_t parallelism = 4);

// Chunk store: one JSON record per line, fields in a fixed order.
std::string chunk_to_jsonl(const Chunk& chunk);
std::string serialize_chunk_store(const std::vector<Chunk>& chunks);
std::vector<Chunk> parse_chunk_store(std::string_view content);
void save_chunk_store(const std::string& path, const std::vector<Chunk>& chunks);
std::vector<Chunk> load_chunk_store(const std::string& path);

nlohmann::ordered_json stats_to_json(const CorpusStats& stats);
CorpusStats stats_from_json(const nlohmann::json& j);

/// Read-only id -> chunk lookup shared by agents and the service.
class ChunkLookup {
 public:
  ChunkLookup() = default;
  explicit ChunkLookup(std::vector<Chunk> chunks);

  const Chunk* find(const std::string& chunk_id) const;
  const std::vector<Chunk>& chunks() const { return chunks_; }
  std::size_t size() const { return chunks_.size(); }

 private:
  std::vector<Chunk> chunks_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace rag
