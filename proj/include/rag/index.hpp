#pragma once

#include <span>
#include <string>
#include <vector>

#include "rag/corpus.hpp"

namespace rag {

class Gateway;

/// Dense embedding. Stored index vectors are L2-normalized.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
};

struct IndexEntry {
  std::string chunk_id;
  std::string source_link;
  EmbeddingVector vector;
};

struct RetrievalHit {
  std::string chunk_id;
  std::string source_link;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RetrievalHit&) const = default;
};

/// Throws on dimension mismatch or a zero-norm operand.
double cosine(std::span<const double> a, std::span<const double> b);
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return cosine(a.values, b.values); }

double l2_norm(std::span<const double> v);
/// Returns v / |v|. Throws on zero or non-finite input.
std::vector<double> normalized(std::span<const double> v);

/// Ascending-chunk_id tie-break used by every ranked list in the engine.
bool hit_order(double score_a, const std::string& id_a, double score_b, const std::string& id_b);

/// Exact brute-force cosine index. Immutable once built.
class VectorIndex {
 public:
  VectorIndex() = default;

  /// Normalizes every vector; rejects duplicate chunk ids, mixed
  /// dimensions and zero vectors.
  static VectorIndex from_entries(std::vector<IndexEntry> entries);

  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return entries_.empty(); }
  const std::vector<IndexEntry>& entries() const { return entries_; }

  /// Top-min(k, size) hits by cosine score, ties by ascending chunk_id.
  std::vector<RetrievalHit> search(std::span<const double> query, std::size_t k) const;

  std::string serialize() const;
  static VectorIndex deserialize(std::string_view content);
  void save(const std::string& path) const;
  static VectorIndex load(const std::string& path);

 private:
  std::size_t dim_ = 0;
  std::vector<IndexEntry> entries_;
};

struct IndexBuildOptions {
  std::size_t embed_batch = 32;
  std::size_t embed_parallelism = 4;
  std::size_t embed_retries = 2;
};

/// Embeds every chunk through the gateway and builds the index. Batches that
/// still fail after `embed_retries` retries abort the build with an error
/// listing the failed chunk ids.
VectorIndex build_index(const std::vector<Chunk>& chunks, Gateway& gateway, const IndexBuildOptions& opts = {});

}  // namespace rag
