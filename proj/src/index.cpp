#include "rag/index.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <unordered_set>

#include "rag/common.hpp"
#include "rag/gateway.hpp"

namespace rag {

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

std::vector<double> normalized(std::span<const double> v) {
  double n = l2_norm(v);
  if (!std::isfinite(n)) throw Error(ErrorCode::invalid_argument, "vector has non-finite components");
  if (n == 0.0) throw Error(ErrorCode::invalid_argument, "undefined similarity: zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::invalid_argument, "dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                                 std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::invalid_argument, "undefined similarity: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

bool hit_order(double score_a, const std::string& id_a, double score_b, const std::string& id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

VectorIndex VectorIndex::from_entries(std::vector<IndexEntry> entries) {
  VectorIndex index;
  std::unordered_set<std::string> seen;
  for (auto& e : entries) {
    if (!seen.insert(e.chunk_id).second) throw Error(ErrorCode::invalid_argument, "duplicate chunk_id: " + e.chunk_id);
    if (index.dim_ == 0) index.dim_ = e.vector.dim();
    if (e.vector.dim() == 0 || e.vector.dim() != index.dim_)
      throw Error(ErrorCode::invalid_argument, "embedding dimension mismatch for " + e.chunk_id);
    e.vector.values = normalized(e.vector.values);
  }
  index.entries_ = std::move(entries);
  return index;
}

std::vector<RetrievalHit> VectorIndex::search(std::span<const double> query, std::size_t k) const {
  if (k == 0) throw Error(ErrorCode::invalid_argument, "k must be at least 1");
  if (entries_.empty()) return {};
  if (query.size() != dim_)
    throw Error(ErrorCode::invalid_argument, "query dimension " + std::to_string(query.size()) +
                                                 " does not match index dimension " + std::to_string(dim_));
  auto q = normalized(query);

  struct Scored {
    double score;
    std::size_t entry;
  };
  std::vector<Scored> scored(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& v = entries_[i].vector.values;
    double dot = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) dot += v[d] * q[d];
    scored[i] = {std::clamp(dot, -1.0, 1.0), i};
  }

  std::size_t n = std::min(k, scored.size());
  auto cmp = [&](const Scored& a, const Scored& b) {
    return hit_order(a.score, entries_[a.entry].chunk_id, b.score, entries_[b.entry].chunk_id);
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), cmp);

  std::vector<RetrievalHit> hits;
  hits.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& e = entries_[scored[r].entry];
    hits.push_back({e.chunk_id, e.source_link, scored[r].score, r + 1});
  }
  return hits;
}

std::string VectorIndex::serialize() const {
  std::string out;
  nlohmann::ordered_json header;
  header["dim"] = dim_;
  header["count"] = entries_.size();
  header["normalized"] = true;
  out += header.dump();
  out += '\n';
  for (const auto& e : entries_) {
    nlohmann::ordered_json j;
    j["chunk_id"] = e.chunk_id;
    j["source_link"] = e.source_link;
    j["values"] = e.vector.values;
    out += j.dump();
    out += '\n';
  }
  return out;
}

VectorIndex VectorIndex::deserialize(std::string_view content) {
  auto lines = split_lines(content);
  if (lines.empty() || trim(lines[0]).empty()) throw Error(ErrorCode::parse, "index file has no header");
  VectorIndex index;
  try {
    auto header = nlohmann::json::parse(lines[0]);
    index.dim_ = header.at("dim").get<std::size_t>();
    auto count = header.at("count").get<std::size_t>();
    if (!header.at("normalized").get<bool>()) throw Error(ErrorCode::parse, "index vectors are not normalized");
    index.entries_.reserve(count);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      auto j = nlohmann::json::parse(lines[i]);
      IndexEntry e;
      e.chunk_id = j.at("chunk_id").get<std::string>();
      e.source_link = j.value("source_link", e.chunk_id);
      e.vector.values = j.at("values").get<std::vector<double>>();
      if (e.vector.dim() != index.dim_) throw Error(ErrorCode::parse, "entry dimension mismatch: " + e.chunk_id);
      index.entries_.push_back(std::move(e));
    }
    if (index.entries_.size() != count)
      throw Error(ErrorCode::parse, "index header count " + std::to_string(count) + " but " +
                                        std::to_string(index.entries_.size()) + " entries");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("index file: ") + e.what());
  }
  return index;
}

void VectorIndex::save(const std::string& path) const { write_file_atomic(path, serialize()); }

VectorIndex VectorIndex::load(const std::string& path) { return deserialize(read_file(path)); }

VectorIndex build_index(const std::vector<Chunk>& chunks, Gateway& gateway, const IndexBuildOptions& opts) {
  std::unordered_set<std::string> seen;
  for (const auto& c : chunks) {
    if (!seen.insert(c.chunk_id).second) throw Error(ErrorCode::invalid_argument, "duplicate chunk_id: " + c.chunk_id);
    if (trim(c.text).empty()) throw Error(ErrorCode::invalid_argument, "empty chunk: " + c.chunk_id);
  }

  const std::size_t batch = std::max<std::size_t>(1, opts.embed_batch);
  const std::size_t batches = (chunks.size() + batch - 1) / batch;
  std::vector<std::vector<std::vector<double>>> results(batches);
  std::vector<char> failed(batches, 0);  // not vector<bool>: written from several threads

  parallel_for(batches, opts.embed_parallelism, [&](std::size_t b) {
    std::vector<std::string> texts;
    for (std::size_t i = b * batch; i < std::min(chunks.size(), (b + 1) * batch); ++i) texts.push_back(chunks[i].text);
    try {
      results[b] = gateway.embed(texts, opts.embed_retries);
    } catch (const Error&) {
      failed[b] = 1;
    }
  });

  std::vector<std::string> failed_ids;
  for (std::size_t b = 0; b < batches; ++b)
    if (failed[b])
      for (std::size_t i = b * batch; i < std::min(chunks.size(), (b + 1) * batch); ++i)
        failed_ids.push_back(chunks[i].chunk_id);
  if (!failed_ids.empty())
    throw Error(ErrorCode::transport, "embedding failed for chunks: " + join(failed_ids, ", "));

  std::vector<IndexEntry> entries;
  entries.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    auto& vec = results[i / batch][i % batch];
    entries.push_back({chunks[i].chunk_id, chunks[i].source_link, EmbeddingVector{std::move(vec)}});
  }
  return VectorIndex::from_entries(std::move(entries));
}

}  // namespace rag
