#include "rag/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

#include "rag/common.hpp"

namespace rag {

namespace {

bool is_fence(std::string_view line) {
  auto t = trim(line);
  return t.rfind("```", 0) == 0 || t.rfind("~~~", 0) == 0;
}

// "|---|:--:|" or "--- | ---". At least one pipe and only dashes/colons/spaces
// between pipes, every cell containing a dash.
bool is_table_separator(std::string_view line) {
  auto t = trim(line);
  if (t.find('|') == std::string::npos) return false;
  if (t.front() == '|') t.erase(0, 1);
  if (!t.empty() && t.back() == '|') t.pop_back();
  std::stringstream ss(t);
  std::string cell;
  std::size_t cells = 0;
  while (std::getline(ss, cell, '|')) {
    auto c = trim(cell);
    if (c.empty() || c.find('-') == std::string::npos) return false;
    for (char ch : c)
      if (ch != '-' && ch != ':') return false;
    ++cells;
  }
  return cells > 0;
}

std::vector<std::string> table_cells(std::string_view line) {
  auto t = trim(line);
  if (!t.empty() && t.front() == '|') t.erase(0, 1);
  if (!t.empty() && t.back() == '|') t.pop_back();
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = t.find('|', start);
    cells.push_back(trim(std::string_view(t).substr(start, pos == std::string::npos ? t.npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool is_pipe_line(std::string_view line) {
  auto t = trim(line);
  return !t.empty() && t.front() == '|';
}

// Strips heading markers and bullet markers until the line stops changing.
std::string strip_line_markers(std::string line) {
  static const std::regex heading(R"(^\s{0,3}#{1,6}(\s+|$))");
  static const std::regex closing_hashes(R"(\s+#+\s*$)");
  static const std::regex bullet(R"(^\s*[-*+]\s+)");
  while (true) {
    std::string next = line;
    std::smatch m;
    if (std::regex_search(next, m, heading)) {
      next = m.suffix().str();
      next = std::regex_replace(next, closing_hashes, "");
      if (next.find_first_not_of('#') == std::string::npos) next.clear();
    } else if (std::regex_search(next, m, bullet)) {
      next = m.suffix().str();
    }
    if (next == line) return line;
    line = std::move(next);
  }
}

std::string row_sentence(const std::vector<std::string>& header, const std::vector<std::string>& cells) {
  std::vector<std::string> parts;
  parts.reserve(header.size());
  for (std::size_t c = 0; c < header.size(); ++c)
    parts.push_back(header[c] + ": " + (c < cells.size() ? cells[c] : std::string()));
  return join(parts, "; ");
}

}  // namespace

void ChunkingConfig::validate() const {
  if (target_words == 0) throw Error(ErrorCode::invalid_argument, "target_words must be positive");
  if (overlap_words >= target_words)
    throw Error(ErrorCode::invalid_argument, "overlap_words must be smaller than target_words");
}

Linearized linearize_markup(std::string_view markup) {
  Linearized result;
  auto lines = split_lines(markup);
  std::vector<std::string> out;
  out.reserve(lines.size());

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];

    if (is_fence(line)) {
      ++i;
      for (; i < lines.size() && !is_fence(lines[i]); ++i) out.push_back("code: " + lines[i]);
      if (i >= lines.size()) result.warnings.push_back("unterminated code fence");
      continue;
    }

    if (line.find('|') != std::string::npos && i + 1 < lines.size() && is_table_separator(lines[i + 1]) &&
        !is_table_separator(line)) {
      auto header = table_cells(line);
      i += 2;
      std::size_t row_count = 0;
      for (; i < lines.size() && lines[i].find('|') != std::string::npos && !trim(lines[i]).empty(); ++i) {
        auto cells = table_cells(lines[i]);
        if (cells.size() != header.size()) {
          result.warnings.push_back("table row " + std::to_string(row_count + 1) + " has " +
                                    std::to_string(cells.size()) + " cells, header has " +
                                    std::to_string(header.size()));
        }
        out.push_back(row_sentence(header, cells));
        ++row_count;
      }
      if (row_count == 0) out.push_back(join(header, "; "));
      --i;
      continue;
    }

    if (is_pipe_line(line)) {
      out.push_back(join(table_cells(line), "; "));
      continue;
    }

    out.push_back(strip_line_markers(line));
  }

  result.text = join(out, "\n");
  return result;
}

std::size_t expected_chunk_count(std::size_t word_count, const ChunkingConfig& cfg) {
  if (word_count == 0) return 0;
  std::size_t stride = cfg.target_words - cfg.overlap_words;
  std::size_t span = word_count > cfg.overlap_words ? word_count - cfg.overlap_words : 0;
  return std::max<std::size_t>(1, (span + stride - 1) / stride);
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg) {
  cfg.validate();
  // Single-space joined body plus word offsets; chunk text is a slice of it.
  std::string flat;
  std::vector<std::size_t> starts;
  for (const auto& t : split_whitespace(doc.body)) {
    if (!flat.empty()) flat += ' ';
    starts.push_back(flat.size());
    flat += t;
  }
  std::vector<Chunk> chunks;
  if (starts.empty()) return chunks;
  const std::size_t words = starts.size();
  auto word_end = [&](std::size_t i) { return i + 1 < words ? starts[i + 1] - 1 : flat.size(); };

  const std::size_t stride = cfg.target_words - cfg.overlap_words;
  chunks.reserve(expected_chunk_count(words, cfg));
  for (std::size_t start = 0;; start += stride) {
    std::size_t end = std::min(start + cfg.target_words, words);
    Chunk c;
    c.seq = chunks.size();
    c.doc_id = doc.doc_id;
    c.chunk_id = doc.doc_id + "#" + std::to_string(c.seq);
    c.source_link = doc.source_link;
    c.word_count = end - start;
    c.text = flat.substr(starts[start], word_end(end - 1) - starts[start]);
    chunks.push_back(std::move(c));
    if (end == words) break;
  }
  return chunks;
}

Document make_document(const std::string& doc_id, std::string_view markup, std::vector<std::string>* warnings) {
  static const std::regex link_directive(R"(^\s*<!--\s*link:\s*(.*?)\s*-->\s*$)");
  static const std::regex heading(R"(^\s{0,3}#{1,6}\s+(.*?)\s*#*\s*$)");

  Document doc;
  doc.doc_id = doc_id;
  doc.source_link = doc_id;

  std::string_view rest = markup;
  auto first_nl = markup.find('\n');
  std::string first_line(markup.substr(0, first_nl));
  if (!first_line.empty() && first_line.back() == '\r') first_line.pop_back();
  std::smatch m;
  if (std::regex_match(first_line, m, link_directive)) {
    auto link = trim(m[1].str());
    if (!link.empty()) doc.source_link = link;
    rest = first_nl == std::string_view::npos ? std::string_view() : markup.substr(first_nl + 1);
  }

  for (const auto& line : split_lines(rest)) {
    if (std::regex_match(line, m, heading) && !m[1].str().empty()) {
      doc.title = m[1].str();
      break;
    }
  }
  if (doc.title.empty()) doc.title = std::filesystem::path(doc_id).stem().string();

  auto lin = linearize_markup(rest);
  doc.body = std::move(lin.text);
  if (warnings)
    for (auto& w : lin.warnings) warnings->push_back(doc_id + ": " + w);
  return doc;
}

const std::vector<std::string>& stop_words() {
  // Function words excluded from term statistics. "a" is not among them.
  static const std::vector<std::string> words = {
      "about", "after", "all",   "also",  "an",    "and",   "any",   "are",   "as",    "at",
      "be",    "been",  "but",   "by",    "can",   "code",  "do",    "each",  "for",   "from",
      "has",   "have",  "if",    "in",    "into",  "is",    "it",    "its",   "may",   "more",
      "must",  "no",    "not",   "of",    "on",    "or",    "other", "should","such",  "than",
      "that",  "the",   "their", "then",  "there", "these", "this",  "to",    "was",   "were",
      "when",  "which", "will",  "with",  "would",
  };
  return words;
}

double mean_chunks_per_doc(std::size_t chunk_count, std::size_t doc_count) {
  return doc_count == 0 ? 0.0 : static_cast<double>(chunk_count) / static_cast<double>(doc_count);
}

CorpusStats corpus_stats(const std::vector<Chunk>& chunks) {
  static const std::set<std::string> stops(stop_words().begin(), stop_words().end());

  CorpusStats stats;
  stats.chunk_count = chunks.size();
  std::set<std::string> docs;
  std::map<std::size_t, std::size_t> buckets;
  std::unordered_map<std::string, std::size_t> freq;

  for (const auto& c : chunks) {
    docs.insert(c.doc_id);
    ++buckets[(c.word_count / kHistogramBucketWords) * kHistogramBucketWords];
    for (const auto& tok : split_whitespace(c.text)) {
      std::size_t b = 0, e = tok.size();
      while (b < e && !std::isalnum(static_cast<unsigned char>(tok[b]))) ++b;
      while (e > b && !std::isalnum(static_cast<unsigned char>(tok[e - 1]))) --e;
      if (b == e) continue;
      auto term = to_lower(std::string_view(tok).substr(b, e - b));
      if (stops.count(term)) continue;
      ++freq[term];
    }
  }

  stats.doc_count = docs.size();
  stats.mean_chunks_per_doc = mean_chunks_per_doc(stats.chunk_count, stats.doc_count);
  stats.chunk_length_histogram.assign(buckets.begin(), buckets.end());

  std::vector<std::pair<std::string, std::size_t>> terms(freq.begin(), freq.end());
  auto by_freq = [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  std::size_t keep = std::min(kTopTermCount, terms.size());
  std::partial_sort(terms.begin(), terms.begin() + static_cast<std::ptrdiff_t>(keep), terms.end(), by_freq);
  terms.resize(keep);
  stats.top_terms = std::move(terms);
  return stats;
}

CorpusBuild build_corpus(const std::string& input_dir, const ChunkingConfig& cfg, std::size_t parallelism) {
  namespace fs = std::filesystem;
  cfg.validate();
  CorpusBuild build;

  std::error_code ec;
  if (!fs::is_directory(input_dir, ec))
    throw Error(ErrorCode::not_found, "input directory does not exist: " + input_dir);

  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(input_dir, ec); it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (ec) break;
    if (!it->is_regular_file()) continue;
    auto ext = to_lower(it->path().extension().string());
    if (ext == ".md" || ext == ".markdown") files.push_back(it->path());
  }
  std::vector<std::string> rel(files.size());
  for (std::size_t i = 0; i < files.size(); ++i)
    rel[i] = fs::relative(files[i], input_dir).generic_string();
  std::vector<std::size_t> order(files.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rel[a] < rel[b]; });

  std::vector<std::optional<Document>> docs(files.size());
  std::vector<std::vector<std::string>> warnings(files.size());
  parallel_for(order.size(), parallelism, [&](std::size_t slot) {
    std::size_t i = order[slot];
    try {
      auto markup = read_file(files[i].string());
      docs[slot] = make_document(rel[i], markup, &warnings[slot]);
    } catch (const std::exception& e) {
      warnings[slot].push_back(rel[i] + ": skipped (" + e.what() + ")");
    }
  });

  for (std::size_t slot = 0; slot < docs.size(); ++slot) {
    for (auto& w : warnings[slot]) build.warnings.push_back(std::move(w));
    if (!docs[slot]) continue;
    auto chunks = chunk_document(*docs[slot], cfg);
    for (auto& c : chunks) build.chunks.push_back(std::move(c));
    build.documents.push_back(std::move(*docs[slot]));
  }
  if (build.documents.empty()) throw Error(ErrorCode::empty_corpus, "empty corpus");

  build.stats = corpus_stats(build.chunks);
  build.stats.doc_count = build.documents.size();
  build.stats.mean_chunks_per_doc = mean_chunks_per_doc(build.stats.chunk_count, build.stats.doc_count);
  return build;
}

std::string chunk_to_jsonl(const Chunk& chunk) {
  nlohmann::ordered_json j;
  j["chunk_id"] = chunk.chunk_id;
  j["doc_id"] = chunk.doc_id;
  j["seq"] = chunk.seq;
  j["text"] = chunk.text;
  j["word_count"] = chunk.word_count;
  j["source_link"] = chunk.source_link;
  return j.dump();
}

std::string serialize_chunk_store(const std::vector<Chunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    out += chunk_to_jsonl(c);
    out += '\n';
  }
  return out;
}

std::vector<Chunk> parse_chunk_store(std::string_view content) {
  std::vector<Chunk> chunks;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(content)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Chunk c;
      c.chunk_id = j.at("chunk_id").get<std::string>();
      c.doc_id = j.at("doc_id").get<std::string>();
      c.seq = j.at("seq").get<std::size_t>();
      c.text = j.at("text").get<std::string>();
      c.word_count = j.at("word_count").get<std::size_t>();
      c.source_link = j.at("source_link").get<std::string>();
      chunks.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "chunk store line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return chunks;
}

void save_chunk_store(const std::string& path, const std::vector<Chunk>& chunks) {
  write_file_atomic(path, serialize_chunk_store(chunks));
}

std::vector<Chunk> load_chunk_store(const std::string& path) { return parse_chunk_store(read_file(path)); }

nlohmann::ordered_json stats_to_json(const CorpusStats& stats) {
  nlohmann::ordered_json j;
  j["doc_count"] = stats.doc_count;
  j["chunk_count"] = stats.chunk_count;
  j["mean_chunks_per_doc"] = stats.mean_chunks_per_doc;
  j["chunk_length_histogram"] = nlohmann::ordered_json::array();
  for (auto [lower, count] : stats.chunk_length_histogram)
    j["chunk_length_histogram"].push_back({{"bucket_lower_bound_words", lower}, {"count", count}});
  j["top_terms"] = nlohmann::ordered_json::array();
  for (const auto& [term, count] : stats.top_terms)
    j["top_terms"].push_back({{"term", term}, {"frequency", count}});
  return j;
}

CorpusStats stats_from_json(const nlohmann::json& j) {
  CorpusStats s;
  s.doc_count = j.at("doc_count").get<std::size_t>();
  s.chunk_count = j.at("chunk_count").get<std::size_t>();
  s.mean_chunks_per_doc = j.at("mean_chunks_per_doc").get<double>();
  for (const auto& b : j.at("chunk_length_histogram"))
    s.chunk_length_histogram.emplace_back(b.at("bucket_lower_bound_words").get<std::size_t>(),
                                          b.at("count").get<std::size_t>());
  for (const auto& t : j.at("top_terms"))
    s.top_terms.emplace_back(t.at("term").get<std::string>(), t.at("frequency").get<std::size_t>());
  return s;
}

ChunkLookup::ChunkLookup(std::vector<Chunk> chunks) : chunks_(std::move(chunks)) {
  by_id_.reserve(chunks_.size());
  for (std::size_t i = 0; i < chunks_.size(); ++i) by_id_.emplace(chunks_[i].chunk_id, i);
}

const Chunk* ChunkLookup::find(const std::string& chunk_id) const {
  auto it = by_id_.find(chunk_id);
  return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

}  // namespace rag
