#include "rag/glossary.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "json.hpp"
#include "rag/common.hpp"

namespace rag {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool plausible_acronym(std::string_view token) {
  if (token.size() < 2 || token.size() > 8) return false;
  std::size_t letters = 0;
  for (char c : token) {
    if (!is_alnum(c)) return false;
    if (std::isalpha(static_cast<unsigned char>(c))) ++letters;
  }
  return letters >= 2;
}

// Index just past the ')' matching the '(' at `open`, or text.size().
std::size_t matching_paren_end(std::string_view text, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '(') ++depth;
    if (text[i] == ')' && --depth == 0) return i + 1;
  }
  return text.size();
}

struct Scan {
  std::vector<Detection> detections;
  std::vector<std::string> already_expanded;
};

Scan scan(std::string_view text, const Glossary& glossary) {
  Scan out;
  std::size_t skip_until = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_alnum(text[i])) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    while (i < text.size() && is_alnum(text[i])) ++i;
    if (begin < skip_until) continue;

    std::string_view token = text.substr(begin, i - begin);
    if (!matches_uppercase_pattern(token) && !glossary.is_mixed_case_acronym(token)) continue;

    std::size_t after = i;
    if (after < text.size() && (text[after] == ' ' || text[after] == '\t')) ++after;
    if (after < text.size() && text[after] == '(') {
      out.already_expanded.emplace_back(token);
      skip_until = matching_paren_end(text, after);
      continue;
    }
    out.detections.push_back({std::string(token), begin, i});
  }
  return out;
}

}  // namespace

const std::set<std::string>& default_mixed_case_acronyms() {
  static const std::set<std::string> words = {"CVaR"};
  return words;
}

bool matches_uppercase_pattern(std::string_view token) {
  if (!plausible_acronym(token)) return false;
  return std::none_of(token.begin(), token.end(), [](char c) { return std::islower(static_cast<unsigned char>(c)); });
}

Glossary::Glossary(std::vector<AcronymEntry> entries) : mixed_case_(default_mixed_case_acronyms()) {
  std::set<std::string> seen;
  for (auto& e : entries) {
    e.acronym = trim(e.acronym);
    if (!plausible_acronym(e.acronym))
      throw Error(ErrorCode::invalid_argument, "invalid acronym '" + e.acronym + "': expected 2-8 letters/digits");
    if (!seen.insert(e.acronym).second) throw Error(ErrorCode::invalid_argument, "duplicate acronym: " + e.acronym);
    std::vector<std::string> unique;
    for (auto& x : e.expansions) {
      auto t = trim(x);
      if (t.empty()) continue;
      if (t.find_first_of("()|") != std::string::npos)
        throw Error(ErrorCode::invalid_argument, "expansion for " + e.acronym + " must not contain '(', ')' or '|'");
      if (std::find(unique.begin(), unique.end(), t) == unique.end()) unique.push_back(std::move(t));
    }
    if (unique.empty()) throw Error(ErrorCode::invalid_argument, "acronym " + e.acronym + " has no expansions");
    e.expansions = std::move(unique);
    if (!matches_uppercase_pattern(e.acronym)) mixed_case_.insert(e.acronym);
  }
  entries_ = std::move(entries);
}

Glossary Glossary::parse(std::string_view jsonl) {
  std::vector<AcronymEntry> entries;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(jsonl)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      AcronymEntry e;
      e.acronym = j.at("acronym").get<std::string>();
      e.expansions = j.at("expansions").get<std::vector<std::string>>();
      if (j.contains("domain_note") && !j["domain_note"].is_null()) e.domain_note = j["domain_note"].get<std::string>();
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "glossary line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Glossary(std::move(entries));
}

Glossary Glossary::load(const std::string& path) { return parse(read_file(path)); }

std::string Glossary::serialize() const {
  std::string out;
  for (const auto& e : entries_) {
    nlohmann::ordered_json j;
    j["acronym"] = e.acronym;
    j["expansions"] = e.expansions;
    j["domain_note"] = e.domain_note ? nlohmann::ordered_json(*e.domain_note) : nlohmann::ordered_json(nullptr);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void Glossary::save(const std::string& path) const { write_file_atomic(path, serialize()); }

Glossary Glossary::with_entry(const AcronymEntry& entry) const {
  auto entries = entries_;
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const AcronymEntry& e) { return e.acronym == trim(entry.acronym); });
  if (it == entries.end()) {
    entries.push_back(entry);
  } else {
    for (const auto& x : entry.expansions) it->expansions.push_back(x);
    if (entry.domain_note) it->domain_note = entry.domain_note;
  }
  return Glossary(std::move(entries));
}

const AcronymEntry* Glossary::find(std::string_view acronym) const {
  for (const auto& e : entries_)
    if (e.acronym == acronym) return &e;
  return nullptr;
}

std::vector<Detection> Glossary::detect(std::string_view text) const { return scan(text, *this).detections; }

Expansion Glossary::expand(std::string_view text) const {
  auto s = scan(text, *this);
  std::set<std::string> done(s.already_expanded.begin(), s.already_expanded.end());

  Expansion out;
  std::map<std::string, bool> resolved;
  std::string result;
  std::size_t copied = 0;
  for (const auto& d : s.detections) {
    if (resolved.count(d.token)) continue;
    const auto* entry = find(d.token);
    resolved[d.token] = true;
    if (!entry) {
      out.resolutions.push_back({d.token, {}, false});
      continue;
    }
    bool ambiguous = entry->expansions.size() > 1;
    out.resolutions.push_back({d.token, entry->expansions, ambiguous});
    if (done.count(d.token)) continue;
    result.append(text.substr(copied, d.end - copied));
    result += " (" + join(entry->expansions, " | ") + ")";
    copied = d.end;
  }
  result.append(text.substr(copied));
  out.text = std::move(result);
  return out;
}

}  // namespace rag
