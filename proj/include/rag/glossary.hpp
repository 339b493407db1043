#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rag {

struct AcronymEntry {
  std::string acronym;
  std::vector<std::string> expansions;
  std::optional<std::string> domain_note;

  bool operator==(const AcronymEntry&) const = default;
};

struct Detection {
  std::string token;
  std::size_t begin = 0;  // byte offsets into the scanned text
  std::size_t end = 0;

  bool operator==(const Detection&) const = default;
};

struct Resolution {
  std::string acronym;
  std::vector<std::string> expansions;  // empty when the acronym is unknown
  bool ambiguous = false;

  bool operator==(const Resolution&) const = default;
};

struct Expansion {
  std::string text;
  std::vector<Resolution> resolutions;
};

/// Mixed-case acronyms recognised in addition to the uppercase pattern.
const std::set<std::string>& default_mixed_case_acronyms();

/// True for 2-8 uppercase letters/digits with at least two letters.
bool matches_uppercase_pattern(std::string_view token);

/// Local acronym glossary. Immutable after construction.
class Glossary {
 public:
  Glossary() : Glossary(std::vector<AcronymEntry>{}) {}
  /// Throws on malformed entries or duplicate acronyms. Mixed-case entries
  /// (e.g. "CVaR") extend the detection exception list.
  explicit Glossary(std::vector<AcronymEntry> entries);

  static Glossary parse(std::string_view jsonl);
  static Glossary load(const std::string& path);
  std::string serialize() const;
  /// Rewrites the file atomically.
  void save(const std::string& path) const;

  /// Returns a new glossary with `entry` added, or merged into the existing
  /// entry for the same acronym.
  Glossary with_entry(const AcronymEntry& entry) const;

  const std::vector<AcronymEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const AcronymEntry* find(std::string_view acronym) const;
  bool is_mixed_case_acronym(std::string_view token) const { return mixed_case_.count(std::string(token)) > 0; }

  /// Acronym-like tokens, left to right, skipping any token already followed
  /// by a parenthesized expansion (and the tokens inside that parenthetical).
  std::vector<Detection> detect(std::string_view text) const;

  /// Appends " (expansion)" after the first occurrence of every known
  /// acronym; ambiguous entries list all candidates joined by " | ".
  /// Acronyms that are already expanded somewhere in the text are left alone,
  /// which makes the operation idempotent.
  Expansion expand(std::string_view text) const;

 private:
  std::vector<AcronymEntry> entries_;
  std::set<std::string> mixed_case_;
};

}  // namespace rag
