#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace rag {

/// Compiled-in copies of prompts/*.txt keyed by file stem.
const std::map<std::string, std::string>& embedded_prompt_templates();

/// Named prompt templates with literal {placeholder} substitution.
class PromptSet {
 public:
  /// The templates shipped in prompts/.
  static PromptSet defaults();
  /// Defaults overlaid with every *.txt found in `dir`.
  static PromptSet from_directory(const std::string& dir);

  const std::string& get(const std::string& name) const;
  bool contains(const std::string& name) const { return templates_.count(name) > 0; }
  void set(const std::string& name, std::string text) { templates_[name] = std::move(text); }

  /// Replaces each "{key}" with its value. Unknown placeholders are left as-is;
  /// substituted text is never rescanned.
  std::string render(const std::string& name, const std::map<std::string, std::string>& vars) const;

 private:
  std::map<std::string, std::string> templates_;
};

std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars);

/// First standalone integer in `reply` if it lies in [lo, hi].
std::optional<int> parse_bounded_integer(std::string_view reply, int lo, int hi);

// Fixed notices surfaced verbatim to users (and keyed on by the chat UI).
inline constexpr std::string_view kInsufficientContextNotice =
    "The retrieved documentation does not contain sufficient information to answer this question.";
inline constexpr std::string_view kUncertaintyNotice =
    "[Low confidence] This answer could not be fully verified against the retrieved documentation; "
    "treat it as provisional.";

}  // namespace rag
