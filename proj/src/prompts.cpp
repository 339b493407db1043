#include "rag/prompts.hpp"

#include <cctype>
#include <filesystem>

#include "rag/common.hpp"

namespace rag {

PromptSet PromptSet::defaults() {
  PromptSet set;
  set.templates_ = embedded_prompt_templates();
  return set;
}

PromptSet PromptSet::from_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  auto set = defaults();
  if (!fs::is_directory(dir)) throw Error(ErrorCode::not_found, "prompt directory not found: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    set.templates_[entry.path().stem().string()] = read_file(entry.path().string());
  }
  return set;
}

const std::string& PromptSet::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error(ErrorCode::not_found, "unknown prompt template: " + name);
  return it->second;
}

std::string PromptSet::render(const std::string& name, const std::map<std::string, std::string>& vars) const {
  return substitute(get(name), vars);
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(text.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

std::optional<int> parse_bounded_integer(std::string_view reply, int lo, int hi) {
  auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (std::size_t i = 0; i < reply.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(reply[i]))) continue;
    if (i > 0 && word_char(reply[i - 1])) {
      while (i < reply.size() && word_char(reply[i])) ++i;
      continue;
    }
    std::size_t j = i;
    while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) ++j;
    if (j < reply.size() && word_char(reply[j])) {
      i = j;
      continue;
    }
    // "8.5" is not an integer.
    if (j + 1 < reply.size() && reply[j] == '.' && std::isdigit(static_cast<unsigned char>(reply[j + 1])))
      return std::nullopt;
    if (j - i > 3) return std::nullopt;
    int value = std::stoi(std::string(reply.substr(i, j - i)));
    if (i > 0 && reply[i - 1] == '-') value = -value;
    if (value < lo || value > hi) return std::nullopt;
    return value;
  }
  return std::nullopt;
}

}  // namespace rag
