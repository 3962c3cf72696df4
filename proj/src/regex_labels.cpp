#include "shad/regex_labels.hpp"

#include <stdexcept>

#include "shad/io.hpp"

namespace shad {

Ruleset::Ruleset(std::string name, std::vector<std::pair<RoleKind, std::string>> rules) : name_(std::move(name)) {
  for (auto& [label, pattern] : rules) {
    std::regex compiled(pattern, std::regex::ECMAScript);
    rules_.push_back({label, std::move(pattern), std::move(compiled)});
  }
}

Ruleset Ruleset::parse(std::string_view text, std::string name) {
  std::vector<std::pair<RoleKind, std::string>> rules;
  std::size_t pos = 0, line_no = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw std::runtime_error(name + " line " + std::to_string(line_no) + ": expected <label>\\t<pattern>");
    try {
      RoleKind label = parse_role_kind(line.substr(0, tab));
      std::string pattern(line.substr(tab + 1));
      std::regex check(pattern, std::regex::ECMAScript);
      rules.emplace_back(label, std::move(pattern));
    } catch (const std::exception& e) {
      throw std::runtime_error(name + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Ruleset(std::move(name), std::move(rules));
}

Ruleset Ruleset::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.filename().string());
}

const Ruleset& Ruleset::agent_format() {
  static const Ruleset rules("agent-format",
                             {
                                 {RoleKind::Format, R"(\n)"},
                                 {RoleKind::Format, R"(Action Input:|Action:|Thought:|Observation:)"},
                                 {RoleKind::Format, R"("[A-Za-z_][A-Za-z0-9_]*"\s*:)"},
                                 {RoleKind::Format, R"([{}\[\]":])"},
                             });
  return rules;
}

std::string Ruleset::serialize() const {
  std::string out = "# ruleset " + name_ + "\n";
  for (const auto& r : rules_) out += std::string(to_string(r.label)) + "\t" + r.pattern + "\n";
  return out;
}

std::vector<RoleSpan> regex_classify(std::string_view output, const Ruleset& ruleset) {
  std::vector<RoleSpan> spans;
  if (output.empty()) return spans;
  std::vector<RoleKind> chars(output.size(), RoleKind::Reasoning);
  for (const auto& rule : ruleset.rules()) {
    if (rule.label == RoleKind::Reasoning) continue;
    for (std::cregex_iterator it(output.data(), output.data() + output.size(), rule.compiled), end; it != end; ++it) {
      const auto start = static_cast<std::size_t>(it->position());
      const auto len = static_cast<std::size_t>(it->length());
      for (std::size_t i = start; i < start + len; ++i) chars[i] = rule.label;
    }
  }
  for (std::size_t i = 0; i < chars.size(); ++i) {
    if (!spans.empty() && spans.back().kind == chars[i])
      spans.back().end = i + 1;
    else
      spans.push_back({i, i + 1, chars[i]});
  }
  return spans;
}

}  // namespace shad
