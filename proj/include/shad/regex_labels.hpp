#pragma once

#include <filesystem>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "shad/corpus.hpp"

namespace shad {

/// Named list of (label, pattern) rules for the regular-expression baseline.
/// Characters matched by a Format rule are Format; all others are Reasoning.
class Ruleset {
 public:
  struct Rule {
    RoleKind label;
    std::string pattern;
    std::regex compiled;
  };

  Ruleset() = default;
  Ruleset(std::string name, std::vector<std::pair<RoleKind, std::string>> rules);

  /// Plain text, one rule per line: `<label><TAB><pattern>`. Blank lines and
  /// lines starting with '#' are ignored. Throws std::runtime_error with the
  /// line number on an unknown label or bad pattern.
  static Ruleset parse(std::string_view text, std::string name);
  static Ruleset load(const std::filesystem::path& path);

  /// Structural markers of Thought/Action and JSON tool-call outputs.
  static const Ruleset& agent_format();

  const std::string& name() const { return name_; }
  const std::vector<Rule>& rules() const { return rules_; }
  std::string serialize() const;

 private:
  std::string name_;
  std::vector<Rule> rules_;
};

/// Role spans tiling `output`; empty for an empty string.
std::vector<RoleSpan> regex_classify(std::string_view output, const Ruleset& ruleset);

}  // namespace shad
