#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shad/corpus.hpp"

namespace shad {

/// A tool family: the vocabulary of functions that serve it, their single
/// argument name, and the vocabularies its task phrases are composed from.
struct Domain {
  std::string name;
  std::string tools;                     // vocabulary name
  std::string param;
  std::string verbs;                     // vocabulary name
  std::vector<std::string> value_parts;  // vocabulary names, joined with spaces
};

/// Synthetic agent-trajectory generator settings.
///
/// Response templates are role-tagged: `<F>`, `<T>`, `<R>` and `<C>` open a
/// Format, TemplateConnecting, Reasoning or Copied segment that runs to the
/// next tag, and `${name}` inserts a slot. The per-step slots `task`, `tool`,
/// `param`, `value` and `verb` are bound from the step's domain; every other
/// slot names a vocabulary and is drawn fresh at each occurrence. The input
/// template sees `tools` and `query`; query templates see `task1` and `task2`.
struct GeneratorConfig {
  std::size_t n_samples = 100;
  std::uint64_t seed = 7;
  double multi_step_ratio = 0.3;
  std::string id_prefix = "syn";
  std::string generator_version = "react-v1";

  std::string input_template;
  std::string single_query_template;
  std::string multi_query_template;
  std::vector<std::string> template_set;
  std::vector<std::string> followup_templates;
  std::string connector;
  std::size_t tools_listed = 3;

  std::map<std::string, std::vector<std::string>> slot_vocabularies;
  std::vector<Domain> domains;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "Thought / Action / Action Input" responses (the target corpus style).
GeneratorConfig react_generator_config(std::size_t n_samples, std::uint64_t seed);
/// Plain-text plans and call lines in several layouts over the same domains,
/// sharing no field names or connecting phrases with the ReAct style; used to
/// pretrain the base model.
GeneratorConfig pretrain_generator_config(std::size_t n_samples, std::uint64_t seed);

/// Throws ConfigError naming the first unresolvable or empty slot.
void validate(const GeneratorConfig& config);

Corpus generate_corpus(const GeneratorConfig& config);

}  // namespace shad
