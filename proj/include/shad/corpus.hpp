#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace shad {

/// Fine-grained role of a span of assistant output.
enum class RoleKind { Reasoning, Format, TemplateConnecting, Copied };

/// The two groups the discriminator and the weighted objectives work with.
enum class CoarseRole { Reasoning, Boilerplate };

constexpr CoarseRole coarse(RoleKind kind) {
  return kind == RoleKind::Reasoning ? CoarseRole::Reasoning : CoarseRole::Boilerplate;
}

std::string_view to_string(RoleKind kind);
std::string_view to_string(CoarseRole role);
/// Throws std::invalid_argument on an unknown name.
RoleKind parse_role_kind(std::string_view name);
CoarseRole parse_coarse_role(std::string_view name);

struct RoleSpan {
  std::size_t start = 0;  // char offset into output, inclusive
  std::size_t end = 0;    // exclusive
  RoleKind kind = RoleKind::Reasoning;

  friend bool operator==(const RoleSpan&, const RoleSpan&) = default;
};

struct Sample {
  std::string id;
  std::string input;
  std::string output;
  std::optional<std::vector<RoleSpan>> role_spans;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct SyntheticProvenance {
  std::uint64_t seed = 0;
  std::string generator_version;
  friend bool operator==(const SyntheticProvenance&, const SyntheticProvenance&) = default;
};
struct IngestedProvenance {
  std::string path;
  friend bool operator==(const IngestedProvenance&, const IngestedProvenance&) = default;
};
using Provenance = std::variant<SyntheticProvenance, IngestedProvenance>;

struct Corpus {
  std::vector<Sample> samples;
  Provenance provenance = IngestedProvenance{};

  std::size_t size() const { return samples.size(); }
  /// Index of the sample with this id, or npos.
  std::size_t find(std::string_view id) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Inputs of the selected samples re-paired with a derangement of their outputs.
struct ShuffledCorpus {
  std::vector<std::string> base_ids;
  std::vector<std::size_t> permutation;
  std::vector<Sample> samples;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws CorpusError unless spans are sorted, non-overlapping and cover [0, output.size()).
void validate_role_spans(const Sample& sample);
/// Unique ids plus per-sample span validation.
void validate_corpus(const Corpus& corpus);

/// Role of the character at `offset`, if the sample carries spans.
std::optional<RoleKind> role_at(const Sample& sample, std::size_t offset);

std::string to_jsonl(const Corpus& corpus);
std::string to_jsonl(const ShuffledCorpus& shuffled);
void save_jsonl(const Corpus& corpus, const std::filesystem::path& path);
void save_jsonl(const ShuffledCorpus& shuffled, const std::filesystem::path& path);

/// Parses JSONL text; `source` names the origin in the provenance and in errors.
Corpus parse_jsonl(std::string_view text, const std::string& source = "<memory>");
Corpus load_jsonl(const std::filesystem::path& path);
ShuffledCorpus load_shuffled_jsonl(const std::filesystem::path& path);

/// Samples ceil(ratio * N) items uniformly without replacement and pairs each
/// input with the output of a different selected sample (a derangement).
ShuffledCorpus shuffle_outputs(const Corpus& corpus, double ratio, std::uint64_t seed);

}  // namespace shad
