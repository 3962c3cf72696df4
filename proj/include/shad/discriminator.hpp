#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shad/corpus.hpp"
#include "shad/model.hpp"
#include "shad/tokenizer.hpp"
#include "shad/train.hpp"

namespace shad {

/// One output token scored by both models.
struct TokenRecord {
  std::string sample_id;
  std::size_t k = 0;
  std::string text;
  double l_o = 0.0;
  double l_s = 0.0;
  double ld = 0.0;  // l_s - l_o
  CoarseRole predicted = CoarseRole::Boilerplate;
  std::optional<RoleKind> predicted_fine;
  std::optional<RoleKind> truth;

  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

struct ClassifierOptions {
  /// Tokens with LD <= epsilon count as boilerplate.
  double epsilon = 0.0;
  bool subcategorize = true;
  double format_threshold = 0.1;
};

class ClassifyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Boilerplate iff ld <= epsilon. Throws ClassifyError on NaN.
CoarseRole classify(double ld, double epsilon = 0.0);

/// Format if l_s <= threshold, otherwise TemplateConnecting. Throws
/// ClassifyError on a record predicted Reasoning.
RoleKind subcategorize(const TokenRecord& record, double format_threshold = 0.1);

/// Fine-tunes a copy of `base` on the shuffled samples with the uniform objective.
ModelParams<float> tune_discriminator(const ModelParams<float>& base, const ShuffledCorpus& shuffled,
                                      const Vocab& vocab, const TrainConfig& config);

/// Scores every output token of `sample` under both models. Losses are
/// rounded to 9 significant digits and LD is taken from the rounded values.
std::vector<TokenRecord> loss_diff(const ModelParams<float>& theta_o, const ModelParams<float>& theta_s,
                                   const Sample& sample, const Vocab& vocab, std::size_t max_length,
                                   const ClassifierOptions& options = {});

struct DiscriminatorFingerprint {
  std::uint64_t shuffle_seed = 0;
  double shuffle_ratio = 0.0;
  std::uint64_t tune_seed = 0;
  int tune_epochs = 0;
  double tune_learning_rate = 0.0;
  std::size_t tune_batch_size = 0;
  std::string theta_o_hash;
  std::string theta_s_hash;
  double epsilon = 0.0;
  double format_threshold = 0.0;

  friend bool operator==(const DiscriminatorFingerprint&, const DiscriminatorFingerprint&) = default;
};

struct AnnotatedSample {
  std::string id;
  std::vector<TokenRecord> tokens;

  friend bool operator==(const AnnotatedSample&, const AnnotatedSample&) = default;
};

struct AnnotationFailure {
  std::string id;
  std::string message;
};

struct AnnotatedCorpus {
  std::vector<AnnotatedSample> samples;
  DiscriminatorFingerprint fingerprint;
  std::vector<AnnotationFailure> failures;

  const AnnotatedSample* find(std::string_view id) const;

  /// One line per annotated sample in corpus order.
  std::string to_jsonl() const;
  static AnnotatedCorpus parse_jsonl(std::string_view text);
};

class AnnotationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnnotateOptions {
  std::size_t max_length = 256;
  std::size_t workers = 1;
  ClassifierOptions classifier;
};

/// Scores every sample. Per-sample failures are collected rather than thrown;
/// results are merged in corpus order whatever the worker count. Throws
/// AnnotationError if the two models differ in architecture.
AnnotatedCorpus annotate_corpus(const ModelParams<float>& theta_o, const ModelParams<float>& theta_s,
                                const Corpus& corpus, const Vocab& vocab, const DiscriminatorFingerprint& fingerprint,
                                const AnnotateOptions& options = {});

void save_annotations(const AnnotatedCorpus& annotated, const std::filesystem::path& path);
AnnotatedCorpus load_annotations(const std::filesystem::path& path);

/// Coarse predicted labels per output token, for training with SHAD labels.
std::vector<CoarseRole> predicted_labels(const AnnotatedSample& sample);

}  // namespace shad
