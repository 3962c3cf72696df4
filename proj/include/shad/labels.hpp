#pragma once

#include <stdexcept>
#include <string_view>
#include <vector>

#include "shad/corpus.hpp"
#include "shad/discriminator.hpp"
#include "shad/regex_labels.hpp"
#include "shad/train.hpp"

namespace shad {

enum class LabelSource { Shad, Regex, GroundTruth };

std::string_view to_string(LabelSource source);
/// Accepts "shad", "regex" and "truth".
LabelSource parse_label_source(std::string_view name);

/// Where group labels come from. `annotations` is required for Shad and
/// `ruleset` for Regex.
struct Labeling {
  LabelSource source = LabelSource::GroundTruth;
  const AnnotatedCorpus* annotations = nullptr;
  const Ruleset* ruleset = nullptr;
};

class LabelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tokenized examples whose `labels` follow `labeling`; `truth` keeps the
/// ground-truth roles when the samples carry spans. Throws LabelError naming
/// the sample when labels are missing or misaligned.
std::vector<Example> labelled_examples(const std::vector<Sample>& samples, const Vocab& vocab,
                                       std::size_t max_length, const Labeling& labeling);

/// Coarse label per output token from regex spans.
std::vector<CoarseRole> regex_token_labels(const Sample& sample, const Tokenization& tok, const Ruleset& ruleset);

TrainResult train_weighted(const ModelParams<float>& base, const Corpus& corpus, const Vocab& vocab,
                           const Labeling& labeling, const WeightScheme& scheme, const TrainConfig& config);

/// Mean loss of ground-truth groups (labels replaced by truth) on held-out samples.
EvalLoss evaluate_truth(const ModelParams<float>& params, const std::vector<Sample>& samples, const Vocab& vocab,
                        std::size_t max_length);

}  // namespace shad
