#include "shad/labels.hpp"

namespace shad {

std::string_view to_string(LabelSource source) {
  switch (source) {
    case LabelSource::Shad: return "shad";
    case LabelSource::Regex: return "regex";
    case LabelSource::GroundTruth: return "truth";
  }
  return "?";
}

LabelSource parse_label_source(std::string_view name) {
  if (name == "shad") return LabelSource::Shad;
  if (name == "regex") return LabelSource::Regex;
  if (name == "truth") return LabelSource::GroundTruth;
  throw std::invalid_argument("unknown label source '" + std::string(name) + "' (expected shad, regex or truth)");
}

std::vector<CoarseRole> regex_token_labels(const Sample& sample, const Tokenization& tok, const Ruleset& ruleset) {
  Sample view;
  view.id = sample.id;
  view.output = sample.output;
  view.role_spans = regex_classify(sample.output, ruleset);
  std::vector<CoarseRole> labels;
  for (RoleKind k : output_token_roles(view, tok)) labels.push_back(coarse(k));
  return labels;
}

std::vector<Example> labelled_examples(const std::vector<Sample>& samples, const Vocab& vocab,
                                       std::size_t max_length, const Labeling& labeling) {
  if (labeling.source == LabelSource::Shad && !labeling.annotations)
    throw LabelError("shad labels requested without an annotation");
  if (labeling.source == LabelSource::Regex && !labeling.ruleset)
    throw LabelError("regex labels requested without a ruleset");

  auto examples = make_examples(samples, vocab, max_length);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Example& ex = examples[i];
    switch (labeling.source) {
      case LabelSource::GroundTruth:
        if (ex.labels.size() != ex.tok.output_count())
          throw LabelError("sample " + ex.id + " has no ground-truth role spans");
        break;
      case LabelSource::Regex:
        ex.labels = regex_token_labels(samples[i], ex.tok, *labeling.ruleset);
        break;
      case LabelSource::Shad: {
        const AnnotatedSample* a = labeling.annotations->find(ex.id);
        if (!a) throw LabelError("sample " + ex.id + " is missing from the annotation");
        if (a->tokens.size() != ex.tok.output_count())
          throw LabelError("sample " + ex.id + ": annotation has " + std::to_string(a->tokens.size()) +
                           " tokens, tokenizer produced " + std::to_string(ex.tok.output_count()));
        ex.labels = predicted_labels(*a);
        break;
      }
    }
  }
  return examples;
}

TrainResult train_weighted(const ModelParams<float>& base, const Corpus& corpus, const Vocab& vocab,
                           const Labeling& labeling, const WeightScheme& scheme, const TrainConfig& config) {
  auto examples = labelled_examples(corpus.samples, vocab, config.max_sequence_length, labeling);
  return train(base, examples, config, scheme);
}

EvalLoss evaluate_truth(const ModelParams<float>& params, const std::vector<Sample>& samples, const Vocab& vocab,
                        std::size_t max_length) {
  return evaluate(params, make_examples(samples, vocab, max_length));
}

}  // namespace shad
