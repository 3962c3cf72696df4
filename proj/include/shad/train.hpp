#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shad/corpus.hpp"
#include "shad/model.hpp"
#include "shad/tokenizer.hpp"
#include "shad/weighting.hpp"

namespace shad {

struct TrainConfig {
  double learning_rate = 3e-4;
  double warmup_fraction = 0.05;
  /// Learning rate at the last step as a fraction of the peak (linear decay after warmup).
  double final_lr_fraction = 1.0;
  int epochs = 1;
  /// Optional cap on optimizer steps; 0 means epochs * batches.
  long max_steps = 0;
  std::size_t batch_size = 16;
  std::size_t max_sequence_length = 256;
  std::uint64_t seed = 1;
  /// Training runs in 32-bit floats with 64-bit loss sums; gradient checks use 64-bit throughout.
  std::string accumulation = "float32 weights, float64 loss sums";
  double grad_clip = 1.0;
  long log_every = 10;

  void validate() const;
};

/// A tokenized training sequence with optional per-output-token group labels.
struct Example {
  std::string id;
  Tokenization tok;
  std::vector<CoarseRole> labels;
  std::vector<RoleKind> truth;  // fine ground truth when the sample carries spans
};

struct HistoryRow {
  long step = 0;
  std::string split;  // "train" or "eval"
  std::string group;  // "all", "boilerplate", "reasoning"
  double mean_loss = 0.0;
  double w_b = 0.0;
  double w_r = 0.0;
  double loss_b = 0.0;
  double loss_r = 0.0;
};

struct TrainHistory {
  std::string scheme;
  std::string scheme_parameter;
  std::vector<HistoryRow> rows;
  long steps = 0;
  long fallback_batches = 0;

  /// Columns: step,split,group,mean_loss,w_b,w_r,L_b,L_r,scheme,tau_or_alpha
  std::string to_csv() const;
  static TrainHistory parse_csv(std::string_view text);
  /// Last train-split mean for a group, or NaN.
  double final_loss(std::string_view group, std::string_view split = "train") const;
};

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  ModelParams<float> params;
  TrainHistory history;
};

/// Tokenizes every sample; labels come from ground-truth spans when present.
std::vector<Example> make_examples(const Corpus& corpus, const Vocab& vocab, std::size_t max_length);
std::vector<Example> make_examples(const std::vector<Sample>& samples, const Vocab& vocab, std::size_t max_length);

/// Mini-batch training on output-token losses combined by `scheme`.
/// Labels are required for every non-SFT scheme. Deterministic given
/// config.seed. Throws TrainError on a non-finite loss or parameter.
TrainResult train(const ModelParams<float>& init, const std::vector<Example>& examples, const TrainConfig& config,
                  const WeightScheme& scheme = WeightScheme::sft());

/// Convenience overload over a corpus.
TrainResult train(const ModelParams<float>& init, const Corpus& corpus, const Vocab& vocab, const TrainConfig& config,
                  const WeightScheme& scheme = WeightScheme::sft());

/// Mean output-token loss per group over a set of examples (labels optional).
struct EvalLoss {
  double all = 0.0;
  double boilerplate = 0.0;
  double reasoning = 0.0;
  std::size_t n_all = 0;
  std::size_t n_boilerplate = 0;
  std::size_t n_reasoning = 0;
};
EvalLoss evaluate(const ModelParams<float>& params, const std::vector<Example>& examples);

}  // namespace shad
