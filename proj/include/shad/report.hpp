#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shad/discriminator.hpp"
#include "shad/labels.hpp"
#include "shad/train.hpp"

namespace shad {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BucketRate {
  RoleKind bucket = RoleKind::Format;
  std::size_t wrong = 0;
  std::size_t total = 0;

  double rate() const { return total ? static_cast<double>(wrong) / static_cast<double>(total) : 0.0; }
};

/// A token is wrong when its predicted coarse role differs from coarse(truth).
struct Misclassification {
  std::vector<BucketRate> buckets;  // in scope order
  /// Over every scoped bucket except Copied.
  std::size_t coarse_wrong = 0;
  std::size_t coarse_total = 0;

  const BucketRate* bucket(RoleKind kind) const;
  double coarse_rate() const {
    return coarse_total ? static_cast<double>(coarse_wrong) / static_cast<double>(coarse_total) : 0.0;
  }
};

std::vector<RoleKind> all_buckets();

/// Throws ReportError naming the bucket when a scoped bucket has no tokens,
/// or naming the sample when a token lacks a truth label.
Misclassification misclassification_rate(const AnnotatedCorpus& annotated,
                                         const std::vector<RoleKind>& scope = all_buckets());

/// Accuracy of the Format/TemplateConnecting split over truly Format or
/// TemplateConnecting tokens that were predicted boilerplate.
struct ThresholdRow {
  double threshold = 0.0;
  double accuracy = 0.0;
  std::size_t tokens = 0;
};
std::vector<ThresholdRow> format_threshold_sweep(const AnnotatedCorpus& annotated,
                                                 const std::vector<double>& thresholds);

struct CurvePoint {
  long step = 0;
  std::string scheme;  // legend label
  std::string group;
  double loss = 0.0;
};

struct LossCurves {
  std::vector<CurvePoint> rows;

  /// Header `step,scheme,group,loss`.
  std::string csv() const;
  /// Polylines drawn from `rows` only; each carries its data in a
  /// `data-values` attribute using the CSV number formatting.
  std::string svg(const std::string& title = "training loss by token group") const;
};

/// Train-split rows of each history, one series per (scheme, group). Histories
/// on different logging grids are resampled to the coarsest grid by linear
/// interpolation, with a warning. Throws ReportError on an empty list.
LossCurves loss_curves(const std::vector<TrainHistory>& histories);

inline constexpr const char* kSweepMetric = "heldout_reasoning_loss_proxy";

struct SweepRow {
  double inv_tau = 0.0;
  std::optional<double> metric;
  std::string error;
  double final_w_r = 0.0;
};

struct SweepTable {
  std::string metric_name = kSweepMetric;
  std::vector<SweepRow> rows;

  std::string csv() const;
};

using EvalFn = std::function<double(const ModelParams<float>&)>;

/// Held-out mean loss over ground-truth reasoning tokens.
EvalFn heldout_reasoning_loss(const std::vector<Sample>& heldout, const Vocab& vocab, std::size_t max_length);

/// One train_weighted run per 1/tau from `base`; failures are recorded in the
/// row and the sweep continues. Rows are sorted by 1/tau.
SweepTable tau_sweep(const ModelParams<float>& base, const Corpus& corpus, const Vocab& vocab,
                     const Labeling& labeling, const std::vector<double>& inv_taus, const TrainConfig& config,
                     const EvalFn& eval_fn);

struct MetricReport {
  std::string fingerprint;
  std::optional<Misclassification> misclassification;
  std::vector<ThresholdRow> thresholds;
  std::optional<LossCurves> curves;
  std::optional<SweepTable> sweep;

  std::string json() const;
};

}  // namespace shad
