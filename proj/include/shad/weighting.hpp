#pragma once

#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shad/corpus.hpp"

namespace shad {

/// Mean per-token loss of each coarse group.
struct GroupLoss {
  double boilerplate = 0.0;  // L_b
  double reasoning = 0.0;    // L_r
  std::size_t n_boilerplate = 0;
  std::size_t n_reasoning = 0;
};

class EmptyGroup : public std::runtime_error {
 public:
  explicit EmptyGroup(CoarseRole group)
      : std::runtime_error("empty " + std::string(to_string(group)) + " group"), group_(group) {}
  CoarseRole group() const { return group_; }

 private:
  CoarseRole group_;
};

/// Throws EmptyGroup if either group has no tokens.
GroupLoss group_losses(std::span<const double> losses, std::span<const CoarseRole> labels);

struct GroupWeights {
  double boilerplate = 0.5;
  double reasoning = 0.5;
};

/// Softmax of (L_b, L_r) / tau. tau may be +infinity (equal weights); tau <= 0
/// throws std::invalid_argument. The weights sum to 1.
GroupWeights rft_weights(double loss_boilerplate, double loss_reasoning, double tau);

/// How group losses combine into the training objective.
class WeightScheme {
 public:
  enum class Variant { SFT, RFT, AlphaFT, Custom };

  static WeightScheme sft() { return WeightScheme(Variant::SFT, 0.0, 0.5, 0.5); }
  /// Throws std::invalid_argument unless tau > 0 (infinity allowed).
  static WeightScheme rft(double tau);
  static WeightScheme rft_inverse(double inv_tau);
  /// Throws std::invalid_argument unless alpha lies in [0, 0.5].
  static WeightScheme alpha_ft(double alpha);
  static WeightScheme custom(double w_boilerplate, double w_reasoning);

  Variant variant() const { return variant_; }
  double tau() const { return tau_; }
  double alpha() const { return w_b_; }
  bool needs_labels() const { return variant_ != Variant::SFT; }

  /// Weights for a batch with these group means (constant for RFT inputs).
  GroupWeights weights(const GroupLoss& gl) const;

  std::string name() const;            // "SFT", "RFT", "AlphaFT", "Custom"
  std::string parameter_text() const;  // tau, alpha, or "w_b/w_r"; empty for SFT

 private:
  WeightScheme(Variant v, double tau, double w_b, double w_r) : variant_(v), tau_(tau), w_b_(w_b), w_r_(w_r) {}

  Variant variant_;
  double tau_;
  double w_b_;
  double w_r_;
};

/// w_b * L_b + w_r * L_r for the weighted variants. SFT is the token mean,
/// (n_b L_b + n_r L_r) / (n_b + n_r).
double weighted_loss(const GroupLoss& gl, const WeightScheme& scheme);

/// Per-token objective coefficients: the gradient of the scheme's batch
/// objective is sum_k coeff[k] * grad(loss_k) with the group weights held
/// constant. An empty group falls back to the token mean and sets `fallback`.
struct BatchObjective {
  std::vector<double> coeff;
  double value = 0.0;
  GroupLoss groups;
  GroupWeights weights;
  bool fallback = false;
};
BatchObjective batch_objective(std::span<const double> losses, std::span<const CoarseRole> labels,
                               const WeightScheme& scheme);

}  // namespace shad
