#include "shad/weighting.hpp"

#include <cmath>

#include "shad/io.hpp"

namespace shad {

GroupLoss group_losses(std::span<const double> losses, std::span<const CoarseRole> labels) {
  if (losses.size() != labels.size()) throw std::invalid_argument("losses and labels differ in length");
  GroupLoss gl;
  double sum_b = 0.0, sum_r = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i])) throw std::invalid_argument("non-finite token loss");
    if (labels[i] == CoarseRole::Boilerplate) {
      sum_b += losses[i];
      ++gl.n_boilerplate;
    } else {
      sum_r += losses[i];
      ++gl.n_reasoning;
    }
  }
  if (gl.n_reasoning == 0) throw EmptyGroup(CoarseRole::Reasoning);
  if (gl.n_boilerplate == 0) throw EmptyGroup(CoarseRole::Boilerplate);
  gl.boilerplate = sum_b / static_cast<double>(gl.n_boilerplate);
  gl.reasoning = sum_r / static_cast<double>(gl.n_reasoning);
  return gl;
}

GroupWeights rft_weights(double loss_boilerplate, double loss_reasoning, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature tau must be positive");
  if (!std::isfinite(loss_boilerplate) || !std::isfinite(loss_reasoning))
    throw std::invalid_argument("group losses must be finite");
  // Two-way softmax written as a logistic of the gap; the smaller weight is
  // computed directly so it keeps full relative precision.
  const double gap = std::isinf(tau) ? 0.0 : (loss_reasoning - loss_boilerplate) / tau;
  const double small = 1.0 / (2.0 + std::expm1(std::abs(gap)));
  const double large = 1.0 - small;
  if (gap >= 0.0) return {small, large};
  return {large, small};
}

WeightScheme WeightScheme::rft(double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("RFT temperature tau must be positive");
  return WeightScheme(Variant::RFT, tau, 0.5, 0.5);
}

WeightScheme WeightScheme::rft_inverse(double inv_tau) {
  if (!(inv_tau >= 0.0) || std::isinf(inv_tau)) throw std::invalid_argument("1/tau must be finite and non-negative");
  return rft(inv_tau == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / inv_tau);
}

WeightScheme WeightScheme::alpha_ft(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 0.5)) throw std::invalid_argument("alpha must lie in [0, 0.5]");
  return WeightScheme(Variant::AlphaFT, 0.0, alpha, 1.0 - alpha);
}

WeightScheme WeightScheme::custom(double w_boilerplate, double w_reasoning) {
  if (!std::isfinite(w_boilerplate) || !std::isfinite(w_reasoning) || w_boilerplate < 0.0 || w_reasoning < 0.0)
    throw std::invalid_argument("custom weights must be finite and non-negative");
  return WeightScheme(Variant::Custom, 0.0, w_boilerplate, w_reasoning);
}

GroupWeights WeightScheme::weights(const GroupLoss& gl) const {
  switch (variant_) {
    case Variant::RFT: return rft_weights(gl.boilerplate, gl.reasoning, tau_);
    case Variant::SFT: {
      const double n = static_cast<double>(gl.n_boilerplate + gl.n_reasoning);
      if (n == 0.0) return {0.5, 0.5};
      return {static_cast<double>(gl.n_boilerplate) / n, static_cast<double>(gl.n_reasoning) / n};
    }
    default: return {w_b_, w_r_};
  }
}

std::string WeightScheme::name() const {
  switch (variant_) {
    case Variant::SFT: return "SFT";
    case Variant::RFT: return "RFT";
    case Variant::AlphaFT: return "AlphaFT";
    case Variant::Custom: return "Custom";
  }
  return "?";
}

std::string WeightScheme::parameter_text() const {
  switch (variant_) {
    case Variant::SFT: return "";
    case Variant::RFT: return std::isinf(tau_) ? "inf" : format_sig(tau_, 9);
    case Variant::AlphaFT: return format_sig(w_b_, 9);
    case Variant::Custom: return format_sig(w_b_, 9) + "/" + format_sig(w_r_, 9);
  }
  return "";
}

double weighted_loss(const GroupLoss& gl, const WeightScheme& scheme) {
  const GroupWeights w = scheme.weights(gl);
  return w.boilerplate * gl.boilerplate + w.reasoning * gl.reasoning;
}

BatchObjective batch_objective(std::span<const double> losses, std::span<const CoarseRole> labels,
                               const WeightScheme& scheme) {
  BatchObjective obj;
  const std::size_t n = losses.size();
  obj.coeff.assign(n, 0.0);
  auto token_mean = [&] {
    double sum = 0.0;
    for (double l : losses) sum += l;
    for (auto& c : obj.coeff) c = 1.0 / static_cast<double>(n);
    obj.value = n ? sum / static_cast<double>(n) : 0.0;
  };
  if (n == 0) return obj;

  if (!scheme.needs_labels() && labels.empty()) {
    token_mean();
    obj.groups.n_reasoning = n;
    obj.weights = {0.0, 1.0};
    return obj;
  }
  try {
    obj.groups = group_losses(losses, labels);
  } catch (const EmptyGroup&) {
    // Record whatever the one non-empty group holds, then degrade to SFT.
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == CoarseRole::Boilerplate) {
        obj.groups.boilerplate += losses[i];
        ++obj.groups.n_boilerplate;
      } else {
        obj.groups.reasoning += losses[i];
        ++obj.groups.n_reasoning;
      }
    }
    if (obj.groups.n_boilerplate) obj.groups.boilerplate /= static_cast<double>(obj.groups.n_boilerplate);
    if (obj.groups.n_reasoning) obj.groups.reasoning /= static_cast<double>(obj.groups.n_reasoning);
    token_mean();
    obj.weights = {obj.groups.n_boilerplate ? 1.0 : 0.0, obj.groups.n_reasoning ? 1.0 : 0.0};
    obj.fallback = scheme.needs_labels();
    return obj;
  }
  if (!scheme.needs_labels()) {
    token_mean();
    obj.weights = scheme.weights(obj.groups);
    return obj;
  }
  obj.weights = scheme.weights(obj.groups);
  obj.value = obj.weights.boilerplate * obj.groups.boilerplate + obj.weights.reasoning * obj.groups.reasoning;
  const double cb = obj.weights.boilerplate / static_cast<double>(obj.groups.n_boilerplate);
  const double cr = obj.weights.reasoning / static_cast<double>(obj.groups.n_reasoning);
  for (std::size_t i = 0; i < n; ++i) obj.coeff[i] = labels[i] == CoarseRole::Boilerplate ? cb : cr;
  return obj;
}

}  // namespace shad
