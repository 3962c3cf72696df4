#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "shad/io.hpp"
#include "shad/model.hpp"

namespace shad {

struct GradProbe {
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::vector<GradProbe> probes;
};

/// Gradient of the summed output-token loss; replaceable so tests can inject
/// a corrupted backward pass.
using GradientFn = std::function<ColVec<double>(const ModelParams<double>&, const Tokenization&)>;

inline ColVec<double> summed_loss_gradient(const ModelParams<double>& params, const Tokenization& tok) {
  ForwardCache<double> cache;
  forward(params, tok, cache);
  auto grads = ModelParams<double>::zeros(params.dims);
  std::vector<double> ones(cache.output_count(), 1.0);
  backward(params, cache, ones, grads);
  return grads.values;
}

inline double summed_loss(const ModelParams<double>& params, const Tokenization& tok) {
  double total = 0.0;
  for (double l : token_losses(params, tok)) total += l;
  return total;
}

/// Compares analytic gradients against central differences at `n_probes`
/// parameters (a tensor is drawn uniformly, then an entry within it).
/// Token losses are differenced before summation.
/// Relative error is |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-12).
inline GradCheckResult grad_check_detailed(const ModelParams<double>& params, const Tokenization& tok,
                                           std::size_t n_probes, double epsilon, std::uint64_t seed,
                                           const GradientFn& gradient = summed_loss_gradient) {
  GradCheckResult result;
  if (n_probes == 0) {
    warn("grad_check called with zero probes");
    return result;
  }
  const ColVec<double> analytic = gradient(params, tok);
  const auto table = tensor_table(params.dims);
  Rng rng(seed);
  ModelParams<double> probe = params;
  for (std::size_t i = 0; i < n_probes; ++i) {
    const auto& t = table[rng.below(table.size())];
    const Eigen::Index index = t.offset + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(t.rows * t.cols)));
    const double original = probe.values(index);
    probe.values(index) = original + epsilon;
    const std::vector<double> up = token_losses(probe, tok);
    probe.values(index) = original - epsilon;
    const std::vector<double> down = token_losses(probe, tok);
    probe.values(index) = original;
    double difference = 0.0;
    for (std::size_t k = 0; k < up.size(); ++k) difference += up[k] - down[k];

    GradProbe p;
    p.index = index;
    p.analytic = analytic(index);
    p.numeric = difference / (2.0 * epsilon);
    p.relative_error =
        std::abs(p.analytic - p.numeric) / std::max({std::abs(p.analytic), std::abs(p.numeric), 1e-12});
    result.max_relative_error = std::max(result.max_relative_error, p.relative_error);
    result.probes.push_back(p);
  }
  return result;
}

inline double grad_check(const ModelParams<double>& params, const Tokenization& tok, std::size_t n_probes,
                         double epsilon, std::uint64_t seed = 0) {
  return grad_check_detailed(params, tok, n_probes, epsilon, seed).max_relative_error;
}

}  // namespace shad
