#pragma once

#include <cmath>

#include "shad/model.hpp"

namespace shad {

/// Adam moments over the flat parameter buffer.
template <typename Scalar>
class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(const ModelDims& dims, Options options) : options_(options) {
    m_ = ColVec<Scalar>::Zero(parameter_count(dims));
    v_ = ColVec<Scalar>::Zero(parameter_count(dims));
  }
  explicit Adam(const ModelDims& dims) : Adam(dims, Options{}) {}

  void step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, double learning_rate) {
    ++t_;
    const auto b1 = static_cast<Scalar>(options_.beta1);
    const auto b2 = static_cast<Scalar>(options_.beta2);
    m_ = b1 * m_ + (Scalar(1) - b1) * grads.values;
    v_ = b2 * v_ + (Scalar(1) - b2) * grads.values.cwiseAbs2();
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    const auto step_size = static_cast<Scalar>(learning_rate / c1);
    const auto eps = static_cast<Scalar>(options_.eps);
    const auto inv_sqrt_c2 = static_cast<Scalar>(1.0 / std::sqrt(c2));
    params.values.array() -= step_size * m_.array() / ((v_.array().sqrt() * inv_sqrt_c2) + eps);
  }

  long steps() const { return t_; }

 private:
  Options options_;
  ColVec<Scalar> m_, v_;
  long t_ = 0;
};

}  // namespace shad
