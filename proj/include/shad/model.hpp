#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shad/rng.hpp"
#include "shad/tokenizer.hpp"

namespace shad {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using ColVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Architecture fingerprint of the decoder-only model.
struct ModelDims {
  int vocab = 0;
  int width = 64;
  int layers = 2;
  int heads = 2;
  int context = 256;

  int ffn() const { return 4 * width; }
  int head_dim() const { return width / heads; }
  std::string describe() const;
  void validate() const;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

enum class TensorKind {
  TokenEmbedding,
  PositionEmbedding,
  Ln1Gain,
  Ln1Bias,
  QkvWeight,
  AttnOutWeight,
  AttnOutBias,
  Ln2Gain,
  Ln2Bias,
  FfnInWeight,
  FfnInBias,
  FfnOutWeight,
  FfnOutBias,
  FinalGain,
  FinalBias,
  UnembedWeight,
  UnembedBias,
};

struct TensorInfo {
  std::string name;
  TensorKind kind;
  int layer;  // -1 for non-layer tensors
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index offset;
};

/// Every tensor in storage order. Weight matrices are (fan_in x fan_out) and
/// applied as `x * W` to row-per-token activations; vectors are 1 x n.
std::vector<TensorInfo> tensor_table(const ModelDims& dims);
Eigen::Index parameter_count(const ModelDims& dims);
const TensorInfo& tensor_info(const ModelDims& dims, TensorKind kind, int layer = -1);

/// All model weights in one contiguous row-major buffer; tensors are views.
/// The same type holds gradients and optimizer moments.
template <typename Scalar>
struct ModelParams {
  ModelDims dims;
  ColVec<Scalar> values;

  static ModelParams zeros(const ModelDims& dims) {
    dims.validate();
    ModelParams p;
    p.dims = dims;
    p.values = ColVec<Scalar>::Zero(parameter_count(dims));
    return p;
  }

  /// N(0, 0.02) embeddings, N(0, 1/fan_in) projections with residual outputs
  /// further scaled by 1/sqrt(2 * layers), unit layer-norm gains, zero biases.
  static ModelParams initialize(const ModelDims& dims, std::uint64_t seed) {
    ModelParams p = zeros(dims);
    Rng rng(seed);
    const double residual_scale = 1.0 / std::sqrt(2.0 * dims.layers);
    for (const auto& t : tensor_table(dims)) {
      Scalar* data = p.values.data() + t.offset;
      const Eigen::Index n = t.rows * t.cols;
      switch (t.kind) {
        case TensorKind::Ln1Gain:
        case TensorKind::Ln2Gain:
        case TensorKind::FinalGain:
          for (Eigen::Index i = 0; i < n; ++i) data[i] = Scalar(1);
          break;
        case TensorKind::Ln1Bias:
        case TensorKind::Ln2Bias:
        case TensorKind::FinalBias:
        case TensorKind::AttnOutBias:
        case TensorKind::FfnInBias:
        case TensorKind::FfnOutBias:
        case TensorKind::UnembedBias:
          break;
        default: {
          double scale = 0.02;
          if (t.kind != TensorKind::TokenEmbedding && t.kind != TensorKind::PositionEmbedding)
            scale = 1.0 / std::sqrt(static_cast<double>(t.rows));
          if (t.kind == TensorKind::AttnOutWeight || t.kind == TensorKind::FfnOutWeight) scale *= residual_scale;
          for (Eigen::Index i = 0; i < n; ++i) data[i] = static_cast<Scalar>(scale * rng.normal());
        }
      }
    }
    return p;
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> p;
    p.dims = dims;
    p.values = values.template cast<Other>();
    return p;
  }

  Eigen::Map<RowMat<Scalar>> tensor(TensorKind kind, int layer = -1) {
    const auto& t = tensor_info(dims, kind, layer);
    return {values.data() + t.offset, t.rows, t.cols};
  }
  Eigen::Map<const RowMat<Scalar>> tensor(TensorKind kind, int layer = -1) const {
    const auto& t = tensor_info(dims, kind, layer);
    return {values.data() + t.offset, t.rows, t.cols};
  }
  Eigen::Map<RowVec<Scalar>> vec(TensorKind kind, int layer = -1) {
    const auto& t = tensor_info(dims, kind, layer);
    return {values.data() + t.offset, t.rows * t.cols};
  }
  Eigen::Map<const RowVec<Scalar>> vec(TensorKind kind, int layer = -1) const {
    const auto& t = tensor_info(dims, kind, layer);
    return {values.data() + t.offset, t.rows * t.cols};
  }

  bool is_finite() const { return values.allFinite(); }
};

namespace detail {

constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
struct LayerNormCache {
  RowMat<Scalar> xhat;
  ColVec<Scalar> rstd;
};

template <typename Scalar, typename In, typename Vec>
RowMat<Scalar> layer_norm(const In& x, const Vec& gain, const Vec& bias, LayerNormCache<Scalar>& cache) {
  const Eigen::Index n = x.cols();
  ColVec<Scalar> mean = x.rowwise().mean();
  cache.xhat = x.colwise() - mean;
  ColVec<Scalar> var = cache.xhat.array().square().rowwise().sum() / Scalar(n);
  cache.rstd = (var.array() + Scalar(kLayerNormEps)).rsqrt();
  cache.xhat.array().colwise() *= cache.rstd.array();
  RowMat<Scalar> y = cache.xhat.array().rowwise() * gain.array();
  y.rowwise() += bias;
  return y;
}

/// Returns d(input); accumulates gain/bias gradients.
template <typename Scalar, typename Vec, typename GradVec>
RowMat<Scalar> layer_norm_backward(const RowMat<Scalar>& dy, const LayerNormCache<Scalar>& cache, const Vec& gain,
                                   GradVec dgain, GradVec dbias) {
  const Scalar n = Scalar(dy.cols());
  dgain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  RowMat<Scalar> dxhat = dy.array().rowwise() * gain.array();
  ColVec<Scalar> mean_d = dxhat.rowwise().sum() / n;
  ColVec<Scalar> mean_dx = (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix() / n;
  RowMat<Scalar> dx = dxhat.colwise() - mean_d;
  dx -= (cache.xhat.array().colwise() * mean_dx.array()).matrix();
  dx.array().colwise() *= cache.rstd.array();
  return dx;
}

template <typename Scalar>
Scalar gelu(Scalar x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  const Scalar u = Scalar(c) * (x + Scalar(0.044715) * x * x * x);
  return Scalar(0.5) * x * (Scalar(1) + std::tanh(u));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  constexpr double c = 0.7978845608028654;
  const Scalar u = Scalar(c) * (x + Scalar(0.044715) * x * x * x);
  const Scalar th = std::tanh(u);
  const Scalar du = Scalar(c) * (Scalar(1) + Scalar(3 * 0.044715) * x * x);
  return Scalar(0.5) * (Scalar(1) + th) + Scalar(0.5) * x * (Scalar(1) - th * th) * du;
}

}  // namespace detail

/// Activations retained by `forward` for `backward`.
template <typename Scalar>
struct ForwardCache {
  struct Layer {
    detail::LayerNormCache<Scalar> ln1, ln2;
    RowMat<Scalar> attn_in, qkv, heads_out, mlp_in, pre, act;
    std::vector<RowMat<Scalar>> probs;  // per head, T x T, zero above the diagonal
  };

  std::vector<TokenId> ids;
  std::size_t boundary = 0;
  std::vector<Layer> layers;
  detail::LayerNormCache<Scalar> final_ln;
  RowMat<Scalar> final_out;  // rows predicting output tokens
  RowMat<Scalar> probs;      // output-token predictive distributions, n_out x V
  std::vector<double> losses;

  std::size_t output_count() const { return ids.size() - boundary; }
};

class ContextOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the model over input+SEP+output and returns -log P(y_k | x, y_<k) for
/// every output token. Input positions are attended to but never scored.
template <typename Scalar>
const std::vector<double>& forward(const ModelParams<Scalar>& params, const Tokenization& tok,
                                   ForwardCache<Scalar>& cache) {
  const ModelDims& dims = params.dims;
  const auto T = static_cast<Eigen::Index>(tok.ids.size());
  if (T > dims.context)
    throw ContextOverflow("sequence of " + std::to_string(T) + " tokens exceeds context " + std::to_string(dims.context));
  if (tok.boundary == 0 || tok.boundary > tok.ids.size())
    throw std::invalid_argument("tokenization boundary must follow at least one token");
  const int H = dims.heads;
  const int hd = dims.head_dim();
  const int d = dims.width;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(hd));

  cache.ids = tok.ids;
  cache.boundary = tok.boundary;
  cache.layers.resize(static_cast<std::size_t>(dims.layers));

  const auto tok_emb = params.tensor(TensorKind::TokenEmbedding);
  const auto pos_emb = params.tensor(TensorKind::PositionEmbedding);
  RowMat<Scalar> x(T, d);
  for (Eigen::Index t = 0; t < T; ++t) x.row(t) = tok_emb.row(tok.ids[static_cast<std::size_t>(t)]) + pos_emb.row(t);

  for (int l = 0; l < dims.layers; ++l) {
    auto& lc = cache.layers[static_cast<std::size_t>(l)];
    lc.attn_in = detail::layer_norm(x, params.vec(TensorKind::Ln1Gain, l), params.vec(TensorKind::Ln1Bias, l), lc.ln1);
    lc.qkv.noalias() = lc.attn_in * params.tensor(TensorKind::QkvWeight, l);

    lc.heads_out.resize(T, d);
    lc.probs.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      const auto q = lc.qkv.middleCols(h * hd, hd);
      const auto k = lc.qkv.middleCols(d + h * hd, hd);
      const auto v = lc.qkv.middleCols(2 * d + h * hd, hd);
      RowMat<Scalar>& p = lc.probs[static_cast<std::size_t>(h)];
      p.noalias() = (q * k.transpose()) * scale;
      for (Eigen::Index i = 0; i < T; ++i) {
        auto row = p.row(i).head(i + 1);
        const Scalar m = row.maxCoeff();
        row = (row.array() - m).exp();
        row /= row.sum();
        p.row(i).tail(T - i - 1).setZero();
      }
      lc.heads_out.middleCols(h * hd, hd).noalias() = p * v;
    }
    x.noalias() += lc.heads_out * params.tensor(TensorKind::AttnOutWeight, l);
    x.rowwise() += params.vec(TensorKind::AttnOutBias, l);

    lc.mlp_in = detail::layer_norm(x, params.vec(TensorKind::Ln2Gain, l), params.vec(TensorKind::Ln2Bias, l), lc.ln2);
    lc.pre.noalias() = lc.mlp_in * params.tensor(TensorKind::FfnInWeight, l);
    lc.pre.rowwise() += params.vec(TensorKind::FfnInBias, l);
    lc.act = lc.pre.unaryExpr([](Scalar s) { return detail::gelu(s); });
    x.noalias() += lc.act * params.tensor(TensorKind::FfnOutWeight, l);
    x.rowwise() += params.vec(TensorKind::FfnOutBias, l);
  }

  const auto n_out = static_cast<Eigen::Index>(tok.ids.size() - tok.boundary);
  const auto first = static_cast<Eigen::Index>(tok.boundary) - 1;
  cache.final_out = detail::layer_norm(x.middleRows(first, n_out), params.vec(TensorKind::FinalGain),
                                       params.vec(TensorKind::FinalBias), cache.final_ln);
  cache.probs.noalias() = cache.final_out * params.tensor(TensorKind::UnembedWeight);
  cache.probs.rowwise() += params.vec(TensorKind::UnembedBias);

  cache.losses.assign(static_cast<std::size_t>(n_out), 0.0);
  for (Eigen::Index k = 0; k < n_out; ++k) {
    auto row = cache.probs.row(k);
    const Scalar m = row.maxCoeff();
    row = (row.array() - m).exp();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) sum += static_cast<double>(row(j));
    const TokenId target = tok.ids[tok.boundary + static_cast<std::size_t>(k)];
    const double p_target = static_cast<double>(row(target)) / sum;
    row /= static_cast<Scalar>(sum);
    cache.losses[static_cast<std::size_t>(k)] = -std::log(p_target);
  }
  return cache.losses;
}

/// Accumulates the gradient of sum_k coeff[k] * loss_k into `grads`.
template <typename Scalar>
void backward(const ModelParams<Scalar>& params, const ForwardCache<Scalar>& cache, std::span<const double> coeff,
              ModelParams<Scalar>& grads) {
  const ModelDims& dims = params.dims;
  const auto T = static_cast<Eigen::Index>(cache.ids.size());
  const auto n_out = static_cast<Eigen::Index>(cache.output_count());
  if (coeff.size() != static_cast<std::size_t>(n_out)) throw std::invalid_argument("one coefficient per output token");
  const int H = dims.heads;
  const int hd = dims.head_dim();
  const int d = dims.width;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(hd));

  RowMat<Scalar> dlogits = cache.probs;
  for (Eigen::Index k = 0; k < n_out; ++k) {
    dlogits(k, cache.ids[cache.boundary + static_cast<std::size_t>(k)]) -= Scalar(1);
    dlogits.row(k) *= static_cast<Scalar>(coeff[static_cast<std::size_t>(k)]);
  }
  grads.tensor(TensorKind::UnembedWeight).noalias() += cache.final_out.transpose() * dlogits;
  grads.vec(TensorKind::UnembedBias) += dlogits.colwise().sum();
  RowMat<Scalar> dfinal = dlogits * params.tensor(TensorKind::UnembedWeight).transpose();

  RowMat<Scalar> dx = RowMat<Scalar>::Zero(T, d);
  dx.middleRows(static_cast<Eigen::Index>(cache.boundary) - 1, n_out) =
      detail::layer_norm_backward(dfinal, cache.final_ln, params.vec(TensorKind::FinalGain),
                                  grads.vec(TensorKind::FinalGain), grads.vec(TensorKind::FinalBias));

  for (int l = dims.layers - 1; l >= 0; --l) {
    const auto& lc = cache.layers[static_cast<std::size_t>(l)];

    grads.tensor(TensorKind::FfnOutWeight, l).noalias() += lc.act.transpose() * dx;
    grads.vec(TensorKind::FfnOutBias, l) += dx.colwise().sum();
    RowMat<Scalar> dpre = dx * params.tensor(TensorKind::FfnOutWeight, l).transpose();
    dpre.array() *= lc.pre.unaryExpr([](Scalar s) { return detail::gelu_grad(s); }).array();
    grads.tensor(TensorKind::FfnInWeight, l).noalias() += lc.mlp_in.transpose() * dpre;
    grads.vec(TensorKind::FfnInBias, l) += dpre.colwise().sum();
    RowMat<Scalar> dmlp = dpre * params.tensor(TensorKind::FfnInWeight, l).transpose();
    dx += detail::layer_norm_backward(dmlp, lc.ln2, params.vec(TensorKind::Ln2Gain, l),
                                      grads.vec(TensorKind::Ln2Gain, l), grads.vec(TensorKind::Ln2Bias, l));

    grads.tensor(TensorKind::AttnOutWeight, l).noalias() += lc.heads_out.transpose() * dx;
    grads.vec(TensorKind::AttnOutBias, l) += dx.colwise().sum();
    RowMat<Scalar> dheads = dx * params.tensor(TensorKind::AttnOutWeight, l).transpose();

    RowMat<Scalar> dqkv(T, 3 * d);
    for (int h = 0; h < H; ++h) {
      const auto& p = lc.probs[static_cast<std::size_t>(h)];
      const auto q = lc.qkv.middleCols(h * hd, hd);
      const auto k = lc.qkv.middleCols(d + h * hd, hd);
      const auto v = lc.qkv.middleCols(2 * d + h * hd, hd);
      const auto dout = dheads.middleCols(h * hd, hd);
      RowMat<Scalar> dp = dout * v.transpose();
      dqkv.middleCols(2 * d + h * hd, hd).noalias() = p.transpose() * dout;
      ColVec<Scalar> rowdot = (dp.array() * p.array()).rowwise().sum();
      RowMat<Scalar> ds = p.array() * (dp.colwise() - rowdot).array();
      ds *= scale;
      dqkv.middleCols(h * hd, hd).noalias() = ds * k;
      dqkv.middleCols(d + h * hd, hd).noalias() = ds.transpose() * q;
    }
    grads.tensor(TensorKind::QkvWeight, l).noalias() += lc.attn_in.transpose() * dqkv;
    RowMat<Scalar> dattn = dqkv * params.tensor(TensorKind::QkvWeight, l).transpose();
    dx += detail::layer_norm_backward(dattn, lc.ln1, params.vec(TensorKind::Ln1Gain, l),
                                      grads.vec(TensorKind::Ln1Gain, l), grads.vec(TensorKind::Ln1Bias, l));
  }

  auto dtok = grads.tensor(TensorKind::TokenEmbedding);
  auto dpos = grads.tensor(TensorKind::PositionEmbedding);
  for (Eigen::Index t = 0; t < T; ++t) {
    dtok.row(cache.ids[static_cast<std::size_t>(t)]) += dx.row(t);
    dpos.row(t) += dx.row(t);
  }
}

/// Per-output-token negative log-likelihoods; pure function of (params, tok).
template <typename Scalar>
std::vector<double> token_losses(const ModelParams<Scalar>& params, const Tokenization& tok) {
  ForwardCache<Scalar> cache;
  return forward(params, tok, cache);
}

}  // namespace shad
