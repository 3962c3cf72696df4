#include "shad/model.hpp"

namespace shad {

std::string ModelDims::describe() const {
  return "V=" + std::to_string(vocab) + " d=" + std::to_string(width) + " L=" + std::to_string(layers) +
         " H=" + std::to_string(heads) + " C=" + std::to_string(context);
}

void ModelDims::validate() const {
  if (vocab < static_cast<int>(Vocab::kNumSpecials) + 1 || width < 1 || layers < 1 || heads < 1 || context < 2)
    throw std::invalid_argument("invalid model dimensions " + describe());
  if (width % heads != 0) throw std::invalid_argument("width must be divisible by heads: " + describe());
}

namespace {

constexpr int kPerLayer = 11;

std::vector<TensorInfo> build_table(const ModelDims& dims) {
  std::vector<TensorInfo> table;
  Eigen::Index offset = 0;
  auto add = [&](std::string name, TensorKind kind, int layer, Eigen::Index rows, Eigen::Index cols) {
    table.push_back({std::move(name), kind, layer, rows, cols, offset});
    offset += rows * cols;
  };
  const Eigen::Index V = dims.vocab, d = dims.width, C = dims.context, F = dims.ffn();
  add("token_embedding", TensorKind::TokenEmbedding, -1, V, d);
  add("position_embedding", TensorKind::PositionEmbedding, -1, C, d);
  for (int l = 0; l < dims.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "ln1.gain", TensorKind::Ln1Gain, l, 1, d);
    add(p + "ln1.bias", TensorKind::Ln1Bias, l, 1, d);
    add(p + "attn.qkv.weight", TensorKind::QkvWeight, l, d, 3 * d);
    add(p + "attn.out.weight", TensorKind::AttnOutWeight, l, d, d);
    add(p + "attn.out.bias", TensorKind::AttnOutBias, l, 1, d);
    add(p + "ln2.gain", TensorKind::Ln2Gain, l, 1, d);
    add(p + "ln2.bias", TensorKind::Ln2Bias, l, 1, d);
    add(p + "ffn.in.weight", TensorKind::FfnInWeight, l, d, F);
    add(p + "ffn.in.bias", TensorKind::FfnInBias, l, 1, F);
    add(p + "ffn.out.weight", TensorKind::FfnOutWeight, l, F, d);
    add(p + "ffn.out.bias", TensorKind::FfnOutBias, l, 1, d);
  }
  add("final.gain", TensorKind::FinalGain, -1, 1, d);
  add("final.bias", TensorKind::FinalBias, -1, 1, d);
  add("unembed.weight", TensorKind::UnembedWeight, -1, d, V);
  add("unembed.bias", TensorKind::UnembedBias, -1, 1, V);
  return table;
}

const std::vector<TensorInfo>& cached_table(const ModelDims& dims) {
  thread_local ModelDims cached_dims{};
  thread_local std::vector<TensorInfo> table;
  if (table.empty() || !(cached_dims == dims)) {
    table = build_table(dims);
    cached_dims = dims;
  }
  return table;
}

}  // namespace

std::vector<TensorInfo> tensor_table(const ModelDims& dims) { return build_table(dims); }

Eigen::Index parameter_count(const ModelDims& dims) {
  const auto& t = cached_table(dims).back();
  return t.offset + t.rows * t.cols;
}

const TensorInfo& tensor_info(const ModelDims& dims, TensorKind kind, int layer) {
  const auto& table = cached_table(dims);
  const int k = static_cast<int>(kind);
  std::size_t index = 0;
  if (kind == TensorKind::TokenEmbedding || kind == TensorKind::PositionEmbedding) {
    index = static_cast<std::size_t>(k);
  } else if (kind >= TensorKind::FinalGain) {
    index = static_cast<std::size_t>(2 + dims.layers * kPerLayer + (k - static_cast<int>(TensorKind::FinalGain)));
  } else {
    if (layer < 0 || layer >= dims.layers) throw std::out_of_range("layer index out of range");
    index = static_cast<std::size_t>(2 + layer * kPerLayer + (k - static_cast<int>(TensorKind::Ln1Gain)));
  }
  return table[index];
}

}  // namespace shad
