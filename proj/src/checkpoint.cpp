#include "shad/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "shad/io.hpp"

namespace shad {

namespace {

constexpr char kMagic[8] = {'S', 'H', 'A', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size())
      throw CheckpointError("truncated checkpoint: expected " + std::string(what) + " at byte offset " +
                            std::to_string(pos_) + " (file has " + std::to_string(bytes_.size()) + " bytes)");
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ModelParams<float>& params) {
  std::string out(kMagic, 8);
  put_u32(out, kVersion);
  const ModelDims& d = params.dims;
  for (int v : {d.vocab, d.width, d.layers, d.heads, d.context}) put_u32(out, static_cast<std::uint32_t>(v));
  const auto table = tensor_table(d);
  put_u32(out, static_cast<std::uint32_t>(table.size()));
  for (const auto& t : table) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.rows));
    put_u32(out, static_cast<std::uint32_t>(t.cols));
    out.append(reinterpret_cast<const char*>(params.values.data() + t.offset),
               static_cast<std::size_t>(t.rows * t.cols) * sizeof(float));
  }
  return out;
}

ModelParams<float> decode_checkpoint(std::string_view bytes, const std::optional<ModelDims>& expected) {
  Reader r(bytes);
  if (r.take(8, "magic") != std::string_view(kMagic, 8)) throw CheckpointError("bad checkpoint magic at byte offset 0");
  const std::size_t version_at = r.offset();
  if (r.u32("version") != kVersion)
    throw CheckpointError("unsupported checkpoint version at byte offset " + std::to_string(version_at));
  ModelDims dims;
  dims.vocab = static_cast<int>(r.u32("vocab size"));
  dims.width = static_cast<int>(r.u32("width"));
  dims.layers = static_cast<int>(r.u32("layer count"));
  dims.heads = static_cast<int>(r.u32("head count"));
  dims.context = static_cast<int>(r.u32("context length"));
  if (expected && !(*expected == dims))
    throw CheckpointError("architecture fingerprint mismatch: expected " + expected->describe() + ", found " +
                          dims.describe());
  try {
    dims.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(e.what());
  }

  auto params = ModelParams<float>::zeros(dims);
  const auto table = tensor_table(dims);
  const std::size_t count_at = r.offset();
  if (r.u32("tensor count") != table.size())
    throw CheckpointError("tensor count mismatch at byte offset " + std::to_string(count_at));
  for (const auto& t : table) {
    const std::size_t at = r.offset();
    const std::uint32_t name_len = r.u32("tensor name length");
    if (r.take(name_len, "tensor name") != t.name)
      throw CheckpointError("expected tensor " + t.name + " at byte offset " + std::to_string(at));
    const std::size_t shape_at = r.offset();
    if (r.u32("rows") != t.rows || r.u32("cols") != t.cols)
      throw CheckpointError("shape mismatch for " + t.name + " at byte offset " + std::to_string(shape_at));
    auto data = r.take(static_cast<std::size_t>(t.rows * t.cols) * sizeof(float), "tensor data");
    std::memcpy(params.values.data() + t.offset, data.data(), data.size());
  }
  if (!r.done()) throw CheckpointError("trailing bytes after byte offset " + std::to_string(r.offset()));
  return params;
}

void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(params));
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path, const std::optional<ModelDims>& expected) {
  return decode_checkpoint(read_file(path), expected);
}

std::string checkpoint_hash(const ModelParams<float>& params) { return hex64(fnv1a64(encode_checkpoint(params))); }

}  // namespace shad
