#include "shad/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "shad/io.hpp"
#include "shad/rng.hpp"

namespace shad {

using Json = nlohmann::ordered_json;

std::string_view to_string(RoleKind kind) {
  switch (kind) {
    case RoleKind::Reasoning: return "Reasoning";
    case RoleKind::Format: return "Format";
    case RoleKind::TemplateConnecting: return "TemplateConnecting";
    case RoleKind::Copied: return "Copied";
  }
  return "?";
}

std::string_view to_string(CoarseRole role) {
  return role == CoarseRole::Reasoning ? "Reasoning" : "Boilerplate";
}

RoleKind parse_role_kind(std::string_view name) {
  if (name == "Reasoning") return RoleKind::Reasoning;
  if (name == "Format") return RoleKind::Format;
  if (name == "TemplateConnecting") return RoleKind::TemplateConnecting;
  if (name == "Copied") return RoleKind::Copied;
  throw std::invalid_argument("unknown role label '" + std::string(name) + "'");
}

CoarseRole parse_coarse_role(std::string_view name) {
  if (name == "Reasoning") return CoarseRole::Reasoning;
  if (name == "Boilerplate") return CoarseRole::Boilerplate;
  throw std::invalid_argument("unknown coarse role '" + std::string(name) + "'");
}

std::size_t Corpus::find(std::string_view id) const {
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].id == id) return i;
  return npos;
}

void validate_role_spans(const Sample& sample) {
  if (!sample.role_spans) return;
  const auto& spans = *sample.role_spans;
  std::size_t cursor = 0;
  for (const auto& span : spans) {
    if (span.start != cursor || span.end <= span.start)
      throw CorpusError("sample " + sample.id + ": role spans do not tile the output at offset " +
                        std::to_string(cursor));
    cursor = span.end;
  }
  if (cursor != sample.output.size())
    throw CorpusError("sample " + sample.id + ": role spans cover " + std::to_string(cursor) + " of " +
                      std::to_string(sample.output.size()) + " output characters");
}

void validate_corpus(const Corpus& corpus) {
  std::unordered_set<std::string_view> seen;
  for (const auto& sample : corpus.samples) {
    if (!seen.insert(sample.id).second) throw CorpusError("duplicate sample id " + sample.id);
    validate_role_spans(sample);
  }
}

std::optional<RoleKind> role_at(const Sample& sample, std::size_t offset) {
  if (!sample.role_spans) return std::nullopt;
  const auto& spans = *sample.role_spans;
  auto it = std::upper_bound(spans.begin(), spans.end(), offset,
                             [](std::size_t off, const RoleSpan& s) { return off < s.end; });
  if (it == spans.end() || offset < it->start) return std::nullopt;
  return it->kind;
}

namespace {

Json sample_json(const Sample& sample) {
  Json obj;
  obj["id"] = sample.id;
  obj["input"] = sample.input;
  obj["output"] = sample.output;
  if (sample.role_spans) {
    Json spans = Json::array();
    for (const auto& s : *sample.role_spans) spans.push_back(Json::array({s.start, s.end, to_string(s.kind)}));
    obj["role_spans"] = std::move(spans);
  }
  return obj;
}

std::string dump_line(const Json& obj) { return obj.dump(-1, ' ', false, Json::error_handler_t::strict) + "\n"; }

const Json& require(const Json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end())
    throw CorpusError("line " + std::to_string(line) + ": missing field " + field);
  return *it;
}

std::string require_string(const Json& obj, const char* field, std::size_t line) {
  const Json& v = require(obj, field, line);
  if (!v.is_string())
    throw CorpusError("line " + std::to_string(line) + ": field " + field + " is not a string");
  return v.get<std::string>();
}

Sample parse_sample(const Json& obj, std::size_t line) {
  if (!obj.is_object()) throw CorpusError("line " + std::to_string(line) + ": not a JSON object");
  Sample sample;
  sample.id = require_string(obj, "id", line);
  sample.input = require_string(obj, "input", line);
  sample.output = require_string(obj, "output", line);
  if (auto it = obj.find("role_spans"); it != obj.end() && !it->is_null()) {
    std::vector<RoleSpan> spans;
    if (!it->is_array()) throw CorpusError("line " + std::to_string(line) + ": role_spans is not an array");
    for (const auto& entry : *it) {
      if (!entry.is_array() || entry.size() != 3 || !entry[0].is_number_unsigned() ||
          !entry[1].is_number_unsigned() || !entry[2].is_string())
        throw CorpusError("line " + std::to_string(line) + ": malformed role span");
      try {
        spans.push_back({entry[0].get<std::size_t>(), entry[1].get<std::size_t>(),
                         parse_role_kind(entry[2].get<std::string>())});
      } catch (const std::invalid_argument& e) {
        throw CorpusError("line " + std::to_string(line) + ": " + e.what());
      }
    }
    sample.role_spans = std::move(spans);
  }
  return sample;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) {
      Json obj;
      try {
        obj = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw CorpusError("line " + std::to_string(line_no) + ": " + e.what());
      }
      fn(obj, line_no);
    }
    pos = nl + 1;
  }
}

}  // namespace

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& sample : corpus.samples) out += dump_line(sample_json(sample));
  return out;
}

std::string to_jsonl(const ShuffledCorpus& shuffled) {
  std::string out;
  for (std::size_t i = 0; i < shuffled.samples.size(); ++i) {
    Json obj = sample_json(shuffled.samples[i]);
    obj["base_ids"] = Json::array({shuffled.base_ids[i], shuffled.base_ids[shuffled.permutation[i]]});
    obj["permutation"] = shuffled.permutation[i];
    out += dump_line(obj);
  }
  return out;
}

void save_jsonl(const Corpus& corpus, const std::filesystem::path& path) { write_file(path, to_jsonl(corpus)); }
void save_jsonl(const ShuffledCorpus& shuffled, const std::filesystem::path& path) {
  write_file(path, to_jsonl(shuffled));
}

Corpus parse_jsonl(std::string_view text, const std::string& source) {
  Corpus corpus;
  corpus.provenance = IngestedProvenance{source};
  std::unordered_set<std::string> seen;
  for_each_line(text, [&](const Json& obj, std::size_t line) {
    Sample sample = parse_sample(obj, line);
    if (!seen.insert(sample.id).second) throw CorpusError("line " + std::to_string(line) + ": duplicate id " + sample.id);
    validate_role_spans(sample);
    corpus.samples.push_back(std::move(sample));
  });
  return corpus;
}

Corpus load_jsonl(const std::filesystem::path& path) { return parse_jsonl(read_file(path), path.string()); }

ShuffledCorpus load_shuffled_jsonl(const std::filesystem::path& path) {
  ShuffledCorpus shuffled;
  std::vector<std::pair<std::string, std::string>> pairs;
  for_each_line(read_file(path), [&](const Json& obj, std::size_t line) {
    shuffled.samples.push_back(parse_sample(obj, line));
    const Json& ids = require(obj, "base_ids", line);
    const Json& perm = require(obj, "permutation", line);
    if (!ids.is_array() || ids.size() != 2 || !perm.is_number_unsigned())
      throw CorpusError("line " + std::to_string(line) + ": malformed shuffle pairing");
    shuffled.base_ids.push_back(ids[0].get<std::string>());
    shuffled.permutation.push_back(perm.get<std::size_t>());
  });
  const std::size_t n = shuffled.samples.size();
  std::vector<bool> hit(n, false);
  for (std::size_t p : shuffled.permutation) {
    if (p >= n || hit[p]) throw CorpusError(path.string() + ": permutation is not a bijection");
    hit[p] = true;
  }
  return shuffled;
}

ShuffledCorpus shuffle_outputs(const Corpus& corpus, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw CorpusError("shuffle ratio must lie in (0, 1]");
  const std::size_t total = corpus.size();
  const auto n = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(total) - 1e-9));
  if (n < 2 || total < 2)
    throw CorpusError("cannot derange fewer than 2 samples (selected " + std::to_string(n) + ")");

  Rng rng(seed);
  // Partial Fisher-Yates: the first n slots are a uniform sample without replacement.
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + rng.below(total - i)]);
  order.resize(n);

  std::vector<std::size_t> perm(n);
  bool fixed_point = true;
  while (fixed_point) {
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    fixed_point = false;
    for (std::size_t i = 0; i < n && !fixed_point; ++i) fixed_point = perm[i] == i;
  }

  ShuffledCorpus shuffled;
  shuffled.permutation = perm;
  for (std::size_t i = 0; i < n; ++i) shuffled.base_ids.push_back(corpus.samples[order[i]].id);
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& in = corpus.samples[order[i]];
    const Sample& out = corpus.samples[order[perm[i]]];
    shuffled.samples.push_back({"shuf-" + in.id + "-" + out.id, in.input, out.output, std::nullopt});
  }
  return shuffled;
}

}  // namespace shad
