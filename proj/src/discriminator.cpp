#include "shad/discriminator.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <thread>

#include "shad/io.hpp"

namespace shad {

using json = nlohmann::ordered_json;

CoarseRole classify(double ld, double epsilon) {
  if (std::isnan(ld)) throw ClassifyError("loss difference is NaN");
  return ld <= epsilon ? CoarseRole::Boilerplate : CoarseRole::Reasoning;
}

RoleKind subcategorize(const TokenRecord& record, double format_threshold) {
  if (record.predicted != CoarseRole::Boilerplate)
    throw ClassifyError("subcategorize called on a reasoning token (" + record.sample_id + " k=" +
                        std::to_string(record.k) + ")");
  return record.l_s <= format_threshold ? RoleKind::Format : RoleKind::TemplateConnecting;
}

ModelParams<float> tune_discriminator(const ModelParams<float>& base, const ShuffledCorpus& shuffled,
                                      const Vocab& vocab, const TrainConfig& config) {
  if (config.epochs == 0 && config.max_steps == 0) return base;
  auto examples = make_examples(shuffled.samples, vocab, config.max_sequence_length);
  return train(base, examples, config, WeightScheme::sft()).params;
}

namespace {

std::vector<TokenRecord> score(const ModelParams<float>& theta_o, const ModelParams<float>& theta_s,
                               const Sample& sample, const Vocab& vocab, std::size_t max_length,
                               const ClassifierOptions& options) {
  const Tokenization tok = tokenize(sample, vocab, max_length);
  std::vector<double> lo, ls;
  try {
    lo = token_losses(theta_o, tok);
    ls = token_losses(theta_s, tok);
  } catch (const ContextOverflow& e) {
    throw TokenizeError("sample " + sample.id + ": " + e.what());
  }
  const auto truth = output_token_roles(sample, tok);
  std::vector<TokenRecord> records(tok.output_count());
  for (std::size_t k = 0; k < records.size(); ++k) {
    TokenRecord& r = records[k];
    const Piece& span = tok.char_spans[tok.boundary + k];
    r.sample_id = sample.id;
    r.k = k;
    r.text = sample.output.substr(span.start, span.end - span.start);
    r.l_o = round_sig(lo[k]);
    r.l_s = round_sig(ls[k]);
    r.ld = r.l_s - r.l_o;
    r.predicted = classify(r.ld, options.epsilon);
    if (options.subcategorize && r.predicted == CoarseRole::Boilerplate)
      r.predicted_fine = subcategorize(r, options.format_threshold);
    if (!truth.empty()) r.truth = truth[k];
  }
  return records;
}

json fingerprint_json(const DiscriminatorFingerprint& f) {
  return json{{"shuffle_seed", f.shuffle_seed},       {"shuffle_ratio", f.shuffle_ratio},
              {"tune_seed", f.tune_seed},             {"tune_epochs", f.tune_epochs},
              {"tune_learning_rate", f.tune_learning_rate}, {"tune_batch_size", f.tune_batch_size},
              {"theta_o", f.theta_o_hash},            {"theta_s", f.theta_s_hash},
              {"epsilon", f.epsilon},                 {"format_threshold", f.format_threshold}};
}

DiscriminatorFingerprint parse_fingerprint(const json& j) {
  DiscriminatorFingerprint f;
  f.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  f.shuffle_ratio = j.at("shuffle_ratio").get<double>();
  f.tune_seed = j.at("tune_seed").get<std::uint64_t>();
  f.tune_epochs = j.at("tune_epochs").get<int>();
  f.tune_learning_rate = j.at("tune_learning_rate").get<double>();
  f.tune_batch_size = j.at("tune_batch_size").get<std::size_t>();
  f.theta_o_hash = j.at("theta_o").get<std::string>();
  f.theta_s_hash = j.at("theta_s").get<std::string>();
  f.epsilon = j.at("epsilon").get<double>();
  f.format_threshold = j.at("format_threshold").get<double>();
  return f;
}

}  // namespace

std::vector<TokenRecord> loss_diff(const ModelParams<float>& theta_o, const ModelParams<float>& theta_s,
                                   const Sample& sample, const Vocab& vocab, std::size_t max_length,
                                   const ClassifierOptions& options) {
  return score(theta_o, theta_s, sample, vocab, max_length, options);
}

const AnnotatedSample* AnnotatedCorpus::find(std::string_view id) const {
  for (const auto& s : samples)
    if (s.id == id) return &s;
  return nullptr;
}

AnnotatedCorpus annotate_corpus(const ModelParams<float>& theta_o, const ModelParams<float>& theta_s,
                                const Corpus& corpus, const Vocab& vocab, const DiscriminatorFingerprint& fingerprint,
                                const AnnotateOptions& options) {
  if (!(theta_o.dims == theta_s.dims))
    throw AnnotationError("model architectures differ: " + theta_o.dims.describe() + " vs " +
                          theta_s.dims.describe());
  const std::size_t n = corpus.size();
  std::vector<std::vector<TokenRecord>> results(n);
  std::vector<std::string> errors(n);
  std::vector<char> failed(n, 0);

  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride) {
      try {
        results[i] = score(theta_o, theta_s, corpus.samples[i], vocab, options.max_length, options.classifier);
      } catch (const std::exception& e) {
        failed[i] = 1;
        errors[i] = e.what();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, n));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w, workers);
    for (auto& t : threads) t.join();
  }

  AnnotatedCorpus out;
  out.fingerprint = fingerprint;
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) {
      out.failures.push_back({corpus.samples[i].id, errors[i]});
      continue;
    }
    out.samples.push_back({corpus.samples[i].id, std::move(results[i])});
  }
  return out;
}

std::string AnnotatedCorpus::to_jsonl() const {
  const json fp = fingerprint_json(fingerprint);
  std::string out;
  for (const auto& s : samples) {
    json tokens = json::array();
    for (const auto& r : s.tokens) {
      json t{{"k", r.k},
             {"text", r.text},
             {"l_o", json::parse(format_sig(r.l_o))},
             {"l_s", json::parse(format_sig(r.l_s))},
             {"ld", json::parse(format_sig(r.ld))},
             {"pred", to_string(r.predicted)}};
      if (r.predicted_fine) t["pred_fine"] = to_string(*r.predicted_fine);
      if (r.truth) t["truth"] = to_string(*r.truth);
      tokens.push_back(std::move(t));
    }
    json line{{"id", s.id}, {"tokens", std::move(tokens)}, {"fingerprint", fp}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

AnnotatedCorpus AnnotatedCorpus::parse_jsonl(std::string_view text) {
  AnnotatedCorpus out;
  std::size_t line_no = 0, pos = 0;
  bool have_fingerprint = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      AnnotatedSample s;
      s.id = j.at("id").get<std::string>();
      for (const auto& t : j.at("tokens")) {
        TokenRecord r;
        r.sample_id = s.id;
        r.k = t.at("k").get<std::size_t>();
        r.text = t.at("text").get<std::string>();
        r.l_o = t.at("l_o").get<double>();
        r.l_s = t.at("l_s").get<double>();
        r.ld = r.l_s - r.l_o;
        r.predicted = parse_coarse_role(t.at("pred").get<std::string>());
        if (t.contains("pred_fine")) r.predicted_fine = parse_role_kind(t.at("pred_fine").get<std::string>());
        if (t.contains("truth")) r.truth = parse_role_kind(t.at("truth").get<std::string>());
        s.tokens.push_back(std::move(r));
      }
      const auto fp = parse_fingerprint(j.at("fingerprint"));
      if (!have_fingerprint) {
        out.fingerprint = fp;
        have_fingerprint = true;
      } else if (!(fp == out.fingerprint)) {
        throw AnnotationError("fingerprint differs from earlier lines");
      }
      out.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw AnnotationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_annotations(const AnnotatedCorpus& annotated, const std::filesystem::path& path) {
  write_file(path, annotated.to_jsonl());
}

AnnotatedCorpus load_annotations(const std::filesystem::path& path) {
  return AnnotatedCorpus::parse_jsonl(read_file(path));
}

std::vector<CoarseRole> predicted_labels(const AnnotatedSample& sample) {
  std::vector<CoarseRole> labels;
  labels.reserve(sample.tokens.size());
  for (const auto& r : sample.tokens) labels.push_back(r.predicted);
  return labels;
}

}  // namespace shad
