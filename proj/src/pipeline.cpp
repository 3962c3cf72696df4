#include "shad/pipeline.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "shad/checkpoint.hpp"
#include "shad/discriminator.hpp"
#include "shad/generator.hpp"
#include "shad/io.hpp"
#include "shad/labels.hpp"
#include "shad/report.hpp"

namespace shad {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string param_text(double v) { return format_sig(v, 6); }

/// Collects the outputs of one stage and writes them write-once.
class RunDir {
 public:
  RunDir(fs::path dir, const RunConfig& config) : dir_(std::move(dir)), config_(config.to_json()) {
    const fs::path frozen = dir_ / "run_config.json";
    if (fs::exists(frozen) && read_file(frozen) != config_)
      throw StageError(dir_.string() + " was produced with a different config; use a new workdir");
  }

  void input(const std::string& label, const fs::path& path) { inputs_[label] = file_hash(path); }

  void emit(const std::string& name, const std::string& bytes) {
    const fs::path path = dir_ / name;
    if (fs::exists(path)) {
      if (read_file(path) != bytes) throw StageError("refusing to overwrite " + path.string());
    } else {
      write_file(path, bytes);
    }
    result_.artifacts[name] = hex64(fnv1a64(bytes));
  }

  StageResult finish() {
    json fp{{"inputs", inputs_}, {"outputs", result_.artifacts}};
    auto outputs = result_.artifacts;
    emit("run_config.json", config_);
    emit("fingerprints.json", fp.dump(2) + "\n");
    result_.run_dir = dir_;
    result_.artifacts = std::move(outputs);
    return result_;
  }

  std::string config_hash() const { return hex64(fnv1a64(config_)); }

 private:
  fs::path dir_;
  std::string config_;
  std::map<std::string, std::string> inputs_;
  StageResult result_;
};

void require(const fs::path& path, const std::string& command) {
  if (!fs::exists(path)) throw StageError("missing " + path.string() + "; run " + command + " first", command);
}

ModelDims dims_for(const RunConfig& c, const Vocab& vocab) {
  return ModelDims{static_cast<int>(vocab.size()), c.model.width, c.model.layers, c.model.heads, c.model.context};
}

WeightScheme make_scheme(const std::string& name, const RunConfig& c) {
  if (name == "sft") return WeightScheme::sft();
  if (name == "rft") return WeightScheme::rft_inverse(c.scheme.inv_tau);
  if (name == "alpha-ft") return WeightScheme::alpha_ft(c.scheme.alpha);
  throw StageError("unknown scheme '" + name + "' (expected sft, rft or alpha-ft)");
}

DiscriminatorFingerprint discriminator_fingerprint(const RunConfig& c, const ModelParams<float>& theta_o,
                                                   const ModelParams<float>& theta_s) {
  DiscriminatorFingerprint f;
  f.shuffle_seed = c.seeds.shuffle;
  f.shuffle_ratio = c.discriminator.shuffle_ratio;
  f.tune_seed = c.seeds.train;
  f.tune_epochs = c.tune.epochs;
  f.tune_learning_rate = c.tune.learning_rate;
  f.tune_batch_size = c.tune.batch_size;
  f.theta_o_hash = checkpoint_hash(theta_o);
  f.theta_s_hash = checkpoint_hash(theta_s);
  f.epsilon = c.discriminator.epsilon;
  f.format_threshold = c.discriminator.format_threshold;
  return f;
}

}  // namespace

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)), root_(config_.workdir()) { config_.validate(); }

fs::path Pipeline::data_dir() const { return root_ / "data"; }
fs::path Pipeline::base_dir() const { return root_ / config_.paths.checkpoints / "base"; }
fs::path Pipeline::shad_dir() const { return root_ / config_.paths.checkpoints / "shad"; }
fs::path Pipeline::report_dir(const std::string& kind) const { return root_ / config_.paths.reports / kind; }

fs::path Pipeline::train_dir(const std::string& scheme, const std::string& labels) const {
  std::string name = scheme + "-" + labels;
  if (scheme == "rft") name += "-invtau" + param_text(config_.scheme.inv_tau);
  if (scheme == "alpha-ft") name += "-alpha" + param_text(config_.scheme.alpha);
  return root_ / config_.paths.checkpoints / "train" / name;
}

StageResult Pipeline::gen_data() const {
  const RunConfig& c = config_;
  RunDir run(data_dir(), c);
  Corpus corpus;
  if (c.paths.corpus.empty()) {
    auto g = react_generator_config(c.generator.n_samples, c.seeds.corpus);
    g.multi_step_ratio = c.generator.multi_step_ratio;
    corpus = generate_corpus(g);
  } else {
    if (!fs::exists(c.paths.corpus)) throw StageError("corpus file " + c.paths.corpus + " does not exist");
    corpus = load_jsonl(c.paths.corpus);
    run.input("corpus", c.paths.corpus);
  }
  validate_corpus(corpus);
  const Corpus pre = generate_corpus(pretrain_generator_config(c.generator.pretrain_samples, c.seeds.corpus + 1000));
  const Vocab vocab = build_vocab({&corpus, &pre}, c.generator.vocab_size);
  run.emit("corpus.jsonl", to_jsonl(corpus));
  run.emit("pretrain.jsonl", to_jsonl(pre));
  run.emit("vocab.txt", vocab.serialize());
  return run.finish();
}

StageResult Pipeline::train_base() const {
  const RunConfig& c = config_;
  const fs::path pre_path = data_dir() / "pretrain.jsonl", vocab_path = data_dir() / "vocab.txt";
  require(pre_path, "gen-data");
  require(vocab_path, "gen-data");
  RunDir run(base_dir(), c);
  run.input("pretrain", pre_path);
  run.input("vocab", vocab_path);
  const Vocab vocab = Vocab::deserialize(read_file(vocab_path));
  const Corpus pre = load_jsonl(pre_path);
  const auto init = ModelParams<float>::initialize(dims_for(c, vocab), c.seeds.train);
  const auto result = shad::train(init, pre, vocab, c.train_config(c.base_train, c.seeds.train));
  run.emit("theta_o.ckpt", encode_checkpoint(result.params));
  run.emit("history.csv", result.history.to_csv());
  return run.finish();
}

StageResult Pipeline::shad() const {
  const RunConfig& c = config_;
  const fs::path corpus_path = data_dir() / "corpus.jsonl", vocab_path = data_dir() / "vocab.txt";
  const fs::path theta_o_path = base_dir() / "theta_o.ckpt";
  require(corpus_path, "gen-data");
  require(vocab_path, "gen-data");
  require(theta_o_path, "train-base");
  RunDir run(shad_dir(), c);
  run.input("corpus", corpus_path);
  run.input("vocab", vocab_path);
  run.input("theta_o", theta_o_path);

  const Vocab vocab = Vocab::deserialize(read_file(vocab_path));
  const Corpus corpus = load_jsonl(corpus_path);
  const auto theta_o = load_checkpoint(theta_o_path, dims_for(c, vocab));
  const auto shuffled = shuffle_outputs(corpus, c.discriminator.shuffle_ratio, c.seeds.shuffle);
  const auto theta_s = tune_discriminator(theta_o, shuffled, vocab, c.train_config(c.tune, c.seeds.train));

  AnnotateOptions options;
  options.max_length = static_cast<std::size_t>(c.model.context);
  options.workers = c.discriminator.workers;
  options.classifier.epsilon = c.discriminator.epsilon;
  options.classifier.format_threshold = c.discriminator.format_threshold;
  const auto annotated =
      annotate_corpus(theta_o, theta_s, corpus, vocab, discriminator_fingerprint(c, theta_o, theta_s), options);
  for (const auto& f : annotated.failures) warn("annotation skipped " + f.id + ": " + f.message);

  run.emit("shuffled.jsonl", to_jsonl(shuffled));
  run.emit("theta_s.ckpt", encode_checkpoint(theta_s));
  run.emit("annotations.jsonl", annotated.to_jsonl());
  return run.finish();
}

StageResult Pipeline::train(const std::string& scheme_name, const std::string& labels) const {
  const RunConfig& c = config_;
  const WeightScheme scheme = make_scheme(scheme_name, c);
  const LabelSource source = [&] {
    try {
      return parse_label_source(labels);
    } catch (const std::invalid_argument& e) {
      throw StageError(e.what());
    }
  }();
  const fs::path corpus_path = data_dir() / "corpus.jsonl", vocab_path = data_dir() / "vocab.txt";
  const fs::path theta_o_path = base_dir() / "theta_o.ckpt", ann_path = shad_dir() / "annotations.jsonl";
  require(corpus_path, "gen-data");
  require(vocab_path, "gen-data");
  require(theta_o_path, "train-base");
  if (source == LabelSource::Shad) require(ann_path, "shad");

  RunDir run(train_dir(scheme_name, labels), c);
  run.input("corpus", corpus_path);
  run.input("vocab", vocab_path);
  run.input("theta_o", theta_o_path);

  const Vocab vocab = Vocab::deserialize(read_file(vocab_path));
  const Corpus corpus = load_jsonl(corpus_path);
  const auto theta_o = load_checkpoint(theta_o_path, dims_for(c, vocab));
  AnnotatedCorpus annotated;
  Ruleset rules;
  Labeling labeling{source, nullptr, &Ruleset::agent_format()};
  if (source == LabelSource::Shad) {
    run.input("annotations", ann_path);
    annotated = load_annotations(ann_path);
    labeling.annotations = &annotated;
  }
  if (source == LabelSource::Regex && !c.scheme.regex_rules.empty()) {
    run.input("regex_rules", c.scheme.regex_rules);
    rules = Ruleset::load(c.scheme.regex_rules);
    labeling.ruleset = &rules;
  }
  const auto result = train_weighted(theta_o, corpus, vocab, labeling, scheme, c.train_config(c.train, c.seeds.train));
  run.emit("model.ckpt", encode_checkpoint(result.params));
  run.emit("history.csv", result.history.to_csv());
  return run.finish();
}

StageResult Pipeline::report(const std::string& kind) const {
  const RunConfig& c = config_;
  if (kind == "misclass") {
    const fs::path ann_path = shad_dir() / "annotations.jsonl";
    require(ann_path, "shad");
    RunDir run(report_dir(kind), c);
    run.input("annotations", ann_path);
    const auto annotated = load_annotations(ann_path);
    MetricReport report;
    report.fingerprint = "config " + run.config_hash() + ", annotations " + file_hash(ann_path);
    report.misclassification = misclassification_rate(annotated);
    report.thresholds = format_threshold_sweep(annotated, {0.01, 0.05, 0.1, 0.2, 0.5, 1.0});
    std::string csv = "bucket,wrong,total,rate\n";
    for (const auto& b : report.misclassification->buckets)
      csv += std::string(to_string(b.bucket)) + "," + std::to_string(b.wrong) + "," + std::to_string(b.total) + "," +
             format_sig(b.rate()) + "\n";
    csv += "coarse_excluding_copied," + std::to_string(report.misclassification->coarse_wrong) + "," +
           std::to_string(report.misclassification->coarse_total) + "," +
           format_sig(report.misclassification->coarse_rate()) + "\n";
    run.emit("misclass.csv", csv);
    run.emit("misclass.json", report.json());
    return run.finish();
  }
  if (kind == "curves") {
    const fs::path train_root = root_ / c.paths.checkpoints / "train";
    std::vector<fs::path> runs;
    if (fs::exists(train_root))
      for (const auto& entry : fs::directory_iterator(train_root))
        if (fs::exists(entry.path() / "history.csv")) runs.push_back(entry.path());
    if (runs.empty()) throw StageError("no training histories under " + train_root.string() + "; run train first", "train");
    std::sort(runs.begin(), runs.end());
    RunDir run(report_dir(kind), c);
    std::vector<TrainHistory> histories;
    for (const auto& r : runs) {
      run.input(r.filename().string(), r / "history.csv");
      histories.push_back(TrainHistory::parse_csv(read_file(r / "history.csv")));
    }
    MetricReport report;
    report.fingerprint = "config " + run.config_hash();
    report.curves = loss_curves(histories);
    run.emit("curves.csv", report.curves->csv());
    run.emit("curves.svg", report.curves->svg());
    run.emit("curves.json", report.json());
    return run.finish();
  }
  if (kind == "tau-sweep") {
    const fs::path corpus_path = data_dir() / "corpus.jsonl", vocab_path = data_dir() / "vocab.txt";
    const fs::path theta_o_path = base_dir() / "theta_o.ckpt", ann_path = shad_dir() / "annotations.jsonl";
    require(corpus_path, "gen-data");
    require(vocab_path, "gen-data");
    require(theta_o_path, "train-base");
    const LabelSource source = parse_label_source(c.scheme.labels);
    if (source == LabelSource::Shad) require(ann_path, "shad");
    RunDir run(report_dir(kind), c);
    run.input("corpus", corpus_path);
    run.input("theta_o", theta_o_path);

    const Vocab vocab = Vocab::deserialize(read_file(vocab_path));
    const Corpus corpus = load_jsonl(corpus_path);
    const auto theta_o = load_checkpoint(theta_o_path, dims_for(c, vocab));
    AnnotatedCorpus annotated;
    Ruleset rules;
    Labeling labeling{source, nullptr, &Ruleset::agent_format()};
    if (source == LabelSource::Shad) {
      run.input("annotations", ann_path);
      annotated = load_annotations(ann_path);
      labeling.annotations = &annotated;
    }
    if (source == LabelSource::Regex && !c.scheme.regex_rules.empty()) {
      rules = Ruleset::load(c.scheme.regex_rules);
      labeling.ruleset = &rules;
    }
    auto held_config = react_generator_config(c.sweep.heldout_samples, c.seeds.corpus + 2000);
    held_config.id_prefix = "held";
    const Corpus held = generate_corpus(held_config);
    TrainConfig tc = c.train_config(c.train, c.seeds.train);
    tc.max_steps = c.sweep.max_steps;
    MetricReport report;
    report.fingerprint = "config " + run.config_hash();
    report.sweep = tau_sweep(theta_o, corpus, vocab, labeling, c.sweep.inv_taus, tc,
                             heldout_reasoning_loss(held.samples, vocab, static_cast<std::size_t>(c.model.context)));
    run.emit("tau_sweep.csv", report.sweep->csv());
    run.emit("tau_sweep.json", report.json());
    return run.finish();
  }
  throw StageError("unknown report kind '" + kind + "' (expected misclass, curves or tau-sweep)");
}

}  // namespace shad
