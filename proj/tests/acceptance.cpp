#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "shad/checkpoint.hpp"
#include "shad/config.hpp"
#include "shad/discriminator.hpp"
#include "shad/generator.hpp"
#include "shad/gradcheck.hpp"
#include "shad/io.hpp"
#include "shad/labels.hpp"
#include "shad/report.hpp"

using namespace shad;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-5;
constexpr double kGradEpsilon = 1e-5;
constexpr std::size_t kGradProbes = 64;
constexpr double kWeightTolerance = 1e-12;
constexpr double kOracleTolerance = 1e-9;
constexpr double kOracleWr = 0.7310585786300048792511592418218362743651;
constexpr std::size_t kAntisymmetrySamples = 100;
constexpr std::size_t kQualityCorpus = 10000;
constexpr double kFormatBound = 0.05;
constexpr double kCoarseBound = 0.15;
constexpr double kBoilerplateSlack = 1.20;
constexpr std::size_t kHeldout = 500;
constexpr std::size_t kSmokeSamples = 1000;
constexpr double kSmokeBudgetSeconds = 600.0;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int digits = 4) {
  std::ostringstream o;
  o.precision(digits);
  o << v;
  return o.str();
}

void progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Everything one seed needs for criteria 4 to 6, built as the pipeline does.
struct SeedRun {
  std::uint64_t seed = 0;
  Corpus target;
  Corpus heldout;
  Vocab vocab;
  ModelParams<float> theta_o;
  ModelParams<float> theta_s;
  AnnotatedCorpus annotation;
};

SeedRun& seed_run(std::uint64_t seed) {
  static std::map<std::uint64_t, SeedRun> cache;
  if (auto it = cache.find(seed); it != cache.end()) return it->second;
  const RunConfig cfg;
  SeedRun run;
  run.seed = seed;
  auto t0 = Clock::now();
  run.target = generate_corpus(react_generator_config(kQualityCorpus, seed));
  const Corpus pretrain = generate_corpus(pretrain_generator_config(cfg.generator.pretrain_samples, seed + 1000));
  auto held_cfg = react_generator_config(kHeldout, seed + 2000);
  held_cfg.id_prefix = "held";
  run.heldout = generate_corpus(held_cfg);
  run.vocab = build_vocab({&run.target, &pretrain}, cfg.generator.vocab_size);
  const ModelDims dims{static_cast<int>(run.vocab.size()), cfg.model.width, cfg.model.layers, cfg.model.heads,
                       cfg.model.context};
  run.theta_o =
      train(ModelParams<float>::initialize(dims, seed), pretrain, run.vocab, cfg.train_config(cfg.base_train, seed))
          .params;
  progress("seed " + std::to_string(seed) + ": base model trained (" + num(seconds_since(t0), 3) + " s)");

  const auto shuffled = shuffle_outputs(run.target, cfg.discriminator.shuffle_ratio, seed);
  run.theta_s = tune_discriminator(run.theta_o, shuffled, run.vocab, cfg.train_config(cfg.tune, seed));
  DiscriminatorFingerprint fp;
  fp.shuffle_seed = seed;
  fp.shuffle_ratio = cfg.discriminator.shuffle_ratio;
  fp.tune_seed = seed;
  fp.tune_epochs = cfg.tune.epochs;
  fp.tune_learning_rate = cfg.tune.learning_rate;
  fp.tune_batch_size = cfg.tune.batch_size;
  fp.theta_o_hash = checkpoint_hash(run.theta_o);
  fp.theta_s_hash = checkpoint_hash(run.theta_s);
  AnnotateOptions opt;
  opt.max_length = static_cast<std::size_t>(cfg.model.context);
  run.annotation = annotate_corpus(run.theta_o, run.theta_s, run.target, run.vocab, fp, opt);
  progress("seed " + std::to_string(seed) + ": discriminator tuned and corpus annotated (" +
           num(seconds_since(t0), 3) + " s)");
  return cache.emplace(seed, std::move(run)).first->second;
}

TrainConfig fine_tune_config(std::uint64_t seed) {
  const RunConfig cfg;
  return cfg.train_config(cfg.train, seed);
}

Tokenization random_tokens(int vocab, int length, std::uint64_t seed) {
  Rng rng(seed);
  Tokenization tok;
  for (int i = 0; i < length; ++i) {
    tok.ids.push_back(static_cast<TokenId>(Vocab::kNumSpecials +
                                           rng.below(static_cast<std::uint64_t>(vocab) - Vocab::kNumSpecials)));
    tok.char_spans.push_back({0, 0});
  }
  tok.boundary = static_cast<std::size_t>(length / 3);
  return tok;
}

Outcome gradient_correctness() {
  double worst = 0.0;
  for (int d : {16, 64})
    for (int layers : {1, 2}) {
      const ModelDims dims{64, d, layers, 2, 64};
      const auto params = ModelParams<double>::initialize(dims, 100 + static_cast<std::uint64_t>(d + layers));
      worst = std::max(worst, grad_check(params, random_tokens(64, 48, static_cast<std::uint64_t>(d * layers)),
                                         kGradProbes, kGradEpsilon, static_cast<std::uint64_t>(d + 10 * layers)));
    }
  return {worst < kGradTolerance,
          "max relative error " + num(worst) + " over d{16,64} x L{1,2}, " + std::to_string(kGradProbes) +
              " probes each (bound " + num(kGradTolerance) + ")"};
}

Outcome weighting_algebra() {
  double sum_err = 0.0, shift_err = 0.0;
  Rng rng(5);
  for (int i = 0; i < 20000; ++i) {
    const double lb = 10.0 * rng.uniform(), lr = 10.0 * rng.uniform();
    const double tau = 0.05 + 5.0 * rng.uniform(), d = 200.0 * rng.uniform() - 100.0;
    const auto w = rft_weights(lb, lr, tau);
    const auto s = rft_weights(lb + d, lr + d, tau);
    sum_err = std::max(sum_err, std::abs(w.boilerplate + w.reasoning - 1.0));
    shift_err = std::max({shift_err, std::abs(s.boilerplate - w.boilerplate), std::abs(s.reasoning - w.reasoning)});
  }
  const double oracle_err = std::abs(rft_weights(1.0, 2.0, 1.0).reasoning - kOracleWr);
  const GroupLoss gl{1.0, 3.0, 2, 1};
  const bool endpoints = weighted_loss(gl, WeightScheme::alpha_ft(0.0)) == 3.0 &&
                         weighted_loss(gl, WeightScheme::alpha_ft(0.5)) == 2.0;
  const bool pass = sum_err <= kWeightTolerance && shift_err <= kWeightTolerance && oracle_err <= kOracleTolerance &&
                    endpoints;
  return {pass, "sum error " + num(sum_err) + ", shift error " + num(shift_err) + ", w_r(1,2,1) error " +
                    num(oracle_err) + ", alpha endpoints " + (endpoints ? "exact" : "WRONG")};
}

Outcome classifier_contract() {
  bool contract = classify(0.0) == CoarseRole::Boilerplate && classify(-0.0) == CoarseRole::Boilerplate &&
                  classify(std::nextafter(0.0, 1.0)) == CoarseRole::Reasoning &&
                  classify(std::nextafter(0.0, -1.0)) == CoarseRole::Boilerplate &&
                  classify(-std::numeric_limits<double>::infinity()) == CoarseRole::Boilerplate &&
                  classify(std::numeric_limits<double>::infinity()) == CoarseRole::Reasoning;
  try {
    classify(std::nan(""));
    contract = false;
  } catch (const ClassifyError&) {
  }

  const auto corpus = generate_corpus(react_generator_config(1000, 17));
  const Vocab vocab = build_vocab(corpus, 2048);
  const ModelDims dims{static_cast<int>(vocab.size()), 32, 2, 2, 256};
  TrainConfig c;
  c.max_steps = 60;
  c.batch_size = 8;
  c.learning_rate = 3e-3;
  c.seed = 17;
  const auto theta_o = train(ModelParams<float>::initialize(dims, 17), corpus, vocab, c).params;
  const auto theta_s = tune_discriminator(theta_o, shuffle_outputs(corpus, 0.05, 17), vocab, c);

  Rng rng(23);
  std::size_t tokens = 0, mismatches = 0;
  for (std::size_t i = 0; i < kAntisymmetrySamples; ++i) {
    const Sample& s = corpus.samples[rng.below(corpus.size())];
    const auto fwd = loss_diff(theta_o, theta_s, s, vocab, 256);
    const auto rev = loss_diff(theta_s, theta_o, s, vocab, 256);
    for (std::size_t k = 0; k < fwd.size(); ++k) {
      ++tokens;
      if (fwd[k].ld != -rev[k].ld) ++mismatches;
    }
  }
  return {contract && mismatches == 0 && tokens > 0,
          std::string("boundary/NaN contract ") + (contract ? "holds" : "BROKEN") + ", antisymmetry " +
              std::to_string(tokens - mismatches) + "/" + std::to_string(tokens) + " tokens exact over " +
              std::to_string(kAntisymmetrySamples) + " samples"};
}

Outcome discrimination_quality() {
  bool pass = true;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto& run = seed_run(seed);
    const auto m = misclassification_rate(run.annotation);
    const double format = m.bucket(RoleKind::Format)->rate();
    const double coarse_rate = m.coarse_rate();
    pass = pass && run.annotation.failures.empty() && format < kFormatBound && coarse_rate < kCoarseBound;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " Format " +
              num(100 * format, 3) + "% coarse " + num(100 * coarse_rate, 3) + "% (reasoning " +
              num(100 * m.bucket(RoleKind::Reasoning)->rate(), 3) + "%)";
  }
  return {pass, detail + " [bounds Format < " + num(100 * kFormatBound) + "%, coarse < " + num(100 * kCoarseBound) +
                    "%]"};
}

Outcome rft_dynamics() {
  bool pass = true;
  std::string detail;
  const Labeling truth{LabelSource::GroundTruth};
  for (auto seed : kSeeds) {
    const auto& run = seed_run(seed);
    const auto config = fine_tune_config(seed);
    const auto sft = train_weighted(run.theta_o, run.target, run.vocab, truth, WeightScheme::sft(), config).history;
    const auto rft =
        train_weighted(run.theta_o, run.target, run.vocab, truth, WeightScheme::rft_inverse(1.0), config).history;
    const double sr = sft.final_loss("reasoning"), sb = sft.final_loss("boilerplate");
    const double rr = rft.final_loss("reasoning"), rb = rft.final_loss("boilerplate");
    const bool ok = sft.steps == rft.steps && rr < sr && rb <= kBoilerplateSlack * sb;
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " reasoning RFT " +
              num(rr) + " vs SFT " + num(sr) + ", boilerplate ratio " + num(rb / sb) + " @" +
              std::to_string(rft.steps) + " steps";
    progress("criterion 5 seed " + std::to_string(seed) + " done");
  }
  return {pass, detail + " [bound ratio <= " + num(kBoilerplateSlack) + "]"};
}

Outcome label_sensitivity() {
  std::vector<double> shad_loss, regex_loss;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto& run = seed_run(seed);
    const auto config = fine_tune_config(seed);
    const auto eval = heldout_reasoning_loss(run.heldout.samples, run.vocab, config.max_sequence_length);
    const Labeling shad_labels{LabelSource::Shad, &run.annotation};
    const Labeling regex_labels{LabelSource::Regex, nullptr, &Ruleset::agent_format()};
    const auto scheme = WeightScheme::rft_inverse(1.0);
    shad_loss.push_back(eval(train_weighted(run.theta_o, run.target, run.vocab, shad_labels, scheme, config).params));
    regex_loss.push_back(eval(train_weighted(run.theta_o, run.target, run.vocab, regex_labels, scheme, config).params));
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " SHAD " +
              num(shad_loss.back()) + " regex " + num(regex_loss.back());
    progress("criterion 6 seed " + std::to_string(seed) + " done");
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double ms = median(shad_loss), mr = median(regex_loss);
  return {ms <= mr, "held-out reasoning loss median SHAD " + num(ms) + " vs regex " + num(mr) + " (" + detail + ")"};
}

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd =
      "cd " + dir.string() + " && " SHAD_CLI_PATH " -c config.json " + args + " 2>>" + (dir / "stderr.txt").string();
  CliRun r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = file_hash(e.path());
  return out;
}

const std::vector<std::string> kPipeline{"gen-data", "train-base", "shad", "train --scheme rft", "report misclass"};

Outcome determinism() {
  bool pass = true;
  std::string detail;
  auto note = [&](bool ok, const std::string& what) {
    pass = pass && ok;
    if (!ok) detail += " " + what + " differs;";
  };

  const auto corpus = generate_corpus(react_generator_config(300, 4));
  note(to_jsonl(corpus) == to_jsonl(generate_corpus(react_generator_config(300, 4))), "corpus");
  note(to_jsonl(parse_jsonl(to_jsonl(corpus))) == to_jsonl(corpus) && parse_jsonl(to_jsonl(corpus)).samples ==
                                                                          corpus.samples,
       "corpus JSONL round-trip");
  const auto params = ModelParams<float>::initialize({300, 32, 2, 2, 64}, 4);
  const auto decoded = decode_checkpoint(encode_checkpoint(params));
  note(decoded.dims == params.dims && encode_checkpoint(decoded) == encode_checkpoint(params),
       "checkpoint round-trip");

  const std::string tiny = R"({
  "generator": {"n_samples": 400, "pretrain_samples": 400},
  "model": {"width": 32, "layers": 1, "heads": 2, "context": 256},
  "base_train": {"epochs": 1},
  "train": {"max_steps": 30}
})";
  std::vector<std::map<std::string, std::string>> trees;
  for (const char* name : {"a", "b"}) {
    const fs::path dir = fs::temp_directory_path() / "shad_acceptance_determinism" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file(dir / "config.json", tiny);
    for (const auto& cmd : kPipeline) note(run_cli(dir, cmd).code == 0, "exit code of " + cmd);
    note(run_cli(dir, "report curves").code == 0, "exit code of report curves");
    trees.push_back(tree_hashes(dir / "shad-run"));
    const auto reloaded = load_annotations(dir / "shad-run/checkpoints/shad/annotations.jsonl");
    note(reloaded.to_jsonl() == read_file(dir / "shad-run/checkpoints/shad/annotations.jsonl"),
         "annotation JSONL round-trip");
  }
  note(!trees[0].empty() && trees[0] == trees[1], "pipeline artifacts");
  fs::remove_all(fs::temp_directory_path() / "shad_acceptance_determinism");
  return {pass, pass ? "corpus, checkpoints, annotations and reports byte-identical across two runs (" +
                           std::to_string(trees[0].size()) + " files); round-trips lossless"
                     : "FAILED:" + detail};
}

Outcome end_to_end() {
  const fs::path dir = fs::temp_directory_path() / "shad_acceptance_smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file(dir / "config.json", R"({"generator": {"n_samples": )" + std::to_string(kSmokeSamples) + "}}");
  const auto t0 = Clock::now();
  std::string failed;
  for (const auto& cmd : kPipeline) {
    const auto r = run_cli(dir, cmd);
    if (r.code != 0) {
      failed = cmd + " exited " + std::to_string(r.code) + ": " + read_file(dir / "stderr.txt");
      break;
    }
    progress("criterion 8: " + cmd + " done (" + num(seconds_since(t0), 3) + " s)");
  }
  const double elapsed = seconds_since(t0);
  const fs::path root = dir / "shad-run";
  const std::vector<std::string> declared{
      "data/corpus.jsonl",       "data/pretrain.jsonl",        "data/vocab.txt",
      "checkpoints/base/theta_o.ckpt", "checkpoints/base/history.csv",
      "checkpoints/shad/shuffled.jsonl", "checkpoints/shad/theta_s.ckpt", "checkpoints/shad/annotations.jsonl",
      "checkpoints/train/rft-shad-invtau1/model.ckpt", "checkpoints/train/rft-shad-invtau1/history.csv",
      "reports/misclass/misclass.csv", "reports/misclass/misclass.json"};
  std::vector<std::string> missing;
  for (const auto& f : declared)
    if (!fs::exists(root / f)) missing.push_back(f);
  const bool pass = failed.empty() && missing.empty() && elapsed < kSmokeBudgetSeconds;
  std::string detail = "five commands on " + std::to_string(kSmokeSamples) + " samples in " + num(elapsed, 4) +
                       " s (budget " + num(kSmokeBudgetSeconds) + " s), " +
                       std::to_string(declared.size() - missing.size()) + "/" + std::to_string(declared.size()) +
                       " artifacts";
  if (!failed.empty()) detail += "; " + failed;
  for (const auto& m : missing) detail += "; missing " + m;
  fs::remove_all(dir);
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"weighting algebra", weighting_algebra},
      {"classifier contract", classifier_contract},
      {"SHAD discrimination quality", discrimination_quality},
      {"RFT loss dynamics", rft_dynamics},
      {"label-source sensitivity", label_sensitivity},
      {"determinism and round-trips", determinism},
      {"end-to-end smoke", end_to_end},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " " << criteria[i].first << ": " << o.detail
              << " (" << num(seconds_since(t0), 3) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
