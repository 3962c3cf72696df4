#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shad/train.hpp"

namespace shad {

class RunConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a pipeline command reads. Serialized as JSON; keys left out of
/// a config file keep the defaults below, unknown keys are rejected.
struct RunConfig {
  struct Paths {
    std::string workdir = "shad-run";
    /// Empty generates the synthetic corpus; otherwise a JSONL file to ingest.
    std::string corpus;
    std::string checkpoints = "checkpoints";
    std::string reports = "reports";
    friend bool operator==(const Paths&, const Paths&) = default;
  } paths;

  struct Generator {
    std::size_t n_samples = 1000;
    std::size_t pretrain_samples = 5000;
    double multi_step_ratio = 0.3;
    std::size_t vocab_size = 2048;
    friend bool operator==(const Generator&, const Generator&) = default;
  } generator;

  struct Model {
    int width = 64;
    int layers = 2;
    int heads = 2;
    int context = 256;
    friend bool operator==(const Model&, const Model&) = default;
  } model;

  struct Seeds {
    std::uint64_t corpus = 1;
    std::uint64_t shuffle = 1;
    std::uint64_t train = 1;
    std::uint64_t probes = 1;
    friend bool operator==(const Seeds&, const Seeds&) = default;
  } seeds;

  struct Optim {
    double learning_rate = 3e-4;
    double warmup_fraction = 0.05;
    double final_lr_fraction = 1.0;
    int epochs = 1;
    long max_steps = 0;
    std::size_t batch_size = 16;
    double grad_clip = 1.0;
    long log_every = 10;
    friend bool operator==(const Optim&, const Optim&) = default;
  };
  Optim base_train{1e-3, 0.05, 0.1, 2, 0, 16, 1.0, 100};
  Optim tune{3e-4, 0.05, 1.0, 3, 0, 1, 1.0, 10};
  Optim train{3e-4, 0.05, 1.0, 100, 1000, 16, 1.0, 100};

  struct Discriminator {
    double shuffle_ratio = 0.01;
    double epsilon = 0.0;
    double format_threshold = 0.1;
    std::size_t workers = 1;
    friend bool operator==(const Discriminator&, const Discriminator&) = default;
  } discriminator;

  struct Scheme {
    std::string name = "rft";  // sft | rft | alpha-ft
    double inv_tau = 1.0;
    double alpha = 0.5;
    std::string labels = "shad";  // shad | regex | truth
    /// Empty uses the built-in agent-format rules.
    std::string regex_rules;
    friend bool operator==(const Scheme&, const Scheme&) = default;
  } scheme;

  struct Sweep {
    std::vector<double> inv_taus{0.0, 0.5, 1.0, 2.0};
    long max_steps = 300;
    std::size_t heldout_samples = 300;
    friend bool operator==(const Sweep&, const Sweep&) = default;
  } sweep;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  std::string to_json() const;
  /// Throws RunConfigError naming the offending key.
  static RunConfig from_json(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  /// SHAD_WORKDIR, when set, replaces paths.workdir.
  std::filesystem::path workdir() const;
  TrainConfig train_config(const Optim& optim, std::uint64_t seed) const;
  void validate() const;
};

}  // namespace shad
