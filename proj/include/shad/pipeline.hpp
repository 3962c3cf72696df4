#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "shad/config.hpp"

namespace shad {

/// A stage failure. `run_first` names the command whose artifact is missing.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& message, std::string run_first = {})
      : std::runtime_error(message), run_first_(std::move(run_first)) {}
  const std::string& run_first() const { return run_first_; }

 private:
  std::string run_first_;
};

struct StageResult {
  std::filesystem::path run_dir;
  /// File name to FNV-1a hash.
  std::map<std::string, std::string> artifacts;
};

/// File-based pipeline over one workdir:
///
///   data/                         corpus.jsonl pretrain.jsonl vocab.txt
///   <checkpoints>/base/           theta_o.ckpt history.csv
///   <checkpoints>/shad/           shuffled.jsonl theta_s.ckpt annotations.jsonl
///   <checkpoints>/train/<run>/    model.ckpt history.csv
///   <reports>/<kind>/             csv, json and svg outputs
///
/// Every run directory also holds run_config.json and fingerprints.json.
/// Outputs are write-once: rerunning with the same config rewrites nothing
/// and any differing content is refused.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  StageResult gen_data() const;
  StageResult train_base() const;
  StageResult shad() const;
  /// scheme: sft | rft | alpha-ft; labels: shad | regex | truth.
  StageResult train(const std::string& scheme, const std::string& labels) const;
  /// kind: misclass | curves | tau-sweep.
  StageResult report(const std::string& kind) const;

  const RunConfig& config() const { return config_; }
  std::filesystem::path data_dir() const;
  std::filesystem::path base_dir() const;
  std::filesystem::path shad_dir() const;
  std::filesystem::path train_dir(const std::string& scheme, const std::string& labels) const;
  std::filesystem::path report_dir(const std::string& kind) const;

 private:
  RunConfig config_;
  std::filesystem::path root_;
};

}  // namespace shad
