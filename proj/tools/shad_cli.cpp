#include <CLI11.hpp>
#include <iostream>
#include <nlohmann/json.hpp>

#include "shad/config.hpp"
#include "shad/pipeline.hpp"

namespace {

using json = nlohmann::ordered_json;

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kMissingUpstream = 3 };

int fail(const std::string& command, const std::string& type, const std::string& message, int code,
         const std::string& run_first = {}) {
  json err{{"command", command}, {"error", type}, {"message", message}};
  if (!run_first.empty()) err["run_first"] = run_first;
  std::cerr << err.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shuffle-aware token discrimination and reasoning-highlighted fine-tuning"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "RunConfig JSON file (defaults when omitted)");

  auto* gen = app.add_subcommand("gen-data", "Generate the corpus, pretraining corpus and vocabulary");
  auto* base = app.add_subcommand("train-base", "Train the base model theta_o");
  auto* shad = app.add_subcommand("shad", "Shuffle, tune theta_s and annotate the corpus");
  auto* train = app.add_subcommand("train", "Fine-tune from theta_o with a weighting scheme");
  std::string scheme, labels;
  train->add_option("--scheme", scheme, "sft | rft | alpha-ft (config scheme.name when omitted)")
      ->check(CLI::IsMember({"sft", "rft", "alpha-ft"}));
  train->add_option("--labels", labels, "shad | regex | truth (config scheme.labels when omitted)")
      ->check(CLI::IsMember({"shad", "regex", "truth"}));
  auto* report = app.add_subcommand("report", "Write metric tables and plots");
  std::string kind;
  report->add_option("kind", kind, "misclass | curves | tau-sweep")
      ->required()
      ->check(CLI::IsMember({"misclass", "curves", "tau-sweep"}));
  auto* show = app.add_subcommand("config", "Print the effective config as JSON");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  shad::RunConfig config;
  try {
    if (!config_path.empty()) config = shad::RunConfig::load(config_path);
    config.validate();
  } catch (const std::exception& e) {
    return fail(command, "config", e.what(), kConfig);
  }
  if (*show) {
    std::cout << config.to_json();
    return kOk;
  }

  try {
    shad::Pipeline pipeline(config);
    shad::StageResult result;
    if (*gen) result = pipeline.gen_data();
    if (*base) result = pipeline.train_base();
    if (*shad) result = pipeline.shad();
    if (*train)
      result = pipeline.train(scheme.empty() ? config.scheme.name : scheme, labels.empty() ? config.scheme.labels : labels);
    if (*report) result = pipeline.report(kind);
    std::cout << json{{"command", command}, {"run_dir", result.run_dir.string()}, {"artifacts", result.artifacts}}.dump()
              << '\n';
  } catch (const shad::StageError& e) {
    if (!e.run_first().empty()) return fail(command, "missing_artifact", e.what(), kMissingUpstream, e.run_first());
    return fail(command, "stage", e.what(), kFailure);
  } catch (const std::exception& e) {
    return fail(command, "runtime", e.what(), kFailure);
  }
  return kOk;
}
