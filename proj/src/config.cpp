#include "shad/config.hpp"

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <set>

#include "shad/io.hpp"

namespace shad {

using json = nlohmann::ordered_json;

namespace {

json optim_json(const RunConfig::Optim& o) {
  return {{"learning_rate", o.learning_rate}, {"warmup_fraction", o.warmup_fraction},
          {"final_lr_fraction", o.final_lr_fraction}, {"epochs", o.epochs},
          {"max_steps", o.max_steps},         {"batch_size", o.batch_size},
          {"grad_clip", o.grad_clip},         {"log_every", o.log_every}};
}

class Reader {
 public:
  Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw RunConfigError(where("") + " must be an object");
    for (const auto& [key, _] : j_.items()) unseen_.insert(key);
  }
  ~Reader() = default;

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    unseen_.erase(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw RunConfigError("config key " + where(key) + " has the wrong type");
    }
  }
  const json* child(const char* key) {
    if (!j_.contains(key)) return nullptr;
    unseen_.erase(key);
    return &j_.at(key);
  }
  std::string where(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  void finish() const {
    if (!unseen_.empty()) throw RunConfigError("unknown config key " + where(*unseen_.begin()));
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> unseen_;
};

void read_optim(Reader& parent, const char* key, RunConfig::Optim& o) {
  const json* j = parent.child(key);
  if (!j) return;
  Reader r(*j, parent.where(key));
  r.get("learning_rate", o.learning_rate);
  r.get("warmup_fraction", o.warmup_fraction);
  r.get("final_lr_fraction", o.final_lr_fraction);
  r.get("epochs", o.epochs);
  r.get("max_steps", o.max_steps);
  r.get("batch_size", o.batch_size);
  r.get("grad_clip", o.grad_clip);
  r.get("log_every", o.log_every);
  r.finish();
}

}  // namespace

std::string RunConfig::to_json() const {
  json j;
  j["paths"] = {{"workdir", paths.workdir},
                {"corpus", paths.corpus},
                {"checkpoints", paths.checkpoints},
                {"reports", paths.reports}};
  j["generator"] = {{"n_samples", generator.n_samples},
                    {"pretrain_samples", generator.pretrain_samples},
                    {"multi_step_ratio", generator.multi_step_ratio},
                    {"vocab_size", generator.vocab_size}};
  j["model"] = {{"width", model.width}, {"layers", model.layers}, {"heads", model.heads}, {"context", model.context}};
  j["seeds"] = {{"corpus", seeds.corpus}, {"shuffle", seeds.shuffle}, {"train", seeds.train}, {"probes", seeds.probes}};
  j["base_train"] = optim_json(base_train);
  j["tune"] = optim_json(tune);
  j["train"] = optim_json(train);
  j["discriminator"] = {{"shuffle_ratio", discriminator.shuffle_ratio},
                        {"epsilon", discriminator.epsilon},
                        {"format_threshold", discriminator.format_threshold},
                        {"workers", discriminator.workers}};
  j["scheme"] = {{"name", scheme.name},
                 {"inv_tau", scheme.inv_tau},
                 {"alpha", scheme.alpha},
                 {"labels", scheme.labels},
                 {"regex_rules", scheme.regex_rules}};
  j["sweep"] = {{"inv_taus", sweep.inv_taus},
                {"max_steps", sweep.max_steps},
                {"heldout_samples", sweep.heldout_samples}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw RunConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Reader root(j, "");
  if (const json* p = root.child("paths")) {
    Reader r(*p, "paths");
    r.get("workdir", c.paths.workdir);
    r.get("corpus", c.paths.corpus);
    r.get("checkpoints", c.paths.checkpoints);
    r.get("reports", c.paths.reports);
    r.finish();
  }
  if (const json* p = root.child("generator")) {
    Reader r(*p, "generator");
    r.get("n_samples", c.generator.n_samples);
    r.get("pretrain_samples", c.generator.pretrain_samples);
    r.get("multi_step_ratio", c.generator.multi_step_ratio);
    r.get("vocab_size", c.generator.vocab_size);
    r.finish();
  }
  if (const json* p = root.child("model")) {
    Reader r(*p, "model");
    r.get("width", c.model.width);
    r.get("layers", c.model.layers);
    r.get("heads", c.model.heads);
    r.get("context", c.model.context);
    r.finish();
  }
  if (const json* p = root.child("seeds")) {
    Reader r(*p, "seeds");
    r.get("corpus", c.seeds.corpus);
    r.get("shuffle", c.seeds.shuffle);
    r.get("train", c.seeds.train);
    r.get("probes", c.seeds.probes);
    r.finish();
  }
  read_optim(root, "base_train", c.base_train);
  read_optim(root, "tune", c.tune);
  read_optim(root, "train", c.train);
  if (const json* p = root.child("discriminator")) {
    Reader r(*p, "discriminator");
    r.get("shuffle_ratio", c.discriminator.shuffle_ratio);
    r.get("epsilon", c.discriminator.epsilon);
    r.get("format_threshold", c.discriminator.format_threshold);
    r.get("workers", c.discriminator.workers);
    r.finish();
  }
  if (const json* p = root.child("scheme")) {
    Reader r(*p, "scheme");
    r.get("name", c.scheme.name);
    r.get("inv_tau", c.scheme.inv_tau);
    r.get("alpha", c.scheme.alpha);
    r.get("labels", c.scheme.labels);
    r.get("regex_rules", c.scheme.regex_rules);
    r.finish();
  }
  if (const json* p = root.child("sweep")) {
    Reader r(*p, "sweep");
    r.get("inv_taus", c.sweep.inv_taus);
    r.get("max_steps", c.sweep.max_steps);
    r.get("heldout_samples", c.sweep.heldout_samples);
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw RunConfigError("config file " + path.string() + " does not exist");
  return from_json(read_file(path));
}

std::filesystem::path RunConfig::workdir() const {
  if (const char* env = std::getenv("SHAD_WORKDIR"); env && *env) return env;
  return paths.workdir;
}

TrainConfig RunConfig::train_config(const Optim& o, std::uint64_t seed) const {
  TrainConfig t;
  t.learning_rate = o.learning_rate;
  t.warmup_fraction = o.warmup_fraction;
  t.final_lr_fraction = o.final_lr_fraction;
  t.epochs = o.epochs;
  t.max_steps = o.max_steps;
  t.batch_size = o.batch_size;
  t.grad_clip = o.grad_clip;
  t.log_every = o.log_every;
  t.max_sequence_length = static_cast<std::size_t>(model.context);
  t.seed = seed;
  return t;
}

void RunConfig::validate() const {
  if (paths.workdir.empty()) throw RunConfigError("paths.workdir must not be empty");
  if (generator.n_samples == 0) throw RunConfigError("generator.n_samples must be positive");
  if (!(generator.multi_step_ratio >= 0.0 && generator.multi_step_ratio <= 1.0))
    throw RunConfigError("generator.multi_step_ratio must lie in [0, 1]");
  if (!(discriminator.shuffle_ratio > 0.0 && discriminator.shuffle_ratio <= 1.0))
    throw RunConfigError("discriminator.shuffle_ratio must lie in (0, 1]");
  if (scheme.name != "sft" && scheme.name != "rft" && scheme.name != "alpha-ft")
    throw RunConfigError("scheme.name must be sft, rft or alpha-ft");
  if (scheme.labels != "shad" && scheme.labels != "regex" && scheme.labels != "truth")
    throw RunConfigError("scheme.labels must be shad, regex or truth");
  if (!(scheme.inv_tau >= 0.0)) throw RunConfigError("scheme.inv_tau must be non-negative");
  if (!(scheme.alpha >= 0.0 && scheme.alpha <= 1.0)) throw RunConfigError("scheme.alpha must lie in [0, 1]");
  if (sweep.inv_taus.empty()) throw RunConfigError("sweep.inv_taus must not be empty");
  for (const Optim* o : {&base_train, &tune, &train}) {
    try {
      train_config(*o, 0).validate();
    } catch (const std::invalid_argument& e) {
      throw RunConfigError(std::string("optimizer settings: ") + e.what());
    }
  }
}

}  // namespace shad
