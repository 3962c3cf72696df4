#include "shad/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "shad/io.hpp"
#include "shad/optimizer.hpp"

namespace shad {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw std::invalid_argument("warmup_fraction must lie in [0, 1)");
  if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0))
    throw std::invalid_argument("final_lr_fraction must lie in [0, 1]");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (log_every < 1) throw std::invalid_argument("log_every must be positive");
}

std::string TrainHistory::to_csv() const {
  std::string out = "step,split,group,mean_loss,w_b,w_r,L_b,L_r,scheme,tau_or_alpha\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + r.split + "," + r.group + "," + format_sig(r.mean_loss) + "," +
           format_sig(r.w_b) + "," + format_sig(r.w_r) + "," + format_sig(r.loss_b) + "," + format_sig(r.loss_r) +
           "," + scheme + "," + scheme_parameter + "\n";
  }
  return out;
}

TrainHistory TrainHistory::parse_csv(std::string_view text) {
  TrainHistory h;
  std::istringstream in{std::string(text)};
  std::string line;
  std::getline(in, line);
  if (line.rfind("step,split,group,mean_loss", 0) != 0) throw std::runtime_error("not a training history CSV");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    while (true) {
      std::size_t comma = line.find(',', pos);
      f.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (f.size() != 10) throw std::runtime_error("history line " + std::to_string(line_no) + ": expected 10 fields");
    HistoryRow r;
    r.step = std::stol(f[0]);
    r.split = f[1];
    r.group = f[2];
    r.mean_loss = std::stod(f[3]);
    r.w_b = std::stod(f[4]);
    r.w_r = std::stod(f[5]);
    r.loss_b = std::stod(f[6]);
    r.loss_r = std::stod(f[7]);
    h.scheme = f[8];
    h.scheme_parameter = f[9];
    h.steps = std::max(h.steps, r.step);
    h.rows.push_back(std::move(r));
  }
  return h;
}

double TrainHistory::final_loss(std::string_view group, std::string_view split) const {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (it->group == group && it->split == split) return it->mean_loss;
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<Example> make_examples(const std::vector<Sample>& samples, const Vocab& vocab, std::size_t max_length) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Example ex;
    ex.id = s.id;
    ex.tok = tokenize(s, vocab, max_length);
    ex.truth = output_token_roles(s, ex.tok);
    for (RoleKind k : ex.truth) ex.labels.push_back(coarse(k));
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> make_examples(const Corpus& corpus, const Vocab& vocab, std::size_t max_length) {
  return make_examples(corpus.samples, vocab, max_length);
}

namespace {

struct IntervalStats {
  double sum_all = 0.0, sum_b = 0.0, sum_r = 0.0;
  std::size_t n_all = 0, n_b = 0, n_r = 0;
  double w_b = 0.0, w_r = 0.0, loss_b = 0.0, loss_r = 0.0;
  long batches = 0;

  void flush(long step, TrainHistory& history, bool labelled) {
    if (batches == 0) return;
    const double nb = static_cast<double>(batches);
    auto row = [&](const char* group, double mean) {
      history.rows.push_back({step, "train", group, mean, w_b / nb, w_r / nb, loss_b / nb, loss_r / nb});
    };
    row("all", sum_all / static_cast<double>(std::max<std::size_t>(n_all, 1)));
    if (labelled) {
      if (n_b) row("boilerplate", sum_b / static_cast<double>(n_b));
      if (n_r) row("reasoning", sum_r / static_cast<double>(n_r));
    }
    *this = IntervalStats{};
  }
};

}  // namespace

TrainResult train(const ModelParams<float>& init, const std::vector<Example>& examples, const TrainConfig& config,
                  const WeightScheme& scheme) {
  config.validate();
  TrainResult result{init, {}};
  result.history.scheme = scheme.name();
  result.history.scheme_parameter = scheme.parameter_text();
  if (config.epochs == 0 || examples.empty()) return result;

  bool labelled = true;
  for (const auto& ex : examples) {
    if (ex.tok.ids.size() > static_cast<std::size_t>(init.dims.context) ||
        ex.tok.ids.size() > config.max_sequence_length)
      throw TrainError("example " + ex.id + " exceeds the maximum sequence length");
    if (ex.labels.size() != ex.tok.output_count()) labelled = false;
  }
  if (scheme.needs_labels() && !labelled)
    throw TrainError(scheme.name() + " weighting needs group labels for every training example");

  const std::size_t batches_per_epoch = (examples.size() + config.batch_size - 1) / config.batch_size;
  long total_steps = static_cast<long>(batches_per_epoch) * config.epochs;
  if (config.max_steps > 0) total_steps = std::min(total_steps, config.max_steps);
  const long warmup = static_cast<long>(std::ceil(config.warmup_fraction * static_cast<double>(total_steps)));

  auto learning_rate = [&](long step) {
    if (step < warmup) return config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
    const long decay_span = std::max<long>(1, total_steps - warmup);
    const double frac = std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(decay_span));
    return config.learning_rate * (1.0 - (1.0 - config.final_lr_fraction) * frac);
  };

  ModelParams<float>& params = result.params;
  auto grads = ModelParams<float>::zeros(params.dims);
  Adam<float> adam(params.dims);
  Rng rng(config.seed);
  std::vector<std::size_t> order(examples.size());
  std::vector<ForwardCache<float>> caches(config.batch_size);
  IntervalStats interval;

  long step = 0;
  for (int epoch = 0; epoch < config.epochs && step < total_steps; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t b = 0; b < batches_per_epoch && step < total_steps; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(order.size(), begin + config.batch_size);

      std::vector<double> losses;
      std::vector<CoarseRole> labels;
      for (std::size_t i = begin; i < end; ++i) {
        const Example& ex = examples[order[i]];
        const auto& l = forward(params, ex.tok, caches[i - begin]);
        losses.insert(losses.end(), l.begin(), l.end());
        if (labelled) labels.insert(labels.end(), ex.labels.begin(), ex.labels.end());
      }
      const BatchObjective obj = batch_objective(losses, labels, scheme);
      if (!std::isfinite(obj.value)) {
        std::string ids;
        for (std::size_t i = begin; i < end; ++i) ids += (ids.empty() ? "" : ", ") + examples[order[i]].id;
        throw TrainError("non-finite loss at step " + std::to_string(step) + " in batch [" + ids + "]");
      }
      if (obj.fallback) ++result.history.fallback_batches;

      grads.values.setZero();
      std::size_t offset = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t n = caches[i - begin].output_count();
        backward(params, caches[i - begin], std::span<const double>(obj.coeff).subspan(offset, n), grads);
        offset += n;
      }
      const double norm = static_cast<double>(grads.values.norm());
      if (config.grad_clip > 0.0 && norm > config.grad_clip)
        grads.values *= static_cast<float>(config.grad_clip / norm);
      adam.step(params, grads, learning_rate(step));
      if (!params.is_finite()) throw TrainError("non-finite parameters after step " + std::to_string(step));
      ++step;

      for (std::size_t k = 0; k < losses.size(); ++k) {
        interval.sum_all += losses[k];
        ++interval.n_all;
        if (labelled) {
          if (labels[k] == CoarseRole::Boilerplate) {
            interval.sum_b += losses[k];
            ++interval.n_b;
          } else {
            interval.sum_r += losses[k];
            ++interval.n_r;
          }
        }
      }
      interval.w_b += obj.weights.boilerplate;
      interval.w_r += obj.weights.reasoning;
      interval.loss_b += obj.groups.boilerplate;
      interval.loss_r += obj.groups.reasoning;
      ++interval.batches;
      if (step % config.log_every == 0) interval.flush(step, result.history, labelled);
    }
  }
  interval.flush(step, result.history, labelled);
  result.history.steps = step;
  if (result.history.fallback_batches > 0)
    warn(std::to_string(result.history.fallback_batches) + " batch(es) had an empty group and used the token mean");
  return result;
}

TrainResult train(const ModelParams<float>& init, const Corpus& corpus, const Vocab& vocab, const TrainConfig& config,
                  const WeightScheme& scheme) {
  return train(init, make_examples(corpus, vocab, config.max_sequence_length), config, scheme);
}

EvalLoss evaluate(const ModelParams<float>& params, const std::vector<Example>& examples) {
  EvalLoss e;
  double sum = 0.0, sum_b = 0.0, sum_r = 0.0;
  ForwardCache<float> cache;
  for (const auto& ex : examples) {
    const auto& losses = forward(params, ex.tok, cache);
    const bool labelled = ex.labels.size() == losses.size();
    for (std::size_t k = 0; k < losses.size(); ++k) {
      sum += losses[k];
      ++e.n_all;
      if (!labelled) continue;
      if (ex.labels[k] == CoarseRole::Boilerplate) {
        sum_b += losses[k];
        ++e.n_boilerplate;
      } else {
        sum_r += losses[k];
        ++e.n_reasoning;
      }
    }
  }
  auto mean = [](double s, std::size_t n) { return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN(); };
  e.all = mean(sum, e.n_all);
  e.boilerplate = mean(sum_b, e.n_boilerplate);
  e.reasoning = mean(sum_r, e.n_reasoning);
  return e;
}

}  // namespace shad
