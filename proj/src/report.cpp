#include "shad/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "shad/io.hpp"

namespace shad {

using ojson = nlohmann::ordered_json;

std::vector<RoleKind> all_buckets() {
  return {RoleKind::Format, RoleKind::TemplateConnecting, RoleKind::Reasoning, RoleKind::Copied};
}

const BucketRate* Misclassification::bucket(RoleKind kind) const {
  for (const auto& b : buckets)
    if (b.bucket == kind) return &b;
  return nullptr;
}

Misclassification misclassification_rate(const AnnotatedCorpus& annotated, const std::vector<RoleKind>& scope) {
  Misclassification m;
  for (RoleKind k : scope) m.buckets.push_back({k, 0, 0});
  auto slot = [&](RoleKind k) -> BucketRate* {
    for (auto& b : m.buckets)
      if (b.bucket == k) return &b;
    return nullptr;
  };
  for (const auto& sample : annotated.samples) {
    for (const auto& r : sample.tokens) {
      if (!r.truth) throw ReportError("sample " + sample.id + " has tokens without truth labels");
      BucketRate* b = slot(*r.truth);
      if (!b) continue;
      const bool wrong = r.predicted != coarse(*r.truth);
      ++b->total;
      b->wrong += wrong;
      if (*r.truth != RoleKind::Copied) {
        ++m.coarse_total;
        m.coarse_wrong += wrong;
      }
    }
  }
  for (const auto& b : m.buckets)
    if (b.total == 0) throw ReportError("no tokens in bucket " + std::string(to_string(b.bucket)));
  return m;
}

std::vector<ThresholdRow> format_threshold_sweep(const AnnotatedCorpus& annotated,
                                                 const std::vector<double>& thresholds) {
  std::vector<ThresholdRow> rows;
  for (double t : thresholds) {
    ThresholdRow row{t, 0.0, 0};
    std::size_t correct = 0;
    for (const auto& sample : annotated.samples) {
      for (const auto& r : sample.tokens) {
        if (!r.truth || r.predicted != CoarseRole::Boilerplate) continue;
        if (*r.truth != RoleKind::Format && *r.truth != RoleKind::TemplateConnecting) continue;
        ++row.tokens;
        correct += subcategorize(r, t) == *r.truth;
      }
    }
    row.accuracy = row.tokens ? static_cast<double>(correct) / static_cast<double>(row.tokens) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return format_sig(v, 6); }

struct Series {
  std::string scheme;
  std::string group;
  std::vector<std::pair<long, double>> points;
};

std::vector<Series> group_series(const std::vector<CurvePoint>& rows) {
  std::vector<Series> series;
  for (const auto& r : rows) {
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const Series& s) { return s.scheme == r.scheme && s.group == r.group; });
    if (it == series.end()) {
      series.push_back({r.scheme, r.group, {}});
      it = series.end() - 1;
    }
    it->points.emplace_back(r.step, r.loss);
  }
  return series;
}

double interpolate(const std::vector<std::pair<long, double>>& pts, long step) {
  if (step <= pts.front().first) return pts.front().second;
  if (step >= pts.back().first) return pts.back().second;
  auto hi = std::lower_bound(pts.begin(), pts.end(), step,
                             [](const std::pair<long, double>& p, long s) { return p.first < s; });
  if (hi->first == step) return hi->second;
  auto lo = hi - 1;
  const double f = static_cast<double>(step - lo->first) / static_cast<double>(hi->first - lo->first);
  return lo->second + f * (hi->second - lo->second);
}

}  // namespace

std::string LossCurves::csv() const {
  std::string out = "step,scheme,group,loss\n";
  for (const auto& r : rows)
    out += std::to_string(r.step) + "," + csv_field(r.scheme) + "," + csv_field(r.group) + "," +
           format_sig(r.loss) + "\n";
  return out;
}

std::string LossCurves::svg(const std::string& title) const {
  const double W = 720, H = 420, left = 70, right = 170, top = 40, bottom = 50;
  const auto series = group_series(rows);
  long min_step = 0, max_step = 1;
  double max_loss = 1e-9;
  bool first = true;
  for (const auto& r : rows) {
    if (first) {
      min_step = max_step = r.step;
      first = false;
    }
    min_step = std::min(min_step, r.step);
    max_step = std::max(max_step, r.step);
    max_loss = std::max(max_loss, r.loss);
  }
  if (max_step == min_step) max_step = min_step + 1;
  const double pw = W - left - right, ph = H - top - bottom;
  auto x = [&](long s) { return left + pw * static_cast<double>(s - min_step) / static_cast<double>(max_step - min_step); };
  auto y = [&](double l) { return top + ph * (1.0 - l / max_loss); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  static const char* dashes[] = {"", "6,4", "2,3", "8,3,2,3"};
  std::vector<std::string> schemes, groups;
  for (const auto& s : series) {
    if (std::find(schemes.begin(), schemes.end(), s.scheme) == schemes.end()) schemes.push_back(s.scheme);
    if (std::find(groups.begin(), groups.end(), s.group) == groups.end()) groups.push_back(s.group);
  }
  auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
    return static_cast<std::size_t>(std::find(v.begin(), v.end(), s) - v.begin());
  };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">" << xml_escape(title)
    << "</text>\n"
    << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double l = max_loss * i / 4.0;
    o << "<text x=\"" << left - 8 << "\" y=\"" << num(y(l) + 4) << "\" font-family=\"sans-serif\" font-size=\"11\" "
      << "text-anchor=\"end\">" << num(l) << "</text>\n";
    const long s = min_step + (max_step - min_step) * i / 4;
    o << "<text x=\"" << num(x(s)) << "\" y=\"" << top + ph + 18
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << s << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10
    << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">step</text>\n"
    << "<text x=\"16\" y=\"" << top + ph / 2 << "\" font-family=\"sans-serif\" font-size=\"12\" "
    << "transform=\"rotate(-90 16 " << top + ph / 2 << ")\" text-anchor=\"middle\">mean token loss</text>\n";

  for (const auto& s : series) {
    const std::size_t ci = index_of(schemes, s.scheme) % 6, di = index_of(groups, s.group) % 4;
    std::string points, values;
    for (const auto& [step, loss] : s.points) {
      if (!points.empty()) {
        points += ' ';
        values += ' ';
      }
      points += num(x(step)) + "," + num(y(loss));
      values += std::to_string(step) + ":" + format_sig(loss);
    }
    o << "<polyline class=\"series\" data-scheme=\"" << xml_escape(s.scheme) << "\" data-group=\""
      << xml_escape(s.group) << "\" data-values=\"" << values << "\" fill=\"none\" stroke=\"" << colors[ci]
      << "\" stroke-width=\"1.8\"";
    if (*dashes[di]) o << " stroke-dasharray=\"" << dashes[di] << "\"";
    o << " points=\"" << points << "\"/>\n";
  }

  double ly = top + 10;
  const double lx = W - right + 15;
  for (std::size_t i = 0; i < schemes.size(); ++i, ly += 18) {
    o << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 24 << "\" y2=\"" << ly << "\" stroke=\""
      << colors[i % 6] << "\" stroke-width=\"2\"/>\n"
      << "<text class=\"legend-scheme\" x=\"" << lx + 30 << "\" y=\"" << ly + 4
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(schemes[i]) << "</text>\n";
  }
  ly += 8;
  for (std::size_t i = 0; i < groups.size(); ++i, ly += 18) {
    o << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 24 << "\" y2=\"" << ly
      << "\" stroke=\"gray\" stroke-width=\"2\"";
    if (*dashes[i % 4]) o << " stroke-dasharray=\"" << dashes[i % 4] << "\"";
    o << "/>\n<text class=\"legend-group\" x=\"" << lx + 30 << "\" y=\"" << ly + 4
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(groups[i]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

LossCurves loss_curves(const std::vector<TrainHistory>& histories) {
  if (histories.empty()) throw ReportError("loss_curves needs at least one history");

  std::map<std::string, int> scheme_count;
  for (const auto& h : histories) ++scheme_count[h.scheme];
  std::vector<std::string> labels;
  for (const auto& h : histories)
    labels.push_back(scheme_count[h.scheme] > 1 && !h.scheme_parameter.empty()
                         ? h.scheme + "(" + h.scheme_parameter + ")"
                         : h.scheme);

  std::vector<std::vector<long>> grids;
  for (const auto& h : histories) {
    std::set<long> steps;
    for (const auto& r : h.rows)
      if (r.split == "train") steps.insert(r.step);
    grids.emplace_back(steps.begin(), steps.end());
  }
  bool same = true;
  for (const auto& g : grids) same = same && g == grids.front();
  std::size_t coarsest = 0;
  for (std::size_t i = 1; i < grids.size(); ++i)
    if (grids[i].size() < grids[coarsest].size()) coarsest = i;
  if (!same) warn("loss histories use different logging grids; resampling to the coarsest grid");

  LossCurves curves;
  for (std::size_t i = 0; i < histories.size(); ++i) {
    std::vector<CurvePoint> own;
    for (const auto& r : histories[i].rows)
      if (r.split == "train") own.push_back({r.step, labels[i], r.group, r.mean_loss});
    if (same) {
      curves.rows.insert(curves.rows.end(), own.begin(), own.end());
      continue;
    }
    for (const auto& s : group_series(own))
      for (long step : grids[coarsest]) curves.rows.push_back({step, s.scheme, s.group, interpolate(s.points, step)});
  }
  return curves;
}

std::string SweepTable::csv() const {
  std::string out = "inv_tau," + metric_name + ",final_w_r,error\n";
  for (const auto& r : rows)
    out += format_sig(r.inv_tau) + "," + (r.metric ? format_sig(*r.metric) : std::string()) + "," +
           format_sig(r.final_w_r) + "," + csv_field(r.error) + "\n";
  return out;
}

EvalFn heldout_reasoning_loss(const std::vector<Sample>& heldout, const Vocab& vocab, std::size_t max_length) {
  auto examples = std::make_shared<std::vector<Example>>(make_examples(heldout, vocab, max_length));
  return [examples](const ModelParams<float>& params) {
    const EvalLoss e = evaluate(params, *examples);
    if (e.n_reasoning == 0) throw ReportError("held-out set has no reasoning tokens");
    return e.reasoning;
  };
}

SweepTable tau_sweep(const ModelParams<float>& base, const Corpus& corpus, const Vocab& vocab,
                     const Labeling& labeling, const std::vector<double>& inv_taus, const TrainConfig& config,
                     const EvalFn& eval_fn) {
  if (inv_taus.empty()) throw ReportError("tau sweep needs at least one value");
  SweepTable table;
  std::vector<Example> examples = labelled_examples(corpus.samples, vocab, config.max_sequence_length, labeling);
  for (double inv : inv_taus) {
    SweepRow row;
    row.inv_tau = inv;
    try {
      const auto result = train(base, examples, config, WeightScheme::rft_inverse(inv));
      row.metric = eval_fn(result.params);
      for (const auto& r : result.history.rows)
        if (r.group == "all") row.final_w_r = r.w_r;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.inv_tau < b.inv_tau; });
  return table;
}

std::string MetricReport::json() const {
  ojson j;
  j["fingerprint"] = fingerprint;
  if (misclassification) {
    ojson buckets = ojson::array();
    for (const auto& b : misclassification->buckets)
      buckets.push_back({{"bucket", to_string(b.bucket)},
                         {"wrong", b.wrong},
                         {"total", b.total},
                         {"rate", ojson::parse(format_sig(b.rate()))}});
    j["misclassification"] = {{"buckets", buckets},
                              {"coarse_excluding_copied",
                               {{"wrong", misclassification->coarse_wrong},
                                {"total", misclassification->coarse_total},
                                {"rate", ojson::parse(format_sig(misclassification->coarse_rate()))}}}};
  }
  if (!thresholds.empty()) {
    ojson rows = ojson::array();
    for (const auto& t : thresholds)
      rows.push_back({{"threshold", ojson::parse(format_sig(t.threshold))},
                      {"accuracy", ojson::parse(format_sig(t.accuracy))},
                      {"tokens", t.tokens}});
    j["format_threshold_sweep"] = rows;
  }
  if (curves) {
    ojson rows = ojson::array();
    for (const auto& r : curves->rows)
      rows.push_back({{"step", r.step}, {"scheme", r.scheme}, {"group", r.group}, {"loss", ojson::parse(format_sig(r.loss))}});
    j["loss_curves"] = rows;
  }
  if (sweep) {
    ojson rows = ojson::array();
    for (const auto& r : sweep->rows) {
      ojson row{{"inv_tau", ojson::parse(format_sig(r.inv_tau))}};
      row[sweep->metric_name] = r.metric ? ojson::parse(format_sig(*r.metric)) : ojson(nullptr);
      row["final_w_r"] = ojson::parse(format_sig(r.final_w_r));
      if (!r.error.empty()) row["error"] = r.error;
      rows.push_back(std::move(row));
    }
    j["tau_sweep"] = {{"metric", sweep->metric_name},
                      {"note", "held-out reasoning-group loss is a proxy for task accuracy"},
                      {"rows", rows}};
  }
  return j.dump(2) + "\n";
}

}  // namespace shad
