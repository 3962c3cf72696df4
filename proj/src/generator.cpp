#include "shad/generator.hpp"

#include <algorithm>
#include <set>

#include "shad/rng.hpp"

namespace shad {

namespace {

struct Piece {
  bool is_slot = false;
  std::string text;  // literal text or slot name
};

struct Segment {
  RoleKind role = RoleKind::Format;
  std::vector<Piece> pieces;
};

const std::set<std::string>& step_slots() {
  static const std::set<std::string> names{"task", "tool", "param", "value", "verb"};
  return names;
}

std::vector<Piece> parse_pieces(const std::string& text, const std::string& where) {
  std::vector<Piece> pieces;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t open = text.find("${", pos);
    if (open == std::string::npos) {
      pieces.push_back({false, text.substr(pos)});
      break;
    }
    if (open > pos) pieces.push_back({false, text.substr(pos, open - pos)});
    std::size_t close = text.find('}', open);
    if (close == std::string::npos) throw ConfigError(where + ": unterminated slot");
    pieces.push_back({true, text.substr(open + 2, close - open - 2)});
    pos = close + 1;
  }
  return pieces;
}

std::vector<Segment> parse_template(const std::string& text, const std::string& where) {
  std::vector<Segment> segments;
  std::size_t pos = 0;
  RoleKind role = RoleKind::Format;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    if (end > start) segments.push_back({role, parse_pieces(text.substr(start, end - start), where)});
  };
  while (pos < text.size()) {
    if (text[pos] == '<' && pos + 2 < text.size() && text[pos + 2] == '>') {
      std::optional<RoleKind> next;
      switch (text[pos + 1]) {
        case 'F': next = RoleKind::Format; break;
        case 'T': next = RoleKind::TemplateConnecting; break;
        case 'R': next = RoleKind::Reasoning; break;
        case 'C': next = RoleKind::Copied; break;
        default: break;
      }
      if (next) {
        flush(pos);
        role = *next;
        pos += 3;
        start = pos;
        continue;
      }
    }
    ++pos;
  }
  flush(text.size());
  return segments;
}

const std::vector<std::string>& vocabulary(const GeneratorConfig& config, const std::string& name) {
  auto it = config.slot_vocabularies.find(name);
  if (it == config.slot_vocabularies.end()) throw ConfigError("slot '" + name + "' has no vocabulary");
  if (it->second.empty()) throw ConfigError("slot '" + name + "' has an empty vocabulary");
  return it->second;
}

void check_pieces(const GeneratorConfig& config, const std::vector<Piece>& pieces,
                  const std::set<std::string>& bound) {
  for (const auto& piece : pieces)
    if (piece.is_slot && !bound.count(piece.text)) vocabulary(config, piece.text);
}

struct StepBinding {
  std::string task, tool, param, value, verb;

  const std::string* lookup(const std::string& name) const {
    if (name == "task") return &task;
    if (name == "tool") return &tool;
    if (name == "param") return &param;
    if (name == "value") return &value;
    if (name == "verb") return &verb;
    return nullptr;
  }
};

class OutputBuilder {
 public:
  void append(std::string_view text, RoleKind role) {
    if (text.empty()) return;
    const std::size_t start = output_.size();
    output_ += text;
    if (!spans_.empty() && spans_.back().kind == role && spans_.back().end == start)
      spans_.back().end = output_.size();
    else
      spans_.push_back({start, output_.size(), role});
  }

  void render(const std::vector<Segment>& segments, const StepBinding* binding, const GeneratorConfig& config,
              Rng& rng) {
    for (const auto& segment : segments) {
      for (const auto& piece : segment.pieces) {
        if (!piece.is_slot) {
          append(piece.text, segment.role);
        } else if (const std::string* bound = binding ? binding->lookup(piece.text) : nullptr) {
          append(*bound, segment.role);
        } else {
          append(rng.pick(vocabulary(config, piece.text)), segment.role);
        }
      }
    }
  }

  std::string output_;
  std::vector<RoleSpan> spans_;
};

std::string fill(const std::vector<Piece>& pieces, const std::map<std::string, std::string>& values,
                 const GeneratorConfig& config, Rng& rng) {
  std::string out;
  for (const auto& piece : pieces) {
    if (!piece.is_slot) {
      out += piece.text;
    } else if (auto it = values.find(piece.text); it != values.end()) {
      out += it->second;
    } else {
      out += rng.pick(vocabulary(config, piece.text));
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

void validate(const GeneratorConfig& config) {
  if (config.n_samples < 1) throw ConfigError("n_samples must be at least 1");
  if (!(config.multi_step_ratio >= 0.0 && config.multi_step_ratio <= 1.0))
    throw ConfigError("multi_step_ratio must lie in [0, 1]");
  if (config.template_set.empty()) throw ConfigError("template_set is empty");
  if (config.multi_step_ratio > 0.0 && config.followup_templates.empty())
    throw ConfigError("multi-step samples requested but followup_templates is empty");
  if (config.domains.empty()) throw ConfigError("no domains configured");
  if (config.tools_listed < 2 || config.tools_listed > config.domains.size())
    throw ConfigError("tools_listed must lie in [2, number of domains]");

  for (const auto& domain : config.domains) {
    vocabulary(config, domain.tools);
    vocabulary(config, domain.verbs);
    if (domain.value_parts.empty()) throw ConfigError("domain " + domain.name + " has no value parts");
    for (const auto& part : domain.value_parts) vocabulary(config, part);
  }
  for (const auto& t : config.template_set)
    for (const auto& seg : parse_template(t, "template")) check_pieces(config, seg.pieces, step_slots());
  for (const auto& t : config.followup_templates)
    for (const auto& seg : parse_template(t, "followup template")) check_pieces(config, seg.pieces, step_slots());
  for (const auto& seg : parse_template(config.connector, "connector")) check_pieces(config, seg.pieces, {});
  check_pieces(config, parse_pieces(config.input_template, "input template"), {"tools", "query"});
  check_pieces(config, parse_pieces(config.single_query_template, "query template"), {"task1"});
  check_pieces(config, parse_pieces(config.multi_query_template, "query template"), {"task1", "task2"});
}

Corpus generate_corpus(const GeneratorConfig& config) {
  validate(config);

  std::vector<std::vector<Segment>> templates, followups;
  for (const auto& t : config.template_set) templates.push_back(parse_template(t, "template"));
  for (const auto& t : config.followup_templates) followups.push_back(parse_template(t, "followup template"));
  const auto connector = parse_template(config.connector, "connector");
  const auto input_pieces = parse_pieces(config.input_template, "input template");
  const auto single_query = parse_pieces(config.single_query_template, "query template");
  const auto multi_query = parse_pieces(config.multi_query_template, "query template");

  const std::size_t width = std::max<std::size_t>(4, std::to_string(config.n_samples - 1).size());

  Corpus corpus;
  corpus.provenance = SyntheticProvenance{config.seed, config.generator_version};
  Rng master(config.seed);
  for (std::size_t i = 0; i < config.n_samples; ++i) {
    Rng rng = master.fork(i);
    const std::size_t steps = rng.uniform() < config.multi_step_ratio ? 2 : 1;

    std::vector<std::size_t> domain_order(config.domains.size());
    for (std::size_t d = 0; d < domain_order.size(); ++d) domain_order[d] = d;
    rng.shuffle(domain_order);

    std::vector<StepBinding> bindings;
    for (std::size_t s = 0; s < steps; ++s) {
      const Domain& domain = config.domains[domain_order[s]];
      StepBinding b;
      b.tool = rng.pick(vocabulary(config, domain.tools));
      b.param = domain.param;
      b.verb = rng.pick(vocabulary(config, domain.verbs));
      std::vector<std::string> parts;
      for (const auto& part : domain.value_parts) parts.push_back(rng.pick(vocabulary(config, part)));
      b.value = join(parts, " ");
      b.task = b.verb + " " + b.value;
      bindings.push_back(std::move(b));
    }

    std::vector<std::string> tools;
    for (std::size_t t = 0; t < config.tools_listed; ++t)
      tools.push_back(t < steps ? bindings[t].tool : rng.pick(vocabulary(config, config.domains[domain_order[t]].tools)));
    rng.shuffle(tools);

    std::map<std::string, std::string> query_values{{"task1", bindings[0].task}};
    if (steps == 2) query_values["task2"] = bindings[1].task;
    const std::string query = fill(steps == 2 ? multi_query : single_query, query_values, config, rng);
    const std::string input = fill(input_pieces, {{"tools", join(tools, ", ")}, {"query", query}}, config, rng);

    OutputBuilder builder;
    builder.render(templates[rng.below(templates.size())], &bindings[0], config, rng);
    if (steps == 2) {
      builder.render(connector, nullptr, config, rng);
      builder.render(followups[rng.below(followups.size())], &bindings[1], config, rng);
    }

    std::string id = std::to_string(i);
    id = config.id_prefix + "-" + std::string(width - std::min(width, id.size()), '0') + id;
    corpus.samples.push_back({std::move(id), input, std::move(builder.output_), std::move(builder.spans_)});
  }
  return corpus;
}

namespace {

void add_shared_vocabularies(GeneratorConfig& c) {
  auto& v = c.slot_vocabularies;
  v["shop_verbs"] = {"find", "buy", "search for", "shop for", "compare"};
  v["weather_verbs"] = {"check the weather in", "get the forecast for"};
  v["flight_verbs"] = {"book a flight to", "find flights to"};
  v["recipe_verbs"] = {"cook", "find a recipe for", "make"};
  v["stock_verbs"] = {"check the stock price of", "get a quote for"};
  v["news_verbs"] = {"read news about", "get headlines on"};
  v["restaurant_verbs"] = {"find restaurants serving", "order"};

  v["gadget_attr"] = {"cheap", "wireless", "refurbished", "waterproof", "compact",
                      "premium", "lightweight", "gaming", "budget", "portable"};
  v["gadget"] = {"smart phones", "laptops", "tablets", "headphones", "smart watches",
                 "digital cameras", "bluetooth speakers", "monitors", "keyboards", "routers"};
  v["apparel_attr"] = {"red", "leather", "cotton", "vintage", "slim fit", "wool", "black", "summer", "kids", "striped"};
  v["apparel"] = {"running shoes", "winter jackets", "jeans", "sneakers", "handbags",
                  "sunglasses", "dresses", "hoodies", "boots", "backpacks"};
  v["city"] = {"new york", "san francisco", "london", "paris", "tokyo", "berlin",
               "boston", "chicago", "seattle", "madrid", "rome", "sydney"};
  v["dish_attr"] = {"spicy", "vegan", "quick", "gluten free", "creamy", "grilled"};
  v["dish"] = {"chicken curry", "pasta salad", "beef stew", "fried rice",
               "tomato soup", "fish tacos", "lentil soup", "pancakes"};
  v["company"] = {"apple", "tesla", "microsoft", "amazon", "nvidia", "netflix", "boeing", "intel", "walmart", "disney"};
  v["news_topic"] = {"climate change", "electric cars", "space travel", "football",
                     "elections", "artificial intelligence", "housing prices", "the olympics"};
  v["cuisine"] = {"thai food", "sushi", "pizza", "indian food", "tapas", "vegan food", "mexican food", "ramen"};

  v["electronics_tools"] = {"search_electronics", "gadget_finder", "tech_store_api", "electronics_catalog"};
  v["fashion_tools"] = {"search_fashion", "apparel_finder", "clothing_store_api", "fashion_catalog"};
  v["weather_tools"] = {"get_weather_forecast", "weather_api", "forecast_lookup", "climate_service"};
  v["flight_tools"] = {"search_flights", "flight_finder", "airfare_api", "travel_booking"};
  v["recipe_tools"] = {"recipe_finder", "cooking_api", "recipe_search", "meal_planner"};
  v["stock_tools"] = {"get_stock_quote", "stock_api", "market_data", "finance_lookup"};
  v["news_tools"] = {"news_headlines", "news_api", "headline_search", "news_feed"};
  v["restaurant_tools"] = {"find_restaurants", "restaurant_api", "dining_guide", "food_finder"};

  c.domains = {
      {"electronics", "electronics_tools", "query", "shop_verbs", {"gadget_attr", "gadget"}},
      {"fashion", "fashion_tools", "query", "shop_verbs", {"apparel_attr", "apparel"}},
      {"weather", "weather_tools", "city", "weather_verbs", {"city"}},
      {"flights", "flight_tools", "destination", "flight_verbs", {"city"}},
      {"recipes", "recipe_tools", "dish", "recipe_verbs", {"dish_attr", "dish"}},
      {"stocks", "stock_tools", "company", "stock_verbs", {"company"}},
      {"news", "news_tools", "topic", "news_verbs", {"news_topic"}},
      {"restaurants", "restaurant_tools", "cuisine", "restaurant_verbs", {"cuisine"}},
  };
  c.input_template = "System: you are a helpful agent. Use the tools to answer.\nTools: ${tools}\nQuery: ${query}";
  c.single_query_template = "please ${task1}";
  c.multi_query_template = "please ${task1} and then ${task2}";
}

}  // namespace

GeneratorConfig react_generator_config(std::size_t n_samples, std::uint64_t seed) {
  GeneratorConfig c;
  c.n_samples = n_samples;
  c.seed = seed;
  c.generator_version = "react-v1";
  add_shared_vocabularies(c);
  auto& v = c.slot_vocabularies;
  v["tc_open"] = {"Based on the user's request to", "The user wants me to", "To help the user"};
  v["tc_call"] = {", I should call the", ", so I will use the", ", the best tool is the"};
  v["tc_close"] = {"function.", "API to get the results.", "tool. This way I can answer the query."};
  v["tc_pick"] = {"The right API here is", "I can use"};
  v["tc_because"] = {"because the user wants to", "since I was asked to"};
  v["tc_next"] = {"Now I need to", "Next, I will", "After that, I should"};

  const std::string action = "<F>\nAction: <C>${tool}<F>\nAction Input: {\"${param}\": \"<C>${value}<F>\"}";
  c.template_set = {
      "<F>Thought: <T>${tc_open} <R>${task}<T>${tc_call} <R>${tool}<T> ${tc_close}" + action,
      "<F>Thought: <T>${tc_pick} <R>${tool}<T> ${tc_because} <R>${task}<T>." + action,
  };
  c.followup_templates = {
      "<F>Thought: <T>${tc_next} <R>${task}<T>${tc_call} <R>${tool}<T> ${tc_close}" + action,
  };
  c.connector = "<F>\nObservation:\n";
  return c;
}

GeneratorConfig pretrain_generator_config(std::size_t n_samples, std::uint64_t seed) {
  GeneratorConfig c;
  c.n_samples = n_samples;
  c.seed = seed;
  c.id_prefix = "pre";
  c.generator_version = "pretrain-v1";
  add_shared_vocabularies(c);
  auto& v = c.slot_vocabularies;
  v["pa_open"] = {"my plan is to", "the goal here is to", "this means i must"};
  v["pa_with"] = {"using", "via"};
  v["pb_open"] = {"selecting", "picking"};
  v["pb_for"] = {"in order to", "so as to"};
  v["pc_then"] = {"later", "afterwards"};

  c.template_set = {
      "<F>plan: <T>${pa_open} <R>${task}<T> ${pa_with} <R>${tool}<F>, call <C>${tool}<F>(${param}=<C>${value}<F>)",
      "<F>goal = <R>${task}<F>; tool = <R>${tool}<F>; ${param} = <C>${value}",
      "<T>${pb_open} <R>${tool}<T> ${pb_for} <R>${task}<F> -> <C>${tool}<F> ${param} <C>${value}",
  };
  c.followup_templates = {
      "<T>${pc_then} ${pa_open} <R>${task}<T> ${pa_with} <R>${tool}<F>, call <C>${tool}<F>(${param}=<C>${value}<F>)",
      "<F>goal = <R>${task}<F>; tool = <R>${tool}<F>; ${param} = <C>${value}",
  };
  c.connector = "<F> | ";
  return c;
}

}  // namespace shad
