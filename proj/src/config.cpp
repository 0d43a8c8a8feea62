#include "ips/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ips {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

// strips a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

ConfigValue parse_scalar(const std::string& tok, int line) {
  ConfigValue v;
  v.line = line;
  if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
    v.kind = ConfigValue::Kind::String;
    v.text = tok.substr(1, tok.size() - 2);
    return v;
  }
  if (tok == "true" || tok == "false") {
    v.kind = ConfigValue::Kind::Boolean;
    v.boolean = tok == "true";
    return v;
  }
  try {
    std::size_t used = 0;
    v.number = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": cannot parse value '" + tok + "'");
  }
  v.kind = ConfigValue::Kind::Number;
  v.text = tok;
  return v;
}

}  // namespace

ConfigTree parse_toml(const std::string& text) {
  ConfigTree tree;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unterminated section");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(line) + ": empty section name");
      tree[section];
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    if (tree[section].count(key))
      throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
    if (val.front() == '[') {
      if (val.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unterminated array");
      ConfigValue v;
      v.kind = ConfigValue::Kind::Array;
      v.line = line;
      std::string inner = val.substr(1, val.size() - 2);
      std::istringstream items(inner);
      std::string item;
      while (std::getline(items, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        v.array.push_back(parse_scalar(item, line).number);
      }
      tree[section][key] = std::move(v);
    } else {
      tree[section][key] = parse_scalar(val, line);
    }
  }
  return tree;
}

namespace {

ConfigTree tree_from_json(const nlohmann::json& j) {
  ConfigTree tree;
  for (auto sec = j.begin(); sec != j.end(); ++sec) {
    if (!sec.value().is_object()) throw ConfigError("json config: top level must hold sections");
    for (auto kv = sec.value().begin(); kv != sec.value().end(); ++kv) {
      ConfigValue v;
      const auto& jv = kv.value();
      if (jv.is_string()) {
        v.kind = ConfigValue::Kind::String;
        v.text = jv.get<std::string>();
      } else if (jv.is_boolean()) {
        v.kind = ConfigValue::Kind::Boolean;
        v.boolean = jv.get<bool>();
      } else if (jv.is_number()) {
        v.kind = ConfigValue::Kind::Number;
        v.number = jv.get<double>();
        v.text = jv.dump();
      } else if (jv.is_array()) {
        v.kind = ConfigValue::Kind::Array;
        for (const auto& e : jv) v.array.push_back(e.get<double>());
      } else {
        throw ConfigError("json config: unsupported value for key '" + kv.key() + "'");
      }
      tree[sec.key()][kv.key()] = std::move(v);
    }
  }
  return tree;
}

}  // namespace

ConfigTree parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    try {
      return tree_from_json(nlohmann::json::parse(buf.str()));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("json config: ") + e.what());
    }
  }
  return parse_toml(buf.str());
}

namespace {

class SectionReader {
 public:
  SectionReader(const ConfigTree& tree, const std::string& name) : name_(name) {
    auto it = tree.find(name);
    if (it != tree.end()) entries_ = &it->second;
  }

  bool has(const std::string& key) const { return entries_ && entries_->count(key); }

  double number(const std::string& key, double fallback) {
    const ConfigValue* v = get(key);
    if (!v) return fallback;
    require(v, ConfigValue::Kind::Number, key);
    return v->number;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const ConfigValue* v = get(key);
    if (!v) return fallback;
    require(v, ConfigValue::Kind::String, key);
    return v->text;
  }

  bool boolean(const std::string& key, bool fallback) {
    const ConfigValue* v = get(key);
    if (!v) return fallback;
    require(v, ConfigValue::Kind::Boolean, key);
    return v->boolean;
  }

  std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
    const ConfigValue* v = get(key);
    if (!v) return fallback;
    require(v, ConfigValue::Kind::Number, key);
    try {
      return std::stoull(v->text);
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(v->line) + ": '" + key +
                        "' must be a nonnegative integer");
    }
  }

  std::vector<double> array(const std::string& key, std::vector<double> fallback) {
    const ConfigValue* v = get(key);
    if (!v) return fallback;
    require(v, ConfigValue::Kind::Array, key);
    return v->array;
  }

  void unknown_check() const {
    if (!entries_) return;
    for (const auto& [key, value] : *entries_)
      if (!consumed_.count(key))
        throw ConfigError("line " + std::to_string(value.line) + ": unknown key '" + name_ + "." +
                          key + "'");
  }

 private:
  const ConfigValue* get(const std::string& key) {
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    if (it == entries_->end()) return nullptr;
    consumed_.insert(key);
    return &it->second;
  }

  void require(const ConfigValue* v, ConfigValue::Kind kind, const std::string& key) const {
    if (v->kind != kind)
      throw ConfigError("line " + std::to_string(v->line) + ": wrong type for '" + name_ + "." +
                        key + "'");
  }

  std::string name_;
  const std::map<std::string, ConfigValue>* entries_ = nullptr;
  std::set<std::string> consumed_;
};

}  // namespace

ExperimentConfig ExperimentConfig::from_tree(const ConfigTree& tree) {
  static const std::set<std::string> known_sections = {"experiment", "graph",  "weight", "params",
                                                       "sim",        "init",   "analysis"};
  for (const auto& [sec, entries] : tree)
    if (!known_sections.count(sec)) {
      const int line = entries.empty() ? 0 : entries.begin()->second.line;
      throw ConfigError("line " + std::to_string(line) + ": unknown section '[" + sec + "]'");
    }

  ExperimentConfig c;
  SectionReader exp(tree, "experiment");
  c.preset = exp.text("preset", c.preset);
  c.analysis = exp.text("analysis", c.analysis);
  c.seed = exp.unsigned_int("seed", c.seed);
  c.sim.replicas = static_cast<int>(exp.number("replicas", 100));
  c.threads = static_cast<int>(exp.number("threads", 0));
  c.out_dir = exp.text("out", c.out_dir);
  exp.unknown_check();

  SectionReader gr(tree, "graph");
  c.graph_kind = gr.text("kind", c.graph_kind);
  c.dimension = static_cast<int>(gr.number("dimension", c.dimension));
  c.truncation = static_cast<int>(gr.number("truncation", c.truncation));
  c.edge_file = gr.text("edge_file", c.edge_file);
  gr.unknown_check();

  SectionReader wt(tree, "weight");
  if (wt.has("family") || wt.has("delta")) {
    c.weight_overridden = true;
    const std::string fam = wt.text("family", "exponential");
    const double delta = wt.number("delta", 1.0);
    if (fam == "exponential")
      c.weight_spec = WeightSpec::exponential(delta);
    else if (fam == "polynomial")
      c.weight_spec = WeightSpec::polynomial(delta);
    else if (fam == "constant")
      c.weight_spec = WeightSpec::constant();
    else
      throw ConfigError("weight.family must be exponential, polynomial, or constant");
  }
  wt.unknown_check();

  if (auto it = tree.find("params"); it != tree.end())
    for (const auto& [key, value] : it->second) {
      if (value.kind != ConfigValue::Kind::Number)
        throw ConfigError("line " + std::to_string(value.line) + ": params." + key +
                          " must be a number");
      c.params[key] = value.number;
    }

  SectionReader sim(tree, "sim");
  c.sim.dt = sim.number("dt", c.sim.dt);
  c.sim.horizon = sim.number("horizon", c.sim.horizon);
  c.sim.record_dt = sim.number("record_dt", c.sim.record_dt);
  c.sim.jump_cap = sim.number("jump_cap", c.sim.jump_cap);
  c.sim.delta_cut = sim.number("delta_cut", c.sim.delta_cut);
  c.sim.m_guard = sim.number("m_guard", c.sim.m_guard);
  sim.unknown_check();

  SectionReader init(tree, "init");
  c.init_kind = init.text("kind", c.init_kind);
  c.init_site = static_cast<int>(init.number("site", c.init_site));
  c.init_mass = init.number("mass", c.init_mass);
  init.unknown_check();

  SectionReader an(tree, "analysis");
  c.epsilon = an.number("epsilon", c.epsilon);
  c.burn_in = an.number("burn_in", c.burn_in);
  c.upper_mass = an.number("upper_mass", c.upper_mass);
  c.couple_factor = an.number("couple_factor", c.couple_factor);
  c.fit_lo = an.number("fit_lo", c.fit_lo);
  c.fit_hi = an.number("fit_hi", c.fit_hi);
  c.ctrw_rate = an.number("ctrw_rate", c.ctrw_rate);
  c.ctrw_walkers = static_cast<int>(an.number("ctrw_walkers", c.ctrw_walkers));
  c.aux_range = static_cast<int>(an.number("aux_range", c.aux_range));
  c.rate_floor = an.number("rate_floor", c.rate_floor);
  c.ctrw_times = an.array("ctrw_times", c.ctrw_times);
  an.unknown_check();

  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_tree(parse_config_file(path));
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> analyses = {"admit",     "simulate", "couple",
                                                 "contract",  "invariant", "spread",
                                                 "heatkernel", "oracle"};
  if (!analyses.count(analysis)) throw ConfigError("unknown analysis '" + analysis + "'");
  if (!is_preset(preset)) throw ConfigError("unknown preset '" + preset + "'");
  if (graph_kind != "zd" && graph_kind != "file")
    throw ConfigError("graph.kind must be 'zd' or 'file'");
  if (graph_kind == "file" && edge_file.empty())
    throw ConfigError("graph.kind 'file' needs graph.edge_file");
  if (init_kind != "point" && init_kind != "empty")
    throw ConfigError("init.kind must be 'point' or 'empty'");
  if (sim.replicas < 1) throw ConfigError("experiment.replicas must be >= 1");
  try {
    sim.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace ips
