// Model presets: the four example families, with the parameter names of the
// coefficient tuple (b, a, m, lambda, c, g, alpha, phi, psi, R).
#include <stdexcept>

#include "ips/model.hpp"

namespace ips {

namespace {

std::map<std::string, double> merge(const std::map<std::string, double>& defaults,
                                    const std::map<std::string, double>& overrides) {
  std::map<std::string, double> out = defaults;
  for (const auto& [k, val] : overrides) {
    auto it = out.find(k);
    if (it == out.end()) throw std::invalid_argument("preset: unknown parameter '" + k + "'");
    it->second = val;
  }
  return out;
}

void add_branch_atoms(ModelSpec& m, const Graph& g, double own_z, double own_rate, double nbr_z,
                      double nbr_rate) {
  for (int y = 0; y < g.size(); ++y) {
    auto& list = m.branch_measures[y];
    if (own_rate > 0.0)
      list.push_back({y, LevyMeasure1D::finite_atoms({{own_z, own_rate}})});
    if (nbr_rate > 0.0)
      for (auto it = g.neighbors_begin(y); it != g.neighbors_end(y); ++it)
        list.push_back({*it, LevyMeasure1D::finite_atoms({{nbr_z, nbr_rate}})});
  }
}

}  // namespace

const std::vector<PresetInfo>& list_presets() {
  static const std::vector<PresetInfo> catalog = {
      {"cbi",
       "multi-type branching with immigration: affine drift, critical own-site "
       "branching noise, Poisson immigration",
       {{"b0", 1.0},   {"a1", 0.2},      {"m0", 1.0},       {"lambda", 1.0}, {"c0", 0.5},
        {"g0", 1.0},   {"jump_z", 0.5},  {"jump_rate", 2.0}, {"imm_z", 0.5},  {"imm_rate", 0.4},
        {"rho0", 1.0}, {"delta", 0.5}}},
      {"stable-competition",
       "local branching driven by spectrally positive stable noise with "
       "quadratic competition",
       {{"alpha", 1.5}, {"g0", 0.25},    {"c0", 0.25},      {"m0", 1.0},    {"lambda", 2.0},
        {"a1", 0.1},    {"b0", 0.05},    {"imm_z", 0.5},    {"imm_rate", 0.4}, {"rho0", 1.0},
        {"delta", 0.5}}},
      {"nearest-neighbor",
       "nearest-neighbor branching with unit jumps: drift feeds neighbors, "
       "branch events deposit unit masses on neighbors",
       {{"c0", 0.5}, {"g0", 1.0}, {"m0", 0.0}, {"lambda", 1.0}, {"a1", 1.0},
        {"b0", 0.0}, {"jump_z", 1.0}, {"jump_rate", 1.0}, {"delta", 1.0}}},
      {"branching-rw",
       "continuous-time branching random walk: pure jumps, drift restores the "
       "compensated own-site branching mean",
       {{"g0", 1.0}, {"own_rate", 1.0}, {"nbr_rate", 0.5}, {"jump_z", 1.0}, {"c0", 0.0},
        {"m0", 0.0}, {"lambda", 1.0}, {"b0", 0.0}, {"delta", 1.0}}},
  };
  return catalog;
}

bool is_preset(const std::string& name) {
  for (const auto& p : list_presets())
    if (p.name == name) return true;
  return false;
}

static const PresetInfo& find_preset(const std::string& name) {
  for (const auto& p : list_presets())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown preset: " + name);
}

WeightSpec preset_weight(const std::string& name, const std::map<std::string, double>& overrides) {
  const auto p = merge(find_preset(name).defaults, overrides);
  return WeightSpec::exponential(p.at("delta"));
}

ModelSpec make_preset(const std::string& name, const Graph& g,
                      const std::map<std::string, double>& overrides) {
  const auto p = merge(find_preset(name).defaults, overrides);
  const int n = g.size();
  ModelSpec m = ModelSpec::zero(n);
  m.kill_exponent = p.count("lambda") ? p.at("lambda") : 1.0;
  m.kill_strength = Eigen::ArrayXd::Constant(n, p.at("m0"));
  m.diffusion = Eigen::ArrayXd::Constant(n, p.at("c0"));
  m.branch_rate = Eigen::ArrayXd::Constant(n, p.at("g0"));
  m.immigration_base = Eigen::ArrayXd::Constant(n, p.at("b0"));
  m.range = 1;

  const WeightSpec w = WeightSpec::exponential(p.at("delta"));

  if (name == "nearest-neighbor") {
    const KernelSpec k = KernelSpec::nearest_neighbor(p.at("a1"));
    m.interaction = build_kernel(k, g);
    m.c1_uniform = kernel_c1_uniform(k, g, w);
    add_branch_atoms(m, g, 0.0, 0.0, p.at("jump_z"), p.at("jump_rate"));
  } else if (name == "cbi") {
    const KernelSpec k = KernelSpec::nearest_neighbor(p.at("a1"));
    m.interaction = build_kernel(k, g);
    m.c1_uniform = kernel_c1_uniform(k, g, w);
    add_branch_atoms(m, g, p.at("jump_z"), p.at("jump_rate"), 0.0, 0.0);
    if (p.at("imm_rate") > 0.0)
      for (int x = 0; x < n; ++x)
        m.immigration_measures[x] = LevyMeasure1D::finite_atoms({{p.at("imm_z"), p.at("imm_rate")}});
    m.rho_const = Eigen::ArrayXd::Constant(n, p.at("rho0"));
  } else if (name == "stable-competition") {
    const KernelSpec k = KernelSpec::nearest_neighbor(p.at("a1"));
    m.interaction = build_kernel(k, g);
    m.c1_uniform = kernel_c1_uniform(k, g, w);
    for (int y = 0; y < n; ++y)
      m.branch_measures[y].push_back({y, LevyMeasure1D::stable(p.at("alpha"))});
    if (p.at("imm_rate") > 0.0)
      for (int x = 0; x < n; ++x)
        m.immigration_measures[x] = LevyMeasure1D::finite_atoms({{p.at("imm_z"), p.at("imm_rate")}});
    m.rho_const = Eigen::ArrayXd::Constant(n, p.at("rho0"));
  } else if (name == "branching-rw") {
    // a(x,x) = g0 * own_rate * jump_z undoes the own-site compensation.
    const double diag = p.at("g0") * p.at("own_rate") * p.at("jump_z");
    const KernelSpec k = KernelSpec::nearest_neighbor(0.0, diag);
    m.interaction = build_kernel(k, g);
    m.c1_uniform = kernel_c1_uniform(k, g, w);
    add_branch_atoms(m, g, p.at("jump_z"), p.at("own_rate"), p.at("jump_z"), p.at("nbr_rate"));
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return m;
}

}  // namespace ips
