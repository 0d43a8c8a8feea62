#include "ips/runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "ips/analysis.hpp"
#include "ips/spread.hpp"
#include "json.hpp"

namespace ips {

namespace {

using json = nlohmann::ordered_json;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class ArtifactWriter {
 public:
  ArtifactWriter(const ExperimentConfig& cfg) : cfg_(cfg), dir_(cfg.out_dir) {
    std::filesystem::create_directories(dir_);
    start_ = std::chrono::steady_clock::now();
  }

  std::ofstream open(const std::string& name) {
    artifacts_.push_back(name);
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write artifact: " + (dir_ / name).string());
    return out;
  }

  void write_json(const std::string& name, const json& j) {
    auto out = open(name);
    out << j.dump(2) << "\n";
  }

  void write_series(const std::string& name, const Series& s) {
    auto out = open(name);
    out << "t,value,stderr,bound\n";
    for (std::size_t i = 0; i < s.size(); ++i)
      out << fmt(s.t[i]) << ',' << fmt(s.value[i]) << ','
          << (i < s.stderr_.size() ? fmt(s.stderr_[i]) : "0") << ','
          << (i < s.bound.size() ? fmt(s.bound[i]) : "") << "\n";
  }

  void write_trajectories(const std::string& name, const Ensemble& ens) {
    auto out = open(name);
    out << "replica,t,site,mass,sup_mass\n";
    for (int r = 0; r < ens.count(); ++r) {
      const Trajectory& tr = ens.replicas[r];
      for (std::size_t i = 0; i < tr.times.size(); ++i)
        for (int s = 0; s < tr.states[i].size(); ++s)
          out << r << ',' << fmt(tr.times[i]) << ',' << s << ',' << fmt(tr.states[i][s]) << ','
              << fmt(tr.running_sup[i][s]) << "\n";
    }
  }

  // environment-only knobs (out dir, thread count) are left out: they do not
  // affect the data artifacts and would break byte-for-byte reproduction
  json config_echo() const {
    json c;
    c["experiment"] = {{"preset", cfg_.preset},
                       {"analysis", cfg_.analysis},
                       {"seed", cfg_.seed},
                       {"replicas", cfg_.sim.replicas}};
    c["graph"] = {{"kind", cfg_.graph_kind},
                  {"dimension", cfg_.dimension},
                  {"truncation", cfg_.truncation},
                  {"edge_file", cfg_.edge_file}};
    json params = json::object();
    for (const auto& [k, v] : cfg_.params) params[k] = v;
    c["params"] = params;
    c["sim"] = {{"dt", cfg_.sim.dt},
                {"horizon", cfg_.sim.horizon},
                {"record_dt", cfg_.sim.record_dt},
                {"jump_cap", cfg_.sim.jump_cap},
                {"delta_cut", cfg_.sim.delta_cut},
                {"m_guard", cfg_.sim.m_guard}};
    c["init"] = {{"kind", cfg_.init_kind}, {"site", cfg_.init_site}, {"mass", cfg_.init_mass}};
    return c;
  }

  // manifest is deterministic; wall time goes to run_stats.json which is
  // excluded from byte-for-byte reproduction checks
  void finish() {
    json manifest;
    manifest["version"] = kVersion;
    manifest["seed"] = cfg_.seed;
    manifest["analysis"] = cfg_.analysis;
    manifest["config"] = config_echo();
    manifest["artifacts"] = artifacts_;
    write_json("manifest.json", manifest);
    const auto wall =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_);
    std::ofstream stats(dir_ / "run_stats.json", std::ios::binary);
    stats << json{{"wall_ms", wall.count()}}.dump(2) << "\n";
  }

 private:
  const ExperimentConfig& cfg_;
  std::filesystem::path dir_;
  std::vector<std::string> artifacts_;
  std::chrono::steady_clock::time_point start_;
};

json report_admissibility(const AdmissibilityReport& rep) {
  json j;
  j["c1"] = rep.c1;
  j["c2_sup"] = rep.c2_sup;
  j["c3_sup"] = rep.c3_sup;
  j["c4"] = rep.c4;
  j["c5"] = rep.c5;
  j["c6"] = rep.c6;
  j["sum_v_c2"] = rep.sum_v_c2;
  j["small_jump_second_moment"] = rep.small_jump_second;
  j["moment_growth_C"] = rep.moment_growth_C;
  if (std::isfinite(rep.margin_A)) j["margin_A"] = rep.margin_A;
  if (rep.c1_uniform) j["c1_uniform"] = *rep.c1_uniform;
  j["pass"] = {{"A1", rep.a1}, {"A2", rep.a2}, {"A3", rep.a3},
               {"A4", rep.a4}, {"A5", rep.a5}, {"A6", rep.a6}};
  j["all_pass"] = rep.all_pass;
  if (!rep.failure.empty()) j["failure"] = rep.failure;
  return j;
}

Series attach_moment_bound(Series s, const AdmissibilityReport& rep, double init_norm) {
  for (double t : s.t) s.bound.push_back((1.0 + init_norm) * std::exp(rep.moment_growth_C * t));
  return s;
}

}  // namespace

ExperimentSetup build_setup(const ExperimentConfig& cfg) {
  Graph graph = cfg.graph_kind == "zd" ? Graph::lattice(cfg.dimension, cfg.truncation)
                                       : Graph::from_edge_file(cfg.edge_file);
  const WeightSpec weight =
      cfg.weight_overridden ? cfg.weight_spec : preset_weight(cfg.preset, cfg.params);
  ModelSpec model = make_preset(cfg.preset, graph, cfg.params);
  Configuration init = empty_configuration(graph.size());
  if (cfg.init_kind == "point") {
    const int site = cfg.init_site < 0 ? graph.origin() : cfg.init_site;
    if (site >= graph.size()) throw ConfigError("init.site out of range");
    init[site] = cfg.init_mass;
  }
  return {std::move(graph), weight, std::move(model), std::move(init)};
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  ExperimentSetup setup = build_setup(cfg);
  const Graph& graph = setup.graph;
  const Eigen::ArrayXd weights = weight_vector(graph, setup.weight);
  ArtifactWriter out(cfg);

  const AdmissibilityReport admit = admissibility_check(setup.model, graph, setup.weight);
  if (cfg.analysis == "admit") {
    out.write_json("report.json", report_admissibility(admit));
    out.finish();
    if (!admit.all_pass) {
      log << "admissibility failed: " << admit.failure << "\n";
      return kExitAdmissibility;
    }
    log << "admissible; C = (" << admit.c1 << ", " << admit.c2_sup << ", " << admit.c3_sup << ", "
        << admit.c4 << ", " << admit.c5 << ", " << admit.c6 << ")\n";
    return kExitOk;
  }
  if (!admit.all_pass) {
    log << "admissibility failed: " << admit.failure << "\n";
    out.finish();
    return kExitAdmissibility;
  }

  const CompiledModel compiled(setup.model, graph, setup.weight, cfg.sim);
  const double init_norm = norm(setup.init, weights);

  if (cfg.analysis == "simulate") {
    Ensemble ens = run_ensemble(compiled, setup.init, cfg.seed, cfg.sim, cfg.threads);
    out.write_series("series.csv", attach_moment_bound(moment_curve(ens, weights), admit, init_norm));
    out.write_trajectories("trajectory.csv", ens);
    const MeanTable means = site_means(ens);
    json rep;
    rep["replicas"] = ens.count();
    rep["aborted_tau_m"] = ens.aborted;
    std::uint64_t applied = 0, rejected = 0, imm = 0;
    for (const auto& tr : ens.replicas) {
      applied += tr.branch_applied;
      rejected += tr.branch_cap_rejected;
      imm += tr.immig_applied;
    }
    rep["branch_events_applied"] = applied;
    rep["branch_events_cap_rejected"] = rejected;
    rep["immigration_events_applied"] = imm;
    rep["dropped_small_jump_variance"] = compiled.dropped_small_jump_variance();
    json fm = json::array(), fs = json::array();
    const int last = static_cast<int>(means.times.size()) - 1;
    for (int s = 0; s < graph.size(); ++s) {
      fm.push_back(means.mean(last, s));
      fs.push_back(means.stderr_(last, s));
    }
    rep["final_mean"] = fm;
    rep["final_stderr"] = fs;
    out.write_json("report.json", rep);
    if (cfg.dump_events) {
      std::vector<LoggedEvent> events;
      SimHooks hooks{&events};
      NoiseFabric fabric{derive_replica_seed(cfg.seed, 0)};
      simulate_shared({&compiled}, {setup.init}, fabric, cfg.sim, hooks);
      auto jout = out.open("events.jsonl");
      for (const auto& e : events) {
        json line = {{"step", e.step},      {"site", e.source}, {"kind", std::string(1, e.kind)},
                     {"u", e.u},            {"size", e.size},   {"target", e.target}};
        jout << line.dump() << "\n";
      }
    }
    out.finish();
    log << "simulated " << ens.count() << " replicas, " << ens.aborted << " hit the tau_m guard\n";
    return kExitOk;
  }

  if (cfg.analysis == "couple") {
    const Configuration lower_init = cfg.couple_factor * setup.init;
    auto ens = run_coupled_ensemble({&compiled, &compiled}, {setup.init, lower_init}, cfg.seed,
                                    cfg.sim, cfg.threads);
    const Series violations = comparison_audit(ens[1], ens[0], weights);
    out.write_series("series.csv", violations);
    out.write_trajectories("trajectory_upper.csv", ens[0]);
    out.write_trajectories("trajectory_lower.csv", ens[1]);
    double vmax = 0.0;
    for (double v : violations.value) vmax = std::max(vmax, v);
    json rep;
    rep["replicas"] = ens[0].count();
    rep["aborted_tau_m"] = ens[0].aborted;
    rep["violation_max"] = vmax;
    rep["violation_integral"] = series_integral(violations);
    rep["jump_only"] = (setup.model.diffusion == 0.0).all();
    out.write_json("report.json", rep);
    out.finish();
    log << "coupled run: max ordering violation " << vmax << "\n";
    return kExitOk;
  }

  if (cfg.analysis == "contract") {
    const double margin = subcriticality_margin(setup.model, graph, setup.weight);
    if (!(margin > 0.0)) {
      log << "contract refused: not subcritical (A = " << margin << ")\n";
      out.finish();
      return kExitRefused;
    }
    const Configuration lower_init = cfg.couple_factor * setup.init;
    auto ens = run_coupled_ensemble({&compiled, &compiled}, {setup.init, lower_init}, cfg.seed,
                                    cfg.sim, cfg.threads);
    const ContractionReport rep = w1_ordered(ens[0], ens[1], weights, margin);
    out.write_series("series.csv", rep.series);
    json j;
    j["margin_A"] = rep.margin;
    j["fitted_rate"] = rep.fitted_rate;
    j["rate_stderr"] = rep.rate_stderr;
    j["pass"] = rep.pass;
    out.write_json("report.json", j);
    out.finish();
    log << "contraction: A = " << margin << ", fitted rate " << rep.fitted_rate
        << (rep.pass ? " (pass)" : " (FAIL)") << "\n";
    return kExitOk;
  }

  if (cfg.analysis == "invariant") {
    const auto [A, b] = mean_field_matrix(setup.model, graph);
    double upper_mass = cfg.upper_mass;
    if (upper_mass <= 0.0) {
      const Eigen::VectorXd st = stationary_mean(A, b);
      upper_mass = 5.0 * std::max(st.maxCoeff(), 0.2);
    }
    const Configuration upper = Configuration::Constant(graph.size(), upper_mass);
    const double burn_in = cfg.burn_in > 0.0 ? cfg.burn_in : cfg.sim.horizon / 2.0;
    InvariantReport rep;
    try {
      rep = invariant_probe(compiled, upper, cfg.seed, cfg.sim, burn_in, cfg.threads);
    } catch (const UnsupportedAnalysis& e) {
      log << "invariant refused: " << e.what() << "\n";
      out.finish();
      return kExitRefused;
    }
    out.write_series("series.csv", rep.sandwich);
    json j;
    j["margin_A"] = rep.margin;
    j["fitted_rate"] = rep.fitted_rate;
    j["ks_pvalue"] = rep.ks_pvalue;
    json st = json::array(), lm = json::array(), ls = json::array();
    for (int s = 0; s < graph.size(); ++s) {
      st.push_back(rep.stationary[s]);
      lm.push_back(rep.long_run_mean[s]);
      ls.push_back(rep.long_run_stderr[s]);
    }
    j["stationary_mean"] = st;
    j["long_run_mean"] = lm;
    j["long_run_stderr"] = ls;
    j["mean_pass"] = rep.mean_pass;
    j["rate_pass"] = rep.rate_pass;
    j["ks_pass"] = rep.ks_pass;
    out.write_json("report.json", j);
    out.finish();
    log << "invariant probe: rate " << rep.fitted_rate << ", KS p " << rep.ks_pvalue << "\n";
    return kExitOk;
  }

  if (cfg.analysis == "spread") {
    Ensemble ens = run_ensemble(compiled, setup.init, cfg.seed, cfg.sim, cfg.threads);
    const int x0 = cfg.init_site < 0 ? graph.origin() : cfg.init_site;
    const double T = cfg.sim.horizon;
    const double lo = cfg.fit_lo > 0.0 ? cfg.fit_lo : T / 4.0;
    const double hi = cfg.fit_hi > 0.0 ? cfg.fit_hi : T;
    const FrontSpeedReport front = front_speed(ens, graph, x0, cfg.epsilon, lo, hi);
    {
      auto rcsv = out.open("radius.csv");
      rcsv << "t,mean_radius,stderr,envelope_radius\n";
      for (std::size_t i = 0; i < front.mean_radius.size(); ++i)
        rcsv << fmt(front.mean_radius.t[i]) << ',' << fmt(front.mean_radius.value[i]) << ','
             << fmt(front.mean_radius.stderr_[i]) << ',' << fmt(front.envelope_radius.value[i])
             << "\n";
    }
    json j;
    j["degenerate"] = front.degenerate;
    j["slope"] = front.slope;
    j["slope_stderr"] = front.slope_stderr;
    j["r2"] = front.r2;
    j["mean_slope"] = front.mean_slope;
    // containment of the occupied set in B(x0, 1.5 slope t) at two late times
    json containment = json::array();
    for (double t : {T / 2.0, T}) {
      const double cl = 1.5 * front.slope;
      int worst = 0;
      bool ok = true;
      for (const auto& tr : ens.replicas) {
        if (tr.aborted()) continue;
        const int r = front_radius(tr, graph, x0, cfg.epsilon, tr.grid_index(t));
        worst = std::max(worst, r);
        if (static_cast<double>(r) > cl * t) ok = false;
      }
      containment.push_back({{"t", t}, {"radius_max", worst}, {"bound", cl * t}, {"pass", ok}});
    }
    j["containment"] = containment;
    const int d_lo = static_cast<int>(front.slope * T) + 2;
    const int d_hi = graph.truncation() > 0 ? graph.truncation() - 2 : graph.size() - 1;
    const SupProfile prof = sup_moment_profile(ens, graph, x0, T, d_lo, d_hi);
    {
      auto pcsv = out.open("profile.csv");
      pcsv << "dist,mean_sup,stderr\n";
      for (std::size_t i = 0; i < prof.dist.size(); ++i)
        pcsv << prof.dist[i] << ',' << fmt(prof.mean_sup[i]) << ',' << fmt(prof.stderr_[i]) << "\n";
    }
    j["profile_fitted_c"] = prof.fitted_c;
    j["profile_fit_points"] = prof.fit_points;
    out.write_json("report.json", j);
    out.finish();
    log << "spread: slope " << front.slope << " (r2 " << front.r2 << "), profile c "
        << prof.fitted_c << "\n";
    return kExitOk;
  }

  if (cfg.analysis == "heatkernel") {
    const Graph ghat = auxiliary_graph(graph, cfg.aux_range);
    const int x0 = cfg.init_site < 0 ? graph.origin() : cfg.init_site;
    NoiseFabric fabric{cfg.seed};
    const KernelEstimate est =
        ctrw_simulate(ghat, cfg.ctrw_rate, x0, cfg.ctrw_times, fabric, cfg.ctrw_walkers);
    // audit window: interior sites, the ones with full fattened degree
    std::vector<std::uint8_t> window(ghat.size(), 0);
    for (int s = 0; s < ghat.size(); ++s) window[s] = ghat.degree(s) == ghat.max_degree();
    double m = cfg.rate_floor;
    if (m <= 0.0) {
      int mindeg = ghat.max_degree();
      for (int s = 0; s < ghat.size(); ++s)
        if (window[s]) mindeg = std::min(mindeg, ghat.degree(s));
      m = cfg.ctrw_rate * mindeg;
    }
    const AuditTable audit = kernel_bound_audit(est, ghat, m, window);
    {
      auto kcsv = out.open("kernel.csv");
      kcsv << "t,site,dhat,khat,bound,se,violation\n";
      for (const auto& row : audit.rows)
        kcsv << fmt(row.t) << ',' << row.site << ',' << row.dhat << ',' << fmt(row.khat) << ','
             << fmt(row.bound) << ',' << fmt(row.se) << ',' << (row.violation ? 1 : 0) << "\n";
    }
    json j;
    j["walkers"] = est.walkers;
    j["rate_floor_m"] = m;
    j["audited"] = audit.rows.size();
    j["vacuous"] = audit.vacuous;
    j["violations"] = audit.violations;
    out.write_json("report.json", j);
    out.finish();
    log << "heat kernel audit: " << audit.violations << " violations over " << audit.rows.size()
        << " audited entries\n";
    return kExitOk;
  }

  if (cfg.analysis == "oracle") {
    std::pair<Eigen::MatrixXd, Eigen::VectorXd> mf;
    try {
      mf = mean_field_matrix(setup.model, graph);
    } catch (const UnsupportedAnalysis& e) {
      log << "oracle refused: " << e.what() << "\n";
      out.finish();
      return kExitRefused;
    }
    auto ocsv = out.open("oracle.csv");
    ocsv << "t,site,mean\n";
    for (double t : record_grid(cfg.sim)) {
      const Eigen::VectorXd m = mean_oracle(mf.first, mf.second, setup.init.matrix(), t);
      for (int s = 0; s < graph.size(); ++s) ocsv << fmt(t) << ',' << s << ',' << fmt(m[s]) << "\n";
    }
    json j;
    j["margin_A"] = admit.margin_A;
    out.write_json("report.json", j);
    out.finish();
    return kExitOk;
  }

  throw ConfigError("unknown analysis '" + cfg.analysis + "'");
}

}  // namespace ips
