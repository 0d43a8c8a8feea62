#include <cmath>

#include "doctest.h"
#include "ips/analysis.hpp"
#include "ips/simulator.hpp"

using namespace ips;

namespace {

SimParams quick(double dt, double horizon, double record_dt, int replicas = 1) {
  SimParams p;
  p.dt = dt;
  p.horizon = horizon;
  p.record_dt = record_dt;
  p.replicas = replicas;
  return p;
}

ModelSpec single_site() { return ModelSpec::zero(1); }

}  // namespace

TEST_CASE("pure death matches the exponential decay") {
  Graph g = Graph::lattice(1, 0);
  ModelSpec m = single_site();
  m.kill_strength[0] = 1.0;
  const SimParams p = quick(1e-3, 1.0, 0.25);
  const CompiledModel cm(m, g, WeightSpec::constant(), p);
  const Trajectory tr = simulate(cm, point_mass(1, 0), NoiseFabric{1}, p);
  CHECK(std::abs(tr.states.back()[0] - std::exp(-1.0)) < 0.002);
  CHECK(tr.stop == StopReason::Horizon);
}

TEST_CASE("the empty state is absorbing without immigration") {
  Graph g = Graph::lattice(1, 3);
  const ModelSpec m = make_preset("nearest-neighbor", g);
  const SimParams p = quick(1e-3, 0.5, 0.1);
  const CompiledModel cm(m, g, preset_weight("nearest-neighbor"), p);
  const Trajectory tr = simulate(cm, empty_configuration(g.size()), NoiseFabric{2}, p);
  for (const auto& state : tr.states) CHECK((state == 0.0).all());
}

TEST_CASE("conservation with all coefficients off") {
  Graph g = Graph::lattice(1, 3);
  const ModelSpec m = ModelSpec::zero(g.size());
  const SimParams p = quick(1e-2, 2.0, 0.5);
  const CompiledModel cm(m, g, WeightSpec::constant(), p);
  Configuration init = point_mass(g.size(), 0, 1.5);
  init[2] = 0.25;
  const Trajectory tr = simulate(cm, init, NoiseFabric{3}, p);
  for (const auto& state : tr.states) CHECK((state == init).all());
}

TEST_CASE("immigration alone is compound Poisson") {
  // single atom size 0.5 at rate 2, rho = 1: mean mass at T is lambda z T
  Graph g = Graph::lattice(1, 0);
  ModelSpec m = single_site();
  m.immigration_measures[0] = LevyMeasure1D::finite_atoms({{0.5, 2.0}});
  m.rho_const[0] = 1.0;
  SimParams p = quick(1e-3, 1.0, 0.5, 4000);
  const CompiledModel cm(m, g, WeightSpec::constant(), p);
  const Ensemble ens = run_ensemble(cm, empty_configuration(1), 11, p);
  const Series curve = moment_curve(ens, cm.weights());
  CHECK(std::abs(curve.value.back() - 1.0) <= 3.0 * curve.stderr_.back());
  CHECK(curve.value.back() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("replay determinism") {
  Graph g = Graph::lattice(1, 4);
  const ModelSpec m = make_preset("cbi", g);
  const SimParams p = quick(1e-3, 0.5, 0.1);
  const CompiledModel cm(m, g, preset_weight("cbi"), p);
  const Configuration init = point_mass(g.size(), g.origin());
  const Trajectory a = simulate(cm, init, NoiseFabric{77}, p);
  const Trajectory b = simulate(cm, init, NoiseFabric{77}, p);
  REQUIRE(a.times == b.times);
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    CHECK((a.states[i] == b.states[i]).all());
    CHECK((a.running_sup[i] == b.running_sup[i]).all());
  }
  CHECK(a.branch_applied == b.branch_applied);
  CHECK(a.immig_applied == b.immig_applied);
}

TEST_CASE("single-site diffusion keeps its mean near the absorbing boundary") {
  // pure sqrt diffusion is a martingale; the absorption-corrected step must
  // not inflate masses of the order of c*dt
  Graph g = Graph::lattice(1, 0);
  ModelSpec m = single_site();
  m.diffusion[0] = 0.5;
  SimParams p = quick(1e-3, 0.25, 0.25, 100000);
  const CompiledModel cm(m, g, WeightSpec::constant(), p);
  const double x0 = 1e-3;
  const Ensemble ens = run_ensemble(cm, point_mass(1, 0, x0), 17, p);
  double mean = 0.0, ss = 0.0;
  for (const auto& tr : ens.replicas) {
    mean += tr.states.back()[0];
    ss += tr.states.back()[0] * tr.states.back()[0];
  }
  mean /= ens.count();
  const double se = std::sqrt((ss / ens.count() - mean * mean) / ens.count());
  CHECK(std::abs(mean - x0) <= 4.0 * se);
  CHECK(std::abs(mean - x0) < 0.2 * x0);
}

TEST_CASE("replica means match the matrix exponential oracle") {
  Graph g = Graph::lattice(1, 2);
  const ModelSpec m = make_preset("nearest-neighbor", g);
  const WeightSpec w = preset_weight("nearest-neighbor");
  SimParams p = quick(2e-3, 0.5, 0.25, 4000);
  const CompiledModel cm(m, g, w, p);
  REQUIRE(cm.mean_exact());
  const Configuration init = point_mass(g.size(), g.origin());
  const Ensemble ens = run_ensemble(cm, init, 101, p);
  const MeanTable table = site_means(ens);
  const auto [A, b] = mean_field_matrix(m, g);
  for (std::size_t i = 1; i < table.times.size(); ++i) {
    const Eigen::VectorXd oracle = mean_oracle(A, b, init.matrix(), table.times[i]);
    for (int s = 0; s < g.size(); ++s) {
      INFO("t=", table.times[i], " site=", s);
      CHECK(std::abs(table.mean(i, s) - oracle[s]) <=
            4.0 * table.stderr_(i, s) + 0.01 * oracle[s] + 1e-12);
    }
  }
}

TEST_CASE("jump-only coupled ordering is exact") {
  Graph g = Graph::lattice(1, 6);
  const ModelSpec m = make_preset("nearest-neighbor", g, {{"c0", 0.0}});
  const WeightSpec w = preset_weight("nearest-neighbor");
  SimParams p = quick(1e-3, 1.0, 0.05, 200);
  const CompiledModel cm(m, g, w, p);
  const Configuration upper = point_mass(g.size(), g.origin());
  const Configuration lower = 0.5 * upper;
  auto ens = run_coupled_ensemble({&cm, &cm}, {upper, lower}, 7, p);
  const Series audit = comparison_audit(ens[1], ens[0], cm.weights());
  for (double v : audit.value) CHECK(v == 0.0);
  // identical inputs give identical trajectories
  auto twins = simulate_coupled(cm, cm, upper, upper, NoiseFabric{9}, p);
  for (std::size_t i = 0; i < twins.first.states.size(); ++i)
    CHECK((twins.first.states[i] == twins.second.states[i]).all());
}

TEST_CASE("diffusive coupling is order-preserving at every step size") {
  // the shared Gaussian can only invert the order of two masses by driving
  // the lower candidate negative, where it is absorbed; so even with the
  // diffusion on, ordered starts stay ordered pathwise
  Graph g = Graph::lattice(1, 5);
  const WeightSpec w = preset_weight("nearest-neighbor");
  const Configuration upper = point_mass(g.size(), g.origin());
  const Configuration lower = 0.5 * upper;
  for (double dt : {4e-3, 1e-3}) {
    const ModelSpec m = make_preset("nearest-neighbor", g);
    SimParams p = quick(dt, 0.48, 0.08, 400);
    const CompiledModel cm(m, g, w, p);
    auto ens = run_coupled_ensemble({&cm, &cm}, {upper, lower}, 13, p);
    const double integral = series_integral(comparison_audit(ens[1], ens[0], cm.weights()));
    CHECK(integral <= 1e-15);
  }
}

TEST_CASE("restriction coupling keeps the restricted run below") {
  Graph g = Graph::lattice(1, 6);
  const ModelSpec full = make_preset("nearest-neighbor", g, {{"c0", 0.0}});
  std::vector<std::uint8_t> inside(g.size(), 0);
  for (int s = 0; s < g.size(); ++s)
    if (g.l1_from_origin(s) <= 2) inside[s] = 1;
  const ModelSpec restricted = restrict_model(full, inside);
  const WeightSpec w = preset_weight("nearest-neighbor");
  SimParams p = quick(1e-3, 1.0, 0.1, 100);
  const CompiledModel cm_full(full, g, w, p);
  const CompiledModel cm_res(restricted, g, w, p);
  const Configuration init = point_mass(g.size(), g.origin());
  auto ens = run_coupled_ensemble({&cm_full, &cm_res}, {init, init}, 23, p);
  const Series audit = comparison_audit(ens[1], ens[0], cm_full.weights());
  for (double v : audit.value) CHECK(v == 0.0);
}

TEST_CASE("nested volumes increase monotonically and differences decay") {
  Graph g = Graph::lattice(1, 8);
  const ModelSpec m = make_preset("nearest-neighbor", g, {{"c0", 0.0}});
  const WeightSpec w = preset_weight("nearest-neighbor");
  SimParams p = quick(2e-3, 1.0, 0.25);
  std::vector<std::vector<std::uint8_t>> volumes;
  for (int L : {2, 4, 8}) {
    std::vector<std::uint8_t> mask(g.size(), 0);
    for (int s = 0; s < g.size(); ++s)
      if (g.l1_from_origin(s) <= L) mask[s] = 1;
    volumes.push_back(mask);
  }
  const Eigen::ArrayXd v = weight_vector(g, w);
  const Configuration init = point_mass(g.size(), g.origin());
  double gap_small = 0.0, gap_large = 0.0;
  const int reps = 300;
  for (int r = 0; r < reps; ++r) {
    NoiseFabric fabric{derive_replica_seed(31, static_cast<std::uint64_t>(r))};
    const auto trajs = finite_volume_refine(m, g, w, init, fabric, p, volumes);
    REQUIRE(trajs.size() == 3);
    for (std::size_t i = 0; i + 1 < trajs.size(); ++i)
      for (std::size_t k = 0; k < trajs[i].states.size(); ++k)
        CHECK(positive_part_distance(trajs[i].states[k], trajs[i + 1].states[k], v) == 0.0);
    gap_small += norm(trajs[1].states.back() - trajs[0].states.back(), v);
    gap_large += norm(trajs[2].states.back() - trajs[1].states.back(), v);
  }
  CHECK(gap_large < gap_small);

  // identical volumes give identical runs
  const auto twins =
      finite_volume_refine(m, g, w, init, NoiseFabric{5}, p, {volumes[1], volumes[1]});
  for (std::size_t k = 0; k < twins[0].states.size(); ++k)
    CHECK((twins[0].states[k] == twins[1].states[k]).all());

  // an empty initial state stays empty in every volume
  const auto empty = finite_volume_refine(m, g, w, empty_configuration(g.size()), NoiseFabric{6},
                                          p, volumes);
  for (const auto& tr : empty)
    for (const auto& state : tr.states) CHECK((state == 0.0).all());
}

TEST_CASE("positivity holds in every recorded state") {
  Graph g = Graph::lattice(1, 5);
  const ModelSpec m = make_preset("cbi", g);
  SimParams p = quick(1e-3, 1.0, 0.1, 50);
  const CompiledModel cm(m, g, preset_weight("cbi"), p);
  const Ensemble ens = run_ensemble(cm, point_mass(g.size(), g.origin(), 2.0), 37, p);
  for (const auto& tr : ens.replicas)
    for (const auto& state : tr.states) CHECK((state >= 0.0).all());
}

TEST_CASE("running suprema never decrease") {
  Graph g = Graph::lattice(1, 4);
  const ModelSpec m = make_preset("nearest-neighbor", g, {{"m0", 2.0}});
  SimParams p = quick(1e-3, 1.0, 0.1);
  const CompiledModel cm(m, g, preset_weight("nearest-neighbor"), p);
  const Trajectory tr = simulate(cm, point_mass(g.size(), g.origin()), NoiseFabric{41}, p);
  for (std::size_t i = 1; i < tr.running_sup.size(); ++i) {
    CHECK((tr.running_sup[i] >= tr.running_sup[i - 1]).all());
    CHECK((tr.running_sup[i] >= tr.states[i]).all());
  }
}

TEST_CASE("the explosion guard flags and stops") {
  Graph g = Graph::lattice(1, 2);
  const ModelSpec m = make_preset("nearest-neighbor", g);
  SimParams p = quick(1e-3, 2.0, 0.5);
  p.m_guard = 1.5;  // trips quickly for a growing system
  const CompiledModel cm(m, g, preset_weight("nearest-neighbor"), p);
  const Trajectory tr = simulate(cm, point_mass(g.size(), g.origin()), NoiseFabric{51}, p);
  CHECK(tr.stop == StopReason::TauM);
  CHECK(tr.stop_time < 2.0);
  CHECK(tr.aborted());
}

TEST_CASE("jumps above the cap are rejected and counted") {
  Graph g = Graph::lattice(1, 0);
  ModelSpec m = single_site();
  m.branch_rate[0] = 1.0;
  m.branch_measures[0].push_back({0, LevyMeasure1D::finite_atoms({{0.5, 4.0}, {50.0, 4.0}})});
  SimParams p = quick(1e-3, 2.0, 0.5);
  p.jump_cap = 10.0;
  const CompiledModel cm(m, g, WeightSpec::constant(), p);
  CHECK(!cm.mean_exact());
  const Trajectory tr = simulate(cm, point_mass(1, 0, 1.0), NoiseFabric{61}, p);
  CHECK(tr.branch_cap_rejected > 0);
  for (const auto& state : tr.states) CHECK(state[0] < 20.0);  // no 50-mass jumps landed
}

TEST_CASE("pathwise stability bound of coupled runs") {
  Graph g = Graph::lattice(1, 4);
  const WeightSpec w = preset_weight("nearest-neighbor");
  const ModelSpec m = make_preset("nearest-neighbor", g);
  const auto rep = admissibility_check(m, g, w);
  REQUIRE(rep.all_pass);
  SimParams p = quick(2e-3, 0.5, 0.1, 200);
  const CompiledModel cm(m, g, w, p);
  // unordered initial states
  Configuration a = point_mass(g.size(), g.origin(), 1.0);
  Configuration b = empty_configuration(g.size());
  b[0] = 0.7;
  b[g.size() - 1] = 0.7;
  auto ens = run_coupled_ensemble({&cm, &cm}, {a, b}, 71, p);
  const Eigen::ArrayXd v = cm.weights();
  const double d0 = (v * (a - b).abs()).sum();
  const double rate = rep.c1 + 2.0 * rep.c4 + rep.c5;
  for (std::size_t i = 0; i < ens[0].times.size(); ++i) {
    double mean = 0.0;
    int used = 0;
    for (int r = 0; r < ens[0].count(); ++r) {
      if (ens[0].replicas[r].aborted()) continue;
      mean += (v * (ens[0].replicas[r].states[i] - ens[1].replicas[r].states[i]).abs()).sum();
      ++used;
    }
    mean /= used;
    CHECK(mean <= d0 * std::exp(rate * ens[0].times[i]) + 1e-9);
  }
}

TEST_CASE("moment bound holds for every preset at defaults") {
  Graph g = Graph::lattice(1, 5);
  for (const auto& preset : list_presets()) {
    const ModelSpec m = make_preset(preset.name, g);
    const WeightSpec w = preset_weight(preset.name);
    const auto rep = admissibility_check(m, g, w);
    REQUIRE(rep.all_pass);
    SimParams p = quick(2e-3, 0.5, 0.1, 100);
    const CompiledModel cm(m, g, w, p);
    const Configuration init = point_mass(g.size(), g.origin());
    const Ensemble ens = run_ensemble(cm, init, 83, p);
    CHECK(ens.aborted == 0);
    const Series curve = moment_curve(ens, cm.weights());
    const double n0 = norm(init, cm.weights());
    for (std::size_t i = 0; i < curve.size(); ++i) {
      INFO(preset.name, " t=", curve.t[i]);
      CHECK(curve.value[i] <=
            (1.0 + n0) * std::exp(rep.moment_growth_C * curve.t[i]) + 3.0 * curve.stderr_[i]);
    }
  }
}

TEST_CASE("two-dimensional truncation matches the oracle") {
  Graph g = Graph::lattice(2, 2);  // 13 sites
  const ModelSpec m = make_preset("nearest-neighbor", g, {{"m0", 1.0}});
  const WeightSpec w = preset_weight("nearest-neighbor");
  SimParams p = quick(2e-3, 0.5, 0.25, 3000);
  const CompiledModel cm(m, g, w, p);
  const Configuration init = point_mass(g.size(), g.origin());
  const Ensemble ens = run_ensemble(cm, init, 211, p);
  const MeanTable table = site_means(ens);
  const auto [A, b] = mean_field_matrix(m, g);
  const Eigen::VectorXd oracle = mean_oracle(A, b, init.matrix(), 0.5);
  const int last = static_cast<int>(table.times.size()) - 1;
  for (int s = 0; s < g.size(); ++s)
    CHECK(std::abs(table.mean(last, s) - oracle[s]) <=
          4.0 * table.stderr_(last, s) + 0.01 * oracle[s] + 1e-9);
}

TEST_CASE("branching random walk drift restores the compensated mean") {
  Graph g = Graph::lattice(1, 2);
  const ModelSpec m = make_preset("branching-rw", g);
  const WeightSpec w = preset_weight("branching-rw");
  // own-site: compensator -g*M1 vs drift +g*M1 cancel; cross: 0.5 adjacency
  const auto [A, b] = mean_field_matrix(m, g);
  for (int x = 0; x < g.size(); ++x) CHECK(A(x, x) == doctest::Approx(1.0));
  SimParams p = quick(2e-3, 0.5, 0.25, 3000);
  const CompiledModel cm(m, g, w, p);
  const Configuration init = point_mass(g.size(), g.origin());
  const Ensemble ens = run_ensemble(cm, init, 223, p);
  const MeanTable table = site_means(ens);
  const Eigen::VectorXd oracle = mean_oracle(A, b, init.matrix(), 0.5);
  const int last = static_cast<int>(table.times.size()) - 1;
  for (int s = 0; s < g.size(); ++s)
    CHECK(std::abs(table.mean(last, s) - oracle[s]) <=
          4.0 * table.stderr_(last, s) + 0.01 * oracle[s] + 1e-9);
}

TEST_CASE("user-supplied adjacency runs through the whole stack") {
  // 4-cycle with a pendant site
  Graph g = Graph::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {2, 4}});
  const ModelSpec m = make_preset("cbi", g);
  const WeightSpec w = preset_weight("cbi");
  const auto rep = admissibility_check(m, g, w);
  CHECK(rep.all_pass);
  SimParams p = quick(1e-3, 0.5, 0.25, 60);
  const CompiledModel cm(m, g, w, p);
  const Ensemble ens = run_ensemble(cm, point_mass(g.size(), 0), 229, p);
  CHECK(ens.aborted == 0);
  for (const auto& tr : ens.replicas)
    for (const auto& state : tr.states) CHECK((state >= 0.0).all());
}

TEST_CASE("cbi means track the oracle through immigration and branching") {
  Graph g = Graph::lattice(1, 2);
  const ModelSpec m = make_preset("cbi", g);
  const WeightSpec w = preset_weight("cbi");
  SimParams p = quick(2e-3, 0.5, 0.25, 3000);
  const CompiledModel cm(m, g, w, p);
  REQUIRE(cm.mean_exact());
  const Configuration init = point_mass(g.size(), g.origin(), 2.0);
  const Ensemble ens = run_ensemble(cm, init, 233, p);
  const MeanTable table = site_means(ens);
  const auto [A, b] = mean_field_matrix(m, g);
  for (std::size_t i = 1; i < table.times.size(); ++i) {
    const Eigen::VectorXd oracle = mean_oracle(A, b, init.matrix(), table.times[i]);
    for (int s = 0; s < g.size(); ++s)
      CHECK(std::abs(table.mean(i, s) - oracle[s]) <=
            4.0 * table.stderr_(i, s) + 0.01 * oracle[s] + 1e-9);
  }
}

TEST_CASE("thread count never changes ensemble results") {
  Graph g = Graph::lattice(1, 4);
  const ModelSpec m = make_preset("cbi", g);
  SimParams p = quick(1e-3, 0.3, 0.1, 24);
  const CompiledModel cm(m, g, preset_weight("cbi"), p);
  const Configuration init = point_mass(g.size(), g.origin());
  const Ensemble one = run_ensemble(cm, init, 97, p, 1);
  const Ensemble two = run_ensemble(cm, init, 97, p, 2);
  REQUIRE(one.count() == two.count());
  for (int r = 0; r < one.count(); ++r)
    for (std::size_t i = 0; i < one.replicas[r].states.size(); ++i)
      CHECK((one.replicas[r].states[i] == two.replicas[r].states[i]).all());
}
