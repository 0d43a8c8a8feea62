#include <cmath>

#include "doctest.h"
#include "ips/analysis.hpp"

using namespace ips;

namespace {

SimParams quick(double dt, double horizon, double record_dt, int replicas) {
  SimParams p;
  p.dt = dt;
  p.horizon = horizon;
  p.record_dt = record_dt;
  p.replicas = replicas;
  return p;
}

}  // namespace

TEST_CASE("linear fit recovers an exact line") {
  const LinFit f = linear_fit({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.slope_stderr == doctest::Approx(0.0));
}

TEST_CASE("moment curve of the zero process vanishes") {
  Graph g = Graph::lattice(1, 2);
  const ModelSpec m = ModelSpec::zero(g.size());
  SimParams p = quick(1e-2, 1.0, 0.25, 4);
  const CompiledModel cm(m, g, WeightSpec::constant(), p);
  const Ensemble ens = run_ensemble(cm, empty_configuration(g.size()), 3, p);
  const Series s = moment_curve(ens, cm.weights());
  for (double v : s.value) CHECK(v == 0.0);
}

TEST_CASE("compound Poisson immigration grows linearly with unit slope") {
  Graph g = Graph::lattice(1, 0);
  ModelSpec m = ModelSpec::zero(1);
  m.immigration_measures[0] = LevyMeasure1D::finite_atoms({{0.5, 2.0}});
  m.rho_const[0] = 1.0;
  SimParams p = quick(1e-3, 2.0, 0.25, 2000);
  const CompiledModel cm(m, g, WeightSpec::constant(), p);
  const Ensemble ens = run_ensemble(cm, empty_configuration(1), 7, p);
  const Series s = moment_curve(ens, cm.weights());
  const LinFit f = linear_fit(s.t, s.value);
  CHECK(f.slope == doctest::Approx(1.0).epsilon(0.03));
  CHECK(f.r2 > 0.999);
}

TEST_CASE("comparison audit basics") {
  Graph g = Graph::lattice(1, 3);
  const ModelSpec m = make_preset("nearest-neighbor", g, {{"c0", 0.0}});
  SimParams p = quick(1e-3, 0.3, 0.1, 8);
  const CompiledModel cm(m, g, preset_weight("nearest-neighbor"), p);
  const Configuration init = point_mass(g.size(), g.origin());
  const Ensemble a = run_ensemble(cm, init, 5, p);
  const Ensemble b = run_ensemble(cm, init, 5, p);
  const Series s = comparison_audit(a, b, cm.weights());
  for (double v : s.value) CHECK(v == 0.0);  // identical ensembles

  SimParams p2 = p;
  p2.record_dt = 0.15;
  const Ensemble c = run_ensemble(cm, init, 5, p2);
  CHECK_THROWS(comparison_audit(a, c, cm.weights()));  // grid mismatch
}

TEST_CASE("series integral is the trapezoid rule") {
  Series s;
  s.t = {0.0, 1.0, 2.0};
  s.value = {0.0, 1.0, 1.0};
  CHECK(series_integral(s) == doctest::Approx(1.5));
}

TEST_CASE("mean oracle matches the scalar closed form") {
  Eigen::MatrixXd A(1, 1);
  A << -1.0;
  Eigen::VectorXd b(1), x0(1);
  b << 1.0;
  x0 << 0.0;
  CHECK(mean_oracle(A, b, x0, 1.0)[0] == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-9));
  CHECK(stationary_mean(A, b)[0] == doctest::Approx(1.0));
}

TEST_CASE("w1_ordered contraction of a subcritical pair") {
  Graph g = Graph::lattice(1, 6);
  const std::map<std::string, double> over = {{"m0", 5.0}, {"delta", 0.5}};
  const ModelSpec m = make_preset("nearest-neighbor", g, over);
  const WeightSpec w = preset_weight("nearest-neighbor", over);
  const double A = subcriticality_margin(m, g, w);
  REQUIRE(A > 0.0);
  SimParams p = quick(1e-3, 2.0, 0.1, 600);
  const CompiledModel cm(m, g, w, p);
  const Configuration upper = point_mass(g.size(), g.origin());
  auto ens = run_coupled_ensemble({&cm, &cm}, {upper, 0.5 * upper}, 19, p);
  const ContractionReport rep = w1_ordered(ens[0], ens[1], cm.weights(), A);
  CHECK(rep.pass);
  CHECK(rep.fitted_rate > A - 3.0 * rep.rate_stderr - 0.1);
  // certifying any smaller margin also passes
  const ContractionReport weaker = w1_ordered(ens[0], ens[1], cm.weights(), A / 2.0);
  CHECK(weaker.pass);
  // the series is nonincreasing up to noise
  for (std::size_t i = 1; i < rep.series.size(); ++i)
    CHECK(rep.series.value[i] <=
          rep.series.value[i - 1] + 3.0 * (rep.series.stderr_[i] + rep.series.stderr_[i - 1]));

  // identical starts give an identically zero series
  auto same = run_coupled_ensemble({&cm, &cm}, {upper, upper}, 19, p);
  const ContractionReport zero = w1_ordered(same[0], same[1], cm.weights(), A);
  for (double v : zero.series.value) CHECK(v == 0.0);

  CHECK_THROWS_AS(w1_ordered(ens[0], ens[1], cm.weights(), -0.3), UnsupportedAnalysis);
}

TEST_CASE("contraction series tracks the affine oracle") {
  Graph g = Graph::lattice(1, 4);
  const std::map<std::string, double> over = {{"m0", 5.0}, {"delta", 0.5}};
  const ModelSpec m = make_preset("nearest-neighbor", g, over);
  const WeightSpec w = preset_weight("nearest-neighbor", over);
  SimParams p = quick(1e-3, 1.0, 0.25, 2000);
  const CompiledModel cm(m, g, w, p);
  const Configuration upper = point_mass(g.size(), g.origin());
  const Configuration lower = 0.5 * upper;
  auto ens = run_coupled_ensemble({&cm, &cm}, {upper, lower}, 23, p);
  const ContractionReport rep =
      w1_ordered(ens[0], ens[1], cm.weights(), subcriticality_margin(m, g, w));
  const auto [A, b] = mean_field_matrix(m, g);
  const Eigen::VectorXd zero_b = Eigen::VectorXd::Zero(g.size());
  const Eigen::ArrayXd v = cm.weights();
  for (std::size_t i = 0; i < rep.series.size(); ++i) {
    const Eigen::VectorXd diff = mean_oracle(A, zero_b, (upper - lower).matrix(), rep.series.t[i]);
    const double oracle = (v * diff.array()).sum();
    CHECK(std::abs(rep.series.value[i] - oracle) <= 4.0 * rep.series.stderr_[i] + 1e-4);
  }
}

TEST_CASE("two-sample KS screen") {
  NoiseFabric f{99};
  KeyStream s1 = f.stream(StreamKind::Generic, 0, 0);
  KeyStream s2 = f.stream(StreamKind::Generic, 1, 0);
  std::vector<double> a, b, c;
  for (int i = 0; i < 2000; ++i) {
    a.push_back(s1.gaussian());
    b.push_back(s2.gaussian());
    c.push_back(s2.gaussian() + 0.5);
  }
  CHECK(ks_two_sample_pvalue(a, b) > 1e-3);
  CHECK(ks_two_sample_pvalue(a, c) < 1e-6);
}

TEST_CASE("invariant probe of the single-site affine model") {
  Graph g = Graph::lattice(1, 0);
  // btilde = 1, Atilde = -1, with diffusion and critical branching noise on top
  const ModelSpec m = make_preset("cbi", g, {{"imm_rate", 0.0}});
  const WeightSpec w = preset_weight("cbi");
  SimParams p = quick(1e-3, 8.0, 0.1, 1200);
  const CompiledModel cm(m, g, w, p);
  const InvariantReport rep = invariant_probe(cm, Configuration::Constant(1, 5.0), 31, p, 4.0);
  CHECK(rep.stationary[0] == doctest::Approx(1.0));
  CHECK(rep.mean_pass);
  CHECK(std::abs(rep.long_run_mean[0] - 1.0) < 0.1);
  CHECK(rep.rate_pass);  // fitted sandwich decay close to A = 1
  CHECK(rep.ks_pass);
}

TEST_CASE("invariant probe refusals") {
  Graph g = Graph::lattice(1, 2);
  SimParams p = quick(1e-3, 1.0, 0.5, 4);

  // supercritical: no contraction certificate
  const ModelSpec sup = make_preset("nearest-neighbor", g);
  const CompiledModel cm_sup(sup, g, preset_weight("nearest-neighbor"), p);
  CHECK_THROWS_AS(invariant_probe(cm_sup, Configuration::Constant(g.size(), 1.0), 1, p, 0.5),
                  UnsupportedAnalysis);

  // subcritical but immigration-free: the empty configuration is invariant
  const ModelSpec dead = make_preset("nearest-neighbor", g, {{"m0", 8.0}});
  const CompiledModel cm_dead(dead, g, preset_weight("nearest-neighbor"), p);
  CHECK_THROWS_AS(invariant_probe(cm_dead, Configuration::Constant(g.size(), 1.0), 1, p, 0.5),
                  UnsupportedAnalysis);

  // nonlinear killing is outside the affine analysis
  const ModelSpec stable = make_preset("stable-competition", g);
  const CompiledModel cm_st(stable, g, preset_weight("stable-competition"), p);
  CHECK_THROWS_AS(invariant_probe(cm_st, Configuration::Constant(g.size(), 1.0), 1, p, 0.5),
                  UnsupportedAnalysis);
}

TEST_CASE("lattice invariant probe matches the linear solve per site") {
  Graph g = Graph::lattice(1, 3);
  const ModelSpec m = make_preset("cbi", g);  // subcritical with immigration
  const WeightSpec w = preset_weight("cbi");
  SimParams p = quick(1e-3, 8.0, 0.2, 600);
  const CompiledModel cm(m, g, w, p);
  const InvariantReport rep =
      invariant_probe(cm, Configuration::Constant(g.size(), 4.0), 37, p, 4.0);
  for (int s = 0; s < g.size(); ++s) {
    INFO("site ", s);
    CHECK(std::abs(rep.long_run_mean[s] - rep.stationary[s]) <=
          3.0 * rep.long_run_stderr[s] + 0.02 * rep.stationary[s]);
  }
  CHECK(rep.ks_pass);
}
