#include "ips/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ips {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// #{z in Z^d : |z|_1 = k}
double l1_shell_count(int d, int k) {
  if (k == 0) return 1.0;
  std::vector<double> prev(k + 1, 0.0);
  prev[0] = 1.0;
  if (k >= 1) for (int j = 1; j <= k; ++j) prev[j] = 2.0;
  for (int dim = 2; dim <= d; ++dim) {
    std::vector<double> cur(k + 1, 0.0);
    for (int m = 0; m <= k; ++m) {
      double s = prev[m];  // i = 0
      for (int i = 1; i <= m; ++i) s += 2.0 * prev[m - i];
      cur[m] = s;
    }
    prev = std::move(cur);
  }
  return prev[k];
}

}  // namespace

ModelSpec ModelSpec::zero(int sites) {
  ModelSpec m;
  m.immigration_base = Eigen::ArrayXd::Zero(sites);
  m.interaction.resize(sites, sites);
  m.kill_strength = Eigen::ArrayXd::Zero(sites);
  m.diffusion = Eigen::ArrayXd::Zero(sites);
  m.branch_rate = Eigen::ArrayXd::Zero(sites);
  m.branch_measures.resize(sites);
  m.rho_const = Eigen::ArrayXd::Zero(sites);
  m.rho_phi.resize(sites, sites);
  m.rho_psi_diag = Eigen::ArrayXd::Zero(sites);
  m.immigration_measures.assign(sites, LevyMeasure1D::empty());
  return m;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> build_kernel(const KernelSpec& k, const Graph& g) {
  const int n = g.size();
  std::vector<Eigen::Triplet<double>> trip;
  switch (k.family) {
    case KernelSpec::Family::Zero:
      break;
    case KernelSpec::Family::NearestNeighbor:
      for (int x = 0; x < n; ++x)
        for (auto it = g.neighbors_begin(x); it != g.neighbors_end(x); ++it)
          if (k.coeff != 0.0) trip.emplace_back(x, *it, k.coeff);
      break;
    case KernelSpec::Family::ExpDecay:
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
          if (y != x) trip.emplace_back(x, y, k.coeff * std::exp(-k.eps * g.dist(x, y)));
      break;
    case KernelSpec::Family::RangeCutoff:
      for (int x = 0; x < n; ++x)
        for (int y : g.ball(x, k.range))
          if (y != x && k.coeff != 0.0) trip.emplace_back(x, y, k.coeff);
      break;
    case KernelSpec::Family::Explicit: {
      if (k.matrix.rows() != n || k.matrix.cols() != n)
        throw std::invalid_argument("kernel: explicit matrix size mismatch");
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
          if (x != y && k.matrix(x, y) != 0.0) trip.emplace_back(x, y, k.matrix(x, y));
      break;
    }
  }
  if (k.family == KernelSpec::Family::Explicit) {
    for (int x = 0; x < n; ++x)
      if (k.matrix(x, x) != 0.0) trip.emplace_back(x, x, k.matrix(x, x));
  } else if (k.diagonal != 0.0) {
    for (int x = 0; x < n; ++x) trip.emplace_back(x, x, k.diagonal);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

std::optional<double> kernel_c1_uniform(const KernelSpec& k, const Graph& g, const WeightSpec& w) {
  if (!g.is_lattice()) return std::nullopt;
  const int d = g.dimension();
  const double diag = std::max(k.diagonal, 0.0);
  const bool exp_weight = w.family == WeightSpec::Family::Exponential;
  const bool const_weight = w.family == WeightSpec::Family::Constant;
  if (!exp_weight && !const_weight) return std::nullopt;
  const double delta = exp_weight ? w.delta : 0.0;

  // v(y)/v(x) <= e^{delta |x-y|_1}: sum the profile against the shell counts.
  switch (k.family) {
    case KernelSpec::Family::Zero:
      return diag;
    case KernelSpec::Family::NearestNeighbor:
      return k.coeff * 2.0 * d * std::exp(delta) + diag;
    case KernelSpec::Family::RangeCutoff: {
      double s = 0.0;
      for (int r = 1; r <= k.range; ++r) s += l1_shell_count(d, r) * std::exp(delta * r);
      return k.coeff * s + diag;
    }
    case KernelSpec::Family::ExpDecay: {
      if (delta >= k.eps) return std::nullopt;
      const double q = std::exp(-(k.eps - delta));
      return k.coeff * (std::pow((1.0 + q) / (1.0 - q), d) - 1.0) + diag;
    }
    case KernelSpec::Family::Explicit:
      return std::nullopt;
  }
  return std::nullopt;
}

AdmissibilityReport admissibility_check(const ModelSpec& model, const Graph& g, const WeightSpec& w) {
  const int n = model.sites();
  if (n != g.size()) throw std::invalid_argument("admissibility_check: model/graph size mismatch");
  const Eigen::ArrayXd v = weight_vector(g, w);
  AdmissibilityReport rep;
  rep.c1_uniform = model.c1_uniform;

  auto fail = [&rep](bool& flag, const std::string& why) {
    flag = false;
    if (rep.failure.empty()) rep.failure = why;
  };

  // (A1): drift split B0 - B1 with nonnegative monotone B0 and B1(0) = 0.
  rep.a1 = true;
  if ((model.immigration_base < 0.0).any()) fail(rep.a1, "(A1): negative immigration base b");
  if ((model.kill_strength < 0.0).any()) fail(rep.a1, "(A1): negative killing strength m");
  if (model.kill_exponent < 0.0) fail(rep.a1, "(A1): negative killing exponent");
  if (model.kill_exponent == 0.0 && model.kill_strength.maxCoeff() > 0.0)
    fail(rep.a1, "(A1): killing exponent 0 makes B1(x,0) nonzero");
  double c1 = 0.0;
  for (int x = 0; x < n; ++x) {
    double row = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(model.interaction, x); it;
         ++it) {
      const int y = static_cast<int>(it.col());
      if (y != x) {
        if (it.value() < 0.0) fail(rep.a1, "(A1): negative off-diagonal interaction a(x,y)");
        row += v[y] * it.value();
      } else if (it.value() > 0.0) {
        row += v[x] * it.value();
      }
    }
    c1 = std::max(c1, row / v[x]);
  }
  rep.c1 = c1;

  // (A2): c(x,t) = c(x) t, Lipschitz constant c(x).
  rep.a2 = (model.diffusion >= 0.0).all();
  if (!rep.a2) fail(rep.a2, "(A2): negative diffusion scale c");
  rep.c2_sup = model.diffusion.maxCoeff();
  rep.sum_v_c2 = (v * model.diffusion).sum();

  // (A3): g(x,t) = g(x) t, nondecreasing with g(x,0) = 0.
  rep.a3 = (model.branch_rate >= 0.0).all();
  if (!rep.a3) fail(rep.a3, "(A3): negative branching rate g");
  rep.c3_sup = model.branch_rate.maxCoeff();

  // (A4): small-jump second moments and the two C4 bounds, cylindrical form.
  rep.a4 = true;
  double small = 0.0, c4 = 0.0;
  for (int x = 0; x < n; ++x) {
    const double gx = model.branch_rate[x];
    double cross = 0.0;
    for (const auto& bt : model.branch_measures[x]) {
      if (bt.target == x) {
        small += v[x] * gx * bt.measure.second_below(1.0);
        c4 = std::max(c4, gx * bt.measure.mean_above(1.0));
      } else {
        cross += v[bt.target] * bt.measure.mean();
      }
    }
    c4 = std::max(c4, gx / v[x] * cross);
  }
  if (!std::isfinite(small)) fail(rep.a4, "(A4): divergent small-jump second moment");
  if (!std::isfinite(c4)) fail(rep.a4, "(A4): divergent cross-site branching mean (no C4)");
  rep.small_jump_second = small;
  rep.c4 = c4;

  // (A5): Lipschitz constant of rho in eta, and monotonicity (phi >= 0).
  rep.a5 = true;
  if ((model.rho_const < 0.0).any() || (model.rho_psi_diag < 0.0).any())
    fail(rep.a5, "(A5): negative immigration response");
  Eigen::ArrayXd phi_col = Eigen::ArrayXd::Zero(n);  // sum_x v(x) phi(x,y) M1(sigma_x)
  for (int x = 0; x < n; ++x) {
    const double m1 = model.immigration_measures[x].mean();
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(model.rho_phi, x); it; ++it) {
      if (it.value() < 0.0) fail(rep.a5, "(A5): negative phi makes rho non-monotone");
      phi_col[it.col()] += v[x] * it.value() * m1;
    }
  }
  double c5 = 0.0;
  for (int y = 0; y < n; ++y) c5 = std::max(c5, phi_col[y] / v[y]);
  if (!std::isfinite(c5)) fail(rep.a5, "(A5): divergent immigration response bound (no C5)");
  rep.c5 = c5;

  // (A6): linear growth of ||B0|| plus the immigration mean mass.
  rep.a6 = true;
  const double norm_b = (v * model.immigration_base).sum();
  double k_imm = 0.0;
  for (int x = 0; x < n; ++x) {
    const auto& sig = model.immigration_measures[x];
    if (sig.is_empty()) continue;
    k_imm += v[x] * (model.rho_const[x] * sig.mean() +
                     model.rho_psi_diag[x] * sig.second_below(kInf));
  }
  if (!std::isfinite(k_imm)) fail(rep.a6, "(A6): divergent immigration mean mass (no C6)");
  rep.c6 = std::max(norm_b, rep.c1) + rep.c5 + k_imm;
  rep.moment_growth_C = rep.c4 + 4.0 * rep.c6;

  rep.all_pass = rep.a1 && rep.a2 && rep.a3 && rep.a4 && rep.a5 && rep.a6;
  if (rep.all_pass && model.kill_exponent == 1.0)
    rep.margin_A = subcriticality_margin(model, g, w);
  return rep;
}

double effective_drift(const ModelSpec& model, int x, const Configuration& eta) {
  const int n = model.sites();
  if (x < 0 || x >= n) throw std::out_of_range("effective_drift: unknown site");
  double drift = model.immigration_base[x];
  for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(model.interaction, x); it;
       ++it)
    drift += it.value() * eta[it.col()];
  if (model.kill_strength[x] > 0.0)
    drift -= model.kill_strength[x] * std::pow(eta[x], model.kill_exponent);
  for (int y = 0; y < n; ++y) {
    if (y == x || model.branch_rate[y] == 0.0 || eta[y] == 0.0) continue;
    if (const LevyMeasure1D* mu = model.branch_measure(y, x))
      drift += model.branch_rate[y] * eta[y] * mu->mean();
  }
  const auto& sig = model.immigration_measures[x];
  if (!sig.is_empty()) {
    double rho_lin = model.rho_const[x];
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(model.rho_phi, x); it; ++it)
      rho_lin += it.value() * eta[it.col()];
    drift += rho_lin * sig.mean() + model.rho_psi_diag[x] * sig.second_below(kInf);
  }
  return drift;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> mean_field_matrix(const ModelSpec& model,
                                                              const Graph& g) {
  const int n = model.sites();
  if (model.kill_exponent != 1.0)
    throw UnsupportedAnalysis("mean_field_matrix: killing exponent != 1 (nonlinear model)");
  Eigen::MatrixXd A = Eigen::MatrixXd(model.interaction);
  A.diagonal().array() -= model.kill_strength;
  for (int y = 0; y < n; ++y) {
    if (model.branch_rate[y] == 0.0) continue;
    for (const auto& bt : model.branch_measures[y]) {
      if (bt.target == y) continue;  // own-site jumps are compensated
      const double m1 = bt.measure.mean();
      if (!std::isfinite(m1))
        throw UnsupportedAnalysis("mean_field_matrix: infinite cross-site branching mean");
      A(bt.target, y) += model.branch_rate[y] * m1;
    }
  }
  Eigen::VectorXd b = model.immigration_base.matrix();
  for (int x = 0; x < n; ++x) {
    const auto& sig = model.immigration_measures[x];
    if (sig.is_empty()) continue;
    const double m1 = sig.mean();
    const double m2 = sig.second_below(kInf);
    if (!std::isfinite(m1) || (model.rho_psi_diag[x] > 0.0 && !std::isfinite(m2)))
      throw UnsupportedAnalysis("mean_field_matrix: infinite immigration moments");
    b[x] += model.rho_const[x] * m1 + model.rho_psi_diag[x] * m2;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(model.rho_phi, x); it; ++it)
      A(x, it.col()) += it.value() * m1;
  }
  (void)g;
  return {std::move(A), std::move(b)};
}

double subcriticality_margin(const ModelSpec& model, const Graph& g, const WeightSpec& w) {
  if (model.kill_exponent != 1.0)
    throw UnsupportedAnalysis("subcriticality_margin: killing exponent != 1 (nonlinear model)");
  const auto [A, b] = mean_field_matrix(model, g);
  const Eigen::ArrayXd v = weight_vector(g, w);
  double margin = kInf;
  for (int y = 0; y < model.sites(); ++y) {
    const double col = (v * A.col(y).array()).sum();
    margin = std::min(margin, -col / v[y]);
  }
  return margin;
}

bool check_finite_range(const ModelSpec& model, const Graph& g, int R) {
  const int n = model.sites();
  for (int x = 0; x < n; ++x)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(model.interaction, x); it;
         ++it)
      if (it.value() != 0.0 && g.dist(x, static_cast<int>(it.col())) > R) return false;
  for (int y = 0; y < n; ++y) {
    if (model.branch_rate[y] == 0.0) continue;
    for (const auto& bt : model.branch_measures[y])
      if (bt.measure.mean() > 0.0 && g.dist(bt.target, y) > R) return false;
  }
  return true;
}

ModelSpec restrict_model(const ModelSpec& model, const std::vector<std::uint8_t>& inside) {
  const int n = model.sites();
  if (static_cast<int>(inside.size()) != n)
    throw std::invalid_argument("restrict_model: mask size mismatch");
  ModelSpec r = model;
  for (int x = 0; x < n; ++x) {
    if (inside[x]) continue;
    r.immigration_base[x] = 0.0;
    r.branch_rate[x] = 0.0;
    r.rho_const[x] = 0.0;
    r.rho_psi_diag[x] = 0.0;
  }
  // B0 rows outside the volume vanish; the killing part of the diagonal stays.
  std::vector<Eigen::Triplet<double>> trip;
  for (int x = 0; x < n; ++x)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(model.interaction, x); it;
         ++it) {
      const int y = static_cast<int>(it.col());
      double val = it.value();
      if (!inside[x]) val = (x == y) ? std::min(val, 0.0) : 0.0;
      if (val != 0.0) trip.emplace_back(x, y, val);
    }
  r.interaction.setZero();
  r.interaction.setFromTriplets(trip.begin(), trip.end());

  std::vector<Eigen::Triplet<double>> ptrip;
  for (int x = 0; x < n; ++x) {
    if (!inside[x]) continue;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(model.rho_phi, x); it; ++it)
      if (it.value() != 0.0) ptrip.emplace_back(x, it.col(), it.value());
  }
  r.rho_phi.setZero();
  r.rho_phi.setFromTriplets(ptrip.begin(), ptrip.end());
  return r;
}

}  // namespace ips
