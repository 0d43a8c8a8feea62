#include "ips/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace ips {

namespace {

double sample_stderr(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0) / static_cast<double>(xs.size()));
}

void check_grids(const Ensemble& a, const Ensemble& b) {
  if (a.times != b.times) throw std::invalid_argument("analysis: ensembles on different time grids");
  if (a.count() != b.count())
    throw std::invalid_argument("analysis: ensembles with different replica counts");
}

}  // namespace

LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  LinFit f;
  const int n = static_cast<int>(x.size());
  f.points = n;
  if (n < 2 || y.size() != x.size()) return f;
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  if (n > 2) f.slope_stderr = std::sqrt(ss_res / (n - 2) / sxx);
  return f;
}

LinFit log_decay_fit(const Series& s, double t_lo, double t_hi) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.t[i] >= t_lo && s.t[i] <= t_hi && s.value[i] > 0.0) {
      xs.push_back(s.t[i]);
      ys.push_back(std::log(s.value[i]));
    }
  return linear_fit(xs, ys);
}

Series moment_curve(const Ensemble& ens, const Eigen::ArrayXd& weights) {
  if (ens.count() - ens.aborted < 2)
    throw std::invalid_argument("moment_curve: need at least two completed replicas");
  Series out;
  out.t = ens.times;
  for (std::size_t i = 0; i < ens.times.size(); ++i) {
    std::vector<double> vals;
    vals.reserve(ens.replicas.size());
    for (const auto& tr : ens.replicas) {
      if (tr.aborted()) continue;
      vals.push_back(norm(tr.states[i], weights));
    }
    double m = 0.0;
    for (double v : vals) m += v;
    m /= static_cast<double>(vals.size());
    out.value.push_back(m);
    out.stderr_.push_back(sample_stderr(vals, m));
  }
  return out;
}

Series comparison_audit(const Ensemble& lower, const Ensemble& upper,
                        const Eigen::ArrayXd& weights) {
  check_grids(lower, upper);
  Series out;
  out.t = lower.times;
  for (std::size_t i = 0; i < lower.times.size(); ++i) {
    std::vector<double> vals;
    for (int r = 0; r < lower.count(); ++r) {
      if (lower.replicas[r].aborted() || upper.replicas[r].aborted()) continue;
      vals.push_back(
          positive_part_distance(lower.replicas[r].states[i], upper.replicas[r].states[i], weights));
    }
    if (vals.empty()) throw std::runtime_error("comparison_audit: all replicas aborted");
    double m = 0.0;
    for (double v : vals) m += v;
    m /= static_cast<double>(vals.size());
    out.value.push_back(m);
    out.stderr_.push_back(sample_stderr(vals, m));
  }
  return out;
}

double series_integral(const Series& s) {
  double acc = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i)
    acc += 0.5 * (s.value[i] + s.value[i - 1]) * (s.t[i] - s.t[i - 1]);
  return acc;
}

MeanTable site_means(const Ensemble& ens, bool running_sup) {
  MeanTable out;
  out.times = ens.times;
  const int nt = static_cast<int>(ens.times.size());
  if (ens.replicas.empty()) throw std::invalid_argument("site_means: empty ensemble");
  const int ns = static_cast<int>(ens.replicas[0].states[0].size());
  out.mean = Eigen::MatrixXd::Zero(nt, ns);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(nt, ns);
  int used = 0;
  for (const auto& tr : ens.replicas) {
    if (tr.aborted()) continue;
    ++used;
    for (int i = 0; i < nt; ++i) {
      const Configuration& c = running_sup ? tr.running_sup[i] : tr.states[i];
      out.mean.row(i) += c.matrix().transpose();
      m2.row(i) += (c * c).matrix().transpose();
    }
  }
  if (used < 2) throw std::invalid_argument("site_means: need at least two completed replicas");
  out.used = used;
  out.mean /= static_cast<double>(used);
  // unbiased variance of the mean
  out.stderr_ =
      ((m2 / used - out.mean.cwiseProduct(out.mean)) * (static_cast<double>(used) / (used - 1.0)) /
       static_cast<double>(used))
          .cwiseMax(0.0)
          .cwiseSqrt();
  return out;
}

ContractionReport w1_ordered(const Ensemble& upper, const Ensemble& lower,
                             const Eigen::ArrayXd& weights, double margin_A) {
  if (!(margin_A > 0.0))
    throw UnsupportedAnalysis("w1_ordered: not subcritical (A = " + std::to_string(margin_A) + ")");
  check_grids(upper, lower);
  ContractionReport rep;
  rep.margin = margin_A;
  rep.series.t = upper.times;
  for (std::size_t i = 0; i < upper.times.size(); ++i) {
    std::vector<double> vals;
    for (int r = 0; r < upper.count(); ++r) {
      if (upper.replicas[r].aborted() || lower.replicas[r].aborted()) continue;
      vals.push_back(norm(upper.replicas[r].states[i], weights) -
                     norm(lower.replicas[r].states[i], weights));
    }
    if (vals.empty()) throw std::runtime_error("w1_ordered: all replicas aborted");
    double m = 0.0;
    for (double v : vals) m += v;
    m /= static_cast<double>(vals.size());
    rep.series.value.push_back(m);
    rep.series.stderr_.push_back(sample_stderr(vals, m));
  }
  const double initial = rep.series.value.empty() ? 0.0 : rep.series.value[0];
  rep.pass = true;
  for (std::size_t i = 0; i < rep.series.size(); ++i) {
    const double bound = initial * std::exp(-margin_A * rep.series.t[i]);
    rep.series.bound.push_back(bound);
    if (rep.series.value[i] > bound + 3.0 * rep.series.stderr_[i]) rep.pass = false;
  }
  const double T = rep.series.t.empty() ? 0.0 : rep.series.t.back();
  const LinFit fit = log_decay_fit(rep.series, T / 4.0, T);
  rep.fitted_rate = -fit.slope;
  rep.rate_stderr = fit.slope_stderr;
  return rep;
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a) { return a.exp(); }

Eigen::VectorXd mean_oracle(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& init, double t) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = A * t;
  aug.topRightCorner(n, 1) = b * t;
  const Eigen::MatrixXd e = aug.exp();
  return e.topLeftCorner(n, n) * init + e.topRightCorner(n, 1);
}

Eigen::VectorXd stationary_mean(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  return A.partialPivLu().solve(-b);
}

double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  // Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)
  double q = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += sign * term;
    sign = -sign;
    if (term < 1e-12) break;
  }
  return std::clamp(2.0 * q, 0.0, 1.0);
}

InvariantReport invariant_probe(const CompiledModel& model, const Configuration& upper_init,
                                std::uint64_t master_seed, const SimParams& params,
                                double burn_in, int threads) {
  const ModelSpec& spec = model.spec();
  if (spec.kill_exponent != 1.0)
    throw UnsupportedAnalysis("invariant_probe: nonlinear model");
  const auto [A, b] = mean_field_matrix(spec, model.graph());
  const Eigen::ArrayXd& v = model.weights();
  double margin = std::numeric_limits<double>::infinity();
  for (int y = 0; y < model.sites(); ++y)
    margin = std::min(margin, -(v * A.col(y).array()).sum() / v[y]);
  if (!(margin > 0.0))
    throw UnsupportedAnalysis("invariant_probe: not subcritical (A = " + std::to_string(margin) + ")");
  if (b.maxCoeff() <= 0.0)
    throw UnsupportedAnalysis("invariant_probe: no immigration, the invariant measure is trivial");

  InvariantReport rep;
  rep.margin = margin;
  rep.stationary = stationary_mean(A, b);

  const Configuration lower_init = empty_configuration(model.sites());
  auto ens = run_coupled_ensemble({&model, &model}, {upper_init, lower_init}, master_seed, params,
                                  threads);
  const MeanTable up = site_means(ens[0]);
  const MeanTable lo = site_means(ens[1]);

  rep.sandwich.t = up.times;
  for (std::size_t i = 0; i < up.times.size(); ++i) {
    const Eigen::ArrayXd diff = (up.mean.row(i) - lo.mean.row(i)).transpose().array();
    rep.sandwich.value.push_back((v * diff.abs()).sum());
    const Eigen::ArrayXd se =
        (up.stderr_.row(i).array().square() + lo.stderr_.row(i).array().square()).sqrt();
    rep.sandwich.stderr_.push_back((v * se).sum());
  }

  // decay rate of the sandwich over the window where the signal is resolved
  double t_hi = up.times.back();
  for (std::size_t i = 0; i < rep.sandwich.size(); ++i)
    if (rep.sandwich.value[i] < 5.0 * rep.sandwich.stderr_[i]) {
      t_hi = up.times[i];
      break;
    }
  const LinFit fit = log_decay_fit(rep.sandwich, 0.0, std::max(t_hi, up.times[1]));
  rep.fitted_rate = -fit.slope;
  rep.rate_pass = fit.points >= 3 && rep.fitted_rate >= 0.8 * margin;

  // long-run mean pooled over both starts past the burn-in
  const int ns = model.sites();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(ns), acc_se = Eigen::VectorXd::Zero(ns);
  int used = 0;
  for (std::size_t i = 0; i < up.times.size(); ++i) {
    if (up.times[i] < burn_in) continue;
    acc += (up.mean.row(i) + lo.mean.row(i)).transpose() * 0.5;
    acc_se += (up.stderr_.row(i) + lo.stderr_.row(i)).transpose() * 0.5;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("invariant_probe: burn_in leaves no samples");
  rep.long_run_mean = acc / used;
  rep.long_run_stderr = acc_se / used;  // conservative: time points are correlated
  rep.mean_pass = true;
  for (int s = 0; s < ns; ++s)
    if (std::abs(rep.long_run_mean[s] - rep.stationary[s]) > 3.0 * rep.long_run_stderr[s])
      rep.mean_pass = false;

  // two-start marginal agreement at the final time
  std::vector<double> sa, sb;
  for (const auto& tr : ens[0].replicas)
    if (!tr.aborted()) sa.push_back(norm(tr.states.back(), v));
  for (const auto& tr : ens[1].replicas)
    if (!tr.aborted()) sb.push_back(norm(tr.states.back(), v));
  rep.ks_pvalue = ks_two_sample_pvalue(sa, sb);
  rep.ks_pass = rep.ks_pvalue >= 1e-3;
  return rep;
}

}  // namespace ips
