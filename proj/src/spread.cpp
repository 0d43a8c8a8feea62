#include "ips/spread.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ips {

KernelEstimate ctrw_simulate(const Graph& ghat, double rate_M, int x0,
                             const std::vector<double>& times, const NoiseFabric& fabric,
                             int walkers) {
  if (!(rate_M > 0.0)) throw std::invalid_argument("ctrw: rate must be positive");
  if (walkers < 1) throw std::invalid_argument("ctrw: need at least one walker");
  if (!std::is_sorted(times.begin(), times.end()))
    throw std::invalid_argument("ctrw: times must be sorted");
  KernelEstimate est;
  est.times = times;
  est.walkers = walkers;
  est.origin = x0;
  est.freq = Eigen::MatrixXd::Zero(static_cast<int>(times.size()), ghat.size());
  for (int w = 0; w < walkers; ++w) {
    KeyStream s = fabric.stream(StreamKind::Walker, static_cast<std::uint64_t>(w));
    int pos = x0;
    double t = 0.0;
    std::size_t next = 0;
    while (next < times.size()) {
      const int deg = ghat.degree(pos);
      double hold = std::numeric_limits<double>::infinity();
      if (deg > 0) hold = -std::log(s.u01()) / (rate_M * deg);
      while (next < times.size() && times[next] <= t + hold) {
        est.freq(static_cast<int>(next), pos) += 1.0;
        ++next;
      }
      if (next >= times.size()) break;
      t += hold;
      const int pick = std::min(deg - 1, static_cast<int>(s.u01() * deg));
      pos = ghat.neighbors_begin(pos)[pick];
    }
  }
  est.freq /= static_cast<double>(walkers);
  return est;
}

double heat_kernel_bound(double m, int dhat, double t) {
  if (!(m > 0.0) || !(t > 0.0)) throw std::invalid_argument("heat_kernel_bound: need m, t > 0");
  if (dhat < 0) throw std::invalid_argument("heat_kernel_bound: negative distance");
  if (dhat == 0) return 1.0 / m;
  const double d = static_cast<double>(dhat);
  return (1.0 / m) * std::exp(-d * std::log(2.0 * d / (std::exp(1.0) * t)));
}

AuditTable kernel_bound_audit(const KernelEstimate& est, const Graph& ghat, double rate_floor_m,
                              const std::vector<std::uint8_t>& window) {
  if (static_cast<int>(window.size()) != ghat.size())
    throw std::invalid_argument("kernel_bound_audit: window size mismatch");
  AuditTable table;
  for (std::size_t i = 0; i < est.times.size(); ++i) {
    const double t = est.times[i];
    for (int s = 0; s < ghat.size(); ++s) {
      if (!window[s]) continue;
      AuditRow row;
      row.t = t;
      row.site = s;
      row.dhat = ghat.dist(est.origin, s);
      row.bound = heat_kernel_bound(rate_floor_m, row.dhat, t);
      if (row.bound >= 1.0) {
        ++table.vacuous;
        continue;
      }
      row.khat = est.freq(static_cast<int>(i), s);
      row.se = std::sqrt(row.khat * (1.0 - row.khat) / static_cast<double>(est.walkers));
      row.violation = row.khat > row.bound + 3.0 * row.se;
      if (row.violation) ++table.violations;
      table.rows.push_back(row);
    }
  }
  return table;
}

std::vector<int> occupied_set(const Trajectory& traj, double eps, double t) {
  if (!(eps > 0.0)) throw std::invalid_argument("occupied_set: eps must be positive");
  const int i = traj.grid_index(t);
  std::vector<int> out;
  const Configuration& sup = traj.running_sup[i];
  for (int s = 0; s < sup.size(); ++s)
    if (sup[s] >= eps) out.push_back(s);
  return out;
}

int front_radius(const Trajectory& traj, const Graph& g, int x0, double eps, int grid_index) {
  const Configuration& sup = traj.running_sup[grid_index];
  int radius = 0;
  for (int s = 0; s < sup.size(); ++s)
    if (sup[s] >= eps) radius = std::max(radius, g.dist(x0, s));
  return radius;
}

FrontSpeedReport front_speed(const Ensemble& ens, const Graph& g, int x0, double eps,
                             double fit_t_lo, double fit_t_hi) {
  FrontSpeedReport rep;
  const int nt = static_cast<int>(ens.times.size());
  rep.mean_radius.t = ens.times;
  rep.envelope_radius.t = ens.times;
  std::vector<std::vector<double>> radii(nt);
  for (const auto& tr : ens.replicas) {
    if (tr.aborted()) continue;
    for (int i = 0; i < nt; ++i)
      radii[i].push_back(static_cast<double>(front_radius(tr, g, x0, eps, i)));
  }
  if (radii[0].empty()) throw std::runtime_error("front_speed: all replicas aborted");
  double overall_max = 0.0;
  for (int i = 0; i < nt; ++i) {
    double m = 0.0, mx = 0.0;
    for (double r : radii[i]) {
      m += r;
      mx = std::max(mx, r);
    }
    m /= static_cast<double>(radii[i].size());
    rep.mean_radius.value.push_back(m);
    double ss = 0.0;
    for (double r : radii[i]) ss += (r - m) * (r - m);
    rep.mean_radius.stderr_.push_back(
        radii[i].size() > 1 ? std::sqrt(ss / (radii[i].size() - 1.0) / radii[i].size()) : 0.0);
    rep.envelope_radius.value.push_back(mx);
    rep.envelope_radius.stderr_.push_back(0.0);
    overall_max = std::max(overall_max, mx);
  }
  if (overall_max == 0.0) {
    rep.degenerate = true;
    return rep;
  }
  std::vector<double> xs, ys, xm, ym;
  for (int i = 0; i < nt; ++i) {
    if (ens.times[i] < fit_t_lo || ens.times[i] > fit_t_hi) continue;
    xs.push_back(ens.times[i]);
    ys.push_back(rep.envelope_radius.value[i]);
    xm.push_back(ens.times[i]);
    ym.push_back(rep.mean_radius.value[i]);
  }
  const LinFit env = linear_fit(xs, ys);
  rep.slope = env.slope;
  rep.slope_stderr = env.slope_stderr;
  rep.r2 = env.r2;
  rep.mean_slope = linear_fit(xm, ym).slope;
  return rep;
}

SupProfile sup_moment_profile(const Ensemble& ens, const Graph& g, int x0, double t, int d_lo,
                              int d_hi) {
  const MeanTable table = site_means(ens, /*running_sup=*/true);
  int ti = -1;
  for (std::size_t i = 0; i < table.times.size(); ++i)
    if (std::abs(table.times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) ti = static_cast<int>(i);
  if (ti < 0) throw std::out_of_range("sup_moment_profile: time off the record grid");

  std::map<int, std::pair<double, double>> shells;  // dist -> (sum mean, sum se^2)
  std::map<int, int> counts;
  for (int s = 0; s < g.size(); ++s) {
    const int d = g.dist(x0, s);
    if (d < d_lo || d > d_hi) continue;
    shells[d].first += table.mean(ti, s);
    shells[d].second += table.stderr_(ti, s) * table.stderr_(ti, s);
    counts[d] += 1;
  }
  SupProfile prof;
  std::vector<double> xs, ys;
  for (const auto& [d, acc] : shells) {
    const int c = counts[d];
    const double mean = acc.first / c;
    prof.dist.push_back(d);
    prof.mean_sup.push_back(mean);
    prof.stderr_.push_back(std::sqrt(acc.second) / c);
    if (mean > 0.0 && d > 0) {
      xs.push_back(d * std::log(static_cast<double>(d)));
      ys.push_back(std::log(mean));
    }
  }
  const LinFit fit = linear_fit(xs, ys);
  prof.fitted_c = -fit.slope;
  prof.fitted_c_stderr = fit.slope_stderr;
  prof.fit_points = fit.points;
  return prof;
}

}  // namespace ips
