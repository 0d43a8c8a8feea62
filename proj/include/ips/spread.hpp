// spread.hpp: linear-speed spread verification: continuous-time random
// walks on the fattened graph, the heat-kernel upper bound and its audit,
// occupied-set front tracking, and the sup-moment distance profile.
#pragma once

#include <Eigen/Core>
#include <vector>

#include "ips/analysis.hpp"
#include "ips/lattice.hpp"
#include "ips/noise.hpp"
#include "ips/simulator.hpp"

namespace ips {

struct KernelEstimate {
  std::vector<double> times;
  Eigen::MatrixXd freq;  // times x sites, rows sum to 1
  int walkers = 0;
  int origin = 0;
};

// Walkers jump to a uniform neighbor at exponential rate M * degree
// (per-edge rate M); empirical transition frequencies at the given times.
KernelEstimate ctrw_simulate(const Graph& ghat, double rate_M, int x0,
                             const std::vector<double>& times, const NoiseFabric& fabric,
                             int walkers);

// (1/m) exp[-dhat ln(2 dhat / (e t))], with 0 ln 0 = 0 at dhat = 0; values
// above 1 are returned raw (vacuous as probability bounds).
double heat_kernel_bound(double m, int dhat, double t);

struct AuditRow {
  double t = 0.0;
  int site = 0;
  int dhat = 0;
  double khat = 0.0;
  double bound = 0.0;
  double se = 0.0;
  bool violation = false;
};

struct AuditTable {
  std::vector<AuditRow> rows;  // non-vacuous audited entries
  int vacuous = 0;
  int violations = 0;
};

// Checks khat <= bound + 3 s.e. for every audited (t, site) with a
// non-vacuous bound; `window[site]` selects the audited sites.
AuditTable kernel_bound_audit(const KernelEstimate& est, const Graph& ghat, double rate_floor_m,
                              const std::vector<std::uint8_t>& window);

// Sites whose running supremum at grid time t is >= eps.
std::vector<int> occupied_set(const Trajectory& traj, double eps, double t);

// max over the occupied set of dist(x0, .); empty set maps to 0.
int front_radius(const Trajectory& traj, const Graph& g, int x0, double eps, int grid_index);

struct FrontSpeedReport {
  Series mean_radius;
  Series envelope_radius;  // max over replicas; the path-uniform front proxy
  double slope = 0.0;      // envelope fit over the late window
  double slope_stderr = 0.0;
  double r2 = 0.0;
  double mean_slope = 0.0;  // pooled-mean fit, diagnostic
  bool degenerate = false;  // front never exceeded eps in any replica
};

FrontSpeedReport front_speed(const Ensemble& ens, const Graph& g, int x0, double eps,
                             double fit_t_lo, double fit_t_hi);

struct SupProfile {
  std::vector<int> dist;
  std::vector<double> mean_sup;    // E[sup_{r<=t} eta_r(x)] averaged over the shell
  std::vector<double> stderr_;
  double fitted_c = 0.0;           // -slope of log mean vs d ln d
  double fitted_c_stderr = 0.0;
  int fit_points = 0;
};

// Distance profile of E[sup eta] at one grid time, fitted against d ln d on
// [d_lo, d_hi]; shells with no observed mass are reported but not fitted.
SupProfile sup_moment_profile(const Ensemble& ens, const Graph& g, int x0, double t, int d_lo,
                              int d_hi);

}  // namespace ips
