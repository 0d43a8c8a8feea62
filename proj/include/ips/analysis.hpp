// analysis.hpp: statistical verification on trajectory ensembles: moment
// bounds, comparison audits, contraction of ordered couplings, and
// invariant-measure probes. Pure functions over immutable ensembles.
#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ips/model.hpp"
#include "ips/simulator.hpp"

namespace ips {

struct Series {
  std::vector<double> t;
  std::vector<double> value;
  std::vector<double> stderr_;
  std::vector<double> bound;  // optional reference curve; empty when unused

  std::size_t size() const { return t.size(); }
};

struct LinFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_stderr = 0.0;
  int points = 0;
};

LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Least squares of log(value) against t over t in [t_lo, t_hi], dropping
// nonpositive values; the decay rate is -slope.
LinFit log_decay_fit(const Series& s, double t_lo, double t_hi);

// Empirical E||eta_t|| with standard errors; aborted replicas are excluded.
Series moment_curve(const Ensemble& ens, const Eigen::ArrayXd& weights);

// Per-time mean of sum_x v(x) (lower(x) - upper(x))^+ over replica pairs:
// the ordering-violation series of a coupled run.
Series comparison_audit(const Ensemble& lower, const Ensemble& upper,
                        const Eigen::ArrayXd& weights);

// Trapezoid integral of a series over its grid.
double series_integral(const Series& s);

// Per-site mean table over the non-aborted replicas of an ensemble.
struct MeanTable {
  std::vector<double> times;
  Eigen::MatrixXd mean;     // times x sites
  Eigen::MatrixXd stderr_;  // times x sites
  int used = 0;
};
MeanTable site_means(const Ensemble& ens, bool running_sup = false);

struct ContractionReport {
  Series series;          // E||eta_t - xi_t|| with the e^{-At} bound attached
  double margin = 0.0;    // certified A
  double fitted_rate = 0.0;
  double rate_stderr = 0.0;
  bool pass = false;      // series below bound within 3 s.e. at every grid point
  std::string note;
};

// Contraction of an ordered coupled pair: the series is the difference of
// mean curves, which equals E||eta - xi|| under the preserved ordering and
// upper-bounds the Wasserstein-1 distance of the two laws. Refuses
// non-subcritical margins.
ContractionReport w1_ordered(const Ensemble& upper, const Ensemble& lower,
                             const Eigen::ArrayXd& weights, double margin_A);

// exp(A) via the scaling-and-squaring implementation behind Eigen's
// unsupported MatrixFunctions module.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a);

// Mean of the affine system d/dt m = A m + b at time t from m(0) = init,
// evaluated with one augmented matrix exponential (no inversion of A).
Eigen::VectorXd mean_oracle(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& init, double t);

// Stationary mean -A^{-1} b of a subcritical affine model.
Eigen::VectorXd stationary_mean(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

// Two-sample Kolmogorov-Smirnov p-value (asymptotic, small-sample corrected).
double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b);

struct InvariantReport {
  Series sandwich;          // sum_x v |mean_up - mean_lo| over time
  Eigen::VectorXd stationary;      // -A^{-1} b
  Eigen::VectorXd long_run_mean;   // pooled over both starts, post burn-in
  Eigen::VectorXd long_run_stderr;
  double margin = 0.0;
  double fitted_rate = 0.0;
  double ks_pvalue = 0.0;
  bool mean_pass = false;   // per-site long-run mean within 3 s.e. of stationary
  bool rate_pass = false;   // fitted sandwich decay rate >= 0.8 * margin
  bool ks_pass = false;     // two-start marginals agree at level 1e-3
  std::string note;
};

// Sandwich probe of the invariant measure: one ensemble from the empty
// configuration, one from `upper_init`, both post burn-in. Refuses
// non-subcritical or immigration-free models.
InvariantReport invariant_probe(const CompiledModel& model, const Configuration& upper_init,
                                std::uint64_t master_seed, const SimParams& params,
                                double burn_in, int threads = 0);

}  // namespace ips
