// model.hpp: parametric coefficient families for the particle system, the
// admissibility constants C1..C6, effective drift, and subcriticality
// analysis. Immutable after construction; shared read-only by workers.
#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ips/configuration.hpp"
#include "ips/lattice.hpp"
#include "ips/levy.hpp"

namespace ips {

// Interaction kernel a(x,y). Off-diagonal entries must be nonnegative; the
// decay families carry a closed-form weight-uniform C1 bound on Z^d with
// exponential weights.
struct KernelSpec {
  enum class Family { Zero, NearestNeighbor, ExpDecay, RangeCutoff, Explicit };
  Family family = Family::Zero;
  double coeff = 0.0;    // c in a(x,y) = c * profile(|x-y|)
  double eps = 0.0;      // decay rate of ExpDecay
  int range = 1;         // cutoff of RangeCutoff
  double diagonal = 0.0; // a(x,x), any sign
  Eigen::MatrixXd matrix;  // Explicit only

  static KernelSpec zero() { return {}; }
  static KernelSpec nearest_neighbor(double c, double diag = 0.0) {
    KernelSpec k;
    k.family = Family::NearestNeighbor;
    k.coeff = c;
    k.diagonal = diag;
    return k;
  }
  static KernelSpec exp_decay(double c, double eps) {
    KernelSpec k;
    k.family = Family::ExpDecay;
    k.coeff = c;
    k.eps = eps;
    return k;
  }
  static KernelSpec range_cutoff(double c, int R) {
    KernelSpec k;
    k.family = Family::RangeCutoff;
    k.coeff = c;
    k.range = R;
    return k;
  }
  static KernelSpec explicit_matrix(Eigen::MatrixXd m) {
    KernelSpec k;
    k.family = Family::Explicit;
    k.matrix = std::move(m);
    return k;
  }
};

// The full coefficient tuple. Branching measures are cylindrical: the
// measure at source y places a single jump of law mu_{y,target} on one
// target site; immigration likewise places single-site jumps with law
// sigma_x at site x, accepted at rate rho(x, eta, nu) = rho0(x) +
// sum_y phi(x,y) eta(y) + sum_y psi(x,y) nu(y).
struct ModelSpec {
  Eigen::ArrayXd immigration_base;                 // b(x) >= 0
  Eigen::SparseMatrix<double, Eigen::RowMajor> interaction;  // a(x,y)
  Eigen::ArrayXd kill_strength;                    // m(x) >= 0
  double kill_exponent = 1.0;                      // lambda >= 0
  Eigen::ArrayXd diffusion;                        // c(x) >= 0, c(x,t) = c(x) t
  Eigen::ArrayXd branch_rate;                      // g(x) >= 0, g(x,t) = g(x) t

  struct BranchTarget {
    int target;
    LevyMeasure1D measure;
  };
  std::vector<std::vector<BranchTarget>> branch_measures;  // per source site

  Eigen::ArrayXd rho_const;                        // rho0(x) >= 0
  Eigen::SparseMatrix<double, Eigen::RowMajor> rho_phi;  // phi(x,y) >= 0
  Eigen::ArrayXd rho_psi_diag;                     // psi(x,x) >= 0
  std::vector<LevyMeasure1D> immigration_measures; // sigma_x

  int range = 0;                                   // kernel range R
  std::optional<double> c1_uniform;                // family closed-form bound

  int sites() const { return static_cast<int>(immigration_base.size()); }
  static ModelSpec zero(int sites);

  const LevyMeasure1D* branch_measure(int source, int target) const {
    for (const auto& bt : branch_measures[source])
      if (bt.target == target) return &bt.measure;
    return nullptr;
  }
};

// Computed constants of (A1)-(A6) on the truncation, per-condition pass
// flags, the affine subcriticality margin, and the moment-growth constant.
struct AdmissibilityReport {
  double c1 = 0.0;        // smallest constant in the kernel bound on the truncation
  double c2_sup = 0.0;    // sup_x c(x)
  double c3_sup = 0.0;    // sup_x g(x)
  double c4 = 0.0;
  double c5 = 0.0;
  double c6 = 0.0;
  double sum_v_c2 = 0.0;            // sum_x v(x) c(x)
  double small_jump_second = 0.0;   // sum_x v(x) g(x) ∫_(0,1] z^2 mu_xx
  double moment_growth_C = 0.0;     // C with E||eta_t|| <= (1+E||eta_0||) e^{Ct}
  double margin_A = std::numeric_limits<double>::quiet_NaN();  // affine models only
  std::optional<double> c1_uniform; // weight-uniform family bound, when known
  bool a1 = false, a2 = false, a3 = false, a4 = false, a5 = false, a6 = false;
  bool all_pass = false;
  std::string failure;              // names the first violated condition
};

AdmissibilityReport admissibility_check(const ModelSpec& model, const Graph& g, const WeightSpec& w);

// Btilde(x, eta) of the mean dynamics: drift plus the mean contribution of
// the uncompensated jump terms.
double effective_drift(const ModelSpec& model, int x, const Configuration& eta);

// A = min_y -(sum_x v(x) atilde(x,y)) / v(y) over the truncation, with
// atilde the effective linear kernel. Positive A certifies the drift
// subcriticality inequality for ordered pairs. Affine models only.
double subcriticality_margin(const ModelSpec& model, const Graph& g, const WeightSpec& w);

// (Atilde, btilde) with d/dt E[eta_t] = btilde + Atilde E[eta_t] for affine
// models; the simulator's mean oracle.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> mean_field_matrix(const ModelSpec& model, const Graph& g);

// true iff a(x,y) = 0 and the branching mean from y to x vanishes whenever
// dist(x,y) > R and g(y) > 0.
bool check_finite_range(const ModelSpec& model, const Graph& g, int R);

// Builds the sparse a(x,y) on the truncation from a kernel family, and the
// closed-form weight-uniform C1 bound when one is available.
Eigen::SparseMatrix<double, Eigen::RowMajor> build_kernel(const KernelSpec& k, const Graph& g);
std::optional<double> kernel_c1_uniform(const KernelSpec& k, const Graph& g, const WeightSpec& w);

// Thrown when an analysis is requested outside its supported model class
// (e.g. subcriticality of a nonlinear model).
struct UnsupportedAnalysis : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- presets -------------------------------------------------------------

struct PresetInfo {
  std::string name;
  std::string summary;
  std::map<std::string, double> defaults;
};

const std::vector<PresetInfo>& list_presets();
bool is_preset(const std::string& name);

// Instantiate a named preset on a graph; `overrides` replaces listed
// defaults, unknown keys are rejected.
ModelSpec make_preset(const std::string& name, const Graph& g,
                      const std::map<std::string, double>& overrides = {});

// The weight family a preset's defaults assume (delta may be overridden).
WeightSpec preset_weight(const std::string& name, const std::map<std::string, double>& overrides = {});

// B0 rows, g, and rho multiplied by the indicator of `inside`; the killing
// part B1 and the diffusion stay global. Used by the nested-volume
// construction and the restriction coupling.
ModelSpec restrict_model(const ModelSpec& model, const std::vector<std::uint8_t>& inside);

}  // namespace ips
