// simulator.hpp: time-stepping integrator on a finite truncation with
// positivity preservation, explosion guard, and common-noise coupled
// execution. All processes sharing a fabric consume identical Brownian
// pairs and jump event lists; only acceptance thresholds differ.
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ips/configuration.hpp"
#include "ips/model.hpp"
#include "ips/noise.hpp"

namespace ips {

struct SimParams {
  double dt = 1e-3;
  double horizon = 1.0;
  double record_dt = 0.0;   // 0 means record only t=0 and the horizon
  double jump_cap = 1e5;    // reject jumps with v(target)*z above this
  double delta_cut = 0.01;  // small-jump truncation of stable measures
  double m_guard = 1e6;     // tau_m explosion guard on ||eta||
  int replicas = 1;

  std::int64_t steps() const;
  std::int64_t record_stride() const;
  void validate() const;
};

enum class StopReason { Horizon, TauM };

struct Trajectory {
  std::vector<double> times;
  std::vector<Configuration> states;
  std::vector<Configuration> running_sup;
  std::vector<double> norms;
  StopReason stop = StopReason::Horizon;
  double stop_time = 0.0;
  std::uint64_t branch_applied = 0;
  std::uint64_t branch_cap_rejected = 0;
  std::uint64_t immig_applied = 0;
  std::uint64_t immig_cap_rejected = 0;

  bool aborted() const { return stop == StopReason::TauM; }
  int grid_index(double t) const;  // exact record time lookup; throws off-grid
};

struct SimHooks;

// Model compiled against a graph, weight, and the retained parts of its jump
// measures (cap and delta_cut folded in). Immutable; shared by threads.
class CompiledModel {
 public:
  CompiledModel(const ModelSpec& model, const Graph& graph, const WeightSpec& weight,
                const SimParams& params);

  const ModelSpec& spec() const { return spec_; }
  const Graph& graph() const { return *graph_; }
  const Eigen::ArrayXd& weights() const { return weights_; }
  int sites() const { return static_cast<int>(weights_.size()); }

  // true when every uncompensated jump mean survives the cap/cut intact, so
  // the mean-field oracle describes the scheme exactly
  bool mean_exact() const { return mean_exact_; }
  // variance discarded by the delta_cut truncation, sum_x v g ∫_(0,dc] z^2 mu_xx
  double dropped_small_jump_variance() const { return dropped_variance_; }

  bool same_noise_structure(const CompiledModel& other) const;

  double dt() const { return dt_; }

 private:
  friend std::vector<Trajectory> simulate_shared(const std::vector<const CompiledModel*>&,
                                                 const std::vector<Configuration>&,
                                                 const NoiseFabric&, const SimParams&,
                                                 const SimHooks&);

  ModelSpec spec_;
  const Graph* graph_;
  Eigen::ArrayXd weights_;
  double dt_ = 0.0, jump_cap_ = 0.0, delta_cut_ = 0.0;

  // drift: x' = diag_lin ∘ x + dt (OD x + b) [- dt m x^lambda when nonlinear]
  Eigen::SparseMatrix<double, Eigen::RowMajor> offdiag_;
  Eigen::ArrayXd diag_lin_;     // a(x,x) - 1{lambda=1} m(x) - g(x) M1_own_applied(x)
  Eigen::ArrayXd base_;         // b(x)
  bool affine_ = true;

  std::vector<int> diffusion_sites_;

  // branching: one table per source site with a nonempty measure family
  struct Source {
    int site;
    EventTable table;
  };
  std::vector<Source> sources_;
  std::vector<int> source_of_site_;  // -1 when absent

  // immigration: single global table plus the acceptance-rate pieces
  EventTable immigration_;
  std::vector<double> imm_rho_static_;  // rho0(w) + psi(w) zmax_applied(w), per component site
  std::vector<int> imm_component_site_;
  bool has_phi_ = false;

  bool mean_exact_ = true;
  double dropped_variance_ = 0.0;
};

// Diagnostic log of realized jump events (shared across coupled consumers).
struct LoggedEvent {
  std::int64_t step;
  int source;  // -1 for immigration
  char kind;   // 'b' branch, 'i' immigration
  double u;
  double size;
  int target;
};

struct SimHooks {
  std::vector<LoggedEvent>* event_log = nullptr;
};

// Run any number of processes in lockstep on one fabric. Event majorants are
// taken as the max of all consumers' thresholds, so every consumer's
// acceptance window is covered and coupled monotonicity is exact for
// jump-only models. If any process trips the tau_m guard the whole set stops
// and is flagged.
std::vector<Trajectory> simulate_shared(const std::vector<const CompiledModel*>& models,
                                        const std::vector<Configuration>& inits,
                                        const NoiseFabric& fabric, const SimParams& params,
                                        const SimHooks& hooks = {});

Trajectory simulate(const CompiledModel& model, const Configuration& init,
                    const NoiseFabric& fabric, const SimParams& params);

std::pair<Trajectory, Trajectory> simulate_coupled(const CompiledModel& upper,
                                                   const CompiledModel& lower,
                                                   const Configuration& upper_init,
                                                   const Configuration& lower_init,
                                                   const NoiseFabric& fabric,
                                                   const SimParams& params);

// Nested-volume refinement: runs the volume-restricted model per mask on the
// same fabric; masks must be nested and the initial state is masked per run.
std::vector<Trajectory> finite_volume_refine(const ModelSpec& model, const Graph& graph,
                                             const WeightSpec& weight, const Configuration& init,
                                             const NoiseFabric& fabric, const SimParams& params,
                                             const std::vector<std::vector<std::uint8_t>>& volumes);

// ---- replica ensembles -----------------------------------------------------

struct Ensemble {
  std::vector<double> times;  // full record grid (aborted replicas stop early)
  std::vector<Trajectory> replicas;
  int aborted = 0;

  int count() const { return static_cast<int>(replicas.size()); }
};

// Replica r runs on the fabric seeded with derive_replica_seed(master, r);
// results are merged by replica id, independent of thread scheduling.
Ensemble run_ensemble(const CompiledModel& model, const Configuration& init,
                      std::uint64_t master_seed, const SimParams& params, int threads = 0);

std::vector<Ensemble> run_coupled_ensemble(const std::vector<const CompiledModel*>& models,
                                           const std::vector<Configuration>& inits,
                                           std::uint64_t master_seed, const SimParams& params,
                                           int threads = 0);

std::vector<double> record_grid(const SimParams& params);

}  // namespace ips
