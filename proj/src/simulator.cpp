#include "ips/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace ips {

namespace {

std::int64_t exact_steps(double total, double dt, const char* what) {
  const double ratio = total / dt;
  const std::int64_t n = std::llround(ratio);
  if (n < 0 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
    throw std::invalid_argument(std::string(what) + " must be an integer multiple of dt");
  return n;
}

}  // namespace

std::int64_t SimParams::steps() const { return exact_steps(horizon, dt, "horizon"); }

std::int64_t SimParams::record_stride() const {
  if (record_dt <= 0.0) return std::max<std::int64_t>(steps(), 1);
  return std::max<std::int64_t>(exact_steps(record_dt, dt, "record_dt"), 1);
}

void SimParams::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("sim: dt must be positive");
  if (horizon < 0.0) throw std::invalid_argument("sim: horizon must be nonnegative");
  if (!(m_guard > 0.0)) throw std::invalid_argument("sim: m_guard must be positive");
  if (!(delta_cut > 0.0 && delta_cut < jump_cap))
    throw std::invalid_argument("sim: need 0 < delta_cut < jump_cap");
  if (replicas < 1) throw std::invalid_argument("sim: replicas must be >= 1");
  steps();
  record_stride();
}

int Trajectory::grid_index(double t) const {
  for (int i = 0; i < static_cast<int>(times.size()); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return i;
  throw std::out_of_range("trajectory: time off the record grid");
}

std::vector<double> record_grid(const SimParams& params) {
  const std::int64_t steps = params.steps();
  const std::int64_t stride = params.record_stride();
  std::vector<double> grid{0.0};
  for (std::int64_t s = stride; s <= steps; s += stride) grid.push_back(static_cast<double>(s) * params.dt);
  return grid;
}

CompiledModel::CompiledModel(const ModelSpec& model, const Graph& graph, const WeightSpec& weight,
                             const SimParams& params)
    : spec_(model), graph_(&graph) {
  params.validate();
  dt_ = params.dt;
  jump_cap_ = params.jump_cap;
  delta_cut_ = params.delta_cut;
  const int n = model.sites();
  if (n != graph.size()) throw std::invalid_argument("compile: model/graph size mismatch");
  weights_ = weight_vector(graph, weight);
  affine_ = model.kill_exponent == 1.0;
  base_ = model.immigration_base;

  // split the interaction into off-diagonal and diagonal parts
  std::vector<Eigen::Triplet<double>> od;
  Eigen::ArrayXd adiag = Eigen::ArrayXd::Zero(n);
  for (int x = 0; x < n; ++x)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(model.interaction, x); it;
         ++it) {
      if (it.col() == x)
        adiag[x] = it.value();
      else
        od.emplace_back(x, it.col(), it.value());
    }
  offdiag_.resize(n, n);
  offdiag_.setFromTriplets(od.begin(), od.end());

  // retained jump tables
  source_of_site_.assign(n, -1);
  Eigen::ArrayXd own_mean = Eigen::ArrayXd::Zero(n);
  for (int y = 0; y < n; ++y) {
    if (model.branch_measures[y].empty()) continue;
    EventTable table;
    for (const auto& bt : model.branch_measures[y]) {
      const double cap_z = params.jump_cap / weights_[bt.target];
      const auto& mu = bt.measure;
      if (mu.is_empty()) continue;
      if (mu.kind() == LevyMeasure1D::Kind::FiniteAtoms) {
        EventTable::Component keep, tail;
        keep.target = tail.target = bt.target;
        keep.apply = true;
        tail.apply = false;
        keep.law = tail.law = EventTable::Component::Law::Atoms;
        for (const auto& at : mu.atoms()) {
          if (at.rate == 0.0) continue;
          auto& c = at.size <= cap_z ? keep : tail;
          c.rate += at.rate;
          c.atom_cum.push_back((c.atom_cum.empty() ? 0.0 : c.atom_cum.back()) + at.rate);
          c.atom_sizes.push_back(at.size);
        }
        if (keep.rate > 0.0) table.components.push_back(keep);
        if (tail.rate > 0.0) {
          table.components.push_back(tail);
          mean_exact_ = false;
        }
        if (bt.target == y) own_mean[y] += mu.mean_between(0.0, cap_z);
      } else {
        // stable: retained (delta_cut, cap_z], over-cap tail (cap_z, inf)
        const double a = mu.alpha();
        EventTable::Component keep;
        keep.target = bt.target;
        keep.apply = true;
        keep.law = EventTable::Component::Law::StableTrunc;
        keep.alpha = a;
        keep.pow_lo = std::pow(params.delta_cut, -a);
        keep.pow_hi = std::pow(cap_z, -a);
        keep.rate = mu.mass_between(params.delta_cut, cap_z);
        if (keep.rate > 0.0) table.components.push_back(keep);
        EventTable::Component tail = keep;
        tail.apply = false;
        tail.pow_lo = keep.pow_hi;
        tail.pow_hi = 0.0;
        tail.rate = mu.mass_between(cap_z, std::numeric_limits<double>::infinity());
        if (tail.rate > 0.0) table.components.push_back(tail);
        if (bt.target == y) {
          own_mean[y] += mu.mean_between(params.delta_cut, cap_z);
          dropped_variance_ += weights_[y] * model.branch_rate[y] *
                               mu.second_below(std::min(params.delta_cut, cap_z));
        } else {
          mean_exact_ = false;  // cross-site stable mean is not representable
        }
      }
    }
    table.finalize();
    if (!table.components.empty()) {
      source_of_site_[y] = static_cast<int>(sources_.size());
      sources_.push_back({y, std::move(table)});
    }
  }

  diag_lin_ = adiag - model.branch_rate * own_mean;
  if (affine_) diag_lin_ -= model.kill_strength;

  for (int x = 0; x < n; ++x)
    if (model.diffusion[x] > 0.0) diffusion_sites_.push_back(x);

  // immigration table over all sites with a measure
  for (int w = 0; w < n; ++w) {
    const auto& sig = model.immigration_measures[w];
    if (sig.is_empty()) continue;
    const double cap_z = params.jump_cap / weights_[w];
    double zmax_applied = 0.0;
    if (sig.kind() == LevyMeasure1D::Kind::FiniteAtoms) {
      EventTable::Component keep, tail;
      keep.target = tail.target = w;
      keep.apply = true;
      tail.apply = false;
      keep.law = tail.law = EventTable::Component::Law::Atoms;
      for (const auto& at : sig.atoms()) {
        if (at.rate == 0.0) continue;
        auto& c = at.size <= cap_z ? keep : tail;
        c.rate += at.rate;
        c.atom_cum.push_back((c.atom_cum.empty() ? 0.0 : c.atom_cum.back()) + at.rate);
        c.atom_sizes.push_back(at.size);
        if (at.size <= cap_z) zmax_applied = std::max(zmax_applied, at.size);
      }
      if (keep.rate > 0.0) {
        immigration_.components.push_back(keep);
        imm_component_site_.push_back(w);
        imm_rho_static_.push_back(0.0);
      }
      if (tail.rate > 0.0) {
        immigration_.components.push_back(tail);
        imm_component_site_.push_back(w);
        imm_rho_static_.push_back(0.0);
        mean_exact_ = false;
      }
    } else {
      const double a = sig.alpha();
      EventTable::Component keep;
      keep.target = w;
      keep.apply = true;
      keep.law = EventTable::Component::Law::StableTrunc;
      keep.alpha = a;
      keep.pow_lo = std::pow(params.delta_cut, -a);
      keep.pow_hi = std::pow(cap_z, -a);
      keep.rate = sig.mass_between(params.delta_cut, cap_z);
      zmax_applied = cap_z;
      if (keep.rate > 0.0) {
        immigration_.components.push_back(keep);
        imm_component_site_.push_back(w);
        imm_rho_static_.push_back(0.0);
      }
      mean_exact_ = false;  // dropped small immigration jumps carry mean
    }
    // static part of the acceptance rate for events landing at w
    for (std::size_t k = 0; k < imm_component_site_.size(); ++k)
      if (imm_component_site_[k] == w)
        imm_rho_static_[k] = model.rho_const[w] + model.rho_psi_diag[w] * zmax_applied;
  }
  immigration_.finalize();
  has_phi_ = model.rho_phi.nonZeros() > 0;

  if (affine_) {
    const double floor = (1.0 + params.dt * diag_lin_.minCoeff());
    if (floor < 0.0)
      throw std::invalid_argument("compile: dt too large, drift step not monotone (1 + dt*diag < 0)");
  }
}

bool CompiledModel::same_noise_structure(const CompiledModel& other) const {
  auto same_component = [](const EventTable::Component& a, const EventTable::Component& b) {
    return a.target == b.target && a.rate == b.rate && a.law == b.law &&
           a.atom_sizes == b.atom_sizes && a.atom_cum == b.atom_cum && a.alpha == b.alpha &&
           a.pow_lo == b.pow_lo && a.pow_hi == b.pow_hi;
  };
  auto same_table = [&](const EventTable& a, const EventTable& b) {
    if (a.components.size() != b.components.size()) return false;
    for (std::size_t c = 0; c < a.components.size(); ++c)
      if (!same_component(a.components[c], b.components[c])) return false;
    return true;
  };
  if (sites() != other.sites() || dt_ != other.dt_) return false;
  if ((weights_ != other.weights_).any()) return false;
  if ((spec_.diffusion != other.spec_.diffusion).any()) return false;
  if (sources_.size() != other.sources_.size()) return false;
  for (std::size_t i = 0; i < sources_.size(); ++i)
    if (sources_[i].site != other.sources_[i].site ||
        !same_table(sources_[i].table, other.sources_[i].table))
      return false;
  return same_table(immigration_, other.immigration_);
}

std::vector<Trajectory> simulate_shared(const std::vector<const CompiledModel*>& models,
                                        const std::vector<Configuration>& inits,
                                        const NoiseFabric& fabric, const SimParams& params,
                                        const SimHooks& hooks) {
  params.validate();
  const int K = static_cast<int>(models.size());
  if (K == 0 || inits.size() != models.size())
    throw std::invalid_argument("simulate: models/initial states mismatch");
  for (int r = 1; r < K; ++r)
    if (!models[0]->same_noise_structure(*models[r]))
      throw std::invalid_argument("simulate: coupled models must share the noise structure");

  const CompiledModel& m0 = *models[0];
  if (params.dt != m0.dt_ || params.jump_cap != m0.jump_cap_ || params.delta_cut != m0.delta_cut_)
    throw std::invalid_argument("simulate: params differ from the ones the model was compiled with");
  const int n = m0.sites();
  const std::int64_t steps = params.steps();
  const std::int64_t stride = params.record_stride();
  const double dt = params.dt;

  std::vector<Trajectory> out(K);
  std::vector<Configuration> x(K), sup(K), xn(K);
  for (int r = 0; r < K; ++r) {
    if (inits[r].size() != n) throw std::invalid_argument("simulate: initial state size mismatch");
    if ((inits[r] < 0.0).any()) throw std::invalid_argument("simulate: negative initial mass");
    x[r] = inits[r];
    sup[r] = inits[r];
    out[r].times.push_back(0.0);
    out[r].states.push_back(x[r]);
    out[r].running_sup.push_back(sup[r]);
    out[r].norms.push_back(norm(x[r], models[r]->weights_));
  }

  std::vector<JumpEvent> events;
  std::vector<Eigen::ArrayXd> phi_eta(K);
  std::vector<double> thresholds(K);
  bool stopped = false;
  std::int64_t step = 0;

  for (; step < steps && !stopped; ++step) {
    // tau_m guard on the pre-step states
    for (int r = 0; r < K; ++r) {
      if (norm(x[r], models[r]->weights_) > params.m_guard) {
        stopped = true;
        break;
      }
    }
    if (stopped) break;

    // (1) drift, frozen at the pre-step state
    for (int r = 0; r < K; ++r) {
      const CompiledModel& m = *models[r];
      xn[r] = (1.0 + dt * m.diag_lin_) * x[r] +
              dt * ((m.offdiag_ * x[r].matrix()).array() + m.base_);
      if (!m.affine_)
        xn[r] -= dt * m.spec_.kill_strength * x[r].pow(m.spec_.kill_exponent);
      xn[r] = xn[r].max(0.0);
    }

    // (2) diffusion: truncated Euler proposal with exact absorption at zero
    for (int s : m0.diffusion_sites_) {
      bool any = false;
      for (int r = 0; r < K; ++r)
        if (xn[r][s] > 0.0) { any = true; break; }
      if (!any) continue;
      double z, u;
      fabric.diffusion_pair(static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(step), z, u);
      for (int r = 0; r < K; ++r) {
        const double X = xn[r][s];
        if (X <= 0.0) continue;
        const double c = models[r]->spec_.diffusion[s];
        const double cand = X + std::sqrt(2.0 * c * X * dt) * z;
        xn[r][s] = (cand <= 0.0 || u < std::exp(-cand / (c * dt))) ? 0.0 : cand;
      }
    }

    // (3a) branching events, thresholds from the pre-step states
    for (const auto& src : m0.sources_) {
      const int y = src.site;
      double majorant = 0.0;
      for (int r = 0; r < K; ++r) {
        const double t = models[r]->spec_.branch_rate[y] * x[r][y] * src.table.applied_rate;
        thresholds[r] = t;
        majorant = std::max(majorant, t);
      }
      if (majorant <= 0.0) continue;
      realize_events(fabric, StreamKind::Branch, static_cast<std::uint64_t>(y),
                     static_cast<std::uint64_t>(step), dt, majorant, src.table, events);
      for (const JumpEvent& e : events) {
        if (hooks.event_log)
          hooks.event_log->push_back({step, y, 'b', e.u, e.size, e.target});
        for (int r = 0; r < K; ++r) {
          if (e.u > thresholds[r]) continue;
          if (e.apply) {
            xn[r][e.target] += e.size;
            ++out[r].branch_applied;
          } else {
            ++out[r].branch_cap_rejected;
          }
        }
      }
    }

    // (3b) immigration events, acceptance rho(target, eta_-, z)
    if (!m0.immigration_.empty()) {
      const double lam = m0.immigration_.applied_rate;
      double majorant = 0.0;
      for (int r = 0; r < K; ++r) {
        const CompiledModel& m = *models[r];
        if (m.has_phi_) phi_eta[r] = (m.spec_.rho_phi * x[r].matrix()).array();
        for (std::size_t k = 0; k < m.imm_rho_static_.size(); ++k) {
          double rate = m.imm_rho_static_[k];
          if (m.has_phi_) rate += phi_eta[r][m.imm_component_site_[k]];
          majorant = std::max(majorant, rate * lam);
        }
      }
      if (majorant > 0.0) {
        realize_events(fabric, StreamKind::Immigration, 0, static_cast<std::uint64_t>(step), dt,
                       majorant, m0.immigration_, events);
        for (const JumpEvent& e : events) {
          if (hooks.event_log)
            hooks.event_log->push_back({step, -1, 'i', e.u, e.size, e.target});
          for (int r = 0; r < K; ++r) {
            const CompiledModel& m = *models[r];
            double rho = m.spec_.rho_const[e.target] + m.spec_.rho_psi_diag[e.target] * e.size;
            if (m.has_phi_) rho += phi_eta[r][e.target];
            if (e.u > rho * lam) continue;
            if (e.apply) {
              xn[r][e.target] += e.size;
              ++out[r].immig_applied;
            } else {
              ++out[r].immig_cap_rejected;
            }
          }
        }
      }
    }

    // (4) commit, flush denormal dust, track running suprema
    for (int r = 0; r < K; ++r) {
      x[r] = (xn[r] < kMassFloor).select(0.0, xn[r]);
      sup[r] = sup[r].max(x[r]);
    }

    if ((step + 1) % stride == 0) {
      const double t = static_cast<double>(step + 1) * dt;
      for (int r = 0; r < K; ++r) {
        out[r].times.push_back(t);
        out[r].states.push_back(x[r]);
        out[r].running_sup.push_back(sup[r]);
        out[r].norms.push_back(norm(x[r], models[r]->weights_));
      }
    }
  }

  for (int r = 0; r < K; ++r) {
    out[r].stop = stopped ? StopReason::TauM : StopReason::Horizon;
    out[r].stop_time = static_cast<double>(step) * dt;
  }
  return out;
}

Trajectory simulate(const CompiledModel& model, const Configuration& init,
                    const NoiseFabric& fabric, const SimParams& params) {
  return std::move(simulate_shared({&model}, {init}, fabric, params)[0]);
}

std::pair<Trajectory, Trajectory> simulate_coupled(const CompiledModel& upper,
                                                   const CompiledModel& lower,
                                                   const Configuration& upper_init,
                                                   const Configuration& lower_init,
                                                   const NoiseFabric& fabric,
                                                   const SimParams& params) {
  auto v = simulate_shared({&upper, &lower}, {upper_init, lower_init}, fabric, params);
  return {std::move(v[0]), std::move(v[1])};
}

std::vector<Trajectory> finite_volume_refine(const ModelSpec& model, const Graph& graph,
                                             const WeightSpec& weight, const Configuration& init,
                                             const NoiseFabric& fabric, const SimParams& params,
                                             const std::vector<std::vector<std::uint8_t>>& volumes) {
  const int n = model.sites();
  for (std::size_t i = 0; i + 1 < volumes.size(); ++i)
    for (int s = 0; s < n; ++s)
      if (volumes[i][s] && !volumes[i + 1][s])
        throw std::invalid_argument("finite_volume_refine: volumes must be nested");

  std::vector<ModelSpec> restricted;
  std::vector<std::unique_ptr<CompiledModel>> compiled;
  std::vector<const CompiledModel*> ptrs;
  std::vector<Configuration> inits;
  for (const auto& mask : volumes) {
    restricted.push_back(restrict_model(model, mask));
    compiled.push_back(std::make_unique<CompiledModel>(restricted.back(), graph, weight, params));
    ptrs.push_back(compiled.back().get());
    Configuration masked = init;
    for (int s = 0; s < n; ++s)
      if (!mask[s]) masked[s] = 0.0;
    inits.push_back(std::move(masked));
  }
  return simulate_shared(ptrs, inits, fabric, params);
}

namespace {

template <class RunOne>
void parallel_replicas(int replicas, int threads, RunOne&& run_one) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, replicas));
  if (threads == 1) {
    for (int r = 0; r < replicas; ++r) run_one(r);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int r = next.fetch_add(1); r < replicas; r = next.fetch_add(1)) run_one(r);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

Ensemble run_ensemble(const CompiledModel& model, const Configuration& init,
                      std::uint64_t master_seed, const SimParams& params, int threads) {
  Ensemble ens;
  ens.times = record_grid(params);
  ens.replicas.resize(params.replicas);
  parallel_replicas(params.replicas, threads, [&](int r) {
    NoiseFabric fabric{derive_replica_seed(master_seed, static_cast<std::uint64_t>(r))};
    ens.replicas[r] = simulate(model, init, fabric, params);
  });
  for (const auto& t : ens.replicas)
    if (t.aborted()) ++ens.aborted;
  return ens;
}

std::vector<Ensemble> run_coupled_ensemble(const std::vector<const CompiledModel*>& models,
                                           const std::vector<Configuration>& inits,
                                           std::uint64_t master_seed, const SimParams& params,
                                           int threads) {
  const int K = static_cast<int>(models.size());
  std::vector<Ensemble> out(K);
  for (int k = 0; k < K; ++k) {
    out[k].times = record_grid(params);
    out[k].replicas.resize(params.replicas);
  }
  parallel_replicas(params.replicas, threads, [&](int r) {
    NoiseFabric fabric{derive_replica_seed(master_seed, static_cast<std::uint64_t>(r))};
    auto trajs = simulate_shared(models, inits, fabric, params);
    for (int k = 0; k < K; ++k) out[k].replicas[r] = std::move(trajs[k]);
  });
  for (int k = 0; k < K; ++k)
    for (const auto& t : out[k].replicas)
      if (t.aborted()) ++out[k].aborted;
  return out;
}

}  // namespace ips
