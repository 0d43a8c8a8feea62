// noise.hpp: deterministic, replayable realization of all noise streams.
//
// Every variate is a pure function of (master seed, stream kind, two key
// words, draw index). There is no mutable generator state shared between
// consumers: coupled processes and parallel replicas read the same fabric
// at the same keys and obtain bit-identical values.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ips {

enum class StreamKind : std::uint64_t {
  Brownian = 1,
  Branch = 2,
  Immigration = 3,
  Walker = 4,
  Generic = 5,
};

// SplitMix64 finalizer; full-avalanche 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Sequential stream addressed by a key. The key pins the stream's origin;
// draws within one key are a SplitMix64 sequence. Distinct keys land in
// statistically independent parts of the fabric.
class KeyStream {
 public:
  KeyStream(std::uint64_t seed, StreamKind kind, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = mix64(seed ^ 0x6A09E667F3BCC909ULL);
    h = mix64(h ^ static_cast<std::uint64_t>(kind));
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    state_ = h;
  }

  std::uint64_t next_u64() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0,1); never returns 0 or 1.
  double u01() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  // Standard normal via Box-Muller (cosine branch); two uniforms per draw.
  double gaussian() noexcept {
    const double u1 = u01();
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Poisson(mean) by Knuth's product method; recursive halving keeps the
  // running product away from underflow for large means.
  std::uint64_t poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson: negative mean");
    if (mean == 0.0) return 0;
    if (mean > 1e7) throw std::runtime_error("poisson: event rate too large for event-based stepping");
    std::uint64_t total = 0;
    while (mean > 500.0) {
      total += poisson_small(250.0);
      mean -= 250.0;
    }
    return total + poisson_small(mean);
  }

 private:
  std::uint64_t poisson_small(double mean) noexcept {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= u01();
    } while (p > limit);
    return k - 1;
  }

  std::uint64_t state_;
};

struct NoiseFabric {
  std::uint64_t seed = 0;

  KeyStream stream(StreamKind kind, std::uint64_t a, std::uint64_t b = 0) const {
    return KeyStream(seed, kind, a, b);
  }

  // Gaussian increment of W(x) over one step: mean 0, variance dt,
  // deterministic in (seed, site, step).
  double brownian_increment(std::uint64_t site, std::uint64_t step, double dt) const {
    KeyStream s = stream(StreamKind::Brownian, site, step);
    return s.gaussian() * std::sqrt(dt);
  }

  // Gaussian plus an extra uniform, for diffusion substeps that need a
  // crossing decision from the same key.
  void diffusion_pair(std::uint64_t site, std::uint64_t step, double& z, double& u) const {
    KeyStream s = stream(StreamKind::Brownian, site, step);
    z = s.gaussian();
    u = s.u01();
  }
};

inline std::uint64_t derive_replica_seed(std::uint64_t master, std::uint64_t replica) {
  return mix64(mix64(master ^ 0x243F6A8885A308D3ULL) ^ replica);
}

// One realized point of a Poisson random measure, reduced to its cylindrical
// coordinates: uniform mark in [0, majorant], target site, jump size.
// `apply` is false for points of the over-cap tail (counted, never added).
struct JumpEvent {
  double u;
  std::int32_t target;
  double size;
  bool apply;
};

// Sampler for the retained (and over-cap tail) part of one cylindrical
// measure family: a discrete choice over components, each with a size law.
struct EventTable {
  struct Component {
    std::int32_t target = 0;
    double rate = 0.0;
    bool apply = true;
    // size law: either a single atom, a discrete set of atoms, or a
    // delta-truncated stable density sampled by inverse CDF.
    enum class Law { Atom, Atoms, StableTrunc } law;
    double atom_size = 0.0;
    std::vector<double> atom_cum;    // cumulative rates within component
    std::vector<double> atom_sizes;
    double alpha = 0.0, pow_lo = 0.0, pow_hi = 0.0;  // lo^(-a), hi^(-a)

    double sample_size(double u) const {
      switch (law) {
        case Law::Atom:
          return atom_size;
        case Law::Atoms: {
          const double x = u * atom_cum.back();
          std::size_t i = 0;
          while (i + 1 < atom_cum.size() && x > atom_cum[i]) ++i;
          return atom_sizes[i];
        }
        case Law::StableTrunc:
          return std::pow(pow_lo - u * (pow_lo - pow_hi), -1.0 / alpha);
      }
      return 0.0;
    }
  };

  std::vector<Component> components;
  std::vector<double> cum_rate;  // cumulative over components
  double total_rate = 0.0;       // retained + tail
  double applied_rate = 0.0;     // retained only
  double applied_mean = 0.0;     // ∫ z over applied part

  void finalize() {
    cum_rate.clear();
    total_rate = 0.0;
    applied_rate = 0.0;
    for (const auto& c : components) {
      total_rate += c.rate;
      if (c.apply) applied_rate += c.rate;
      cum_rate.push_back(total_rate);
    }
  }

  bool empty() const { return total_rate <= 0.0; }
};

// Realize the events of one Poisson measure on [0, majorant] over one step.
// The list is a pure function of (seed, kind, key, step, dt, majorant, table);
// consumers accept an event iff u is at or below their own threshold.
inline void realize_events(const NoiseFabric& fabric, StreamKind kind, std::uint64_t key,
                           std::uint64_t step, double dt, double majorant,
                           const EventTable& table, std::vector<JumpEvent>& out) {
  out.clear();
  if (majorant <= 0.0 || table.empty() || table.applied_rate <= 0.0) return;
  KeyStream s = fabric.stream(kind, key, step);
  const double rate = majorant / table.applied_rate * table.total_rate;
  const std::uint64_t n = s.poisson(rate * dt);
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double pick = s.u01() * table.total_rate;
    std::size_t c = 0;
    while (c + 1 < table.cum_rate.size() && pick > table.cum_rate[c]) ++c;
    const auto& comp = table.components[c];
    JumpEvent e;
    e.size = comp.sample_size(s.u01());
    e.target = comp.target;
    e.apply = comp.apply;
    e.u = s.u01() * majorant;
    out.push_back(e);
  }
}

}  // namespace ips
