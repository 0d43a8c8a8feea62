// levy.hpp: one-dimensional Levy measures on (0, infinity): finite atom
// lists and the spectrally positive stable family, with the closed-form
// moments the admissibility arithmetic needs.
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ips {

struct LevyAtom {
  double size;  // z > 0
  double rate;  // lambda >= 0
};

// Normalization of the stable density f(a) z^(-1-a) dz:
// f(a) = Gamma(2-a)/(a(a-1)), a strictly inside (1,2).
inline double stable_normalization(double alpha) {
  if (!(alpha > 1.0 && alpha < 2.0))
    throw std::invalid_argument("stable_normalization: alpha must lie strictly in (1,2)");
  return std::tgamma(2.0 - alpha) / (alpha * (alpha - 1.0));
}

class LevyMeasure1D {
 public:
  enum class Kind { Empty, FiniteAtoms, StablePositive };

  static LevyMeasure1D empty() { return LevyMeasure1D(); }

  static LevyMeasure1D finite_atoms(std::vector<LevyAtom> atoms) {
    LevyMeasure1D m;
    for (const auto& a : atoms) {
      if (!(a.size > 0.0)) throw std::invalid_argument("levy: atom size must be positive");
      if (a.rate < 0.0) throw std::invalid_argument("levy: atom rate must be nonnegative");
    }
    m.kind_ = Kind::FiniteAtoms;
    m.atoms_ = std::move(atoms);
    return m;
  }

  static LevyMeasure1D stable(double alpha) {
    LevyMeasure1D m;
    m.kind_ = Kind::StablePositive;
    m.alpha_ = alpha;
    m.f_ = stable_normalization(alpha);  // rejects alpha outside (1,2)
    return m;
  }

  Kind kind() const { return kind_; }
  bool is_empty() const { return kind_ == Kind::Empty; }
  double alpha() const { return alpha_; }
  const std::vector<LevyAtom>& atoms() const { return atoms_; }

  // ∫_(a,b] z mu(dz); a=0 gives the full first moment (+inf for stable).
  double mean_between(double a, double b) const {
    switch (kind_) {
      case Kind::Empty:
        return 0.0;
      case Kind::FiniteAtoms: {
        double s = 0.0;
        for (const auto& at : atoms_)
          if (at.size > a && at.size <= b) s += at.size * at.rate;
        return s;
      }
      case Kind::StablePositive: {
        if (a <= 0.0) return std::numeric_limits<double>::infinity();
        const double p = 1.0 - alpha_;  // exponent of the antiderivative z^p/p
        const double hi = std::isinf(b) ? 0.0 : std::pow(b, p);
        return f_ * (std::pow(a, p) - hi) / (alpha_ - 1.0);
      }
    }
    return 0.0;
  }

  double mean() const { return mean_between(0.0, std::numeric_limits<double>::infinity()); }
  double mean_above(double a) const { return mean_between(a, std::numeric_limits<double>::infinity()); }

  // ∫_(0,a] z^2 mu(dz); closed form f/(2-alpha) * a^(2-alpha) for stable.
  double second_below(double a) const {
    switch (kind_) {
      case Kind::Empty:
        return 0.0;
      case Kind::FiniteAtoms: {
        double s = 0.0;
        for (const auto& at : atoms_)
          if (at.size <= a) s += at.size * at.size * at.rate;
        return s;
      }
      case Kind::StablePositive:
        return f_ * std::pow(a, 2.0 - alpha_) / (2.0 - alpha_);
    }
    return 0.0;
  }

  // total mass of the restriction to (a,b]; +inf for stable when a <= 0
  double mass_between(double a, double b) const {
    switch (kind_) {
      case Kind::Empty:
        return 0.0;
      case Kind::FiniteAtoms: {
        double s = 0.0;
        for (const auto& at : atoms_)
          if (at.size > a && at.size <= b) s += at.rate;
        return s;
      }
      case Kind::StablePositive: {
        if (a <= 0.0) return std::numeric_limits<double>::infinity();
        const double hi = std::isinf(b) ? 0.0 : std::pow(b, -alpha_);
        return f_ * (std::pow(a, -alpha_) - hi) / alpha_;
      }
    }
    return 0.0;
  }

 private:
  Kind kind_ = Kind::Empty;
  double alpha_ = 0.0;
  double f_ = 0.0;
  std::vector<LevyAtom> atoms_;
};

}  // namespace ips
