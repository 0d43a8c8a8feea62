// configuration.hpp: the state space of tempered configurations on a finite
// truncation: nonnegative masses indexed by site id, the weighted l1 norm,
// and the partial order behind every comparison result.
#pragma once

#include <Eigen/Core>

#include "json.hpp"

namespace ips {

using Configuration = Eigen::ArrayXd;

inline Configuration empty_configuration(int sites) { return Configuration::Zero(sites); }

inline Configuration point_mass(int sites, int site, double mass = 1.0) {
  Configuration c = Configuration::Zero(sites);
  c[site] = mass;
  return c;
}

// ||eta|| = sum_x v(x) eta(x)
inline double norm(const Configuration& eta, const Eigen::ArrayXd& weights) {
  return (weights * eta).sum();
}

// true iff eta(x) <= xi(x) for every site
inline bool dominates(const Configuration& xi, const Configuration& eta) {
  return (eta <= xi).all();
}

// componentwise minimum
inline Configuration meet(const Configuration& a, const Configuration& b) {
  return a.min(b);
}

// sum_x v(x) (eta(x) - xi(x))^+ ; zero iff xi dominates eta
inline double positive_part_distance(const Configuration& eta, const Configuration& xi,
                                     const Eigen::ArrayXd& weights) {
  return (weights * (eta - xi).max(0.0)).sum();
}

// Masses below this are flushed to zero to keep denormals out of the hot loop.
inline constexpr double kMassFloor = 1e-300;

inline void prune(Configuration& eta) {
  eta = (eta < kMassFloor).select(0.0, eta);
}

// JSON object {site_id: mass}, zeros omitted.
inline nlohmann::ordered_json to_json(const Configuration& eta) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (int i = 0; i < eta.size(); ++i)
    if (eta[i] != 0.0) j[std::to_string(i)] = eta[i];
  return j;
}

inline Configuration configuration_from_json(const nlohmann::json& j, int sites) {
  Configuration c = Configuration::Zero(sites);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const int site = std::stoi(it.key());
    if (site < 0 || site >= sites) throw std::out_of_range("configuration: site id out of range");
    const double m = it.value().get<double>();
    if (m < 0.0) throw std::invalid_argument("configuration: negative mass");
    c[site] = m;
  }
  return c;
}

}  // namespace ips
