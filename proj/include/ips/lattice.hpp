// lattice.hpp: finite graph truncations, graph distance, balls, weight
// functions, and the R-fattened auxiliary graph.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace ips {

// A finite connected graph with dense site ids 0..n-1. Z^d truncations keep
// the coordinate bijection (sites are integer vectors with |x|_1 <= L, edges
// |x-y|_1 = 1, no wrap-around); arbitrary graphs come from an edge list.
// Immutable after construction; safe to share across threads.
class Graph {
 public:
  static Graph lattice(int dimension, int truncation_radius);
  static Graph from_edges(int site_count, const std::vector<std::pair<int, int>>& edges);
  // Edge-list text format: one "u v" pair per line, 0-based ids.
  static Graph from_edge_file(const std::string& path);

  int size() const { return static_cast<int>(offsets_.size()) - 1; }
  int degree(int x) const { return static_cast<int>(offsets_[x + 1] - offsets_[x]); }
  const std::int32_t* neighbors_begin(int x) const { return adjacency_.data() + offsets_[x]; }
  const std::int32_t* neighbors_end(int x) const { return adjacency_.data() + offsets_[x + 1]; }

  int max_degree() const { return max_degree_; }
  // The paper's d >= 2 convention for the ball bound #B(x,r) <= d^(r+1).
  int degree_bound() const { return max_degree_ < 2 ? 2 : max_degree_; }

  // Shortest-path edge count. O(1) on lattices, BFS otherwise.
  int dist(int x, int y) const;
  std::vector<int> ball(int x, int r) const;

  bool is_lattice() const { return dimension_ > 0; }
  int dimension() const { return dimension_; }
  int truncation() const { return truncation_; }
  int origin() const { return origin_; }
  // Graph distance from the origin; the |x|_1 of the weight families.
  int l1_from_origin(int x) const { return from_origin_[x]; }
  const Eigen::VectorXi& coord(int x) const { return coords_[x]; }
  int site_at(const Eigen::VectorXi& c) const;

 private:
  Graph() = default;
  void build_adjacency(int n, const std::vector<std::pair<int, int>>& edges);
  void finish();

  std::vector<std::int64_t> offsets_;
  std::vector<std::int32_t> adjacency_;
  std::vector<Eigen::VectorXi> coords_;  // lattice only
  std::vector<int> from_origin_;
  int dimension_ = 0;    // 0 for FiniteAdjacency
  int truncation_ = 0;
  int origin_ = 0;
  int max_degree_ = 0;
};

struct WeightSpec {
  enum class Family { Exponential, Polynomial, Constant };
  Family family = Family::Constant;
  double delta = 1.0;

  static WeightSpec exponential(double delta) { return {Family::Exponential, delta}; }
  static WeightSpec polynomial(double delta) { return {Family::Polynomial, delta}; }
  static WeightSpec constant() { return {Family::Constant, 0.0}; }
};

double weight(const Graph& g, const WeightSpec& w, int site);
Eigen::ArrayXd weight_vector(const Graph& g, const WeightSpec& w);

// kappa = ln sup_{dist(x,y)<=R} v(y)/v(x); delta*R exactly for the
// exponential family, exhaustive pair scan otherwise.
double weight_growth_kappa(const Graph& g, const WeightSpec& w, int R);

// Same vertex set, edge (u,v) iff 1 <= dist(u,v) <= R. The fattened distance
// dhat satisfies dhat <= dist <= R*dhat.
Graph auxiliary_graph(const Graph& g, int R);

}  // namespace ips
