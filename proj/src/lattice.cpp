#include "ips/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ips {

namespace {

// Enumerate integer vectors with |x|_1 <= L in a fixed lexicographic order.
void enumerate_ball(int dim, int L, Eigen::VectorXi& cur, int k, int budget,
                    std::vector<Eigen::VectorXi>& out) {
  if (k == dim) {
    out.push_back(cur);
    return;
  }
  for (int v = -budget; v <= budget; ++v) {
    cur[k] = v;
    enumerate_ball(dim, L, cur, k + 1, budget - std::abs(v), out);
  }
}

}  // namespace

Graph Graph::lattice(int dimension, int truncation_radius) {
  if (dimension < 1) throw std::invalid_argument("lattice: dimension must be >= 1");
  if (truncation_radius < 0) throw std::invalid_argument("lattice: truncation radius must be >= 0");
  Graph g;
  g.dimension_ = dimension;
  g.truncation_ = truncation_radius;
  Eigen::VectorXi cur(dimension);
  enumerate_ball(dimension, truncation_radius, cur, 0, truncation_radius, g.coords_);

  std::map<std::vector<int>, int> index;
  for (int i = 0; i < static_cast<int>(g.coords_.size()); ++i) {
    std::vector<int> key(g.coords_[i].data(), g.coords_[i].data() + dimension);
    index[key] = i;
  }
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < static_cast<int>(g.coords_.size()); ++i) {
    for (int k = 0; k < dimension; ++k) {
      std::vector<int> key(g.coords_[i].data(), g.coords_[i].data() + dimension);
      key[k] += 1;
      auto it = index.find(key);
      if (it != index.end()) edges.emplace_back(i, it->second);
    }
  }
  g.build_adjacency(static_cast<int>(g.coords_.size()), edges);
  std::vector<int> zero(dimension, 0);
  g.origin_ = index.at(zero);
  g.finish();
  return g;
}

Graph Graph::from_edges(int site_count, const std::vector<std::pair<int, int>>& edges) {
  if (site_count < 1) throw std::invalid_argument("graph: need at least one site");
  Graph g;
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= site_count || v >= site_count)
      throw std::invalid_argument("graph: edge endpoint out of range");
    if (u == v) throw std::invalid_argument("graph: self-loop");
  }
  g.build_adjacency(site_count, edges);
  g.origin_ = 0;
  g.finish();
  return g;
}

Graph Graph::from_edge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge file: " + path);
  std::vector<std::pair<int, int>> edges;
  int max_id = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int u, v;
    if (!(ls >> u >> v)) throw std::runtime_error("bad edge line: " + line);
    edges.emplace_back(u, v);
    max_id = std::max({max_id, u, v});
  }
  return from_edges(max_id + 1, edges);
}

void Graph::build_adjacency(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::set<int>> adj(n);
  for (auto [u, v] : edges) {
    adj[u].insert(v);
    adj[v].insert(u);
  }
  offsets_.assign(1, 0);
  adjacency_.clear();
  for (int i = 0; i < n; ++i) {
    for (int v : adj[i]) adjacency_.push_back(v);
    offsets_.push_back(static_cast<std::int64_t>(adjacency_.size()));
  }
}

void Graph::finish() {
  const int n = size();
  max_degree_ = 0;
  for (int i = 0; i < n; ++i) max_degree_ = std::max(max_degree_, degree(i));

  // connectivity + distances from the origin in one BFS
  from_origin_.assign(n, -1);
  std::queue<int> q;
  from_origin_[origin_] = 0;
  q.push(origin_);
  while (!q.empty()) {
    int x = q.front();
    q.pop();
    for (auto it = neighbors_begin(x); it != neighbors_end(x); ++it) {
      if (from_origin_[*it] < 0) {
        from_origin_[*it] = from_origin_[x] + 1;
        q.push(*it);
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (from_origin_[i] < 0) throw std::invalid_argument("graph: not connected");
}

int Graph::dist(int x, int y) const {
  const int n = size();
  if (x < 0 || y < 0 || x >= n || y >= n) throw std::out_of_range("dist: unknown site id");
  if (x == y) return 0;
  if (is_lattice()) {
    // The |.|_1 ball is l1-convex: a monotone path ordered decreasing-first
    // stays inside the truncation, so graph distance equals |x-y|_1.
    return (coords_[x] - coords_[y]).cwiseAbs().sum();
  }
  std::vector<int> d(n, -1);
  std::queue<int> q;
  d[x] = 0;
  q.push(x);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (auto it = neighbors_begin(u); it != neighbors_end(u); ++it) {
      if (d[*it] < 0) {
        d[*it] = d[u] + 1;
        if (*it == y) return d[y];
        q.push(*it);
      }
    }
  }
  return -1;  // unreachable; construction guarantees connectivity
}

std::vector<int> Graph::ball(int x, int r) const {
  const int n = size();
  if (x < 0 || x >= n) throw std::out_of_range("ball: unknown site id");
  if (r < 0) throw std::invalid_argument("ball: negative radius");
  std::vector<int> d(n, -1);
  std::vector<int> out;
  std::queue<int> q;
  d[x] = 0;
  q.push(x);
  out.push_back(x);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    if (d[u] == r) continue;
    for (auto it = neighbors_begin(u); it != neighbors_end(u); ++it) {
      if (d[*it] < 0) {
        d[*it] = d[u] + 1;
        out.push_back(*it);
        q.push(*it);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int Graph::site_at(const Eigen::VectorXi& c) const {
  if (!is_lattice()) throw std::logic_error("site_at: not a lattice");
  if (c.cwiseAbs().sum() > truncation_) return -1;
  // coords_ are in the enumeration order of enumerate_ball; binary search
  // would need the order relation, a linear scan is fine at these sizes.
  for (int i = 0; i < size(); ++i)
    if (coords_[i] == c) return i;
  return -1;
}

double weight(const Graph& g, const WeightSpec& w, int site) {
  if (site < 0 || site >= g.size()) throw std::out_of_range("weight: unknown site id");
  const double r = static_cast<double>(g.l1_from_origin(site));
  switch (w.family) {
    case WeightSpec::Family::Exponential:
      return std::exp(-w.delta * r);
    case WeightSpec::Family::Polynomial:
      return 1.0 / (1.0 + std::pow(r, w.delta));
    case WeightSpec::Family::Constant:
      return 1.0;
  }
  return 1.0;
}

Eigen::ArrayXd weight_vector(const Graph& g, const WeightSpec& w) {
  Eigen::ArrayXd v(g.size());
  for (int i = 0; i < g.size(); ++i) v[i] = weight(g, w, i);
  return v;
}

double weight_growth_kappa(const Graph& g, const WeightSpec& w, int R) {
  if (R < 1) throw std::invalid_argument("weight_growth_kappa: R must be >= 1");
  if (w.family == WeightSpec::Family::Constant) return 0.0;
  if (w.family == WeightSpec::Family::Exponential) return w.delta * static_cast<double>(R);
  double best = 1.0;
  for (int x = 0; x < g.size(); ++x) {
    const double vx = weight(g, w, x);
    for (int y : g.ball(x, R)) {
      const double ratio = weight(g, w, y) / vx;
      if (!std::isfinite(ratio)) throw std::runtime_error("weight_growth_kappa: unbounded ratio");
      best = std::max(best, ratio);
    }
  }
  return std::log(best);
}

Graph auxiliary_graph(const Graph& g, int R) {
  if (R < 1) throw std::invalid_argument("auxiliary_graph: R must be >= 1");
  std::vector<std::pair<int, int>> edges;
  for (int x = 0; x < g.size(); ++x)
    for (int y : g.ball(x, R))
      if (y > x) edges.emplace_back(x, y);
  return Graph::from_edges(g.size(), edges);
}

}  // namespace ips
