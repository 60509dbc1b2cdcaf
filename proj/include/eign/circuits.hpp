#pragma once

// DC analysis of resistor / ideal-diode circuits driven by one voltage source.
//
// Edge currents are reported along the circuit orientation. The source edge is
// oriented from its negative to its positive terminal, diodes from anode to
// cathode.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "eign/graph.hpp"

namespace eign {

class CircuitError : public Error {
 public:
  using Error::Error;
};

enum class ComponentKind : std::uint8_t { Source, Resistor, Diode };

struct CircuitComponent {
  ComponentKind kind = ComponentKind::Resistor;
  double resistance = 0.0;
  double source_voltage = 0.0;
};

struct Circuit {
  Graph graph;
  Orientation orientation;
  std::vector<CircuitComponent> parts;

  std::size_t source_edge() const {
    for (std::size_t e = 0; e < parts.size(); ++e)
      if (parts[e].kind == ComponentKind::Source) return e;
    throw CircuitError("circuit has no source");
  }

  std::vector<std::size_t> diodes() const {
    std::vector<std::size_t> d;
    for (std::size_t e = 0; e < parts.size(); ++e)
      if (parts[e].kind == ComponentKind::Diode) d.push_back(e);
    return d;
  }
};

struct CircuitSolution {
  std::vector<double> current;
  std::vector<double> potential;
  /// Indexed like `Circuit::diodes()`.
  std::vector<std::uint8_t> diode_on;
  std::size_t iterations = 0;
};

inline void validate_circuit(const Circuit& c) {
  const auto& g = c.graph;
  if (c.parts.size() != g.num_edges() || c.orientation.flip.size() != g.num_edges())
    throw CircuitError("component list does not match the edge count");
  std::size_t sources = 0;
  for (std::size_t e = 0; e < c.parts.size(); ++e) {
    const auto& p = c.parts[e];
    switch (p.kind) {
      case ComponentKind::Source:
        ++sources;
        if (g.edge(e).directed()) throw CircuitError("source edge must be undirected");
        break;
      case ComponentKind::Resistor:
        if (g.edge(e).directed()) throw CircuitError("resistor edge must be undirected");
        if (!(p.resistance > 0.0)) throw CircuitError("resistance must be positive");
        break;
      case ComponentKind::Diode:
        if (!g.edge(e).directed()) throw CircuitError("diode edge must be directed");
        break;
    }
  }
  if (sources != 1) throw CircuitError("circuit needs exactly one source");
  if (!c.orientation.direction_consistent(g)) throw CircuitError("diodes must be oriented along their direction");
}

namespace detail {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

struct StateSolve {
  CircuitSolution sol;
  /// Off diode closing a negative cycle of the off-state constraints, or -1.
  long long turn_on = -1;
  /// On diode with the most negative current, or -1.
  long long turn_off = -1;
};

inline double voltage_scale(const Circuit& c) { return std::fabs(c.parts[c.source_edge()].source_voltage); }

inline double current_scale(const Circuit& c) {
  double rmin = std::numeric_limits<double>::infinity();
  for (const auto& p : c.parts)
    if (p.kind == ComponentKind::Resistor) rmin = std::min(rmin, p.resistance);
  return std::isfinite(rmin) ? voltage_scale(c) / rmin : voltage_scale(c);
}

// Exact solution for a fixed diode state. On diodes are 0 V sources, off
// diodes are open. Nodes cut off from the source by open diodes carry no
// current; their potentials are any solution of the off-diode difference
// constraints (Bellman-Ford), if one exists.
inline StateSolve solve_state(const Circuit& c, const std::vector<std::uint8_t>& on) {
  const auto& g = c.graph;
  const std::size_t n = g.num_nodes(), m = g.num_edges();
  const auto diodes = c.diodes();
  const std::size_t src = c.source_edge();
  std::vector<std::uint8_t> conducting(m, 1);
  for (std::size_t k = 0; k < diodes.size(); ++k) conducting[diodes[k]] = on[k];

  UnionFind uf(n);
  for (std::size_t e = 0; e < m; ++e)
    if (conducting[e]) uf.unite(g.edge(e).u, g.edge(e).v);

  const std::size_t ref = c.orientation.tail(g, src);
  const std::size_t root = uf.find(ref);

  std::vector<long long> node_var(n, -1);
  std::size_t nv = 0;
  for (std::size_t v = 0; v < n; ++v)
    if (v != ref && uf.find(v) == root) node_var[v] = static_cast<long long>(nv++);
  std::vector<long long> vs_var(m, -1);
  std::size_t nvs = 0;
  for (std::size_t e = 0; e < m; ++e)
    if (conducting[e] && c.parts[e].kind != ComponentKind::Resistor && uf.find(g.edge(e).u) == root)
      vs_var[e] = static_cast<long long>(nv + nvs++);

  const std::size_t dim = nv + nvs;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t e = 0; e < m; ++e) {
    if (!conducting[e] || uf.find(g.edge(e).u) != root) continue;
    const std::size_t t = c.orientation.tail(g, e), h = c.orientation.head(g, e);
    const long long vt = node_var[t], vh = node_var[h];
    if (c.parts[e].kind == ComponentKind::Resistor) {
      const double gc = 1.0 / c.parts[e].resistance;
      if (vt >= 0) a(vt, vt) += gc;
      if (vh >= 0) a(vh, vh) += gc;
      if (vt >= 0 && vh >= 0) {
        a(vt, vh) -= gc;
        a(vh, vt) -= gc;
      }
    } else {
      const long long k = vs_var[e];
      if (vt >= 0) a(vt, k) += 1.0;
      if (vh >= 0) a(vh, k) -= 1.0;
      // phi_head - phi_tail = V
      if (vh >= 0) a(k, vh) += 1.0;
      if (vt >= 0) a(k, vt) -= 1.0;
      rhs(k) = c.parts[e].kind == ComponentKind::Source ? c.parts[e].source_voltage : 0.0;
    }
  }
  Eigen::VectorXd x;
  if (dim > 0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.rank() < static_cast<Eigen::Index>(dim)) throw CircuitError("singular conductance system");
    x = lu.solve(rhs);
  }

  StateSolve out;
  auto& sol = out.sol;
  sol.diode_on = on;
  sol.current.assign(m, 0.0);
  sol.potential.assign(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    if (node_var[v] >= 0) sol.potential[v] = x(node_var[v]);
  for (std::size_t e = 0; e < m; ++e) {
    if (uf.find(g.edge(e).u) != root || !conducting[e]) continue;
    const std::size_t t = c.orientation.tail(g, e), h = c.orientation.head(g, e);
    if (c.parts[e].kind == ComponentKind::Resistor) sol.current[e] = (sol.potential[t] - sol.potential[h]) / c.parts[e].resistance;
    else sol.current[e] = x(vs_var[e]);
  }

  const double itol = 1e-9 * current_scale(c);
  double worst = -itol;
  for (std::size_t k = 0; k < diodes.size(); ++k) {
    if (on[k] && sol.current[diodes[k]] < worst) {
      worst = sol.current[diodes[k]];
      out.turn_off = static_cast<long long>(k);
    }
  }

  // Difference constraints phi_anode - phi_cathode <= tol over component offsets.
  std::vector<std::size_t> comp_id(n, 0);
  std::vector<std::size_t> roots;
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t r = uf.find(v);
    auto it = std::find(roots.begin(), roots.end(), r);
    comp_id[v] = static_cast<std::size_t>(it - roots.begin());
    if (it == roots.end()) roots.push_back(r);
  }
  struct Arc {
    std::size_t from, to;
    double w;
    std::size_t diode;
  };
  const double vtol = 1e-9 * voltage_scale(c);
  std::vector<Arc> arcs;
  for (std::size_t k = 0; k < diodes.size(); ++k) {
    if (on[k]) continue;
    const std::size_t e = diodes[k];
    const std::size_t an = c.orientation.tail(g, e), ca = c.orientation.head(g, e);
    arcs.push_back({comp_id[ca], comp_id[an], sol.potential[ca] - sol.potential[an] + vtol, k});
  }
  const std::size_t nc = roots.size();
  std::vector<double> dist(nc, 0.0);
  std::vector<long long> pred(nc, -1);
  long long relaxed = -1;
  for (std::size_t it = 0; it <= nc; ++it) {
    relaxed = -1;
    for (std::size_t i = 0; i < arcs.size(); ++i) {
      const auto& arc = arcs[i];
      if (dist[arc.from] + arc.w < dist[arc.to]) {
        dist[arc.to] = dist[arc.from] + arc.w;
        pred[arc.to] = static_cast<long long>(i);
        relaxed = static_cast<long long>(i);
      }
    }
    if (relaxed < 0) break;
  }
  if (relaxed >= 0) {
    std::size_t v = arcs[static_cast<std::size_t>(relaxed)].to;
    for (std::size_t i = 0; i < nc; ++i) {
      if (pred[v] < 0) throw CircuitError("constraint cycle tracing failed");
      v = arcs[static_cast<std::size_t>(pred[v])].from;
    }
    const std::size_t start = v;
    double most = std::numeric_limits<double>::infinity();
    do {
      const auto& arc = arcs[static_cast<std::size_t>(pred[v])];
      if (arc.w < most) {
        most = arc.w;
        out.turn_on = static_cast<long long>(arc.diode);
      }
      v = arc.from;
    } while (v != start);
  } else {
    const double shift = dist[comp_id[ref]];
    for (std::size_t v = 0; v < n; ++v)
      if (uf.find(v) != root) sol.potential[v] = dist[comp_id[v]] - shift;
  }
  return out;
}

}  // namespace detail

/// Current scale of a circuit: source voltage over the smallest resistance.
inline double circuit_current_scale(const Circuit& c) { return detail::current_scale(c); }

/// Largest net nodal current relative to max(largest edge current, V / R_min).
inline double kcl_residual(const Circuit& c, const CircuitSolution& s) {
  const auto& g = c.graph;
  std::vector<double> net(g.num_nodes(), 0.0);
  double scale = circuit_current_scale(c);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    net[c.orientation.tail(g, e)] -= s.current[e];
    net[c.orientation.head(g, e)] += s.current[e];
    scale = std::max(scale, std::fabs(s.current[e]));
  }
  double r = 0.0;
  for (double v : net) r = std::max(r, std::fabs(v));
  return scale > 0.0 ? r / scale : r;
}

/// Active-set iteration starting from all diodes conducting. Each step either
/// opens the on-diode with the most negative current or closes an off-diode
/// whose blocking constraint is violated.
inline CircuitSolution solve_circuit(const Circuit& c) {
  validate_circuit(c);
  const std::size_t d = c.diodes().size();
  if (d > 30) throw CircuitError("too many diodes");
  std::vector<std::uint8_t> on(d, 1);
  const std::size_t budget = (std::size_t{1} << d) + d + 1;
  for (std::size_t it = 1; it <= budget; ++it) {
    auto st = detail::solve_state(c, on);
    if (st.turn_off >= 0) {
      on[static_cast<std::size_t>(st.turn_off)] = 0;
    } else if (st.turn_on >= 0) {
      on[static_cast<std::size_t>(st.turn_on)] = 1;
    } else {
      st.sol.iterations = it;
      return st.sol;
    }
  }
  throw CircuitError("active-set iteration did not converge");
}

/// Reference solver: tries all 2^d diode states and requires every consistent
/// state to give the same currents.
inline CircuitSolution solve_circuit_enumerate(const Circuit& c) {
  validate_circuit(c);
  const std::size_t d = c.diodes().size();
  if (d > 20) throw CircuitError("too many diodes to enumerate");
  const double itol = 1e-9 * detail::current_scale(c);
  std::vector<CircuitSolution> found;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    std::vector<std::uint8_t> on(d);
    for (std::size_t k = 0; k < d; ++k) on[k] = (mask >> k) & 1;
    auto st = detail::solve_state(c, on);
    if (st.turn_off < 0 && st.turn_on < 0) found.push_back(std::move(st.sol));
  }
  if (found.empty()) throw CircuitError("no consistent diode state");
  for (const auto& s : found)
    for (std::size_t e = 0; e < s.current.size(); ++e)
      if (std::fabs(s.current[e] - found[0].current[e]) > itol)
        throw CircuitError("consistent diode states disagree on currents");
  found[0].iterations = std::size_t{1} << d;
  return found[0];
}

/// Voltage sources (the source and every diode) must not close a loop, or the
/// nodal system becomes singular when those diodes conduct.
inline bool has_source_loop(const Circuit& c) {
  detail::UnionFind uf(c.graph.num_nodes());
  for (std::size_t e = 0; e < c.parts.size(); ++e)
    if (c.parts[e].kind != ComponentKind::Resistor && !uf.unite(c.graph.edge(e).u, c.graph.edge(e).v)) return true;
  return false;
}

/// Random topology: a 3-cycle grown by attaching nodes v through (s, v), (v, t)
/// until `nodes` nodes. One edge is the source, the rest are resistors or,
/// with probability `p_diode`, diodes.
inline Circuit random_circuit(std::size_t nodes, double p_diode, Rng& rng) {
  if (nodes < 3) throw CircuitError("circuit needs at least 3 nodes");
  for (;;) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {1, 2}, {2, 0}};
    for (std::size_t v = 3; v < nodes; ++v) {
      const std::size_t s = rng.below(v);
      std::size_t t = rng.below(v - 1);
      if (t >= s) ++t;
      pairs.push_back({s, v});
      pairs.push_back({v, t});
    }
    const std::size_t m = pairs.size();
    const std::size_t src = rng.below(m);
    std::vector<Edge> edges;
    Circuit c;
    c.parts.resize(m);
    for (std::size_t e = 0; e < m; ++e) {
      auto [a, b] = pairs[e];
      if (e == src) {
        c.parts[e] = {ComponentKind::Source, 0.0, rng.uniform(1.0, 10.0)};
        edges.push_back({a, b, EdgeKind::Undirected});
      } else if (rng.bernoulli(p_diode)) {
        c.parts[e] = {ComponentKind::Diode, 0.0, 0.0};
        if (rng.bernoulli(0.5)) std::swap(a, b);
        edges.push_back({a, b, EdgeKind::Directed});
      } else {
        c.parts[e] = {ComponentKind::Resistor, rng.uniform(100.0, 10000.0), 0.0};
        edges.push_back({a, b, EdgeKind::Undirected});
      }
    }
    c.graph = Graph(nodes, std::move(edges));
    c.orientation = random_orientation(c.graph, rng);
    if (!has_source_loop(c)) return c;
  }
}

}  // namespace eign
