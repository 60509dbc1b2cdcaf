#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "eign/matrix.hpp"
#include "eign/rng.hpp"
#include "eign/sparse.hpp"

namespace eign {

enum class EdgeKind : std::uint8_t { Directed, Undirected };

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  EdgeKind kind = EdgeKind::Undirected;

  bool directed() const { return kind == EdgeKind::Directed; }
  friend bool operator==(const Edge&, const Edge&) = default;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

/// Node count plus an ordered edge list. The edge order defines the index
/// space of every m x m operator built on the graph.
///
/// Undirected edges are stored with `u < v`. Self-loops and duplicate edges are
/// rejected; anti-parallel directed edges are allowed.
class Graph {
 public:
  Graph() = default;

  Graph(std::size_t n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    std::set<std::pair<std::size_t, std::size_t>> directed, undirected;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      Edge& ed = edges_[e];
      if (ed.u >= n_ || ed.v >= n_)
        throw GraphError("edge " + std::to_string(e) + ": node index out of range");
      if (ed.u == ed.v) throw GraphError("edge " + std::to_string(e) + ": self-loop");
      if (!ed.directed() && ed.u > ed.v) std::swap(ed.u, ed.v);
      const auto key = std::minmax(ed.u, ed.v);
      if (ed.directed()) {
        if (undirected.count(key) || !directed.insert({ed.u, ed.v}).second)
          throw GraphError("edge " + std::to_string(e) + ": duplicate edge");
      } else {
        if (undirected.count(key) || directed.count({ed.u, ed.v}) || directed.count({ed.v, ed.u}))
          throw GraphError("edge " + std::to_string(e) + ": duplicate edge");
        undirected.insert(key);
      }
    }
  }

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }

  std::size_t num_directed() const {
    std::size_t c = 0;
    for (const auto& e : edges_) c += e.directed();
    return c;
  }

  /// Edge indices incident to each node.
  std::vector<std::vector<std::size_t>> incidence() const {
    std::vector<std::vector<std::size_t>> inc(n_);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      inc[edges_[e].u].push_back(e);
      inc[edges_[e].v].push_back(e);
    }
    return inc;
  }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
};

/// Per-edge reference direction. `flip[e]` means the stored representative
/// (u, v) is traversed as (v, u).
struct Orientation {
  std::vector<std::uint8_t> flip;

  std::size_t tail(const Graph& g, std::size_t e) const { return flip[e] ? g.edge(e).v : g.edge(e).u; }
  std::size_t head(const Graph& g, std::size_t e) const { return flip[e] ? g.edge(e).u : g.edge(e).v; }

  bool direction_consistent(const Graph& g) const {
    if (flip.size() != g.num_edges()) return false;
    for (std::size_t e = 0; e < flip.size(); ++e)
      if (g.edge(e).directed() && flip[e]) return false;
    return true;
  }

  friend bool operator==(const Orientation&, const Orientation&) = default;
};

/// Diagonal +-1 change of basis between two direction-consistent orientations.
struct OrientationFlip {
  std::vector<std::int8_t> sign;

  bool is_identity() const {
    for (auto s : sign)
      if (s != 1) return false;
    return true;
  }
};

/// Bijection on edge indices: edge `e` moves to position `perm[e]`.
struct EdgePermutation {
  std::vector<std::size_t> perm;

  bool is_bijection() const {
    std::vector<std::uint8_t> seen(perm.size(), 0);
    for (auto p : perm) {
      if (p >= perm.size() || seen[p]) return false;
      seen[p] = 1;
    }
    return true;
  }

  EdgePermutation inverse() const {
    EdgePermutation inv{std::vector<std::size_t>(perm.size())};
    for (std::size_t e = 0; e < perm.size(); ++e) inv.perm[perm[e]] = e;
    return inv;
  }
};

inline Orientation canonical_orientation(const Graph& g) {
  return Orientation{std::vector<std::uint8_t>(g.num_edges(), 0)};
}

inline void require_direction_consistent(const Graph& g, const Orientation& o) {
  if (!o.direction_consistent(g)) throw GraphError("orientation is not direction-consistent");
}

/// Independent fair sign per undirected edge; directed edges never flip.
inline OrientationFlip random_orientation_flip(const Graph& g, std::uint64_t seed) {
  Rng rng(seed);
  OrientationFlip f{std::vector<std::int8_t>(g.num_edges(), 1)};
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const bool neg = rng.bernoulli(0.5);
    if (!g.edge(e).directed() && neg) f.sign[e] = -1;
  }
  return f;
}

inline Orientation apply_flip(const Orientation& o, const OrientationFlip& f) {
  if (o.flip.size() != f.sign.size()) throw DimensionError("apply_flip: orientation size mismatch");
  Orientation out = o;
  for (std::size_t e = 0; e < f.sign.size(); ++e)
    if (f.sign[e] < 0) out.flip[e] ^= 1;
  return out;
}

/// Row e of an orientation-equivariant signal multiplied by sign[e].
inline Matrix apply_flip(const Matrix& x_equ, const OrientationFlip& f) {
  if (x_equ.rows() != f.sign.size())
    throw DimensionError("apply_flip: " + std::to_string(x_equ.rows()) + " rows vs " +
                         std::to_string(f.sign.size()) + " signs");
  Matrix out = x_equ;
  for (std::size_t e = 0; e < out.rows(); ++e)
    if (f.sign[e] < 0)
      for (double& v : out.row(e)) v = -v;
  return out;
}

inline Matrix permute_rows(const Matrix& x, const EdgePermutation& p) {
  if (x.rows() != p.perm.size()) throw DimensionError("permute_rows: size mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t e = 0; e < x.rows(); ++e) std::copy(x.row(e).begin(), x.row(e).end(), out.row(p.perm[e]).begin());
  return out;
}

struct PermutedInstance {
  Graph graph;
  Orientation orientation;
  std::vector<Matrix> signals;
};

/// Re-indexes edges, orientation bits and every signal consistently.
inline PermutedInstance apply_edge_permutation(const Graph& g, const Orientation& o, const std::vector<Matrix>& signals,
                                               const EdgePermutation& p) {
  if (p.perm.size() != g.num_edges() || !p.is_bijection()) throw GraphError("edge permutation is not a bijection");
  if (o.flip.size() != g.num_edges()) throw DimensionError("orientation size mismatch");
  std::vector<Edge> edges(g.num_edges());
  Orientation po{std::vector<std::uint8_t>(g.num_edges())};
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    edges[p.perm[e]] = g.edge(e);
    po.flip[p.perm[e]] = o.flip[e];
  }
  PermutedInstance out{Graph(g.num_nodes(), std::move(edges)), std::move(po), {}};
  for (const auto& s : signals) out.signals.push_back(permute_rows(s, p));
  return out;
}

inline EdgePermutation random_permutation(std::size_t m, std::uint64_t seed) {
  EdgePermutation p{std::vector<std::size_t>(m)};
  std::iota(p.perm.begin(), p.perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(p.perm));
  return p;
}

/// Erdos-Renyi over unordered pairs; each kept pair becomes a directed edge
/// (random direction) w.p. `p_directed`, otherwise undirected.
inline Graph random_mixed_graph(std::size_t n, double p, double p_directed, Rng& rng) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!rng.bernoulli(p)) continue;
      if (rng.bernoulli(p_directed)) {
        if (rng.bernoulli(0.5)) edges.push_back({i, j, EdgeKind::Directed});
        else edges.push_back({j, i, EdgeKind::Directed});
      } else {
        edges.push_back({i, j, EdgeKind::Undirected});
      }
    }
  return Graph(n, std::move(edges));
}

/// Direction-consistent orientation with a fair random bit on every undirected edge.
inline Orientation random_orientation(const Graph& g, Rng& rng) {
  Orientation o = canonical_orientation(g);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const bool b = rng.bernoulli(0.5);
    if (!g.edge(e).directed()) o.flip[e] = b;
  }
  return o;
}

/// Line-graph Laplacian D - A, where A[e,e'] = 1 iff e != e' share a node.
inline SparseComplexMatrix line_graph_laplacian(const Graph& g) {
  const auto inc = g.incidence();
  std::vector<std::set<std::size_t>> nbrs(g.num_edges());
  for (const auto& bucket : inc)
    for (std::size_t a : bucket)
      for (std::size_t b : bucket)
        if (a != b) nbrs[a].insert(b);
  std::vector<Triplet> trips;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    trips.push_back({e, e, static_cast<double>(nbrs[e].size())});
    for (std::size_t f : nbrs[e]) trips.push_back({e, f, -1.0});
  }
  return SparseComplexMatrix::from_triplets(g.num_edges(), g.num_edges(), std::move(trips));
}

// Text format: "n m" header, then one "u v D|U" line per edge. Blank lines and
// lines starting with '#' are skipped.

inline void write_graph(std::ostream& os, const Graph& g) {
  os << g.num_nodes() << ' ' << g.num_edges() << '\n';
  for (const auto& e : g.edges()) os << e.u << ' ' << e.v << ' ' << (e.directed() ? 'D' : 'U') << '\n';
}

namespace detail {
inline bool next_content_line(std::istream& is, std::string& line, std::size_t& lineno) {
  while (std::getline(is, line)) {
    ++lineno;
    auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    return true;
  }
  return false;
}
}  // namespace detail

/// Reads one graph block. `lineno` tracks the position for diagnostics.
inline Graph read_graph(std::istream& is, std::size_t& lineno) {
  std::string line;
  if (!detail::next_content_line(is, line, lineno)) throw GraphError("graph: missing header");
  std::istringstream hs(line);
  long long n = -1, m = -1;
  if (!(hs >> n >> m) || n < 0 || m < 0) throw GraphError("graph line " + std::to_string(lineno) + ": bad header");
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long long i = 0; i < m; ++i) {
    if (!detail::next_content_line(is, line, lineno))
      throw GraphError("graph: expected " + std::to_string(m) + " edges, got " + std::to_string(i));
    std::istringstream es(line);
    long long u = -1, v = -1;
    std::string k;
    if (!(es >> u >> v >> k) || u < 0 || v < 0 || (k != "D" && k != "U"))
      throw GraphError("graph line " + std::to_string(lineno) + ": expected 'u v D|U'");
    edges.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(v),
                     k == "D" ? EdgeKind::Directed : EdgeKind::Undirected});
  }
  try {
    return Graph(static_cast<std::size_t>(n), std::move(edges));
  } catch (const GraphError& err) {
    throw GraphError("graph ending at line " + std::to_string(lineno) + ": " + err.what());
  }
}

inline Graph read_graph(std::istream& is) {
  std::size_t lineno = 0;
  return read_graph(is, lineno);
}

}  // namespace eign
