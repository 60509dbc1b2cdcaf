#pragma once

// Benchmark generators (RW Comp, LD Cycles, Tri-Flow, Circuits), the TNTP
// traffic loader, task constructions and the on-disk dataset format.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eign/circuits.hpp"
#include "eign/graph.hpp"
#include "eign/io.hpp"
#include "eign/rng.hpp"

namespace eign {

class DatasetError : public Error {
 public:
  using Error::Error;
};

enum class TaskKind : std::uint8_t { BinaryClass, Regression };
enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

inline const char* to_string(TaskKind t) { return t == TaskKind::BinaryClass ? "binary" : "regression"; }
inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

struct LabeledGraphSample {
  Graph graph;
  Orientation orientation;
  Matrix x_equ;
  Matrix x_inv;
  /// m x 1. Regression targets are orientation-equivariant and stored
  /// relative to `orientation`.
  Matrix y;
  TaskKind task = TaskKind::Regression;
  /// Edges that are scored at all.
  std::vector<std::uint8_t> mask;
  /// Per-edge split assignment (a whole graph shares one for inductive sets).
  std::vector<Split> split;

  std::size_t num_edges() const { return graph.num_edges(); }

  std::vector<std::uint8_t> scored(Split s) const {
    std::vector<std::uint8_t> out(num_edges());
    for (std::size_t e = 0; e < out.size(); ++e) out[e] = mask[e] && split[e] == s;
    return out;
  }

  bool has(Split s) const {
    for (std::size_t e = 0; e < num_edges(); ++e)
      if (mask[e] && split[e] == s) return true;
    return false;
  }

  void validate() const {
    const std::size_t m = num_edges();
    if (orientation.flip.size() != m || x_equ.rows() != m || x_inv.rows() != m || y.rows() != m || y.cols() != 1 ||
        mask.size() != m || split.size() != m)
      throw DatasetError("sample arrays do not match the edge count");
    if (!orientation.direction_consistent(graph)) throw DatasetError("sample orientation is not direction-consistent");
  }
};

/// Re-expresses a sample in the orientation changed by `f`. Equivariant
/// inputs flip sign, and so do regression targets.
inline LabeledGraphSample apply_flip(const LabeledGraphSample& s, const OrientationFlip& f) {
  LabeledGraphSample out = s;
  out.orientation = apply_flip(s.orientation, f);
  out.x_equ = apply_flip(s.x_equ, f);
  if (s.task == TaskKind::Regression) out.y = apply_flip(s.y, f);
  return out;
}

struct Dataset {
  std::string name;
  std::uint64_t seed = 0;
  TaskKind task = TaskKind::Regression;
  std::vector<LabeledGraphSample> samples;
  /// Normalization constants and generator parameters.
  std::map<std::string, double> meta;

  std::size_t d_equ() const { return samples.empty() ? 0 : samples[0].x_equ.cols(); }
  std::size_t d_inv() const { return samples.empty() ? 0 : samples[0].x_inv.cols(); }

  void validate() const {
    for (const auto& s : samples) {
      s.validate();
      if (s.x_equ.cols() != d_equ() || s.x_inv.cols() != d_inv() || s.task != task)
        throw DatasetError("samples disagree on feature widths or task");
    }
  }
};

struct SplitFractions {
  double train;
  double val;
  double test;
};

inline constexpr SplitFractions kSyntheticSplit{0.7, 0.1, 0.2};
inline constexpr SplitFractions kTrafficSplit{0.8, 0.1, 0.1};
inline constexpr SplitFractions kCircuitSplit{0.5, 0.25, 0.25};

/// Train / val / test counts for n items; test takes the rounding remainder.
inline std::array<std::size_t, 3> split_counts(std::size_t n, SplitFractions f) {
  const auto tr = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto va = std::min(n - std::min(n, tr), static_cast<std::size_t>(std::llround(f.val * static_cast<double>(n))));
  const std::size_t trc = std::min(n, tr);
  return {trc, va, n - trc - va};
}

/// Inductive split: whole graphs go to one part.
inline void assign_graph_splits(Dataset& ds, SplitFractions f, std::uint64_t seed) {
  std::vector<std::size_t> order(ds.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto counts = split_counts(order.size(), f);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Split s = i < counts[0] ? Split::Train : i < counts[0] + counts[1] ? Split::Val : Split::Test;
    auto& smp = ds.samples[order[i]];
    smp.split.assign(smp.num_edges(), s);
  }
}

/// Transductive split over the edges of one graph. Forced edges always train;
/// validation and test are drawn from the rest.
inline void assign_edge_splits(LabeledGraphSample& s, SplitFractions f, const std::vector<std::uint8_t>& forced_train,
                               std::uint64_t seed) {
  const std::size_t m = s.num_edges();
  std::vector<std::size_t> free;
  for (std::size_t e = 0; e < m; ++e)
    if (forced_train.empty() || !forced_train[e]) free.push_back(e);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(free));
  const auto counts = split_counts(m, f);
  const std::size_t nv = std::min(counts[1], free.size());
  const std::size_t nt = std::min(counts[2], free.size() - nv);
  s.split.assign(m, Split::Train);
  for (std::size_t i = 0; i < nv; ++i) s.split[free[i]] = Split::Val;
  for (std::size_t i = nv; i < nv + nt; ++i) s.split[free[i]] = Split::Test;
}

// ----------------------------------------------------------------------------
// RW Comp

struct RwCompParams {
  std::size_t nodes = 50;
  double expected_edges = 200.0;
  std::size_t max_walk = 100;
  double reveal = 0.2;

  double edge_probability() const {
    return expected_edges / (static_cast<double>(nodes) * static_cast<double>(nodes - 1));
  }
};

struct RwCompInstance {
  LabeledGraphSample sample;
  std::size_t traversed = 0;
  std::size_t revealed = 0;
};

inline RwCompInstance rw_comp_instance(Rng& rng, const RwCompParams& p = {}) {
  const std::size_t n = p.nodes;
  const double prob = p.edge_probability();
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      if (u != v && rng.bernoulli(prob)) edges.push_back({u, v, EdgeKind::Directed});
  const std::size_t m = edges.size();
  std::vector<double> weight(m);
  for (auto& w : weight) w = rng.uniform();
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t e = 0; e < m; ++e) out[edges[e].u].push_back(e);
  std::vector<double> prob_e(m, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    double total = 0.0;
    for (auto e : out[u]) total += weight[e];
    for (auto e : out[u]) prob_e[e] = total > 0.0 ? weight[e] / total : 1.0 / static_cast<double>(out[u].size());
  }

  std::vector<std::uint8_t> seen(m, 0);
  std::vector<std::size_t> traversed;
  std::size_t at = rng.below(n);
  for (std::size_t step = 0; step < p.max_walk && !out[at].empty(); ++step) {
    double r = rng.uniform();
    std::size_t pick = out[at].back();
    for (auto e : out[at]) {
      if (r < prob_e[e]) {
        pick = e;
        break;
      }
      r -= prob_e[e];
    }
    if (!seen[pick]) traversed.push_back(pick);
    seen[pick] = 1;
    at = edges[pick].v;
  }
  rng.shuffle(std::span<std::size_t>(traversed));
  const auto k = static_cast<std::size_t>(std::llround(p.reveal * static_cast<double>(traversed.size())));

  RwCompInstance inst;
  auto& s = inst.sample;
  s.graph = Graph(n, std::move(edges));
  s.orientation = canonical_orientation(s.graph);
  s.task = TaskKind::BinaryClass;
  s.x_equ = Matrix(m, 0);
  s.x_inv = Matrix(m, 2);
  s.y = Matrix(m, 1);
  s.mask.assign(m, 1);
  s.split.assign(m, Split::Train);
  for (std::size_t e = 0; e < m; ++e) {
    s.x_inv(e, 1) = prob_e[e];
    s.y(e, 0) = seen[e];
  }
  for (std::size_t i = 0; i < k; ++i) {
    s.x_inv(traversed[i], 0) = 1.0;
    s.mask[traversed[i]] = 0;
  }
  inst.traversed = traversed.size();
  inst.revealed = k;
  return inst;
}

// ----------------------------------------------------------------------------
// LD Cycles

/// All simple directed cycles using only directed edges, each as a sorted list
/// of edge indices.
inline std::vector<std::vector<std::size_t>> directed_cycles(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<std::size_t>> out_edges(n);
  for (std::size_t e = 0; e < g.num_edges(); ++e)
    if (g.edge(e).directed()) out_edges[g.edge(e).u].push_back(e);
  std::vector<std::vector<std::size_t>> cycles;
  std::vector<std::uint8_t> on_path(n, 0);
  std::vector<std::size_t> path;
  for (std::size_t s = 0; s < n; ++s) {
    auto dfs = [&](auto& self, std::size_t v) -> void {
      for (auto e : out_edges[v]) {
        const std::size_t w = g.edge(e).v;
        if (w == s) {
          path.push_back(e);
          auto c = path;
          std::sort(c.begin(), c.end());
          cycles.push_back(std::move(c));
          path.pop_back();
        } else if (w > s && !on_path[w]) {
          on_path[w] = 1;
          path.push_back(e);
          self(self, w);
          path.pop_back();
          on_path[w] = 0;
        }
      }
    };
    on_path[s] = 1;
    dfs(dfs, s);
    on_path[s] = 0;
  }
  return cycles;
}

struct LdCyclesInstance {
  LabeledGraphSample sample;
  std::size_t cycle_length = 0;
};

/// `c == 0` draws the cycle length from {6, 7, 8}. Chords and the bridge are
/// directed with probability `p_directed`.
inline LdCyclesInstance ld_cycles_instance(Rng& rng, std::size_t c = 0, double p_directed = 0.25,
                                           std::size_t max_attempts = 1000) {
  if (c == 0) c = static_cast<std::size_t>(rng.range(6, 8));
  if (c < 4) throw DatasetError("LD Cycles needs c >= 4");
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<Edge> edges;
    std::vector<std::uint8_t> planted;
    auto component = [&](std::size_t off, bool all_directed) {
      const std::size_t und = all_directed ? c : rng.below(c);
      for (std::size_t i = 0; i < c; ++i) {
        const bool d = i != und;
        edges.push_back({off + i, off + (i + 1) % c, d ? EdgeKind::Directed : EdgeKind::Undirected});
        planted.push_back(all_directed);
      }
      std::vector<std::pair<std::size_t, std::size_t>> cand;
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = i + 2; j < c; ++j)
          if (!(i == 0 && j == c - 1)) cand.push_back({i, j});
      rng.shuffle(std::span<std::pair<std::size_t, std::size_t>>(cand));
      for (std::size_t k = 0; k < c && k < cand.size(); ++k) {
        auto [i, j] = cand[k];
        if (rng.bernoulli(0.5)) std::swap(i, j);
        edges.push_back({off + i, off + j, rng.bernoulli(p_directed) ? EdgeKind::Directed : EdgeKind::Undirected});
        planted.push_back(0);
      }
    };
    component(0, true);
    component(c, false);
    std::size_t a = rng.below(c), b = c + rng.below(c);
    if (rng.bernoulli(0.5)) std::swap(a, b);
    edges.push_back({a, b, rng.bernoulli(p_directed) ? EdgeKind::Directed : EdgeKind::Undirected});
    planted.push_back(0);

    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<Edge> shuffled;
    std::vector<std::uint8_t> label;
    for (auto i : order) {
      shuffled.push_back(edges[i]);
      label.push_back(planted[i]);
    }
    Graph g(2 * c, std::move(shuffled));

    std::size_t longest = 0, count = 0;
    for (const auto& cyc : directed_cycles(g)) {
      if (cyc.size() > longest) {
        longest = cyc.size();
        count = 0;
      }
      if (cyc.size() == longest) ++count;
    }
    if (longest != c || count != 1) continue;

    LdCyclesInstance inst;
    inst.cycle_length = c;
    auto& s = inst.sample;
    const std::size_t m = g.num_edges();
    s.orientation = random_orientation(g, rng);
    s.graph = std::move(g);
    s.task = TaskKind::BinaryClass;
    s.x_equ = Matrix(m, 0);
    s.x_inv = Matrix(m, 1, 1.0);
    s.y = Matrix(m, 1);
    for (std::size_t e = 0; e < m; ++e) s.y(e, 0) = label[e];
    s.mask.assign(m, 1);
    s.split.assign(m, Split::Train);
    return inst;
  }
  throw DatasetError("LD Cycles: rejection budget exceeded");
}

// ----------------------------------------------------------------------------
// Tri-Flow

enum class TriangleType : std::uint8_t { Closed, Blocked, Mixed };

struct TriFlowParams {
  std::size_t triangles = 100;
  std::size_t fillers = 100;
  std::size_t colors = 3;
  double p_directed = 0.65;
  double magnitude_lo = 0.5;
  double magnitude_hi = 1.5;
};

struct TriFlowInstance {
  LabeledGraphSample sample;
  /// Per triangle: nodes in traversal order and the edge indices (a,b), (b,c), (c,a).
  std::vector<std::array<std::size_t, 3>> nodes;
  std::vector<std::array<std::size_t, 3>> edges;
  std::vector<TriangleType> type;
  std::vector<double> magnitude;
};

inline TriFlowInstance tri_flow_instance(Rng& rng, const TriFlowParams& p = {}) {
  const std::size_t t = p.triangles;
  const std::size_t n = 3 * t;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<TriangleType> types(t, TriangleType::Closed);
  for (std::size_t i = t / 2; i < t / 2 + t / 4; ++i) types[i] = TriangleType::Blocked;
  for (std::size_t i = t / 2 + t / 4; i < t; ++i) types[i] = TriangleType::Mixed;
  rng.shuffle(std::span<TriangleType>(types));

  // Edges are built as (x, y) with all values expressed along x -> y.
  struct Raw {
    std::size_t x, y;
    bool directed;
    std::size_t color;
    double input, target;
  };
  std::vector<Raw> raw;
  TriFlowInstance inst;
  std::vector<std::set<std::size_t>> adj(n);
  for (std::size_t k = 0; k < t; ++k) {
    const std::array<std::size_t, 3> v{perm[3 * k], perm[3 * k + 1], perm[3 * k + 2]};
    const double mag = rng.uniform(p.magnitude_lo, p.magnitude_hi);
    std::array<bool, 3> dir{};
    std::array<bool, 3> forward{true, true, true};
    std::array<std::size_t, 3> col{};
    switch (types[k]) {
      case TriangleType::Closed: {
        const std::size_t c0 = rng.below(p.colors);
        col = {c0, c0, c0};
        do {
          for (auto& d : dir) d = rng.bernoulli(p.p_directed);
        } while (!(dir[0] || dir[1] || dir[2]));
        break;
      }
      case TriangleType::Blocked: {
        const std::size_t c0 = rng.below(p.colors);
        col = {c0, c0, c0};
        for (;;) {
          std::size_t nd = 0, nf = 0;
          for (std::size_t i = 0; i < 3; ++i) {
            dir[i] = rng.bernoulli(p.p_directed);
            forward[i] = rng.bernoulli(0.5);
            nd += dir[i];
            nf += dir[i] && forward[i];
          }
          if (nd >= 2 && nf != 0 && nf != nd) break;
        }
        break;
      }
      case TriangleType::Mixed:
        do {
          for (auto& c : col) c = rng.below(p.colors);
        } while (col[0] == col[1] && col[1] == col[2]);
        for (std::size_t i = 0; i < 3; ++i) {
          dir[i] = rng.bernoulli(p.p_directed);
          forward[i] = rng.bernoulli(0.5);
        }
        break;
    }
    std::array<std::size_t, 3> idx{};
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t a = v[i], b = v[(i + 1) % 3];
      const double sign = forward[i] ? 1.0 : -1.0;
      Raw r{forward[i] ? a : b, forward[i] ? b : a, dir[i], col[i], 0.0, 0.0};
      if (types[k] == TriangleType::Closed) r.target = sign * mag;
      r.input = rng.bernoulli(0.5) ? mag : -mag;
      idx[i] = raw.size();
      raw.push_back(r);
      adj[a].insert(b);
      adj[b].insert(a);
    }
    inst.nodes.push_back(v);
    inst.edges.push_back(idx);
    inst.type.push_back(types[k]);
    inst.magnitude.push_back(mag);
  }
  for (std::size_t f = 0, guard = 0; f < p.fillers; ++guard) {
    if (guard > 1000 * (p.fillers + 1)) throw DatasetError("Tri-Flow: filler budget exceeded");
    const std::size_t a = rng.below(n), b = rng.below(n);
    if (a == b || adj[a].count(b)) continue;
    bool common = false;
    for (auto w : adj[a])
      if (adj[b].count(w)) common = true;
    if (common) continue;
    const double mag = rng.uniform(p.magnitude_lo, p.magnitude_hi);
    raw.push_back({a, b, rng.bernoulli(p.p_directed), rng.below(p.colors), rng.bernoulli(0.5) ? mag : -mag, 0.0});
    adj[a].insert(b);
    adj[b].insert(a);
    ++f;
  }

  std::vector<std::size_t> order(raw.size()), where(raw.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  for (std::size_t i = 0; i < order.size(); ++i) where[order[i]] = i;
  std::vector<Edge> edges;
  for (auto i : order) edges.push_back({raw[i].x, raw[i].y, raw[i].directed ? EdgeKind::Directed : EdgeKind::Undirected});
  auto& s = inst.sample;
  s.graph = Graph(n, std::move(edges));
  s.orientation = random_orientation(s.graph, rng);
  const std::size_t m = s.graph.num_edges();
  s.task = TaskKind::Regression;
  s.x_equ = Matrix(m, 1);
  s.x_inv = Matrix(m, p.colors);
  s.y = Matrix(m, 1);
  for (std::size_t e = 0; e < m; ++e) {
    const Raw& r = raw[order[e]];
    const double sgn = s.orientation.tail(s.graph, e) == r.x ? 1.0 : -1.0;
    s.x_equ(e, 0) = sgn * r.input;
    s.y(e, 0) = sgn * r.target;
    s.x_inv(e, r.color) = 1.0;
  }
  s.mask.assign(m, 1);
  s.split.assign(m, Split::Train);
  for (auto& tri : inst.edges)
    for (auto& e : tri) e = where[e];
  return inst;
}

// ----------------------------------------------------------------------------
// Circuits

struct CircuitParams {
  std::size_t min_nodes = 8;
  std::size_t max_nodes = 11;
  double p_diode = 0.2;
};

struct CircuitInstance {
  Circuit circuit;
  CircuitSolution solution;
};

inline CircuitInstance circuit_instance(Rng& rng, const CircuitParams& p = {}) {
  for (;;) {
    const auto nodes = static_cast<std::size_t>(
        rng.range(static_cast<std::int64_t>(p.min_nodes), static_cast<std::int64_t>(p.max_nodes)));
    Circuit c = random_circuit(nodes, p.p_diode, rng);
    try {
      auto sol = solve_circuit(c);
      return {std::move(c), std::move(sol)};
    } catch (const CircuitError&) {
      continue;
    }
  }
}

inline double mean_std(const std::vector<double>& v, double* mean_out) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean = v.empty() ? 0.0 : mean / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  if (mean_out) *mean_out = mean;
  return v.empty() ? 0.0 : std::sqrt(var / static_cast<double>(v.size()));
}

/// Builds samples from solved circuits. Currents are divided by the source
/// voltage and then by their root mean square over the training graphs;
/// resistances are standardized with training statistics.
inline Dataset circuits_dataset(const std::vector<CircuitInstance>& inst, std::uint64_t seed) {
  Dataset ds;
  ds.name = "circuits";
  ds.seed = seed;
  ds.task = TaskKind::Regression;
  ds.samples.resize(inst.size());
  for (std::size_t i = 0; i < inst.size(); ++i) {
    auto& s = ds.samples[i];
    s.graph = inst[i].circuit.graph;
    s.split.assign(s.graph.num_edges(), Split::Train);
  }
  assign_graph_splits(ds, kCircuitSplit, derive_seed(seed, ~std::uint64_t{0}));

  std::vector<double> train_r, train_i;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    if (ds.samples[i].split.empty() || ds.samples[i].split[0] != Split::Train) continue;
    const auto& c = inst[i].circuit;
    const double v = c.parts[c.source_edge()].source_voltage;
    for (std::size_t e = 0; e < c.parts.size(); ++e) {
      if (c.parts[e].kind == ComponentKind::Resistor) train_r.push_back(c.parts[e].resistance);
      train_i.push_back(inst[i].solution.current[e] / v);
    }
  }
  double r_mean = 0.0;
  double r_std = mean_std(train_r, &r_mean);
  if (r_std <= 0.0) r_std = 1.0;
  // root mean square: unlike the std about the mean it ignores orientation signs
  double i_std = 0.0;
  for (double v : train_i) i_std += v * v;
  i_std = train_i.empty() ? 0.0 : std::sqrt(i_std / static_cast<double>(train_i.size()));
  if (i_std <= 0.0) i_std = 1.0;
  ds.meta["resistance_mean"] = r_mean;
  ds.meta["resistance_std"] = r_std;
  ds.meta["current_std"] = i_std;

  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto& c = inst[i].circuit;
    auto& s = ds.samples[i];
    const std::size_t m = s.graph.num_edges();
    Rng rng(derive_seed(seed, 0x0c1c0000 + i));
    s.orientation = random_orientation(s.graph, rng);
    s.task = TaskKind::Regression;
    s.x_equ = Matrix(m, 1);
    s.x_inv = Matrix(m, 4);
    s.y = Matrix(m, 1);
    s.mask.assign(m, 1);
    const double v = c.parts[c.source_edge()].source_voltage;
    for (std::size_t e = 0; e < m; ++e) {
      const double sgn = s.orientation.flip[e] == c.orientation.flip[e] ? 1.0 : -1.0;
      const auto& part = c.parts[e];
      s.x_inv(e, static_cast<std::size_t>(part.kind)) = 1.0;
      if (part.kind == ComponentKind::Resistor) s.x_inv(e, 3) = (part.resistance - r_mean) / r_std;
      if (part.kind == ComponentKind::Source) s.x_equ(e, 0) = sgn;
      s.y(e, 0) = sgn * inst[i].solution.current[e] / v / i_std;
    }
  }
  return ds;
}

// ----------------------------------------------------------------------------
// TNTP traffic networks

class TntpError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

struct TntpLink {
  std::size_t init = 0;
  std::size_t term = 0;
  double capacity = 0, length = 0, free_flow_time = 0, b = 0, power = 0, speed = 0, toll = 0, link_type = 0;
  std::size_t line = 0;
};

struct TntpNetwork {
  std::size_t num_zones = 0;
  std::size_t num_nodes = 0;
  std::size_t first_thru_node = 1;
  std::vector<TntpLink> links;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& tok, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw TntpError(where + ": non-numeric field '" + tok + "'");
  }
}

inline std::size_t parse_node(const std::string& tok, const std::string& where, std::size_t num_nodes) {
  const double v = parse_number(tok, where);
  if (v != std::floor(v) || v < 1 || v > static_cast<double>(num_nodes))
    throw TntpError(where + ": node index " + tok + " out of range [1, " + std::to_string(num_nodes) + "]");
  return static_cast<std::size_t>(v);
}

inline std::vector<std::string> tokens(std::string line) {
  std::replace(line.begin(), line.end(), ';', ' ');
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string t;
  while (ss >> t) out.push_back(t);
  return out;
}

}  // namespace detail

inline TntpNetwork parse_tntp_net(std::istream& is, const std::string& name = "net") {
  TntpNetwork net;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::string> meta;
  bool ended = false;
  while (!ended && std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '~') continue;
    const std::string where = name + ":" + std::to_string(lineno);
    if (t[0] != '<') throw TntpError(where + ": expected a <TAG> metadata line");
    const auto close = t.find('>');
    if (close == std::string::npos) throw TntpError(where + ": malformed metadata tag");
    const std::string key = t.substr(1, close - 1);
    if (key == "END OF METADATA") ended = true;
    else meta[key] = detail::trim(t.substr(close + 1));
  }
  if (!ended) throw TntpError(name + ": missing <END OF METADATA>");
  auto need = [&](const char* key) -> std::size_t {
    auto it = meta.find(key);
    if (it == meta.end()) throw TntpError(name + ": missing <" + std::string(key) + ">");
    const double v = detail::parse_number(it->second, name + " <" + key + ">");
    if (v < 0 || v != std::floor(v)) throw TntpError(name + ": <" + std::string(key) + "> must be a count");
    return static_cast<std::size_t>(v);
  };
  net.num_nodes = need("NUMBER OF NODES");
  const std::size_t num_links = need("NUMBER OF LINKS");
  net.num_zones = meta.count("NUMBER OF ZONES") ? need("NUMBER OF ZONES") : 0;
  net.first_thru_node = meta.count("FIRST THRU NODE") ? need("FIRST THRU NODE") : 1;

  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '~') continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto tok = detail::tokens(t);
    if (tok.empty()) continue;
    if (tok.size() < 10) throw TntpError(where + ": expected 10 link fields, got " + std::to_string(tok.size()));
    TntpLink l;
    l.init = detail::parse_node(tok[0], where, net.num_nodes);
    l.term = detail::parse_node(tok[1], where, net.num_nodes);
    double* fields[] = {&l.capacity, &l.length, &l.free_flow_time, &l.b, &l.power, &l.speed, &l.toll, &l.link_type};
    for (std::size_t i = 0; i < 8; ++i) *fields[i] = detail::parse_number(tok[i + 2], where);
    l.line = lineno;
    net.links.push_back(l);
  }
  if (net.links.size() != num_links)
    throw TntpError(name + ": header promises " + std::to_string(num_links) + " links, found " +
                    std::to_string(net.links.size()));
  return net;
}

/// Link flows keyed by 1-based (from, to). A leading non-numeric line is a
/// column header.
inline std::map<std::pair<std::size_t, std::size_t>, double> parse_tntp_flow(std::istream& is, std::size_t num_nodes,
                                                                             const std::string& name = "flow") {
  std::map<std::pair<std::size_t, std::size_t>, double> flows;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '~' || t[0] == '#') continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto tok = detail::tokens(t);
    if (tok.empty()) continue;
    if (first && !tok[0].empty() && !std::isdigit(static_cast<unsigned char>(tok[0][0]))) {
      first = false;
      continue;
    }
    first = false;
    if (tok.size() < 3) throw TntpError(where + ": expected 'from to volume'");
    const auto u = detail::parse_node(tok[0], where, num_nodes);
    const auto v = detail::parse_node(tok[1], where, num_nodes);
    flows[{u, v}] = detail::parse_number(tok[2], where);
  }
  return flows;
}

inline constexpr std::size_t kTntpFeatures = 8;

/// One graph with anti-parallel links merged into undirected edges. Invariant
/// features: capacity, length, free-flow time, B, power, toll, link type
/// (pairs are averaged), each standardized, plus a zone-incidence indicator.
/// Flows are divided by the largest absolute merged flow.
inline Dataset tntp_dataset(const TntpNetwork& net, const std::map<std::pair<std::size_t, std::size_t>, double>& flows,
                            const std::string& name, std::uint64_t seed) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> link_of;
  for (std::size_t i = 0; i < net.links.size(); ++i) {
    const auto key = std::make_pair(net.links[i].init, net.links[i].term);
    if (net.links[i].init == net.links[i].term)
      throw TntpError(name + ":" + std::to_string(net.links[i].line) + ": self-loop link");
    if (!link_of.emplace(key, i).second)
      throw TntpError(name + ":" + std::to_string(net.links[i].line) + ": duplicate link");
  }
  auto flow_of = [&](const TntpLink& l) {
    auto it = flows.find({l.init, l.term});
    if (it == flows.end())
      throw TntpError(name + ": no flow for link " + std::to_string(l.init) + " -> " + std::to_string(l.term));
    return it->second;
  };
  auto raw_features = [](const TntpLink& l) {
    return std::array<double, 7>{l.capacity, l.length, l.free_flow_time, l.b, l.power, l.toll, l.link_type};
  };

  std::vector<Edge> edges;
  std::vector<std::array<double, 7>> feats;
  std::vector<double> flow;
  std::vector<std::uint8_t> zone;
  std::set<std::pair<std::size_t, std::size_t>> done;
  for (const auto& l : net.links) {
    const auto key = std::minmax(l.init, l.term);
    if (done.count(key)) continue;
    done.insert(key);
    const std::size_t u = l.init - 1, v = l.term - 1;
    auto rev = link_of.find({l.term, l.init});
    if (rev != link_of.end()) {
      const auto& r = net.links[rev->second];
      const auto& lo = l.init < l.term ? l : r;
      const auto& hi = l.init < l.term ? r : l;
      edges.push_back({std::min(u, v), std::max(u, v), EdgeKind::Undirected});
      auto a = raw_features(lo), b = raw_features(hi);
      for (std::size_t k = 0; k < 7; ++k) a[k] = 0.5 * (a[k] + b[k]);
      feats.push_back(a);
      flow.push_back(flow_of(lo) - flow_of(hi));
    } else {
      edges.push_back({u, v, EdgeKind::Directed});
      feats.push_back(raw_features(l));
      flow.push_back(flow_of(l));
    }
    zone.push_back(l.init <= net.num_zones || l.term <= net.num_zones);
  }

  Dataset ds;
  ds.name = name;
  ds.seed = seed;
  ds.task = TaskKind::Regression;
  LabeledGraphSample s;
  s.graph = Graph(net.num_nodes, std::move(edges));
  s.orientation = canonical_orientation(s.graph);
  s.task = TaskKind::Regression;
  const std::size_t m = s.graph.num_edges();
  s.x_equ = Matrix(m, 0);
  s.x_inv = Matrix(m, kTntpFeatures);
  static const char* names[] = {"capacity", "length", "free_flow_time", "b", "power", "toll", "link_type"};
  for (std::size_t k = 0; k < 7; ++k) {
    std::vector<double> col(m);
    for (std::size_t e = 0; e < m; ++e) col[e] = feats[e][k];
    double mean = 0.0;
    const double sd = mean_std(col, &mean);
    ds.meta[std::string(names[k]) + "_mean"] = mean;
    ds.meta[std::string(names[k]) + "_std"] = sd;
    for (std::size_t e = 0; e < m; ++e) s.x_inv(e, k) = sd > 0.0 ? (col[e] - mean) / sd : 0.0;
  }
  double scale = 0.0;
  for (double f : flow) scale = std::max(scale, std::fabs(f));
  if (scale <= 0.0) scale = 1.0;
  ds.meta["flow_scale"] = scale;
  s.y = Matrix(m, 1);
  for (std::size_t e = 0; e < m; ++e) {
    s.x_inv(e, 7) = zone[e];
    s.y(e, 0) = flow[e] / scale;
  }
  s.mask.assign(m, 1);
  assign_edge_splits(s, kTrafficSplit, zone, derive_seed(seed, 0x7a));
  ds.meta["num_zones"] = static_cast<double>(net.num_zones);
  ds.samples.push_back(std::move(s));
  return ds;
}

inline Dataset load_tntp(const std::filesystem::path& net_path, const std::filesystem::path& flow_path,
                         std::uint64_t seed = 0) {
  auto ns = open_in(net_path);
  auto net = parse_tntp_net(ns, net_path.filename().string());
  auto fs = open_in(flow_path);
  auto flows = parse_tntp_flow(fs, net.num_nodes, flow_path.filename().string());
  std::string name = net_path.stem().string();
  if (auto pos = name.find("_net"); pos != std::string::npos) name = name.substr(0, pos);
  return tntp_dataset(net, flows, name, seed);
}

struct TntpFixtureSpec {
  std::size_t nodes = 416;
  std::size_t zones = 38;
  std::size_t two_way_pairs = 280;
  std::size_t one_way = 354;
};

/// Synthetic network in TNTP layout with the requested link structure. The
/// default matches the Anaheim counts.
inline void write_tntp_fixture(std::ostream& net, std::ostream& flow, const TntpFixtureSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = spec.nodes;
  std::set<std::pair<std::size_t, std::size_t>> used;
  std::vector<std::pair<std::size_t, std::size_t>> links;
  auto take = [&](bool two_way) {
    for (;;) {
      // chain neighbours first so the network stays connected
      std::size_t a = 1 + rng.below(n), b;
      if (used.size() < n - 1) {
        a = used.size() + 1;
        b = a + 1;
      } else {
        b = 1 + rng.below(n);
      }
      if (a == b || used.count(std::minmax(a, b))) continue;
      used.insert(std::minmax(a, b));
      if (rng.bernoulli(0.5)) std::swap(a, b);
      links.push_back({a, b});
      if (two_way) links.push_back({b, a});
      return;
    }
  };
  const std::size_t total = spec.two_way_pairs + spec.one_way;
  std::vector<std::uint8_t> kinds(total, 0);
  for (std::size_t i = 0; i < spec.two_way_pairs; ++i) kinds[i] = 1;
  rng.shuffle(std::span<std::uint8_t>(kinds));
  for (auto k : kinds) take(k == 1);

  net << "<NUMBER OF ZONES> " << spec.zones << "\n<NUMBER OF NODES> " << n << "\n<FIRST THRU NODE> "
      << spec.zones + 1 << "\n<NUMBER OF LINKS> " << links.size() << "\n<ORIGINAL HEADER>~\n<END OF METADATA>\n\n\n";
  net << "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n";
  flow << "From \tTo \tVolume \tCost \n";
  net.precision(10);
  flow.precision(10);
  for (auto [a, b] : links) {
    const double length = rng.uniform(500.0, 5000.0);
    const double speed = rng.uniform(25.0, 65.0);
    net << '\t' << a << '\t' << b << '\t' << std::round(rng.uniform(1000.0, 9000.0)) << '\t' << length << '\t'
        << length / speed / 88.0 << "\t0.15\t4\t" << speed << "\t0\t" << 1 + rng.below(6) << "\t;\n";
    flow << a << " \t" << b << " \t" << std::round(rng.uniform(0.0, 5000.0)) << " \t" << rng.uniform(0.1, 2.0) << " \n";
  }
}

// ----------------------------------------------------------------------------
// Tasks on regression data

enum class FlowTask : std::uint8_t { Denoise, Interpolate, Simulate };

inline const char* to_string(FlowTask t) {
  switch (t) {
    case FlowTask::Denoise: return "denoise";
    case FlowTask::Interpolate: return "interpolate";
    case FlowTask::Simulate: return "simulate";
  }
  return "?";
}

inline FlowTask parse_flow_task(const std::string& s) {
  for (auto t : {FlowTask::Denoise, FlowTask::Interpolate, FlowTask::Simulate})
    if (s == to_string(t)) return t;
  throw DatasetError("unknown task '" + s + "' (expected denoise, interpolate or simulate)");
}

inline Matrix append_column(const Matrix& x, const std::vector<double>& col) {
  Matrix out(x.rows(), x.cols() + 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c);
    out(r, x.cols()) = col[r];
  }
  return out;
}

/// Denoise appends the target plus U[-sd, sd] noise (sd over the graph's
/// flows); Interpolate appends the target on 10% of edges and scores only the
/// rest; Simulate leaves the sample unchanged.
inline LabeledGraphSample make_task(const LabeledGraphSample& s, FlowTask task, std::uint64_t seed) {
  if (s.task != TaskKind::Regression) throw DatasetError("flow tasks need a regression sample");
  LabeledGraphSample out = s;
  const std::size_t m = s.num_edges();
  Rng rng(seed);
  switch (task) {
    case FlowTask::Simulate:
      break;
    case FlowTask::Denoise: {
      std::vector<double> y(s.y.data().begin(), s.y.data().end());
      const double sd = mean_std(y, nullptr);
      for (auto& v : y) v += rng.uniform(-sd, sd);
      out.x_equ = append_column(s.x_equ, y);
      break;
    }
    case FlowTask::Interpolate: {
      std::vector<std::size_t> order(m);
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(std::span<std::size_t>(order));
      const auto k = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(m)));
      std::vector<double> col(m, 0.0);
      for (std::size_t i = 0; i < k; ++i) {
        col[order[i]] = s.y(order[i], 0);
        out.mask[order[i]] = 0;
      }
      out.x_equ = append_column(s.x_equ, col);
      break;
    }
  }
  return out;
}

inline Dataset make_task(const Dataset& ds, FlowTask task, std::uint64_t seed) {
  Dataset out = ds;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    out.samples[i] = make_task(ds.samples[i], task, derive_seed(seed, 0x7a5c0000 + i));
  return out;
}

// ----------------------------------------------------------------------------
// Generation entry points

inline const std::vector<std::string>& synthetic_dataset_names() {
  static const std::vector<std::string> names{"rw-comp", "ld-cycles", "tri-flow", "circuits"};
  return names;
}

/// Published graph counts.
inline std::size_t default_graph_count(const std::string& name) {
  if (name == "tri-flow") return 100;
  if (name == "circuits") return 591;
  return 1000;
}

inline Dataset generate_dataset(const std::string& name, std::size_t num_graphs, std::uint64_t seed) {
  Dataset ds;
  ds.name = name;
  ds.seed = seed;
  if (name == "circuits") {
    std::vector<CircuitInstance> inst;
    for (std::size_t i = 0; i < num_graphs; ++i) {
      Rng rng(derive_seed(seed, i));
      inst.push_back(circuit_instance(rng));
    }
    return circuits_dataset(inst, seed);
  }
  for (std::size_t i = 0; i < num_graphs; ++i) {
    Rng rng(derive_seed(seed, i));
    if (name == "rw-comp") ds.samples.push_back(rw_comp_instance(rng).sample);
    else if (name == "ld-cycles") ds.samples.push_back(ld_cycles_instance(rng).sample);
    else if (name == "tri-flow") ds.samples.push_back(tri_flow_instance(rng).sample);
    else throw DatasetError("unknown dataset '" + name + "'");
  }
  ds.task = name == "tri-flow" ? TaskKind::Regression : TaskKind::BinaryClass;
  if (name == "tri-flow") {
    TriFlowParams p;
    ds.meta["magnitude_lo"] = p.magnitude_lo;
    ds.meta["magnitude_hi"] = p.magnitude_hi;
    ds.meta["p_directed"] = p.p_directed;
  }
  if (name == "rw-comp") ds.meta["edge_probability"] = RwCompParams{}.edge_probability();
  assign_graph_splits(ds, kSyntheticSplit, derive_seed(seed, ~std::uint64_t{0}));
  return ds;
}

struct DatasetStats {
  std::size_t graphs = 0;
  std::size_t min_nodes = 0, max_nodes = 0;
  std::size_t min_edges = 0, max_edges = 0;
  std::size_t min_directed = 0, max_directed = 0;
};

inline DatasetStats dataset_stats(const Dataset& ds) {
  DatasetStats st;
  st.graphs = ds.samples.size();
  bool first = true;
  for (const auto& s : ds.samples) {
    const std::size_t n = s.graph.num_nodes(), m = s.graph.num_edges(), d = s.graph.num_directed();
    if (first) {
      st.min_nodes = st.max_nodes = n;
      st.min_edges = st.max_edges = m;
      st.min_directed = st.max_directed = d;
      first = false;
    }
    st.min_nodes = std::min(st.min_nodes, n);
    st.max_nodes = std::max(st.max_nodes, n);
    st.min_edges = std::min(st.min_edges, m);
    st.max_edges = std::max(st.max_edges, m);
    st.min_directed = std::min(st.min_directed, d);
    st.max_directed = std::max(st.max_directed, d);
  }
  return st;
}

// ----------------------------------------------------------------------------
// Dataset directory: manifest.json, graphs.txt and little-endian arrays.

inline constexpr int kDatasetFormatVersion = 1;

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  ds.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json man;
  man["format"] = "eign-dataset";
  man["version"] = kDatasetFormatVersion;
  man["name"] = ds.name;
  man["seed"] = ds.seed;
  man["task"] = to_string(ds.task);
  man["d_equ"] = ds.d_equ();
  man["d_inv"] = ds.d_inv();
  man["num_samples"] = ds.samples.size();
  man["meta"] = ds.meta;
  std::array<std::size_t, 3> per_split{};
  auto graphs = open_out(dir / "graphs.txt");
  auto xe = open_out(dir / "x_equ.bin", true), xi = open_out(dir / "x_inv.bin", true), y = open_out(dir / "y.bin", true);
  auto mk = open_out(dir / "mask.bin", true), sp = open_out(dir / "split.bin", true), orr = open_out(dir / "orientation.bin", true);
  for (const auto& s : ds.samples) {
    write_graph(graphs, s.graph);
    for (double v : s.x_equ.data()) write_f64_le(xe, v);
    for (double v : s.x_inv.data()) write_f64_le(xi, v);
    for (double v : s.y.data()) write_f64_le(y, v);
    for (auto v : s.mask) mk.put(static_cast<char>(v));
    for (auto v : s.split) sp.put(static_cast<char>(v));
    for (auto v : s.orientation.flip) orr.put(static_cast<char>(v));
    if (s.num_edges()) ++per_split[static_cast<std::size_t>(s.split[0])];
  }
  man["graphs_by_first_edge_split"] = {{"train", per_split[0]}, {"val", per_split[1]}, {"test", per_split[2]}};
  for (auto* os : {&graphs, &xe, &xi, &y, &mk, &sp, &orr})
    if (!*os) throw IoError("write failed in " + dir.string());
  auto mf = open_out(dir / "manifest.json");
  mf << man.dump(2) << '\n';
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  nlohmann::json man;
  try {
    man = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError("bad manifest in " + dir.string() + ": " + e.what());
  }
  if (man.value("format", "") != "eign-dataset") throw DatasetError("not an eign dataset: " + dir.string());
  if (man.value("version", 0) != kDatasetFormatVersion) throw DatasetError("unsupported dataset version");
  Dataset ds;
  ds.name = man.at("name").get<std::string>();
  ds.seed = man.at("seed").get<std::uint64_t>();
  ds.task = man.at("task").get<std::string>() == "binary" ? TaskKind::BinaryClass : TaskKind::Regression;
  ds.meta = man.at("meta").get<std::map<std::string, double>>();
  const auto de = man.at("d_equ").get<std::size_t>(), di = man.at("d_inv").get<std::size_t>();
  const auto count = man.at("num_samples").get<std::size_t>();
  auto graphs = open_in(dir / "graphs.txt");
  auto xe = open_in(dir / "x_equ.bin", true), xi = open_in(dir / "x_inv.bin", true), y = open_in(dir / "y.bin", true);
  auto mk = open_in(dir / "mask.bin", true), sp = open_in(dir / "split.bin", true), orr = open_in(dir / "orientation.bin", true);
  auto read_bytes = [](std::istream& is, std::size_t n) {
    std::vector<std::uint8_t> out(n);
    if (n && !is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n)))
      throw IoError("unexpected end of byte array");
    return out;
  };
  auto read_matrix = [](std::istream& is, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (auto& v : m.data()) v = read_f64_le(is);
    return m;
  };
  std::size_t lineno = 0;
  for (std::size_t i = 0; i < count; ++i) {
    LabeledGraphSample s;
    s.graph = read_graph(graphs, lineno);
    const std::size_t m = s.graph.num_edges();
    s.task = ds.task;
    s.x_equ = read_matrix(xe, m, de);
    s.x_inv = read_matrix(xi, m, di);
    s.y = read_matrix(y, m, 1);
    s.mask = read_bytes(mk, m);
    for (auto v : read_bytes(sp, m)) {
      if (v > 2) throw DatasetError("bad split code in " + dir.string());
      s.split.push_back(static_cast<Split>(v));
    }
    s.orientation.flip = read_bytes(orr, m);
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

}  // namespace eign
