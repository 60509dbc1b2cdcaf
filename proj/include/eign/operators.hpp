#pragma once

// Boundary operators and the edge Laplacians built from them.
//
// Complex boundary entries for an edge e with tail s and head t (under the
// orientation; directed edges are always oriented along their direction), with
// w = exp(i*pi*q) for directed edges and w = 1 for undirected ones:
//
//   Equ:  B[s,e] = -w,  B[t,e] = conj(w)
//   Inv:  B[s,e] =  w,  B[t,e] = conj(w)
//
// Every Laplacian is a product B_out^H B_in of two such operators.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "eign/graph.hpp"
#include "eign/sparse.hpp"

namespace eign {

enum class Modality : std::uint8_t { Equ, Inv };

inline const char* to_string(Modality m) { return m == Modality::Equ ? "equ" : "inv"; }

class OperatorError : public Error {
 public:
  using Error::Error;
};

struct BoundaryKind {
  Modality variant = Modality::Equ;
  double q = 0.0;
};

/// `out` is the modality of the produced signal (left boundary, conjugated),
/// `in` the modality it consumes (right boundary).
struct LaplacianKind {
  Modality out = Modality::Equ;
  Modality in = Modality::Equ;

  friend bool operator==(const LaplacianKind&, const LaplacianKind&) = default;
};

inline constexpr LaplacianKind kLapEqu{Modality::Equ, Modality::Equ};
inline constexpr LaplacianKind kLapInv{Modality::Inv, Modality::Inv};
inline constexpr LaplacianKind kLapEquToInv{Modality::Inv, Modality::Equ};
inline constexpr LaplacianKind kLapInvToEqu{Modality::Equ, Modality::Inv};
inline constexpr LaplacianKind kAllLaplacianKinds[] = {kLapEqu, kLapInv, kLapEquToInv, kLapInvToEqu};

inline std::string to_string(LaplacianKind k) {
  if (k.out == k.in) return to_string(k.out);
  return std::string(to_string(k.in)) + "-" + to_string(k.out);
}

inline LaplacianKind parse_laplacian_kind(const std::string& s) {
  for (auto k : kAllLaplacianKinds)
    if (to_string(k) == s) return k;
  throw OperatorError("unknown Laplacian kind '" + s + "' (expected equ, inv, equ-inv, inv-equ)");
}

inline Complex phase(double q) { return std::polar(1.0, std::numbers::pi * q); }

/// n x m boundary operator.
inline SparseComplexMatrix boundary(const Graph& g, const Orientation& o, BoundaryKind k) {
  require_direction_consistent(g, o);
  if (!(k.q >= 0.0 && k.q <= 1.0)) throw OperatorError("boundary: q must lie in [0, 1]");
  std::vector<Triplet> trips;
  trips.reserve(2 * g.num_edges());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const Complex w = g.edge(e).directed() ? phase(k.q) : Complex{1.0};
    const Complex at_tail = k.variant == Modality::Equ ? -w : w;
    trips.push_back({o.tail(g, e), e, at_tail});
    trips.push_back({o.head(g, e), e, std::conj(w)});
  }
  return SparseComplexMatrix::from_triplets(g.num_nodes(), g.num_edges(), std::move(trips));
}

/// B_left^H B_right, accumulated per node over pairs of incident edges. Never
/// forms an n x m intermediate; edges sharing both endpoints accumulate two
/// contributions.
inline SparseComplexMatrix gram(const SparseComplexMatrix& left, const SparseComplexMatrix& right) {
  if (left.rows() != right.rows() || left.cols() != right.cols()) throw DimensionError("gram: shape mismatch");
  std::vector<Triplet> trips;
  for (std::size_t v = 0; v < left.rows(); ++v)
    for (std::size_t a = left.row_ptr()[v]; a < left.row_ptr()[v + 1]; ++a)
      for (std::size_t b = right.row_ptr()[v]; b < right.row_ptr()[v + 1]; ++b)
        trips.push_back({left.col_idx()[a], right.col_idx()[b], std::conj(left.values()[a]) * right.values()[b]});
  return SparseComplexMatrix::from_triplets(left.cols(), right.cols(), std::move(trips));
}

inline SparseComplexMatrix laplacian(const Graph& g, const Orientation& o, LaplacianKind k, double q) {
  return gram(boundary(g, o, {k.out, q}), boundary(g, o, {k.in, q}));
}

/// Closed-form Laplacian entry by case analysis on edge kinds and incidence
/// roles, independent of any boundary matrix.
///
/// At a shared node v, an edge is either outgoing (v is its tail) or incoming.
/// The equivariant side re-signs: an outgoing edge contributes -1, an incoming
/// one +1, so two equivariant sides give +1 when aligned (same role) and -1 when
/// consecutive. Directed edges add a phase of pi*q whose sign depends on role and
/// side: the output edge gets +pi*q when incoming and -pi*q when outgoing, the
/// input edge the opposite.
inline Complex laplacian_entry_oracle(const Graph& g, const Orientation& o, LaplacianKind k, double q, std::size_t e,
                                      std::size_t f) {
  require_direction_consistent(g, o);
  if (e >= g.num_edges() || f >= g.num_edges()) throw OperatorError("laplacian_entry_oracle: edge out of range");
  const std::size_t nodes_e[2] = {o.tail(g, e), o.head(g, e)};
  const std::size_t nodes_f[2] = {o.tail(g, f), o.head(g, f)};
  const double q_e = g.edge(e).directed() ? q : 0.0;
  const double q_f = g.edge(f).directed() ? q : 0.0;
  Complex total{};
  bool adjacent = false;
  for (int re = 0; re < 2; ++re)
    for (int rf = 0; rf < 2; ++rf) {
      if (nodes_e[re] != nodes_f[rf]) continue;
      adjacent = true;
      const bool e_outgoing = re == 0;
      const bool f_outgoing = rf == 0;
      double sign = 1.0;
      if (k.out == Modality::Equ) sign *= e_outgoing ? -1.0 : 1.0;
      if (k.in == Modality::Equ) sign *= f_outgoing ? -1.0 : 1.0;
      const double angle = (e_outgoing ? -q_e : q_e) + (f_outgoing ? q_f : -q_f);
      total += sign * std::polar(1.0, std::numbers::pi * angle);
    }
  if (!adjacent) throw OperatorError("laplacian_entry_oracle: edges are not adjacent");
  return total;
}

/// Row sums of |L|.
inline std::vector<double> abs_row_sums(const SparseComplexMatrix& l) {
  std::vector<double> d(l.rows(), 0.0);
  for (std::size_t r = 0; r < l.rows(); ++r)
    for (std::size_t p = l.row_ptr()[r]; p < l.row_ptr()[r + 1]; ++p) d[r] += std::abs(l.values()[p]);
  return d;
}

/// B * D^{-1/2} with D the |.|-row-sum degree of B^H B. Zero-degree columns
/// (edges absent from a split operator) stay zero.
inline SparseComplexMatrix normalize_boundary(const SparseComplexMatrix& b) {
  const auto deg = abs_row_sums(gram(b, b));
  std::vector<double> s(deg.size());
  for (std::size_t e = 0; e < deg.size(); ++e) s[e] = deg[e] > 0.0 ? 1.0 / std::sqrt(deg[e]) : 0.0;
  return b.scale_columns(s);
}

inline SparseComplexMatrix normalized_boundary(const Graph& g, const Orientation& o, BoundaryKind k) {
  return normalize_boundary(boundary(g, o, k));
}

inline SparseComplexMatrix normalized_laplacian(const Graph& g, const Orientation& o, LaplacianKind k, double q) {
  return gram(normalized_boundary(g, o, {k.out, q}), normalized_boundary(g, o, {k.in, q}));
}

/// I - L/2.
inline SparseComplexMatrix gcn_shift(const SparseComplexMatrix& l) {
  if (l.rows() != l.cols()) throw DimensionError("gcn_shift: operator must be square");
  return sparse_axpby(1.0, SparseComplexMatrix::identity(l.rows()), -0.5, l);
}

/// Chebyshev basis terms C^1..C^k with C^1 = X, C^2 = L_first X and
/// C^j = 2 L_hat C^{j-1} - C^{j-2}. For `cross_modality`, X lives in the other
/// modality, so C^1 is replaced by zero both in the output and in the recursion.
inline std::vector<ComplexMatrix> chebyshev_apply(const SparseComplexMatrix& l_first, const SparseComplexMatrix& l_hat,
                                                  const ComplexMatrix& x, std::size_t k, bool cross_modality = false) {
  if (k < 1) throw OperatorError("chebyshev_apply: order must be >= 1");
  if (x.rows() != l_first.cols() || l_hat.rows() != l_hat.cols() || l_hat.cols() != l_first.rows())
    throw DimensionError("chebyshev_apply: dimension mismatch");
  std::vector<ComplexMatrix> terms;
  terms.push_back(cross_modality ? ComplexMatrix(x.rows(), x.cols()) : x);
  if (k >= 2) terms.push_back(l_first.multiply(x));
  for (std::size_t j = 2; j < k; ++j) {
    ComplexMatrix next = l_hat.multiply(terms[j - 1]);
    for (std::size_t i = 0; i < next.data().size(); ++i) next.data()[i] = 2.0 * next.data()[i] - terms[j - 2].data()[i];
    terms.push_back(std::move(next));
  }
  return terms;
}

inline constexpr std::size_t kDenseOracleMaxEdges = 512;

/// Dense B built entry by entry from the case definitions, then B_out^H B_in.
inline ComplexMatrix dense_oracle_laplacian(const Graph& g, const Orientation& o, LaplacianKind k, double q) {
  require_direction_consistent(g, o);
  if (g.num_edges() > kDenseOracleMaxEdges) throw OperatorError("dense_oracle_laplacian: too many edges");
  auto dense_boundary = [&](Modality variant) {
    ComplexMatrix b(g.num_nodes(), g.num_edges());
    for (std::size_t v = 0; v < g.num_nodes(); ++v)
      for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const Edge& ed = g.edge(e);
        if (ed.directed()) {
          if (ed.u == v) b(v, e) = (variant == Modality::Equ ? -1.0 : 1.0) * std::exp(Complex(0, std::numbers::pi * q));
          else if (ed.v == v) b(v, e) = std::exp(Complex(0, -std::numbers::pi * q));
        } else if (variant == Modality::Equ) {
          if (o.tail(g, e) == v) b(v, e) = -1.0;
          else if (o.head(g, e) == v) b(v, e) = 1.0;
        } else if (ed.u == v || ed.v == v) {
          b(v, e) = 1.0;
        }
      }
    return b;
  };
  return matmul(dense_boundary(k.out).adjoint(), dense_boundary(k.in));
}

/// Direction-split boundaries: undirected edges, directed edges seen from
/// their tail, and directed edges seen from their head. Real valued.
enum class DirSplit : std::uint8_t { Undirected, Outgoing, Incoming };
inline constexpr DirSplit kAllDirSplits[] = {DirSplit::Undirected, DirSplit::Outgoing, DirSplit::Incoming};

inline SparseComplexMatrix split_boundary(const Graph& g, const Orientation& o, Modality variant, DirSplit split) {
  require_direction_consistent(g, o);
  const double tail_sign = variant == Modality::Equ ? -1.0 : 1.0;
  std::vector<Triplet> trips;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const bool directed = g.edge(e).directed();
    switch (split) {
      case DirSplit::Undirected:
        if (!directed) {
          trips.push_back({o.tail(g, e), e, tail_sign});
          trips.push_back({o.head(g, e), e, 1.0});
        }
        break;
      case DirSplit::Outgoing:
        if (directed) trips.push_back({o.tail(g, e), e, tail_sign});
        break;
      case DirSplit::Incoming:
        if (directed) trips.push_back({o.head(g, e), e, 1.0});
        break;
    }
  }
  return SparseComplexMatrix::from_triplets(g.num_nodes(), g.num_edges(), std::move(trips));
}

/// Coordinate text: one "row col re im" line per stored entry, sorted by (row, col).
inline void write_coordinate(std::ostream& os, const SparseComplexMatrix& m) {
  os.precision(17);
  for (const auto& t : m.triplets()) os << t.row << ' ' << t.col << ' ' << t.value.real() + 0.0 << ' ' << t.value.imag() + 0.0 << '\n';
}

}  // namespace eign
