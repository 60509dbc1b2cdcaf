#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "eign/operators.hpp"

using namespace eign;

namespace {

constexpr double kPi = std::numbers::pi;

Complex cis(double a) { return std::polar(1.0, a); }

void expect_near(Complex a, Complex b, double tol = 1e-14) {
  EXPECT_NEAR(a.real(), b.real(), tol);
  EXPECT_NEAR(a.imag(), b.imag(), tol);
}

struct Instance {
  Graph g;
  Orientation o;
};

Instance random_instance(Rng& rng, std::size_t max_n = 30) {
  const auto n = static_cast<std::size_t>(rng.range(5, static_cast<std::int64_t>(max_n)));
  Graph g = random_mixed_graph(n, rng.uniform(0.1, 0.4), 0.5, rng);
  auto o = random_orientation(g, rng);
  return {std::move(g), std::move(o)};
}

}  // namespace

TEST(Boundary, DirectedEquColumn) {
  Graph g(2, {{0, 1, EdgeKind::Directed}});
  auto b = boundary(g, canonical_orientation(g), {Modality::Equ, 0.25}).to_dense();
  expect_near(b(0, 0), -cis(kPi / 4));
  expect_near(b(1, 0), cis(-kPi / 4));
  auto b0 = boundary(g, canonical_orientation(g), {Modality::Equ, 0.0}).to_dense();
  EXPECT_EQ(b0(0, 0), Complex(-1));
  EXPECT_EQ(b0(1, 0), Complex(1));
}

TEST(Boundary, UndirectedInvColumn) {
  Graph g(2, {{0, 1, EdgeKind::Undirected}});
  for (double q : {0.0, 0.3, 1.0}) {
    auto b = boundary(g, Orientation{{1}}, {Modality::Inv, q}).to_dense();
    EXPECT_EQ(b(0, 0), Complex(1));
    EXPECT_EQ(b(1, 0), Complex(1));
  }
}

TEST(Boundary, RejectsInconsistentOrientation) {
  Graph g(2, {{0, 1, EdgeKind::Directed}});
  EXPECT_THROW(boundary(g, Orientation{{1}}, {Modality::Equ, 0.1}), GraphError);
  EXPECT_THROW(boundary(g, canonical_orientation(g), {Modality::Equ, 1.5}), OperatorError);
}

TEST(Boundary, FlipIdentities) {
  Rng rng(101);
  for (int t = 0; t < 200; ++t) {
    auto [g, o] = random_instance(rng);
    const double q = rng.uniform();
    auto f = random_orientation_flip(g, rng());
    auto o2 = apply_flip(o, f);
    std::vector<double> s(f.sign.begin(), f.sign.end());
    auto be = boundary(g, o, {Modality::Equ, q});
    auto be2 = boundary(g, o2, {Modality::Equ, q});
    EXPECT_EQ(max_abs_diff(be.scale_columns(s).to_dense(), be2.to_dense()), 0.0);
    EXPECT_EQ(max_abs_diff(boundary(g, o, {Modality::Inv, q}).to_dense(), boundary(g, o2, {Modality::Inv, q}).to_dense()),
              0.0);
  }
}

TEST(Laplacian, ConsecutiveDirectedEquEntry) {
  Graph g(3, {{0, 1, EdgeKind::Directed}, {1, 2, EdgeKind::Directed}});
  const double q = 0.1;
  auto l = laplacian(g, canonical_orientation(g), kLapEqu, q);
  expect_near(l.at(0, 1), -cis(2 * kPi * q));
  expect_near(l.at(1, 0), -cis(-2 * kPi * q));
  expect_near(l.at(0, 0), 2.0);
}

TEST(Laplacian, ConsecutiveUndirectedEquIsMinusOne) {
  Graph g(3, {{0, 1, EdgeKind::Undirected}, {1, 2, EdgeKind::Undirected}});
  for (double q : {0.0, 0.2, 0.9}) {
    auto l = laplacian(g, canonical_orientation(g), kLapEqu, q);
    expect_near(l.at(0, 1), -1.0);
    // aligned: both pointing into node 1
    auto la = laplacian(g, Orientation{{0, 1}}, kLapEqu, q);
    expect_near(la.at(0, 1), 1.0);
  }
}

TEST(Laplacian, Diagonals) {
  Rng rng(3);
  auto [g, o] = random_instance(rng);
  const double q = 0.37;
  for (auto k : kAllLaplacianKinds) {
    auto l = laplacian(g, o, k, q);
    const double expected = k.out == k.in ? 2.0 : 0.0;
    for (std::size_t e = 0; e < g.num_edges(); ++e) expect_near(l.at(e, e), expected);
  }
}

TEST(Laplacian, MatchesDenseOracle) {
  Rng rng(202);
  int tested = 0;
  while (tested < 200) {
    auto [g, o] = random_instance(rng);
    if (g.num_edges() > 100) continue;
    ++tested;
    const double q = rng.bernoulli(0.2) ? 0.0 : rng.uniform();
    for (auto k : kAllLaplacianKinds) {
      auto sparse = laplacian(g, o, k, q).to_dense();
      EXPECT_LE(max_abs_diff(sparse, dense_oracle_laplacian(g, o, k, q)), 1e-12);
    }
  }
}

TEST(Laplacian, EntryOracleAgreesOnAdjacentPairs) {
  Rng rng(303);
  for (int t = 0; t < 100; ++t) {
    auto [g, o] = random_instance(rng);
    const double q = rng.uniform();
    const auto inc = g.incidence();
    for (auto k : kAllLaplacianKinds) {
      auto l = laplacian(g, o, k, q);
      for (const auto& bucket : inc)
        for (std::size_t e : bucket)
          for (std::size_t f : bucket) expect_near(l.at(e, f), laplacian_entry_oracle(g, o, k, q, e, f), 1e-13);
    }
  }
}

TEST(Laplacian, EntryOracleCases) {
  // directed e=(0,1), undirected f oriented (1,2): consecutive
  Graph g(3, {{0, 1, EdgeKind::Directed}, {1, 2, EdgeKind::Undirected}});
  const double q = 0.2;
  auto o = canonical_orientation(g);
  expect_near(laplacian_entry_oracle(g, o, kLapEqu, q, 0, 1), -cis(kPi * q));
  expect_near(laplacian_entry_oracle(g, o, kLapEqu, q, 0, 0), 2.0);
  // aligned: f oriented (2,1)
  Orientation oa{{0, 1}};
  expect_near(laplacian_entry_oracle(g, oa, kLapEqu, q, 0, 1), cis(kPi * q));
  // inv ignores alignment on undirected pairs
  Graph u(3, {{0, 1, EdgeKind::Undirected}, {1, 2, EdgeKind::Undirected}});
  expect_near(laplacian_entry_oracle(u, canonical_orientation(u), kLapInv, q, 0, 1), 1.0);
  expect_near(laplacian_entry_oracle(u, Orientation{{0, 1}}, kLapInv, q, 0, 1), 1.0);
  Graph far(4, {{0, 1, EdgeKind::Undirected}, {2, 3, EdgeKind::Undirected}});
  EXPECT_THROW(laplacian_entry_oracle(far, canonical_orientation(far), kLapEqu, q, 0, 1), OperatorError);
}

TEST(Laplacian, ClassicalAtZeroPhase) {
  Rng rng(4);
  auto [g, o] = random_instance(rng);
  // B_equ^T B_equ from the plain signed incidence matrix
  ComplexMatrix b(g.num_nodes(), g.num_edges());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    b(o.tail(g, e), e) = -1.0;
    b(o.head(g, e), e) = 1.0;
  }
  EXPECT_EQ(max_abs_diff(laplacian(g, o, kLapEqu, 0.0).to_dense(), matmul(b.adjoint(), b)), 0.0);
}

TEST(Laplacian, HermitianPsdAndAbsRelation) {
  Rng rng(505);
  for (int t = 0; t < 100; ++t) {
    auto [g, o] = random_instance(rng);
    const double q = rng.uniform();
    for (auto k : {kLapEqu, kLapInv}) {
      auto l = laplacian(g, o, k, q);
      EXPECT_LE(max_abs_diff(l.to_dense(), l.adjoint().to_dense()), 1e-12);
      ComplexMatrix x(g.num_edges(), 1);
      for (auto& v : x.data()) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
      auto lx = l.multiply(x);
      Complex quad{};
      for (std::size_t e = 0; e < g.num_edges(); ++e) quad += std::conj(x(e, 0)) * lx(e, 0);
      EXPECT_GE(quad.real(), -1e-10);
    }
    auto le = laplacian(g, o, kLapEqu, 0.0).to_dense();
    auto li = laplacian(g, o, kLapInv, 0.0).to_dense();
    for (std::size_t i = 0; i < le.data().size(); ++i) EXPECT_EQ(std::abs(le.data()[i]), li.data()[i].real());
  }
}

TEST(Laplacian, FusionKindsAreAdjointPairs) {
  Rng rng(6);
  auto [g, o] = random_instance(rng);
  auto a = laplacian(g, o, kLapEquToInv, 0.3);
  auto b = laplacian(g, o, kLapInvToEqu, 0.3);
  EXPECT_LE(max_abs_diff(a.adjoint().to_dense(), b.to_dense()), 1e-15);
}

TEST(Laplacian, SparsityFollowsLineGraph) {
  Rng rng(606);
  for (int t = 0; t < 50; ++t) {
    auto [g, o] = random_instance(rng);
    auto lg = line_graph_laplacian(g);
    const double q = rng.uniform();
    for (auto k : kAllLaplacianKinds) {
      auto l = laplacian(g, o, k, q);
      for (std::size_t e = 0; e < g.num_edges(); ++e)
        for (std::size_t f = 0; f < g.num_edges(); ++f) {
          const bool expect_nonzero = e == f ? k.out == k.in : lg.at(e, f) != Complex{};
          EXPECT_EQ(l.at(e, f) != Complex{}, expect_nonzero);
        }
    }
  }
}

TEST(Laplacian, DirectionSensitivity) {
  Graph g(4, {{0, 1, EdgeKind::Directed}, {1, 2, EdgeKind::Undirected}, {2, 0, EdgeKind::Directed},
              {2, 3, EdgeKind::Undirected}});
  Graph rev(4, {{1, 0, EdgeKind::Directed}, {1, 2, EdgeKind::Undirected}, {2, 0, EdgeKind::Directed},
                {2, 3, EdgeKind::Undirected}});
  auto o = canonical_orientation(g);
  // Reversing edge 0 acts as a basis change on that row/column at q = 0 only.
  std::vector<double> delta{-1, 1, 1, 1};
  auto conj_delta = [&](const SparseComplexMatrix& l) {
    auto d = l.to_dense();
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j) d(i, j) *= delta[i] * delta[j];
    return d;
  };
  EXPECT_EQ(max_abs_diff(conj_delta(laplacian(g, o, kLapEqu, 0.0)), laplacian(rev, o, kLapEqu, 0.0).to_dense()), 0.0);
  EXPECT_GT(max_abs_diff(conj_delta(laplacian(g, o, kLapEqu, 0.25)), laplacian(rev, o, kLapEqu, 0.25).to_dense()),
            0.1);
}

TEST(Normalize, SingleEdge) {
  Graph g(2, {{0, 1, EdgeKind::Directed}});
  auto l = normalized_laplacian(g, canonical_orientation(g), kLapEqu, 0.4);
  expect_near(l.at(0, 0), 1.0);
}

TEST(Normalize, OrientationIndependentDegrees) {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    auto [g, o] = random_instance(rng);
    auto o2 = apply_flip(o, random_orientation_flip(g, rng()));
    for (auto v : {Modality::Equ, Modality::Inv}) {
      auto d1 = abs_row_sums(laplacian(g, o, {v, v}, 0.2));
      auto d2 = abs_row_sums(laplacian(g, o2, {v, v}, 0.2));
      for (std::size_t e = 0; e < d1.size(); ++e) EXPECT_NEAR(d1[e], d2[e], 1e-13);
    }
  }
}

TEST(Normalize, PathGraphInvAgainstDense) {
  Graph g(4, {{0, 1, EdgeKind::Undirected}, {1, 2, EdgeKind::Undirected}, {2, 3, EdgeKind::Undirected}});
  auto o = canonical_orientation(g);
  auto dense = dense_oracle_laplacian(g, o, kLapInv, 0.0);
  std::vector<double> deg(3, 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) deg[i] += std::abs(dense(i, j));
  EXPECT_EQ(deg, (std::vector<double>{3, 4, 3}));
  auto l = normalized_laplacian(g, o, kLapInv, 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) expect_near(l.at(i, j), dense(i, j) / std::sqrt(deg[i] * deg[j]));
}

TEST(GcnShift, Cases) {
  Graph g(2, {{0, 1, EdgeKind::Undirected}});
  auto a = gcn_shift(laplacian(g, canonical_orientation(g), kLapEqu, 0.0));
  EXPECT_EQ(a.at(0, 0), Complex(0));
  auto diag = SparseComplexMatrix::from_triplets(2, 2, {{0, 0, 4.0}, {1, 1, 1.0}});
  auto ad = gcn_shift(diag).to_dense();
  EXPECT_EQ(ad(0, 0), Complex(-1));
  EXPECT_EQ(ad(1, 1), Complex(0.5));
  EXPECT_EQ(ad(0, 1), Complex(0));
  EXPECT_THROW(gcn_shift(SparseComplexMatrix(2, 3)), DimensionError);

  Rng rng(8);
  Graph r = random_mixed_graph(6, 0.6, 0.5, rng);
  auto l = laplacian(r, canonical_orientation(r), kLapEqu, 0.3);
  auto dense = l.to_dense();
  for (std::size_t i = 0; i < dense.rows(); ++i)
    for (std::size_t j = 0; j < dense.cols(); ++j) dense(i, j) = (i == j ? 1.0 : 0.0) - dense(i, j) / 2.0;
  EXPECT_LE(max_abs_diff(gcn_shift(l).to_dense(), dense), 1e-15);
}

TEST(Chebyshev, LowOrders) {
  ComplexMatrix x(3, 2);
  for (std::size_t i = 0; i < x.data().size(); ++i) x.data()[i] = Complex(double(i), -0.5 * double(i));
  auto id = SparseComplexMatrix::identity(3);
  auto k1 = chebyshev_apply(id, id, x, 1);
  ASSERT_EQ(k1.size(), 1u);
  EXPECT_EQ(max_abs_diff(k1[0], x), 0.0);
  auto k2 = chebyshev_apply(id, id, x, 2);
  ASSERT_EQ(k2.size(), 2u);
  EXPECT_EQ(max_abs_diff(k2[1], x), 0.0);
  EXPECT_THROW(chebyshev_apply(id, id, x, 0), OperatorError);
}

TEST(Chebyshev, ThirdTermMatchesPolynomial) {
  Rng rng(9);
  Graph g = random_mixed_graph(7, 0.5, 0.5, rng);
  auto l = normalized_laplacian(g, canonical_orientation(g), kLapEqu, 0.2);
  ComplexMatrix x(g.num_edges(), 2);
  for (auto& v : x.data()) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
  auto terms = chebyshev_apply(l, l, x, 3);
  auto ld = l.to_dense();
  auto l2x = matmul(ld, matmul(ld, x));
  for (std::size_t i = 0; i < x.data().size(); ++i) expect_near(terms[2].data()[i], 2.0 * l2x.data()[i] - x.data()[i], 1e-12);
}

TEST(Chebyshev, CrossModalityUsesFusionOnlyOnce) {
  Rng rng(10);
  Graph g = random_mixed_graph(7, 0.5, 0.5, rng);
  auto o = canonical_orientation(g);
  auto cross = normalized_laplacian(g, o, kLapInvToEqu, 0.2);
  auto target = normalized_laplacian(g, o, kLapEqu, 0.2);
  ComplexMatrix x(g.num_edges(), 1);
  for (auto& v : x.data()) v = rng.uniform(-1, 1);
  auto t = chebyshev_apply(cross, target, x, 4, true);
  for (auto v : t[0].data()) EXPECT_EQ(v, Complex{});
  auto c2 = cross.multiply(x);
  EXPECT_EQ(max_abs_diff(t[1], c2), 0.0);
  auto expect3 = target.multiply(c2);
  for (auto& v : expect3.data()) v *= 2.0;
  EXPECT_LE(max_abs_diff(t[2], expect3), 1e-15);
}

TEST(DenseOracle, GuardsSize) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < 600; ++i) edges.push_back({i, i + 1, EdgeKind::Undirected});
  Graph g(601, edges);
  EXPECT_THROW(dense_oracle_laplacian(g, canonical_orientation(g), kLapEqu, 0.0), OperatorError);
}

TEST(SplitBoundary, PartitionsEdges) {
  Graph g(3, {{0, 1, EdgeKind::Directed}, {1, 2, EdgeKind::Undirected}});
  auto o = canonical_orientation(g);
  auto und = split_boundary(g, o, Modality::Equ, DirSplit::Undirected).to_dense();
  auto out = split_boundary(g, o, Modality::Equ, DirSplit::Outgoing).to_dense();
  auto in = split_boundary(g, o, Modality::Inv, DirSplit::Incoming).to_dense();
  EXPECT_EQ(und(1, 1), Complex(-1));
  EXPECT_EQ(und(2, 1), Complex(1));
  EXPECT_EQ(und(0, 0), Complex(0));
  EXPECT_EQ(out(0, 0), Complex(-1));
  EXPECT_EQ(out(1, 0), Complex(0));
  EXPECT_EQ(in(1, 0), Complex(1));
  EXPECT_EQ(in(0, 0), Complex(0));
}

TEST(Coordinate, SortedLines) {
  Graph g(3, {{0, 1, EdgeKind::Directed}, {1, 2, EdgeKind::Undirected}});
  std::ostringstream os;
  write_coordinate(os, laplacian(g, canonical_orientation(g), kLapInv, 0.0));
  EXPECT_EQ(os.str(), "0 0 2 0\n0 1 1 0\n1 0 1 0\n1 1 2 0\n");
}

TEST(LaplacianKind, ParseRoundTrip) {
  for (auto k : kAllLaplacianKinds) EXPECT_EQ(parse_laplacian_kind(to_string(k)), k);
  EXPECT_THROW(parse_laplacian_kind("hodge"), OperatorError);
}
