#pragma once

// Randomized checks of the structural guarantees: orientation equivariance
// and invariance, permutation equivariance, boundary identities, Laplacian
// properties and the zero pattern without fusion convolutions. Trial t of a
// check with seed s is rebuilt from derive_seed(s, t) alone.

#include <Eigen/Eigenvalues>

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eign/nn.hpp"
#include "eign/operators.hpp"

namespace eign {

struct Counterexample {
  std::uint64_t trial_seed = 0;
  Graph graph;
  Orientation orientation;
  std::optional<OrientationFlip> flip;
  std::optional<EdgePermutation> permutation;
  std::string detail;
};

struct VerificationReport {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t instances = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  std::map<std::string, std::string> notes;
  std::optional<Counterexample> counterexample;

  /// Folds one instance into the report; the first failure is kept.
  void record(double deviation, const std::function<Counterexample()>& witness) {
    ++instances;
    max_deviation = std::max(max_deviation, deviation);
    if (!(deviation <= tolerance)) {
      if (pass) counterexample = witness();
      pass = false;
    }
  }
};

/// Erdos-Renyi graph with n in [5, 30], every edge directed w.p. 0.5, and a
/// random direction-consistent orientation.
inline std::pair<Graph, Orientation> verification_graph(Rng& rng, std::size_t min_edges = 2) {
  for (;;) {
    const auto n = static_cast<std::size_t>(rng.range(5, 30));
    Graph g = random_mixed_graph(n, rng.uniform(0.1, 0.4), 0.5, rng);
    if (g.num_edges() < min_edges) continue;
    auto o = random_orientation(g, rng);
    return {std::move(g), std::move(o)};
  }
}

struct TrialInstance {
  ModelConfig cfg;
  Graph graph;
  Orientation orientation;
  ParamStore params;
  Matrix x_equ;
  Matrix x_inv;
};

/// Random graph, parameters and inputs of one model trial.
inline TrialInstance make_trial(ModelConfig cfg, std::uint64_t trial_seed) {
  if (cfg.in_equ == 0 && cfg.in_inv == 0) cfg.in_equ = cfg.in_inv = 2;
  Rng rng(trial_seed);
  auto [g, o] = verification_graph(rng);
  TrialInstance t{cfg, std::move(g), std::move(o), init_params(cfg, derive_seed(trial_seed, 1)), {}, {}};
  const std::size_t m = t.graph.num_edges();
  t.x_equ = Matrix(m, cfg.in_equ);
  t.x_inv = Matrix(m, cfg.in_inv);
  for (auto& v : t.x_equ.data()) v = rng.uniform(-1, 1);
  for (auto& v : t.x_inv.data()) v = rng.uniform(-1, 1);
  return t;
}

struct FlipDeviation {
  double equ = 0.0;
  double inv = 0.0;
};

/// Deviation of f(X) from the flipped run: |D y_equ - y_equ'| and |y_inv - y_inv'|.
inline FlipDeviation flip_deviation(const TrialInstance& t, const OrientationFlip& f) {
  const auto a = predict(t.cfg, t.params, t.graph, t.orientation, t.x_equ, t.x_inv);
  const auto b = predict(t.cfg, t.params, t.graph, apply_flip(t.orientation, f), apply_flip(t.x_equ, f), t.x_inv);
  return {max_abs_diff(apply_flip(a.y_equ, f), b.y_equ), max_abs_diff(a.y_inv, b.y_inv)};
}

namespace detail {

inline VerificationReport flip_check(const std::string& name, const ModelConfig& cfg, std::size_t trials, double tol,
                                     std::uint64_t seed, bool equivariant) {
  VerificationReport rep{name, seed, 0, 0.0, tol, true, {{"model", cfg.canonical()}}, std::nullopt};
  for (std::size_t k = 0; k < trials; ++k) {
    const auto ts = derive_seed(seed, k);
    const auto t = make_trial(cfg, ts);
    const auto f = random_orientation_flip(t.graph, derive_seed(ts, 2));
    const auto d = flip_deviation(t, f);
    rep.record(equivariant ? d.equ : d.inv, [&] {
      return Counterexample{ts, t.graph, t.orientation, f, std::nullopt,
                            std::string(equivariant ? "equivariant" : "invariant") + " output changed under the flip"};
    });
  }
  return rep;
}

}  // namespace detail

inline VerificationReport check_joint_equivariance(const ModelConfig& cfg, std::size_t trials, double tol = 1e-10,
                                                   std::uint64_t seed = 0) {
  return detail::flip_check("joint_equivariance", cfg, trials, tol, seed, true);
}

inline VerificationReport check_joint_invariance(const ModelConfig& cfg, std::size_t trials, double tol = 1e-10,
                                                 std::uint64_t seed = 0) {
  return detail::flip_check("joint_invariance", cfg, trials, tol, seed, false);
}

/// P f(X) = f(P X) for both heads, plus agreement of permute-then-flip and
/// flip-then-permute.
inline VerificationReport check_permutation_equivariance(const ModelConfig& cfg, std::size_t trials,
                                                         double tol = 1e-12, std::uint64_t seed = 0) {
  VerificationReport rep{"permutation_equivariance", seed, 0, 0.0, tol, true, {{"model", cfg.canonical()}},
                         std::nullopt};
  for (std::size_t k = 0; k < trials; ++k) {
    const auto ts = derive_seed(seed, k);
    const auto t = make_trial(cfg, ts);
    const auto p = random_permutation(t.graph.num_edges(), derive_seed(ts, 3));
    const auto f = random_orientation_flip(t.graph, derive_seed(ts, 2));
    const auto a = predict(t.cfg, t.params, t.graph, t.orientation, t.x_equ, t.x_inv);
    const auto moved = apply_edge_permutation(t.graph, t.orientation, {t.x_equ, t.x_inv}, p);
    const auto b = predict(t.cfg, t.params, moved.graph, moved.orientation, moved.signals[0], moved.signals[1]);
    double dev = std::max(max_abs_diff(permute_rows(a.y_equ, p), b.y_equ), max_abs_diff(permute_rows(a.y_inv, p), b.y_inv));

    // flip, then permute (the flip travels with its edge)
    const auto fp = apply_edge_permutation(t.graph, apply_flip(t.orientation, f), {apply_flip(t.x_equ, f), t.x_inv}, p);
    OrientationFlip pf_flip{std::vector<std::int8_t>(f.sign.size())};
    for (std::size_t e = 0; e < f.sign.size(); ++e) pf_flip.sign[p.perm[e]] = f.sign[e];
    const Orientation pf_o = apply_flip(moved.orientation, pf_flip);
    const Matrix pf_x = apply_flip(moved.signals[0], pf_flip);
    const bool same_instance = fp.orientation == pf_o && fp.signals[0] == pf_x;
    const auto c = predict(t.cfg, t.params, fp.graph, fp.orientation, fp.signals[0], fp.signals[1]);
    const auto d = predict(t.cfg, t.params, moved.graph, pf_o, pf_x, moved.signals[1]);
    dev = std::max({dev, max_abs_diff(c.y_equ, d.y_equ), max_abs_diff(c.y_inv, d.y_inv)});
    if (!same_instance) dev = std::numeric_limits<double>::infinity();
    rep.record(dev, [&] {
      return Counterexample{ts, t.graph, t.orientation, f, p, "outputs disagree after re-indexing edges"};
    });
  }
  return rep;
}

/// Flip identities of both boundaries (exact), abs(L_equ) = L_inv at q = 0
/// (exact), and sensitivity of L_equ to reversing one directed edge: a pure
/// basis change at q = 0, a real change for q > 0.
inline VerificationReport check_boundary_identities(std::size_t trials, std::uint64_t seed = 0) {
  VerificationReport rep{"boundary_identities", seed, 0, 0.0, 0.0, true, {}, std::nullopt};
  bool q0_sensitive = false, qpos_insensitive = false;
  double min_qpos_change = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trials; ++k) {
    const auto ts = derive_seed(seed, k);
    Rng rng(ts);
    auto [g, o] = verification_graph(rng);
    const double q = rng.uniform(0.05, 0.5);
    const auto f = random_orientation_flip(g, derive_seed(ts, 2));
    const auto o2 = apply_flip(o, f);
    const std::vector<double> s(f.sign.begin(), f.sign.end());
    double dev = 0.0;
    for (double qq : {0.0, q}) {
      dev = std::max(dev, max_abs_diff(boundary(g, o, {Modality::Equ, qq}).scale_columns(s).to_dense(),
                                       boundary(g, o2, {Modality::Equ, qq}).to_dense()));
      dev = std::max(dev, max_abs_diff(boundary(g, o, {Modality::Inv, qq}).to_dense(),
                                       boundary(g, o2, {Modality::Inv, qq}).to_dense()));
    }
    const auto le = laplacian(g, o, kLapEqu, 0.0).to_dense();
    const auto li = laplacian(g, o, kLapInv, 0.0).to_dense();
    for (std::size_t i = 0; i < le.data().size(); ++i)
      dev = std::max(dev, std::abs(Complex(std::abs(le.data()[i]), 0.0) - li.data()[i]));

    // Reverse a directed edge that has a neighbour.
    const auto inc = g.incidence();
    std::optional<std::size_t> pick;
    for (std::size_t e = 0; e < g.num_edges() && !pick; ++e)
      if (g.edge(e).directed() && inc[g.edge(e).u].size() + inc[g.edge(e).v].size() > 2) pick = e;
    if (pick) {
      auto edges = g.edges();
      std::swap(edges[*pick].u, edges[*pick].v);
      const Graph rev(g.num_nodes(), edges);
      std::vector<double> delta(g.num_edges(), 1.0);
      delta[*pick] = -1.0;
      auto change = [&](double qq) {
        auto a = laplacian(g, o, kLapEqu, qq).to_dense();
        const auto b = laplacian(rev, o, kLapEqu, qq).to_dense();
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) *= delta[i] * delta[j];
        return max_abs_diff(a, b);
      };
      q0_sensitive = q0_sensitive || change(0.0) != 0.0;
      const double c = change(q);
      min_qpos_change = std::min(min_qpos_change, c);
      qpos_insensitive = qpos_insensitive || c <= 1e-12;
    }
    rep.record(dev, [&] { return Counterexample{ts, g, o, f, std::nullopt, "boundary identity violated"}; });
  }
  rep.notes["q0_direction"] = q0_sensitive ? "sensitive" : "insensitive";
  rep.notes["q_positive_direction"] = qpos_insensitive ? "insensitive" : "sensitive";
  if (std::isfinite(min_qpos_change)) {
    std::ostringstream os;
    os << min_qpos_change;
    rep.notes["q_positive_min_change"] = os.str();
  }
  if (q0_sensitive || qpos_insensitive) {
    rep.pass = false;
    if (!rep.counterexample) rep.counterexample = Counterexample{derive_seed(seed, 0), {}, {}, std::nullopt, std::nullopt,
                                                                 "direction sensitivity does not follow the phase"};
  }
  return rep;
}

/// Hermitian (1e-12), PSD (smallest eigenvalue >= -1e-10) and agreement with
/// the dense construction (1e-12) for L_equ and L_inv on graphs with m <= 100.
inline VerificationReport check_laplacian_properties(std::size_t trials, std::uint64_t seed = 0) {
  VerificationReport rep{"laplacian_properties", seed, 0, 0.0, 1e-12, true, {}, std::nullopt};
  double min_eig = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trials; ++k) {
    const auto ts = derive_seed(seed, k);
    Rng rng(ts);
    auto [g, o] = verification_graph(rng);
    while (g.num_edges() > 100) std::tie(g, o) = verification_graph(rng);
    const double q = rng.uniform();
    double dev = 0.0;
    for (auto kind : {kLapEqu, kLapInv}) {
      const auto l = laplacian(g, o, kind, q);
      const auto d = l.to_dense();
      dev = std::max(dev, max_abs_diff(d, d.adjoint()));
      dev = std::max(dev, max_abs_diff(d, dense_oracle_laplacian(g, o, kind, q)));
      Eigen::MatrixXcd e(d.rows(), d.cols());
      for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t j = 0; j < d.cols(); ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d(i, j);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(e, Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues().minCoeff();
      min_eig = std::min(min_eig, lo);
      // a negative eigenvalue beyond -1e-10 counts as a failure of this size
      if (lo < -1e-10) dev = std::max(dev, -lo);
    }
    rep.record(dev, [&] { return Counterexample{ts, g, o, std::nullopt, std::nullopt, "Laplacian property violated"}; });
  }
  std::ostringstream os;
  os << min_eig;
  rep.notes["min_eigenvalue"] = os.str();
  return rep;
}

/// Closed-form entries against the assembled operators on every adjacent
/// pair (and the diagonal), all four kinds.
inline VerificationReport check_entry_oracle(std::size_t trials, std::uint64_t seed = 0) {
  VerificationReport rep{"entry_oracle", seed, 0, 0.0, 1e-12, true, {}, std::nullopt};
  for (std::size_t k = 0; k < trials; ++k) {
    const auto ts = derive_seed(seed, k);
    Rng rng(ts);
    auto [g, o] = verification_graph(rng);
    const double q = rng.uniform();
    const auto inc = g.incidence();
    double dev = 0.0;
    for (auto kind : kAllLaplacianKinds) {
      const auto l = laplacian(g, o, kind, q);
      for (const auto& bucket : inc)
        for (std::size_t a : bucket)
          for (std::size_t b : bucket) dev = std::max(dev, std::abs(l.at(a, b) - laplacian_entry_oracle(g, o, kind, q, a, b)));
    }
    rep.record(dev, [&] { return Counterexample{ts, g, o, std::nullopt, std::nullopt, "entry oracle disagrees"}; });
  }
  return rep;
}

/// Without fusion convolutions and with zero equivariant input, equivariant
/// hidden states vanish exactly on undirected edges. Negative control: with
/// fusion convolutions the pattern breaks.
inline VerificationReport check_zero_lemma(std::size_t trials, std::uint64_t seed = 0) {
  VerificationReport rep{"zero_lemma", seed, 0, 0.0, 0.0, true, {}, std::nullopt};
  ModelConfig cfg;
  cfg.layers = 3;
  cfg.hidden = 8;
  cfg.in_equ = 1;
  cfg.in_inv = 3;
  cfg.ablate.no_fusion_conv = true;
  ModelConfig control = cfg;
  control.ablate.no_fusion_conv = false;
  double control_dev = 0.0;
  std::size_t control_broken = 0;
  for (std::size_t k = 0; k < trials; ++k) {
    const auto ts = derive_seed(seed, k);
    auto t = make_trial(cfg, ts);
    t.x_equ.fill(0.0);
    auto undirected_max = [&](const ModelConfig& c, const ParamStore& ps) {
      const auto pr = predict(c, ps, t.graph, t.orientation, t.x_equ, t.x_inv);
      double d = 0.0;
      auto scan = [&](const Matrix& h) {
        for (std::size_t e = 0; e < t.graph.num_edges(); ++e)
          if (!t.graph.edge(e).directed())
            for (std::size_t j = 0; j < h.cols(); ++j) d = std::max(d, std::fabs(h(e, j)));
      };
      for (const auto& h : pr.z_equ) scan(h);
      for (const auto& h : pr.h_equ) scan(h);
      scan(pr.y_equ);
      return d;
    };
    rep.record(undirected_max(cfg, t.params), [&] {
      return Counterexample{ts, t.graph, t.orientation, std::nullopt, std::nullopt,
                            "non-zero equivariant state on an undirected edge"};
    });
    const double c = undirected_max(control, init_params(control, derive_seed(ts, 1)));
    control_dev = std::max(control_dev, c);
    control_broken += c > 0.0;
  }
  rep.notes["control_max"] = std::to_string(control_dev);
  rep.notes["control_broken"] = std::to_string(control_broken) + "/" + std::to_string(trials);
  if (trials > 0 && control_broken == 0) {
    rep.pass = false;
    rep.notes["control"] = "fusion convolutions did not break the zero pattern";
  }
  return rep;
}

/// The full suite with default tolerances.
inline std::vector<VerificationReport> run_all_checks(std::size_t trials, std::uint64_t seed = 0) {
  ModelConfig eign;
  eign.layers = 2;
  eign.hidden = 8;
  std::vector<VerificationReport> out;
  out.push_back(check_boundary_identities(trials, seed));
  out.push_back(check_laplacian_properties(trials, seed));
  out.push_back(check_entry_oracle(trials, seed));
  out.push_back(check_joint_equivariance(eign, trials, 1e-10, seed));
  out.push_back(check_joint_invariance(eign, trials, 1e-10, seed));
  out.push_back(check_permutation_equivariance(eign, trials, 1e-12, seed));
  out.push_back(check_zero_lemma(trials, seed));
  return out;
}

inline nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json j{{"name", r.name},
                   {"seed", r.seed},
                   {"instances", r.instances},
                   {"max_deviation", r.max_deviation},
                   {"tolerance", r.tolerance},
                   {"pass", r.pass},
                   {"notes", r.notes}};
  if (r.counterexample) {
    const auto& c = *r.counterexample;
    std::ostringstream gs;
    write_graph(gs, c.graph);
    nlohmann::json cj{{"trial_seed", c.trial_seed}, {"graph", gs.str()}, {"orientation", c.orientation.flip},
                      {"detail", c.detail}};
    if (c.flip) cj["flip"] = c.flip->sign;
    if (c.permutation) cj["permutation"] = c.permutation->perm;
    j["counterexample"] = cj;
  }
  return j;
}

}  // namespace eign
