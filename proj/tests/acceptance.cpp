// End-to-end acceptance run: randomized property checks, then desk-scale
// training on every synthetic task and the circuits dataset. Prints one
// PASS/FAIL line per criterion and exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "eign/circuits.hpp"
#include "eign/metrics.hpp"
#include "eign/reproduce.hpp"
#include "eign/verify.hpp"

using namespace eign;

namespace {

constexpr std::uint64_t kSeed = 0;

// Tolerances.
constexpr double kFlipTol = 1e-10;
constexpr double kPermTol = 1e-12;
constexpr double kGradRelTol = 1e-4;
constexpr double kKclTol = 1e-9;
constexpr double kEnumTol = 1e-12;
constexpr double kDiodeTol = 1e-3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string describe(const VerificationReport& r) {
  return r.name + " " + std::to_string(r.instances) + " instances, max deviation " + fmt("%.3g", r.max_deviation);
}

Outcome c1_boundary() {
  const auto r = check_boundary_identities(200, kSeed);
  return {r.pass && r.max_deviation == 0.0, describe(r)};
}

Outcome c2_laplacians() {
  // The abs(L_equ) = L_inv identity at q = 0 is part of the boundary check.
  const auto b = check_boundary_identities(200, derive_seed(kSeed, 2));
  const auto r = check_laplacian_properties(200, kSeed);
  return {b.pass && r.pass, describe(r) + ", min eigenvalue " + r.notes.at("min_eigenvalue")};
}

Outcome c3_entries() {
  const auto r = check_entry_oracle(100, kSeed);
  return {r.pass, describe(r)};
}

ModelConfig probe_model(Architecture a) {
  ModelConfig c;
  c.arch = a;
  c.layers = 2;
  c.hidden = 8;
  c.in_equ = 2;
  c.in_inv = 2;
  return c;
}

Outcome c4_orientation() {
  const auto eq = check_joint_equivariance(probe_model(Architecture::EIGN), 100, kFlipTol, kSeed);
  const auto inv = check_joint_invariance(probe_model(Architecture::EIGN), 100, kFlipTol, kSeed);
  const auto dir = check_joint_equivariance(probe_model(Architecture::HodgeDir), 100, kFlipTol, kSeed);
  const bool counter = !dir.pass && dir.counterexample.has_value();
  return {eq.pass && inv.pass && counter,
          "equivariance " + fmt("%.3g", eq.max_deviation) + ", invariance " + fmt("%.3g", inv.max_deviation) +
              ", Hodge+Dir " + (counter ? "counterexample at trial seed " + std::to_string(dir.counterexample->trial_seed)
                                        : std::string("no counterexample"))};
}

Outcome c5_permutation() {
  const auto r = check_permutation_equivariance(probe_model(Architecture::EIGN), 100, kPermTol, kSeed);
  return {r.pass, describe(r)};
}

Outcome c6_zero_lemma() {
  const auto r = check_zero_lemma(100, kSeed);
  return {r.pass && r.max_deviation == 0.0, describe(r) + ", control broken " + r.notes.at("control_broken")};
}

double full_loss(const ModelConfig& cfg, const ParamStore& ps, const GraphOperators& ops, const Matrix& xe,
                 const Matrix& xi, const Matrix& target, const Matrix& labels, ParamStore* grads) {
  Tape t;
  ParamBinding P(t, ps, grads);
  Rng rng(0);
  auto out = model_forward(t, cfg, P, ops, xe, xi, false, rng);
  std::vector<std::uint8_t> mask(xe.rows(), 1);
  NodeId loss = t.add(t.mse(out.y_equ, target, mask), t.bce_with_logits(out.y_inv, labels, mask));
  const double v = t.value(loss)(0, 0);
  if (grads) t.backward(loss);
  return v;
}

Outcome c7_gradients() {
  Rng rng(derive_seed(kSeed, 7));
  Graph g;
  Orientation o;
  do {
    std::tie(g, o) = verification_graph(rng, 20);
  } while (g.num_edges() != 20 || g.num_directed() == 0 || g.num_directed() == g.num_edges());
  ModelConfig cfg = probe_model(Architecture::EIGN);
  cfg.layers = 3;
  cfg.dropout = 0.0;
  const std::size_t m = g.num_edges();
  Matrix xe(m, 2), xi(m, 2), target(m, 1), labels(m, 1);
  for (auto* x : {&xe, &xi, &target})
    for (auto& v : x->data()) v = rng.uniform(-1.0, 1.0);
  for (auto& v : labels.data()) v = rng.bernoulli(0.5);
  const auto ops = build_operators(cfg, g, o);
  ParamStore ps = init_params(cfg, derive_seed(kSeed, 8));
  ps.zero_grad();
  full_loss(cfg, ps, ops, xe, xi, target, labels, &ps);
  const double h = 1e-5;
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  for (auto& p : ps.params()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + h;
      const double up = full_loss(cfg, ps, ops, xe, xi, target, labels, nullptr);
      p.value.data()[i] = orig - h;
      const double down = full_loss(cfg, ps, ops, xe, xi, target, labels, nullptr);
      p.value.data()[i] = orig;
      const double fd = (up - down) / (2 * h);
      const double an = p.grad.data()[i];
      // Relative error with an absolute floor for entries whose gradient vanishes.
      const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-6});
      ++checked;
      if (rel > worst) {
        worst = rel;
        worst_name = p.name;
      }
    }
  }
  return {worst < kGradRelTol, std::to_string(checked) + " parameters, worst relative error " + fmt("%.3g", worst) +
                                   (worst_name.empty() ? "" : " (" + worst_name + ")")};
}

double pairwise_auc(const std::vector<double>& s, const std::vector<double>& y) {
  double num = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1.0 && y[j] == 0.0) {
        ++pairs;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return num / static_cast<double>(pairs);
}

Outcome c8_auc() {
  Rng rng(derive_seed(kSeed, 8));
  double worst = 0;
  for (int k = 0; k < 200; ++k) {
    const auto n = static_cast<std::size_t>(rng.range(2, 60));
    std::vector<double> s(n), y(n);
    // Coarse scores force ties.
    const int levels = static_cast<int>(rng.range(2, 12));
    for (auto& v : s) v = static_cast<double>(rng.range(0, levels - 1));
    for (auto& v : y) v = rng.bernoulli(0.5);
    y[0] = 1.0;
    y[1] = 0.0;
    const double a = auc_roc(s, y), b = pairwise_auc(s, y);
    worst = std::max(worst, std::fabs(a - b));
  }
  return {worst <= 1e-15, "200 cases, max difference " + fmt("%.3g", worst)};
}

Outcome c9_circuits() {
  Rng rng(derive_seed(kSeed, 9));
  std::size_t checked = 0;
  double worst_kcl = 0, worst_enum = 0;
  while (checked < 100) {
    Circuit c = random_circuit(static_cast<std::size_t>(rng.range(8, 11)), 0.35, rng);
    if (c.diodes().size() > 7) continue;
    const auto fast = solve_circuit(c);
    const auto slow = solve_circuit_enumerate(c);
    const double scale = circuit_current_scale(c);
    for (std::size_t e = 0; e < fast.current.size(); ++e)
      worst_enum = std::max(worst_enum, std::fabs(fast.current[e] - slow.current[e]) / scale);
    worst_kcl = std::max(worst_kcl, kcl_residual(c, fast));
    ++checked;
  }
  return {worst_kcl < kKclTol && worst_enum <= kEnumTol,
          "100 circuits, KCL residual " + fmt("%.3g", worst_kcl) + ", enumeration gap " + fmt("%.3g", worst_enum) +
              " (relative to the current scale)"};
}

struct DeskRun {
  double value;
  MetricsReport report;
};

DeskRun desk_run(const std::string& label, const TaskSetup& setup, const Dataset& ds) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = model_for_label(label, setup.model);
  auto rep = train_model(*cfg, setup.train, ds);
  const auto v = primary_metric(rep.test, ds.task);
  if (!v) throw Error(label + " on " + ds.name + ": test metric undefined");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "  %-14s %-10s %.4f  (%.0fs)\n", label.c_str(), ds.name.c_str(), *v, secs);
  return {*v, std::move(rep)};
}

struct Task {
  TaskSetup setup;
  Dataset ds;
};

Task desk_task(const std::string& name) {
  Task t{task_setup(name, Scale::Desk, kSeed), {}};
  t.ds = generate_dataset(name, t.setup.graphs, kSeed);
  return t;
}

Outcome c10_ld() {
  const auto t = desk_task("ld-cycles");
  const double eign = desk_run("EIGN", t.setup, t.ds).value;
  const double q0 = desk_run("w/o Direction", t.setup, t.ds).value;
  return {eign >= 0.95 && q0 <= 0.80 && eign - q0 >= 0.15,
          "AUC EIGN " + fmt("%.3f", eign) + " (>= 0.95), q=0 " + fmt("%.3f", q0) + " (<= 0.80), gap " +
              fmt("%.3f", eign - q0) + " (>= 0.15)"};
}

Outcome c11_rw() {
  const auto t = desk_task("rw-comp");
  const double eign = desk_run("EIGN", t.setup, t.ds).value;
  const double hodge = desk_run("HodgeGNN", t.setup, t.ds).value;
  return {eign >= 0.80 && hodge >= 0.45 && hodge <= 0.55,
          "AUC EIGN " + fmt("%.3f", eign) + " (>= 0.80), HodgeGNN " + fmt("%.3f", hodge) + " (in [0.45, 0.55])"};
}

Outcome c12_tri() {
  const auto t = desk_task("tri-flow");
  const double eign = desk_run("EIGN", t.setup, t.ds).value;
  const double q0 = desk_run("w/o Direction", t.setup, t.ds).value;
  const double hodge = desk_run("HodgeGNN", t.setup, t.ds).value;
  return {eign <= 0.10 && q0 >= 0.30 && hodge >= 0.40,
          "RMSE EIGN " + fmt("%.3f", eign) + " (<= 0.10), w/o Direction " + fmt("%.3f", q0) + " (>= 0.30), HodgeGNN " +
              fmt("%.3f", hodge) + " (>= 0.40)"};
}

Outcome c13_circuits() {
  const auto t = desk_task("circuits");
  const auto eign = desk_run("EIGN", t.setup, t.ds);
  const double hodge = desk_run("HodgeGNN", t.setup, t.ds).value;
  const double mlp = desk_run("MLP", t.setup, t.ds).value;
  const auto q0 = desk_run("w/o Direction", t.setup, t.ds);
  const double v_eign = diode_violation_rate(eign.report.model, eign.report.params, t.ds, Split::Test, kDiodeTol);
  const double v_q0 = diode_violation_rate(q0.report.model, q0.report.params, t.ds, Split::Test, kDiodeTol);
  const bool order = eign.value <= 0.9 * hodge && eign.value <= 0.9 * mlp;
  const bool diodes = v_eign < 0.10 && v_q0 > v_eign;
  return {order && diodes,
          "RMSE EIGN " + fmt("%.3f", eign.value) + ", HodgeGNN " + fmt("%.3f", hodge) + ", MLP " + fmt("%.3f", mlp) +
              (order ? " (ordering holds)" : " (ordering fails)") + "; diode violations EIGN " +
              fmt("%.1f%%", 100 * v_eign) + " (< 10%), q=0 " + fmt("%.1f%%", 100 * v_q0) + " (> EIGN)"};
}

Outcome c14_tntp() {
  std::stringstream net, flow;
  write_tntp_fixture(net, flow, TntpFixtureSpec{}, kSeed);
  const auto n = parse_tntp_net(net, "fixture_net");
  const auto base = tntp_dataset(n, parse_tntp_flow(flow, n.num_nodes, "fixture_flow"), "Anaheim-fixture", kSeed);
  const auto& g = base.samples.at(0).graph;
  const bool counts = g.num_nodes() == 416 && g.num_edges() == 634 && g.num_directed() == 354;
  auto setup = task_setup("Anaheim", Scale::Desk, kSeed);
  setup.train.epochs = 20;
  bool ran = true;
  std::string metrics;
  for (auto task : {FlowTask::Denoise, FlowTask::Interpolate, FlowTask::Simulate}) {
    const auto ds = make_task(base, task, kSeed);
    const auto rep = train_model(setup.model, setup.train, ds);
    const auto v = primary_metric(rep.test, ds.task);
    ran = ran && v && std::isfinite(*v);
    metrics += (metrics.empty() ? "" : ", ") + std::string(to_string(task)) + " " + (v ? fmt("%.3f", *v) : "n/a");
  }
  return {counts && ran, std::to_string(g.num_nodes()) + " nodes, " + std::to_string(g.num_edges()) + " edges, " +
                             std::to_string(g.num_directed()) + " directed; 20-epoch test RMSE " + metrics};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, c1_boundary},  {2, c2_laplacians}, {3, c3_entries}, {4, c4_orientation}, {5, c5_permutation},
      {6, c6_zero_lemma}, {7, c7_gradients},  {8, c8_auc},     {9, c9_circuits},    {10, c10_ld},
      {11, c11_rw},      {12, c12_tri},      {13, c13_circuits}, {14, c14_tntp}};
  int failed = 0;
  double property_seconds = 0;
  for (const auto& [id, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (id <= 9) property_seconds += secs;
    failed += !o.pass;
    std::printf("criterion %2d: %s  %s  [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("property suite time: %.1fs\n", property_seconds);
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
