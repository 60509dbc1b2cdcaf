// Command-line front end: dataset generation, training, evaluation, grid
// search, invariant checks, operator dumps and table reproduction.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eign/checkpoint.hpp"
#include "eign/datasets.hpp"
#include "eign/reproduce.hpp"
#include "eign/train.hpp"
#include "eign/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace eign;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct UsageError : Error {
  using Error::Error;
};

/// Re-throws a parse failure of a user-supplied name as a usage error.
template <class F>
auto parse_arg(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

/// Existing path as given, else relative to $EIGN_DATA_DIR.
fs::path resolve_data_path(const std::string& p) {
  if (fs::exists(p)) return p;
  if (const char* root = std::getenv("EIGN_DATA_DIR"); root && *root && fs::path(p).is_relative()) {
    const auto q = fs::path(root) / p;
    if (fs::exists(q)) return q;
  }
  throw Error("dataset directory '" + p + "' not found (also looked under $EIGN_DATA_DIR)");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

struct ModelFlags {
  std::string model = "eign";
  std::size_t hidden = 16;
  std::size_t layers = 2;
  double q = -1.0;
  double dropout = 0.1;
  std::vector<std::string> ablate;

  void add(CLI::App* c) {
    c->add_option("--model", model, "Architecture (eign, mlp, linegraph, hodgegnn, hodge+inv, hodge+dir, dir-gnn, "
                                    "eign-gcn, eign-cheb)")
        ->capture_default_str();
    c->add_option("--hidden", hidden, "Hidden width (even)")->capture_default_str();
    c->add_option("--layers", layers, "Number of layers")->capture_default_str();
    c->add_option("--q", q, "Phase shift; negative means 1/m")->capture_default_str();
    c->add_option("--dropout", dropout, "Dropout probability")->capture_default_str();
    c->add_option("--ablate", ablate, "no-direction, no-fusion, no-fusion-conv, no-node-mlp (repeatable)");
  }

  ModelConfig config() const {
    ModelConfig c;
    c.arch = parse_architecture(model);
    c.hidden = hidden;
    c.layers = layers;
    c.q = q;
    c.dropout = dropout;
    for (const auto& a : ablate) apply_ablation(c.ablate, a);
    c.validate();
    return c;
  }
};

ModelConfig model_from_json(const json& j) {
  ModelConfig c;
  c.arch = parse_architecture(j.at("arch").get<std::string>());
  c.layers = j.at("layers");
  c.hidden = j.at("hidden");
  c.q = j.at("q");
  c.dropout = j.at("dropout");
  const auto& a = j.at("ablate");
  c.ablate.no_direction = a.at("no_direction");
  c.ablate.no_fusion = a.at("no_fusion");
  c.ablate.no_fusion_conv = a.at("no_fusion_conv");
  c.ablate.no_node_mlp = a.at("no_node_mlp");
  c.in_equ = j.at("in_equ");
  c.in_inv = j.at("in_inv");
  c.node_mlp_width = j.at("node_mlp_width");
  c.cheb_order = j.at("cheb_order");
  return c;
}

/// Loads a dataset directory and applies a flow task to traffic data.
Dataset load_for_task(const std::string& dir, const std::string& task, std::uint64_t seed) {
  Dataset ds = load_dataset(resolve_data_path(dir));
  const bool traffic = ds.meta.count("flow_scale") > 0;
  if (task.empty()) {
    if (traffic) throw UsageError("traffic datasets need --task (denoise, interpolate, simulate)");
    return ds;
  }
  if (!traffic) {
    if (task == ds.name) return ds;
    throw UsageError("--task '" + task + "' does not apply to dataset '" + ds.name + "'");
  }
  return make_task(ds, parse_arg([&] { return parse_flow_task(task); }), seed);
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw UsageError("unknown split '" + s + "'");
}

void summary_line(const std::string& what, const EvalMetrics& m, TaskKind task) {
  if (task == TaskKind::BinaryClass)
    std::fprintf(stderr, "%s: edges %zu  loss %.4f  auc %s\n", what.c_str(), m.edges, m.loss,
                 m.auc ? std::to_string(*m.auc).c_str() : "undefined");
  else
    std::fprintf(stderr, "%s: edges %zu  rmse %.4f  mae %.4f  r2 %s\n", what.c_str(), m.edges, m.rmse.value_or(NAN),
                 m.mae.value_or(NAN), m.r2 ? std::to_string(*m.r2).c_str() : "undefined");
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string dataset;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t graphs = 0;
  std::string net, flow, name = "tntp";
};

int cmd_generate(const GenerateArgs& a) {
  const fs::path out(a.out);
  if (a.dataset == "anaheim-fixture") {
    std::stringstream net, flow;
    write_tntp_fixture(net, flow, TntpFixtureSpec{}, a.seed);
    const auto [np, fp] = tntp_paths(out, "Anaheim");
    write_text(np, net.str());
    write_text(fp, flow.str());
    const auto ds = load_tntp(np, fp, a.seed);
    const auto st = dataset_stats(ds);
    std::fprintf(stderr, "wrote %s and %s: %zu nodes, %zu edges, %zu directed\n", np.c_str(), fp.c_str(),
                 st.max_nodes, st.max_edges, st.max_directed);
    return 0;
  }
  Dataset ds;
  if (a.dataset == "tntp") {
    if (a.net.empty() || a.flow.empty()) throw UsageError("--dataset tntp needs --net and --flow");
    ds = load_tntp(a.net, a.flow, a.seed);
    ds.name = a.name;
  } else {
    const auto& names = synthetic_dataset_names();
    if (std::find(names.begin(), names.end(), a.dataset) == names.end())
      throw UsageError("unknown dataset '" + a.dataset + "'");
    ds = generate_dataset(a.dataset, a.graphs ? a.graphs : default_graph_count(a.dataset), a.seed);
  }
  save_dataset(out, ds);
  const auto st = dataset_stats(ds);
  std::fprintf(stderr, "%s: %zu graphs, nodes %zu-%zu, edges %zu-%zu, directed %zu-%zu -> %s\n", ds.name.c_str(),
               st.graphs, st.min_nodes, st.max_nodes, st.min_edges, st.max_edges, st.min_directed, st.max_directed,
               out.c_str());
  return 0;
}

struct TrainArgs {
  ModelFlags model;
  std::string dataset_dir, task, out, checkpoint;
  TrainConfig train;
  bool verbose = false;
};

int cmd_train(TrainArgs a) {
  a.train.verbose = a.verbose;
  const auto cfg = a.model.config();
  const Dataset ds = load_for_task(a.dataset_dir, a.task, a.train.seed);
  const auto rep = train_model(cfg, a.train, ds);
  json j = to_json(rep);
  if (!a.checkpoint.empty()) {
    const fs::path cp(a.checkpoint);
    if (cp.has_parent_path()) fs::create_directories(cp.parent_path());
    save_checkpoint(cp, rep.model, rep.params);
    j["checkpoint"] = cp.string();
  }
  j["task_flag"] = a.task;
  write_json(a.out, j);
  std::fprintf(stderr, "%s on %s: best epoch %zu of %zu, %.1fs\n", to_string(rep.model.arch), ds.name.c_str(),
               rep.best_epoch, a.train.epochs, rep.wall_seconds);
  summary_line("val", rep.val, ds.task);
  summary_line("test", rep.test, ds.task);
  return 0;
}

struct EvaluateArgs {
  std::string metrics, checkpoint, dataset_dir, task, split = "test", out;
  std::size_t bins = 20;
  std::uint64_t seed = 0;
};

int cmd_evaluate(const EvaluateArgs& a) {
  std::ifstream is(a.metrics);
  if (!is) throw Error("cannot read '" + a.metrics + "'");
  const json run = json::parse(is);
  const ModelConfig cfg = model_from_json(run.at("model"));
  const std::string ckpt = !a.checkpoint.empty() ? a.checkpoint : run.value("checkpoint", std::string());
  if (ckpt.empty()) throw UsageError("no checkpoint given and none recorded in the metrics file");
  const ParamStore ps = load_checkpoint(fs::path(ckpt), cfg);
  const std::string task = a.task.empty() ? run.value("task_flag", std::string()) : a.task;
  const std::uint64_t seed = a.seed ? a.seed : run.at("train").at("seed").get<std::uint64_t>();
  const Dataset ds = load_for_task(a.dataset_dir, task, seed);
  if (configure_for(cfg, ds).canonical() != cfg.canonical()) throw Error("dataset feature widths differ from the model");
  const Split split = parse_split(a.split);
  const auto ops = build_all_operators(cfg, ds);
  const auto m = evaluate(cfg, ps, ds, ops, split);

  // Predictions on directed edges in the reference orientation, binned.
  std::vector<double> directed;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (!s.has(split)) continue;
    const auto pr = predict(cfg, ps, ops[i], s.x_equ, s.x_inv);
    const auto mask = s.scored(split);
    for (std::size_t e = 0; e < mask.size(); ++e)
      if (mask[e] && s.graph.edge(e).directed()) directed.push_back(task_output(pr, ds.task)(e, 0));
  }
  json hist;
  if (!directed.empty() && a.bins > 0) {
    const auto [lo_it, hi_it] = std::minmax_element(directed.begin(), directed.end());
    const double lo = *lo_it, hi = *hi_it > *lo_it ? *hi_it : *lo_it + 1.0;
    std::vector<std::size_t> counts(a.bins, 0);
    std::size_t against = 0;
    for (double v : directed) {
      auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(a.bins));
      counts[std::min(b, a.bins - 1)]++;
      against += v < -1e-3;
    }
    std::vector<double> edges(a.bins + 1);
    for (std::size_t b = 0; b <= a.bins; ++b) edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(a.bins);
    hist = {{"bin_edges", edges},
            {"counts", counts},
            {"directed_edges", directed.size()},
            {"against_direction", against},
            {"against_direction_rate", static_cast<double>(against) / static_cast<double>(directed.size())}};
  }
  write_json(a.out, {{"split", a.split}, {"dataset", ds.name}, {"model", to_json(cfg)}, {"metrics", to_json(m)},
                     {"directed_histogram", hist}});
  summary_line(a.split, m, ds.task);
  return 0;
}

struct GridArgs {
  ModelFlags model;
  std::string dataset_dir, task, out;
  TrainConfig train;
  std::vector<double> lrs{0.03, 0.01, 0.003, 0.001};
  std::vector<std::size_t> hidden{8, 16, 32};
  std::vector<std::size_t> layers{2, 3, 4};
  std::size_t repeats = 1;
};

int cmd_grid(const GridArgs& a, std::size_t threads) {
  const auto cfg = a.model.config();
  const Dataset ds = load_for_task(a.dataset_dir, a.task, a.train.seed);
  GridSpec spec{a.lrs, a.hidden, a.layers, a.repeats};
  const auto g = run_grid(cfg, a.train, ds, spec, threads, [](const GridRow& r) {
    std::fprintf(stderr, "lr %-7g d %-3zu L %-2zu  val %.4f  test %.4f +- %.4f\n", r.lr, r.hidden, r.layers,
                 r.val_stat.mean, r.test_stat.mean, r.test_stat.ci95);
  });
  if (fs::path(a.out).extension() == ".csv") {
    std::ostringstream os;
    os.precision(10);
    os << "lr,hidden,layers,val_mean,val_ci95,test_mean,test_ci95,repeats\n";
    for (const auto& r : g.rows)
      os << r.lr << ',' << r.hidden << ',' << r.layers << ',' << r.val_stat.mean << ',' << r.val_stat.ci95 << ','
         << r.test_stat.mean << ',' << r.test_stat.ci95 << ',' << r.test.size() << '\n';
    write_text(a.out, os.str());
  } else {
    write_json(a.out, to_json(g));
  }
  const auto& b = g.rows[g.best];
  std::fprintf(stderr, "best (validation): lr %g d %zu L %zu  test %.4f +- %.4f\n", b.lr, b.hidden, b.layers,
               b.test_stat.mean, b.test_stat.ci95);
  return 0;
}

struct CheckArgs {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::string model = "eign";
  std::string out;
};

int cmd_check(const CheckArgs& a) {
  ModelConfig cfg;
  cfg.arch = parse_architecture(a.model);
  cfg.hidden = 8;
  std::vector<VerificationReport> reports;
  reports.push_back(check_boundary_identities(a.trials, a.seed));
  reports.push_back(check_laplacian_properties(a.trials, a.seed));
  reports.push_back(check_entry_oracle(a.trials, a.seed));
  reports.push_back(check_joint_equivariance(cfg, a.trials, 1e-10, a.seed));
  reports.push_back(check_joint_invariance(cfg, a.trials, 1e-10, a.seed));
  reports.push_back(check_permutation_equivariance(cfg, a.trials, 1e-12, a.seed));
  reports.push_back(check_zero_lemma(a.trials, a.seed));
  bool ok = true;
  json arr = json::array();
  for (const auto& r : reports) {
    ok = ok && r.pass;
    arr.push_back(to_json(r));
    std::fprintf(stderr, "%-26s %s  instances %zu  max deviation %.3g (tol %.0e)\n", r.name.c_str(),
                 r.pass ? "PASS" : "FAIL", r.instances, r.max_deviation, r.tolerance);
  }
  if (!a.out.empty()) write_json(a.out, {{"pass", ok}, {"seed", a.seed}, {"trials", a.trials}, {"checks", arr}});
  return ok ? 0 : kExitCheckFailed;
}

struct DumpArgs {
  std::string graph, dataset_dir, kind = "equ", out;
  std::size_t index = 0;
  double q = -1.0;
  bool normalized = false;
};

int cmd_dump(const DumpArgs& a) {
  Graph g;
  Orientation o;
  if (!a.graph.empty() == !a.dataset_dir.empty()) throw UsageError("give exactly one of --graph or --dataset-dir");
  if (!a.graph.empty()) {
    std::ifstream is(a.graph);
    if (!is) throw Error("cannot read '" + a.graph + "'");
    std::size_t line = 0;
    g = read_graph(is, line);
    o = canonical_orientation(g);
  } else {
    const Dataset ds = load_dataset(resolve_data_path(a.dataset_dir));
    if (a.index >= ds.samples.size()) throw UsageError("--index out of range");
    g = ds.samples[a.index].graph;
    o = ds.samples[a.index].orientation;
  }
  const double q = a.q >= 0.0 ? a.q : (g.num_edges() ? 1.0 / static_cast<double>(g.num_edges()) : 0.0);
  const auto kind = parse_arg([&] { return parse_laplacian_kind(a.kind); });
  const auto l = a.normalized ? normalized_laplacian(g, o, kind, q) : laplacian(g, o, kind, q);
  std::ostringstream os;
  write_coordinate(os, l);
  write_text(a.out, os.str());
  std::fprintf(stderr, "%s Laplacian (q = %g%s): %zu x %zu, %zu nonzeros -> %s\n", a.kind.c_str(), q,
               a.normalized ? ", normalized" : "", l.rows(), l.cols(), l.nnz(), a.out.c_str());
  return 0;
}

struct ReproduceArgs {
  std::string table, scale = "desk", out, data_dir;
  std::uint64_t seed = 0;
  bool anaheim_fixture = false;
};

int cmd_reproduce(const ReproduceArgs& a, std::size_t threads) {
  ReproduceOptions opt;
  opt.table = a.table;
  opt.scale = parse_scale(a.scale);
  opt.seed = a.seed;
  opt.threads = threads;
  opt.anaheim_fixture = a.anaheim_fixture;
  if (!a.data_dir.empty()) {
    opt.data_dir = a.data_dir;
  } else if (const char* root = std::getenv("EIGN_DATA_DIR"); root && *root) {
    opt.data_dir = fs::path(root);
  }
  opt.log = [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); };
  const auto t = reproduce(opt);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_json(out / ("reproduce_" + a.table + ".json"), to_json(t));
  write_text(out / ("reproduce_" + a.table + ".csv"), to_csv(t));
  std::fprintf(stderr, "%s", format_table(t).c_str());
  bool ok = true;
  for (const auto& c : t.cells)
    if (auto p = c.passes(); p && !*p) ok = false;
  return ok ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-level graph learning with magnetic edge Laplacians"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Maximum worker threads (1 is bitwise deterministic)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "Generate a dataset directory or the Anaheim-shaped TNTP fixture");
  g->add_option("--dataset", gen.dataset, "rw-comp, ld-cycles, tri-flow, circuits, tntp, anaheim-fixture")->required();
  g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--graphs", gen.graphs, "Number of graphs (default: published count)");
  g->add_option("--net", gen.net, "TNTP network file (tntp)");
  g->add_option("--flow", gen.flow, "TNTP flow file (tntp)");
  g->add_option("--name", gen.name, "Dataset name (tntp)")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one model and write metrics JSON");
  tr.model.add(t);
  t->add_option("--dataset-dir", tr.dataset_dir, "Dataset directory")->required();
  t->add_option("--task", tr.task, "Flow task for traffic data (denoise, interpolate, simulate)");
  t->add_option("--lr", tr.train.lr, "Learning rate")->capture_default_str();
  t->add_option("--epochs", tr.train.epochs, "Epochs")->capture_default_str();
  t->add_option("--batch-size", tr.train.batch_size, "Graphs per step")->capture_default_str();
  t->add_option("--clip", tr.train.clip, "Gradient norm clip")->capture_default_str();
  t->add_option("--seed", tr.train.seed, "Random seed")->capture_default_str();
  t->add_option("--out", tr.out, "Metrics JSON path")->required();
  t->add_option("--checkpoint", tr.checkpoint, "Also write the best parameters here");
  t->add_flag("--verbose", tr.verbose, "Per-epoch progress");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Evaluate a trained checkpoint");
  e->add_option("--metrics", ev.metrics, "Metrics JSON written by train")->required();
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint (default: the one recorded in the metrics)");
  e->add_option("--dataset-dir", ev.dataset_dir, "Dataset directory")->required();
  e->add_option("--task", ev.task, "Flow task for traffic data");
  e->add_option("--split", ev.split, "train, val or test")->capture_default_str();
  e->add_option("--bins", ev.bins, "Histogram bins for directed-edge predictions")->capture_default_str();
  e->add_option("--seed", ev.seed, "Task seed (default: the training seed)");
  e->add_option("--out", ev.out, "Evaluation JSON path")->required();

  GridArgs gr;
  auto* gd = app.add_subcommand("grid", "Grid search over learning rate, width and depth");
  gr.model.add(gd);
  gd->add_option("--dataset-dir", gr.dataset_dir, "Dataset directory")->required();
  gd->add_option("--task", gr.task, "Flow task for traffic data");
  gd->add_option("--lrs", gr.lrs, "Learning rates")->capture_default_str();
  gd->add_option("--hidden-list", gr.hidden, "Hidden widths")->capture_default_str();
  gd->add_option("--layers-list", gr.layers, "Layer counts")->capture_default_str();
  gd->add_option("--repeats", gr.repeats, "Runs per cell")->capture_default_str();
  gd->add_option("--epochs", gr.train.epochs, "Epochs")->capture_default_str();
  gd->add_option("--batch-size", gr.train.batch_size, "Graphs per step")->capture_default_str();
  gd->add_option("--seed", gr.train.seed, "Random seed")->capture_default_str();
  gd->add_option("--out", gr.out, "Output path (.json or .csv)")->required();

  CheckArgs ck;
  auto* c = app.add_subcommand("check-invariants", "Run the randomized invariant suite");
  c->add_option("--trials", ck.trials, "Instances per check")->capture_default_str();
  c->add_option("--seed", ck.seed, "Random seed")->capture_default_str();
  c->add_option("--model", ck.model, "Architecture for the model checks")->capture_default_str();
  c->add_option("--out", ck.out, "JSON report path");

  DumpArgs dp;
  auto* d = app.add_subcommand("dump-laplacian", "Write a Laplacian in coordinate format");
  d->add_option("--graph", dp.graph, "Graph file");
  d->add_option("--dataset-dir", dp.dataset_dir, "Dataset directory");
  d->add_option("--index", dp.index, "Graph index within the dataset")->capture_default_str();
  d->add_option("--kind", dp.kind, "equ, inv, equ-inv or inv-equ")->capture_default_str();
  d->add_option("--q", dp.q, "Phase shift; negative means 1/m")->capture_default_str();
  d->add_flag("--normalized", dp.normalized, "Degree-normalized operator");
  d->add_option("--out", dp.out, "Output file")->required();

  ReproduceArgs rp;
  auto* r = app.add_subcommand("reproduce", "Rerun a result table and compare with published values");
  r->add_option("--table", rp.table, "synthetic or ablation")->required()->check(CLI::IsMember({"synthetic", "ablation"}));
  r->add_option("--scale", rp.scale, "desk or full")->capture_default_str()->check(CLI::IsMember({"desk", "full"}));
  r->add_option("--seed", rp.seed, "Random seed")->capture_default_str();
  r->add_option("--data-dir", rp.data_dir, "Root with TNTP networks (default: $EIGN_DATA_DIR)");
  r->add_flag("--anaheim-fixture", rp.anaheim_fixture, "Use the synthetic Anaheim-shaped network");
  r->add_option("--out", rp.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_evaluate(ev);
    if (gd->parsed()) return cmd_grid(gr, threads);
    if (c->parsed()) return cmd_check(ck);
    if (d->parsed()) return cmd_dump(dp);
    if (r->parsed()) return cmd_reproduce(rp, threads);
  } catch (const UsageError& ex) {
    std::fprintf(stderr, "usage error: %s\n", ex.what());
    return kExitUsage;
  } catch (const ModelError& ex) {
    std::fprintf(stderr, "usage error: %s\n", ex.what());
    return kExitUsage;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
