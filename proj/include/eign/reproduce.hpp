#pragma once

// Experiment presets and the two result tables (model comparison on the
// synthetic tasks, component ablation) with published reference values.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eign/datasets.hpp"
#include "eign/train.hpp"

namespace eign {

enum class Scale : std::uint8_t { Desk, Full };

inline const char* to_string(Scale s) { return s == Scale::Desk ? "desk" : "full"; }

inline Scale parse_scale(const std::string& s) {
  if (s == "desk") return Scale::Desk;
  if (s == "full") return Scale::Full;
  throw Error("unknown scale '" + s + "' (expected desk or full)");
}

/// Dataset size, model shape and optimizer settings of one task.
struct TaskSetup {
  std::string task;
  std::size_t graphs = 0;
  ModelConfig model;
  TrainConfig train;
  std::size_t repeats = 1;
  /// Full scale searches this grid and reports the best validation row.
  std::optional<GridSpec> grid;
};

inline const std::vector<std::string>& traffic_networks() {
  static const std::vector<std::string> names{"Anaheim", "Barcelona", "Chicago", "Winnipeg"};
  return names;
}

inline bool is_traffic(const std::string& task) {
  for (const auto& n : traffic_networks())
    if (n == task) return true;
  return false;
}

inline TaskSetup task_setup(const std::string& task, Scale scale, std::uint64_t seed) {
  TaskSetup s;
  s.task = task;
  s.train.seed = seed;
  if (task == "rw-comp") {
    s.model.layers = 2;
    s.model.hidden = 16;
    s.train = {0.01, 10, 50, 1.0, seed, {}, false};
  } else if (task == "ld-cycles") {
    s.model.layers = 8;
    s.model.hidden = 16;
    s.train = {0.01, 10, 50, 1.0, seed, {}, false};
  } else if (task == "tri-flow") {
    s.model.layers = 4;
    s.model.hidden = 32;
    s.train = {0.003, 1, 50, 1.0, seed, {}, false};
  } else if (task == "circuits") {
    s.model.layers = 4;
    s.model.hidden = 32;
    s.train = {0.001, 10, 200, 1.0, seed, {}, false};
  } else if (is_traffic(task)) {
    s.model.layers = 3;
    s.model.hidden = 32;
    s.train = {0.003, 1, 500, 1.0, seed, {}, false};
  } else {
    throw Error("unknown task '" + task + "'");
  }
  if (!is_traffic(task)) s.graphs = scale == Scale::Full ? default_graph_count(task) : task == "circuits" ? 591 : task == "tri-flow" ? 100 : 200;
  if (scale == Scale::Full) {
    s.repeats = 5;
    s.grid = GridSpec{};
    s.grid->repeats = s.repeats;
  }
  return s;
}

/// Published test values: AUC for RW Comp / LD Cycles, RMSE otherwise.
struct ReferenceValue {
  std::string row;
  std::string col;
  double value;
};

inline const std::vector<std::string>& synthetic_models() {
  static const std::vector<std::string> m{"MLP",     "LineGraph",   "HodgeGNN", "Hodge+Inv",
                                          "Hodge+Dir", "Line-MagNet", "Dir-GNN",  "EIGN"};
  return m;
}

inline const std::vector<std::string>& synthetic_tasks() {
  static const std::vector<std::string> t{"rw-comp", "ld-cycles", "tri-flow"};
  return t;
}

inline const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v{"w/o Direction", "No Fusion", "No Fusion-Conv", "No h", "EIGN"};
  return v;
}

inline const std::vector<std::string>& ablation_rows() {
  static const std::vector<std::string> r{"rw-comp",  "ld-cycles", "tri-flow", "Anaheim",
                                          "Barcelona", "Chicago",   "Winnipeg", "circuits"};
  return r;
}

inline std::optional<double> reference_value(const std::string& table, const std::string& row, const std::string& col) {
  static const std::vector<ReferenceValue> synthetic{
      {"MLP", "rw-comp", .720},       {"MLP", "ld-cycles", .500},       {"MLP", "tri-flow", .547},
      {"LineGraph", "rw-comp", .758}, {"LineGraph", "ld-cycles", .683}, {"LineGraph", "tri-flow", .497},
      {"HodgeGNN", "rw-comp", .500},  {"HodgeGNN", "ld-cycles", .500},  {"HodgeGNN", "tri-flow", .458},
      {"Hodge+Inv", "rw-comp", .811}, {"Hodge+Inv", "ld-cycles", .754}, {"Hodge+Inv", "tri-flow", .293},
      {"Hodge+Dir", "rw-comp", .819}, {"Hodge+Dir", "ld-cycles", .799}, {"Hodge+Dir", "tri-flow", .293},
      {"Line-MagNet", "rw-comp", .729}, {"Line-MagNet", "ld-cycles", .502}, {"Line-MagNet", "tri-flow", .542},
      {"Dir-GNN", "rw-comp", .757},   {"Dir-GNN", "ld-cycles", .768},   {"Dir-GNN", "tri-flow", .453},
      {"EIGN", "rw-comp", .864},      {"EIGN", "ld-cycles", .996},      {"EIGN", "tri-flow", .022}};
  static const std::vector<ReferenceValue> ablation{
      {"rw-comp", "w/o Direction", .762},   {"rw-comp", "No Fusion", .853},   {"rw-comp", "No Fusion-Conv", .845},
      {"rw-comp", "No h", .862},            {"rw-comp", "EIGN", .864},        {"ld-cycles", "w/o Direction", .689},
      {"ld-cycles", "No Fusion", .987},     {"ld-cycles", "No Fusion-Conv", .926}, {"ld-cycles", "No h", .996},
      {"ld-cycles", "EIGN", .996},          {"tri-flow", "w/o Direction", .362}, {"tri-flow", "No Fusion", .088},
      {"tri-flow", "No Fusion-Conv", .074}, {"tri-flow", "No h", .034},       {"tri-flow", "EIGN", .022},
      {"Anaheim", "w/o Direction", .289},   {"Anaheim", "No Fusion", .097},   {"Anaheim", "No Fusion-Conv", .283},
      {"Anaheim", "No h", .099},            {"Anaheim", "EIGN", .090},        {"Barcelona", "w/o Direction", .172},
      {"Barcelona", "No Fusion", .139},     {"Barcelona", "No Fusion-Conv", .177}, {"Barcelona", "No h", .163},
      {"Barcelona", "EIGN", .133},          {"Chicago", "w/o Direction", .079}, {"Chicago", "No Fusion", .093},
      {"Chicago", "No Fusion-Conv", .110},  {"Chicago", "No h", .082},        {"Chicago", "EIGN", .078},
      {"Winnipeg", "w/o Direction", .132},  {"Winnipeg", "No Fusion", .170},  {"Winnipeg", "No Fusion-Conv", .175},
      {"Winnipeg", "No h", .138},           {"Winnipeg", "EIGN", .101},       {"circuits", "w/o Direction", .957},
      {"circuits", "No Fusion", .974},      {"circuits", "No Fusion-Conv", .727}, {"circuits", "No h", .707},
      {"circuits", "EIGN", .696}};
  const auto& list = table == "synthetic" ? synthetic : ablation;
  for (const auto& r : list)
    if (r.row == row && r.col == col) return r.value;
  return std::nullopt;
}

/// Acceptance threshold attached to a cell, if any, as (description, check).
struct CellThreshold {
  std::string description;
  std::function<bool(double)> holds;
};

inline std::optional<CellThreshold> cell_threshold(const std::string& table, const std::string& row,
                                                   const std::string& col) {
  const std::string model = table == "synthetic" ? row : col;
  const std::string task = table == "synthetic" ? col : row;
  if (model == "EIGN" && task == "ld-cycles") return CellThreshold{">= 0.95", [](double v) { return v >= 0.95; }};
  if (model == "EIGN" && task == "rw-comp") return CellThreshold{">= 0.80", [](double v) { return v >= 0.80; }};
  if (model == "EIGN" && task == "tri-flow") return CellThreshold{"<= 0.10", [](double v) { return v <= 0.10; }};
  if (model == "HodgeGNN" && task == "rw-comp")
    return CellThreshold{"in [0.45, 0.55]", [](double v) { return v >= 0.45 && v <= 0.55; }};
  if (model == "HodgeGNN" && task == "tri-flow") return CellThreshold{">= 0.40", [](double v) { return v >= 0.40; }};
  if (model == "w/o Direction" && task == "ld-cycles") return CellThreshold{"<= 0.80", [](double v) { return v <= 0.80; }};
  if (model == "w/o Direction" && task == "tri-flow") return CellThreshold{">= 0.30", [](double v) { return v >= 0.30; }};
  return std::nullopt;
}

/// Model configuration behind a table row or column label.
inline std::optional<ModelConfig> model_for_label(const std::string& label, ModelConfig base) {
  if (label == "Line-MagNet") return std::nullopt;
  if (label == "w/o Direction") base.ablate.no_direction = true;
  else if (label == "No Fusion") base.ablate.no_fusion = true;
  else if (label == "No Fusion-Conv") base.ablate.no_fusion_conv = true;
  else if (label == "No h") base.ablate.no_node_mlp = true;
  else if (label != "EIGN") base.arch = parse_architecture(label);
  return base;
}

/// Traffic network files: <dir>/<Name>/<Stem>_net.tntp and <Stem>_flow.tntp.
inline std::pair<std::filesystem::path, std::filesystem::path> tntp_paths(const std::filesystem::path& root,
                                                                          const std::string& network) {
  const std::string stem = network == "Chicago" ? "ChicagoSketch" : network;
  const auto dir = root / network;
  return {dir / (stem + "_net.tntp"), dir / (stem + "_flow.tntp")};
}

struct ExperimentResult {
  std::optional<double> value;
  double ci95 = 0.0;
  std::size_t repeats = 0;
  std::string status;
  nlohmann::json detail;
};

/// Trains `cfg` on a prepared dataset following the setup: fixed settings
/// averaged over repeats at desk scale, grid search at full scale.
inline ExperimentResult run_experiment(const ModelConfig& cfg, const TaskSetup& setup, const Dataset& ds,
                                       std::size_t threads = 1) {
  ExperimentResult r;
  if (setup.grid) {
    const auto g = run_grid(cfg, setup.train, ds, *setup.grid, threads);
    const auto& best = g.rows[g.best];
    r.value = best.test_stat.mean;
    r.ci95 = best.test_stat.ci95;
    r.repeats = best.test.size();
    r.detail = to_json(g);
  } else {
    std::vector<double> vals;
    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t k = 0; k < setup.repeats; ++k) {
      TrainConfig t = setup.train;
      t.seed = derive_seed(setup.train.seed, k);
      const auto rep = train_model(cfg, t, ds);
      const auto v = primary_metric(rep.test, ds.task);
      if (v) vals.push_back(*v);
      auto j = to_json(rep);
      j.erase("history");
      runs.push_back(j);
    }
    if (!vals.empty()) {
      const auto s = mean_ci95(vals);
      r.value = s.mean;
      r.ci95 = s.ci95;
    }
    r.repeats = vals.size();
    r.detail = {{"runs", runs}};
  }
  r.status = r.value ? "ok" : "undefined";
  return r;
}

struct ReproduceOptions {
  std::string table;
  Scale scale = Scale::Desk;
  std::uint64_t seed = 0;
  /// Root holding traffic networks; traffic rows are skipped without it.
  std::optional<std::filesystem::path> data_dir;
  /// Use the synthetic Anaheim-shaped fixture for the Anaheim row.
  bool anaheim_fixture = false;
  std::size_t threads = 1;
  std::function<void(const std::string&)> log;
};

struct ReproduceCell {
  std::string row;
  std::string col;
  ExperimentResult result;
  std::optional<double> reference;
  std::optional<CellThreshold> threshold;

  std::optional<bool> passes() const {
    if (!threshold || !result.value) return std::nullopt;
    return threshold->holds(*result.value);
  }
};

struct ReproduceTable {
  std::string table;
  Scale scale = Scale::Desk;
  std::uint64_t seed = 0;
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<ReproduceCell> cells;
  std::vector<std::string> notes;
};

inline Dataset traffic_dataset(const std::string& network, const ReproduceOptions& opt) {
  Dataset base;
  if (network == "Anaheim" && opt.anaheim_fixture) {
    std::stringstream net, flow;
    write_tntp_fixture(net, flow, TntpFixtureSpec{}, opt.seed);
    base = tntp_dataset(parse_tntp_net(net, "fixture_net"), parse_tntp_flow(flow, TntpFixtureSpec{}.nodes, "fixture_flow"),
                        "Anaheim-fixture", opt.seed);
  } else {
    const auto [net, flow] = tntp_paths(*opt.data_dir, network);
    base = load_tntp(net, flow, opt.seed);
  }
  return make_task(base, FlowTask::Simulate, opt.seed);
}

inline bool traffic_available(const std::string& network, const ReproduceOptions& opt) {
  if (network == "Anaheim" && opt.anaheim_fixture) return true;
  if (!opt.data_dir) return false;
  const auto [net, flow] = tntp_paths(*opt.data_dir, network);
  return std::filesystem::exists(net) && std::filesystem::exists(flow);
}

inline ReproduceTable reproduce(const ReproduceOptions& opt) {
  if (opt.table != "synthetic" && opt.table != "ablation")
    throw Error("unknown table '" + opt.table + "' (expected synthetic or ablation)");
  if (opt.data_dir && !std::filesystem::is_directory(*opt.data_dir))
    throw Error("dataset directory '" + opt.data_dir->string() + "' does not exist");
  auto log = [&](const std::string& s) {
    if (opt.log) opt.log(s);
  };
  ReproduceTable out;
  out.table = opt.table;
  out.scale = opt.scale;
  out.seed = opt.seed;
  const bool synth = opt.table == "synthetic";
  out.rows = synth ? synthetic_models() : ablation_rows();
  out.cols = synth ? synthetic_tasks() : ablation_variants();
  if (opt.scale == Scale::Desk)
    out.notes.push_back("desk scale: 200 graphs for RW Comp and LD Cycles, 100 for Tri-Flow, 591 circuits, one run per "
                        "cell with fixed hyperparameters instead of the grid search");
  else
    out.notes.push_back("full scale: published graph counts, grid over lr x hidden x layers, 5 repeats, best validation row");

  const std::vector<std::string>& tasks = synth ? out.cols : out.rows;
  for (const auto& task : tasks) {
    const auto setup = task_setup(task, opt.scale, opt.seed);
    std::optional<Dataset> ds;
    std::string missing;
    if (is_traffic(task)) {
      if (traffic_available(task, opt)) ds = traffic_dataset(task, opt);
      else missing = "no TNTP files";
    } else {
      log("generating " + task);
      ds = generate_dataset(task, setup.graphs, opt.seed);
    }
    const std::vector<std::string>& models = synth ? out.rows : out.cols;
    for (const auto& label : models) {
      ReproduceCell cell;
      cell.row = synth ? label : task;
      cell.col = synth ? task : label;
      cell.reference = reference_value(opt.table, cell.row, cell.col);
      cell.threshold = cell_threshold(opt.table, cell.row, cell.col);
      const auto cfg = model_for_label(label, setup.model);
      if (!cfg) {
        cell.result.status = "not implemented";
      } else if (!ds) {
        cell.result.status = missing;
      } else {
        log("training " + label + " on " + task);
        cell.result = run_experiment(*cfg, setup, *ds, opt.threads);
      }
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

inline nlohmann::json to_json(const ReproduceTable& t) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : t.cells) {
    nlohmann::json j{{"row", c.row},
                     {"col", c.col},
                     {"value", to_json(c.result.value)},
                     {"ci95", c.result.ci95},
                     {"repeats", c.result.repeats},
                     {"status", c.result.status},
                     {"published", to_json(c.reference)}};
    if (c.threshold) {
      j["threshold"] = c.threshold->description;
      const auto p = c.passes();
      j["pass"] = p ? nlohmann::json(*p) : nlohmann::json();
    }
    j["detail"] = c.result.detail;
    cells.push_back(j);
  }
  return {{"table", t.table}, {"scale", to_string(t.scale)}, {"seed", t.seed}, {"rows", t.rows},
          {"cols", t.cols},   {"notes", t.notes},            {"cells", cells}};
}

/// One line per cell: row,col,value,ci95,published,threshold,pass,status.
inline std::string to_csv(const ReproduceTable& t) {
  std::ostringstream os;
  os.precision(6);
  os << "row,col,value,ci95,published,threshold,pass,status\n";
  for (const auto& c : t.cells) {
    os << '"' << c.row << "\",\"" << c.col << "\",";
    if (c.result.value) os << *c.result.value;
    os << ',' << c.result.ci95 << ',';
    if (c.reference) os << *c.reference;
    os << ',' << (c.threshold ? c.threshold->description : "") << ',';
    if (auto p = c.passes()) os << (*p ? "PASS" : "FAIL");
    os << ',' << c.result.status << '\n';
  }
  return os.str();
}

/// Fixed-width table: measured value with the published one in brackets.
inline std::string format_table(const ReproduceTable& t) {
  std::ostringstream os;
  auto cell_at = [&](const std::string& r, const std::string& c) -> const ReproduceCell* {
    for (const auto& x : t.cells)
      if (x.row == r && x.col == c) return &x;
    return nullptr;
  };
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-14s", "");
  os << buf;
  for (const auto& c : t.cols) {
    std::snprintf(buf, sizeof buf, " %-24s", c.c_str());
    os << buf;
  }
  os << '\n';
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%-14s", r.c_str());
    os << buf;
    for (const auto& c : t.cols) {
      const auto* x = cell_at(r, c);
      std::string s;
      if (x && x->result.value) {
        std::snprintf(buf, sizeof buf, "%.3f", *x->result.value);
        s = buf;
        if (x->result.ci95 > 0) {
          std::snprintf(buf, sizeof buf, "+-%.3f", x->result.ci95);
          s += buf;
        }
      } else {
        s = x ? x->result.status : "";
      }
      if (x && x->reference) {
        std::snprintf(buf, sizeof buf, " [%.3f]", *x->reference);
        s += buf;
      }
      if (x) {
        if (auto p = x->passes()) s += *p ? " ok" : " FAIL";
      }
      std::snprintf(buf, sizeof buf, " %-24s", s.c_str());
      os << buf;
    }
    os << '\n';
  }
  for (const auto& n : t.notes) os << "note: " << n << '\n';
  return os.str();
}

}  // namespace eign
