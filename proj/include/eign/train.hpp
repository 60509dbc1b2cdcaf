#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "eign/checkpoint.hpp"
#include "eign/datasets.hpp"
#include "eign/metrics.hpp"
#include "eign/nn.hpp"
#include "eign/optim.hpp"

namespace eign {

struct TrainConfig {
  double lr = 0.01;
  /// Graphs per optimizer step.
  std::size_t batch_size = 10;
  std::size_t epochs = 50;
  double clip = 1.0;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /// Per-epoch progress on stderr.
  bool verbose = false;

  void validate() const {
    if (!(lr > 0.0)) throw TrainError("learning rate must be positive");
    if (batch_size < 1) throw TrainError("batch size must be >= 1");
    if (!(clip > 0.0)) throw TrainError("clip norm must be positive");
  }
};

struct EvalMetrics {
  std::size_t edges = 0;
  double loss = 0.0;
  std::optional<double> auc;
  std::optional<double> rmse;
  std::optional<double> mae;
  std::optional<double> r2;
};

/// AUC for classification, RMSE for regression.
inline bool higher_is_better(TaskKind t) { return t == TaskKind::BinaryClass; }

inline std::optional<double> primary_metric(const EvalMetrics& m, TaskKind t) {
  return t == TaskKind::BinaryClass ? m.auc : m.rmse;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double grad_norm = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_metric;
};

struct MetricsReport {
  std::string dataset;
  TaskKind task = TaskKind::Regression;
  ModelConfig model;
  TrainConfig train;
  /// Entry 0 holds the initial parameters.
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  EvalMetrics train_metrics;
  EvalMetrics val;
  EvalMetrics test;
  double wall_seconds = 0.0;
  /// Parameters of the best validation epoch.
  ParamStore params;
};

/// Sets the model input widths from the dataset.
inline ModelConfig configure_for(ModelConfig cfg, const Dataset& ds) {
  cfg.in_equ = ds.d_equ();
  cfg.in_inv = ds.d_inv();
  return cfg;
}

inline std::vector<GraphOperators> build_all_operators(const ModelConfig& cfg, const Dataset& ds) {
  std::vector<GraphOperators> ops;
  ops.reserve(ds.samples.size());
  for (const auto& s : ds.samples) ops.push_back(build_operators(cfg, s.graph, s.orientation));
  return ops;
}

/// The output head that a task reads.
inline const Matrix& task_output(const Prediction& p, TaskKind t) {
  return t == TaskKind::BinaryClass ? p.y_inv : p.y_equ;
}

/// Pooled scores and targets over the scored edges of one split.
struct SplitPredictions {
  std::vector<double> pred;
  std::vector<double> target;
};

inline SplitPredictions collect_predictions(const ModelConfig& cfg, const ParamStore& ps, const Dataset& ds,
                                            const std::vector<GraphOperators>& ops, Split split) {
  SplitPredictions out;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (!s.has(split)) continue;
    const auto pr = predict(cfg, ps, ops[i], s.x_equ, s.x_inv);
    const Matrix& y = task_output(pr, ds.task);
    const auto mask = s.scored(split);
    for (std::size_t e = 0; e < mask.size(); ++e) {
      if (!mask[e]) continue;
      out.pred.push_back(y(e, 0));
      out.target.push_back(s.y(e, 0));
    }
  }
  return out;
}

inline EvalMetrics metrics_from(const SplitPredictions& sp, TaskKind task) {
  EvalMetrics m;
  m.edges = sp.pred.size();
  if (sp.pred.empty()) return m;
  double loss = 0.0;
  for (std::size_t k = 0; k < sp.pred.size(); ++k) {
    const double x = sp.pred[k], y = sp.target[k];
    loss += task == TaskKind::BinaryClass ? std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::fabs(x)))
                                          : (x - y) * (x - y);
  }
  m.loss = loss / static_cast<double>(sp.pred.size());
  if (task == TaskKind::BinaryClass) {
    bool pos = false, neg = false;
    for (double y : sp.target) (y == 1.0 ? pos : neg) = true;
    if (pos && neg) m.auc = auc_roc(sp.pred, sp.target);
  } else {
    m.rmse = rmse(sp.pred, sp.target);
    m.mae = mae(sp.pred, sp.target);
    m.r2 = r2(sp.pred, sp.target);
  }
  return m;
}

inline EvalMetrics evaluate(const ModelConfig& cfg, const ParamStore& ps, const Dataset& ds,
                            const std::vector<GraphOperators>& ops, Split split) {
  return metrics_from(collect_predictions(cfg, ps, ds, ops, split), ds.task);
}

inline EvalMetrics evaluate(const ModelConfig& cfg, const ParamStore& ps, const Dataset& ds, Split split) {
  return evaluate(cfg, ps, ds, build_all_operators(cfg, ds), split);
}

namespace detail {

inline double selection_score(const EvalMetrics& m, TaskKind task) {
  auto p = primary_metric(m, task);
  if (!p) return -m.loss;
  return higher_is_better(task) ? *p : -*p;
}

/// One optimizer pass over the training graphs. Returns (mean loss, mean
/// pre-clip gradient norm).
inline std::pair<double, double> train_epoch(const ModelConfig& cfg, ParamStore& ps, Adam& opt, const Dataset& ds,
                                             const std::vector<GraphOperators>& ops,
                                             const std::vector<std::size_t>& train_idx, const TrainConfig& tc,
                                             Rng& rng) {
  std::vector<std::size_t> order = train_idx;
  rng.shuffle(std::span<std::size_t>(order));
  double loss_sum = 0.0, norm_sum = 0.0;
  std::size_t steps = 0;
  for (std::size_t b = 0; b < order.size(); b += tc.batch_size) {
    const std::size_t end = std::min(order.size(), b + tc.batch_size);
    const double w = 1.0 / static_cast<double>(end - b);
    ps.zero_grad();
    for (std::size_t k = b; k < end; ++k) {
      const auto& s = ds.samples[order[k]];
      Tape tape;
      ParamBinding P(tape, ps, &ps);
      auto out = model_forward(tape, cfg, P, ops[order[k]], s.x_equ, s.x_inv, true, rng);
      const auto mask = s.scored(Split::Train);
      NodeId loss = ds.task == TaskKind::BinaryClass ? tape.bce_with_logits(out.y_inv, s.y, mask)
                                                     : tape.mse(out.y_equ, s.y, mask);
      const double lv = tape.value(loss)(0, 0);
      if (!std::isfinite(lv)) throw TrainError("training loss became non-finite");
      loss_sum += lv;
      tape.backward(loss, w);
    }
    norm_sum += clip_grad_norm(ps, tc.clip);
    opt.step(ps, tc.lr);
    ++steps;
  }
  return {order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size()),
          steps ? norm_sum / static_cast<double>(steps) : 0.0};
}

}  // namespace detail

/// Trains with Adam and keeps the parameters of the best validation epoch
/// (epoch 0 being the initialization). Test metrics use those parameters.
inline MetricsReport train_model(ModelConfig cfg, const TrainConfig& tc, const Dataset& ds) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg = configure_for(cfg, ds);
  cfg.validate();
  tc.validate();
  ds.validate();
  std::vector<std::size_t> train_idx;
  bool any_val = false;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].has(Split::Train)) train_idx.push_back(i);
    any_val = any_val || ds.samples[i].has(Split::Val);
  }
  if (train_idx.empty() && tc.epochs > 0) throw TrainError("dataset has no training edges");

  MetricsReport rep;
  rep.dataset = ds.name;
  rep.task = ds.task;
  rep.model = cfg;
  rep.train = tc;
  const auto ops = build_all_operators(cfg, ds);
  ParamStore ps = init_params(cfg, derive_seed(tc.seed, 1));
  Adam opt(ps, tc.adam);
  Rng rng(derive_seed(tc.seed, 2));

  auto record = [&](std::size_t epoch, double loss, double norm) {
    EpochRecord r{epoch, loss, norm, 0.0, std::nullopt};
    if (any_val) {
      const auto v = evaluate(cfg, ps, ds, ops, Split::Val);
      r.val_loss = v.loss;
      r.val_metric = primary_metric(v, ds.task);
      return std::pair{r, detail::selection_score(v, ds.task)};
    }
    return std::pair{r, -loss};
  };

  auto [r0, best_score] = record(0, 0.0, 0.0);
  if (!any_val) best_score = -std::numeric_limits<double>::infinity();
  rep.history.push_back(r0);
  rep.params = ps;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    auto [loss, norm] = detail::train_epoch(cfg, ps, opt, ds, ops, train_idx, tc, rng);
    auto [r, score] = record(epoch, loss, norm);
    rep.history.push_back(r);
    // Without a validation split the last epoch wins.
    if (score > best_score || !any_val) {
      best_score = score;
      rep.best_epoch = epoch;
      rep.params = ps;
    }
    if (tc.verbose) {
      std::fprintf(stderr, "epoch %zu loss %.6f", epoch, loss);
      if (r.val_metric) std::fprintf(stderr, " val %.6f", *r.val_metric);
      std::fprintf(stderr, "\n");
    }
  }
  rep.train_metrics = evaluate(cfg, rep.params, ds, ops, Split::Train);
  rep.val = evaluate(cfg, rep.params, ds, ops, Split::Val);
  rep.test = evaluate(cfg, rep.params, ds, ops, Split::Test);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ----------------------------------------------------------------------------
// Grid search

struct GridSpec {
  std::vector<double> lrs{0.03, 0.01, 0.003, 0.001};
  std::vector<std::size_t> hidden{8, 16, 32};
  std::vector<std::size_t> layers{2, 3, 4};
  std::size_t repeats = 1;
};

struct GridRow {
  double lr = 0.0;
  std::size_t hidden = 0;
  std::size_t layers = 0;
  std::vector<double> val;
  std::vector<double> test;
  MeanCi val_stat;
  MeanCi test_stat;
};

struct GridResult {
  TaskKind task = TaskKind::Regression;
  std::vector<GridRow> rows;
  /// Row with the best mean validation metric.
  std::size_t best = 0;
};

/// Seeds of repeat r are derive_seed(tc.seed, r) for every grid cell.
inline GridResult run_grid(const ModelConfig& base, const TrainConfig& tc, const Dataset& ds, const GridSpec& spec,
                           std::size_t threads = 1,
                           const std::function<void(const GridRow&)>& on_row = nullptr) {
  if (spec.repeats < 1) throw TrainError("grid needs at least one repeat");
  GridResult res;
  res.task = ds.task;
  for (double lr : spec.lrs)
    for (std::size_t d : spec.hidden)
      for (std::size_t l : spec.layers) res.rows.push_back(GridRow{lr, d, l, {}, {}, {}, {}});
  if (res.rows.empty()) throw TrainError("empty grid");

  std::mutex mu;
  std::exception_ptr failure;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= res.rows.size() || failure) return;
        i = next++;
      }
      GridRow& row = res.rows[i];
      try {
        for (std::size_t r = 0; r < spec.repeats; ++r) {
          ModelConfig cfg = base;
          cfg.hidden = row.hidden;
          cfg.layers = row.layers;
          TrainConfig t = tc;
          t.lr = row.lr;
          t.seed = derive_seed(tc.seed, r);
          t.verbose = false;
          const auto rep = train_model(cfg, t, ds);
          row.val.push_back(primary_metric(rep.val, ds.task).value_or(std::nan("")));
          row.test.push_back(primary_metric(rep.test, ds.task).value_or(std::nan("")));
        }
        row.val_stat = mean_ci95(row.val);
        row.test_stat = mean_ci95(row.test);
        if (on_row) {
          std::lock_guard lock(mu);
          on_row(row);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, res.rows.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const bool hi = higher_is_better(ds.task);
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    const double a = res.rows[i].val_stat.mean, b = res.rows[res.best].val_stat.mean;
    if (hi ? a > b : a < b) res.best = i;
  }
  return res;
}

// ----------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"arch", to_string(c.arch)},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"q", c.q},
          {"dropout", c.dropout},
          {"ablate",
           {{"no_direction", c.ablate.no_direction},
            {"no_fusion", c.ablate.no_fusion},
            {"no_fusion_conv", c.ablate.no_fusion_conv},
            {"no_node_mlp", c.ablate.no_node_mlp}}},
          {"in_equ", c.in_equ},
          {"in_inv", c.in_inv},
          {"node_mlp_width", c.node_mlp_width},
          {"cheb_order", c.cheb_order},
          {"hash", config_hash(c)}};
}

inline nlohmann::json to_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"clip", t.clip},
          {"seed", t.seed},
          {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}}};
}

inline nlohmann::json to_json(const EvalMetrics& m) {
  return {{"edges", m.edges}, {"loss", m.loss},      {"auc", to_json(m.auc)},
          {"rmse", to_json(m.rmse)}, {"mae", to_json(m.mae)}, {"r2", to_json(m.r2)}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : r.history)
    hist.push_back({{"epoch", h.epoch},
                    {"train_loss", h.train_loss},
                    {"grad_norm", h.grad_norm},
                    {"val_loss", h.val_loss},
                    {"val_metric", to_json(h.val_metric)}});
  return {{"dataset", r.dataset},
          {"task", to_string(r.task)},
          {"model", to_json(r.model)},
          {"train", to_json(r.train)},
          {"history", hist},
          {"best_epoch", r.best_epoch},
          {"metrics", {{"train", to_json(r.train_metrics)}, {"val", to_json(r.val)}, {"test", to_json(r.test)}}},
          {"wall_seconds", r.wall_seconds}};
}

inline nlohmann::json to_json(const GridResult& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : g.rows)
    rows.push_back({{"lr", r.lr},
                    {"hidden", r.hidden},
                    {"layers", r.layers},
                    {"val", r.val},
                    {"test", r.test},
                    {"val_mean", r.val_stat.mean},
                    {"val_ci95", r.val_stat.ci95},
                    {"test_mean", r.test_stat.mean},
                    {"test_ci95", r.test_stat.ci95}});
  return {{"task", to_string(g.task)}, {"metric", g.task == TaskKind::BinaryClass ? "auc" : "rmse"}, {"best", g.best},
          {"rows", rows}};
}

// ----------------------------------------------------------------------------
// Circuit-specific diagnostics

/// Share of diode edges whose predicted current flows against the diode by
/// more than `tol` (diodes are directed anode to cathode, so the reference
/// orientation is the conducting one).
inline double diode_violation_rate(const ModelConfig& cfg, const ParamStore& ps, const Dataset& ds, Split split,
                                   double tol = 1e-3) {
  if (ds.d_inv() < 3) throw TrainError("dataset has no component-kind features");
  std::size_t diodes = 0, bad = 0;
  for (const auto& s : ds.samples) {
    if (!s.has(split)) continue;
    const auto pr = predict(cfg, ps, s.graph, s.orientation, s.x_equ, s.x_inv);
    const auto mask = s.scored(split);
    for (std::size_t e = 0; e < mask.size(); ++e) {
      if (!mask[e] || s.x_inv(e, 2) != 1.0) continue;
      ++diodes;
      bad += pr.y_equ(e, 0) < -tol;
    }
  }
  if (diodes == 0) throw TrainError("split contains no diodes");
  return static_cast<double>(bad) / static_cast<double>(diodes);
}

}  // namespace eign
