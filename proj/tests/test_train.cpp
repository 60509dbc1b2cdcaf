#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "eign/train.hpp"

using namespace eign;

namespace {

Dataset small_tri_flow(std::size_t graphs, std::uint64_t seed) {
  Dataset ds;
  ds.name = "tri-flow-small";
  ds.task = TaskKind::Regression;
  TriFlowParams p;
  p.triangles = 12;
  p.fillers = 12;
  for (std::size_t i = 0; i < graphs; ++i) {
    Rng rng(derive_seed(seed, i));
    ds.samples.push_back(tri_flow_instance(rng, p).sample);
  }
  assign_graph_splits(ds, kSyntheticSplit, seed);
  return ds;
}

ModelConfig eign_cfg(std::size_t hidden = 8, std::size_t layers = 2) {
  ModelConfig c;
  c.hidden = hidden;
  c.layers = layers;
  return c;
}

TrainConfig quick(std::size_t epochs, double lr = 0.01) {
  TrainConfig t;
  t.epochs = epochs;
  t.lr = lr;
  t.batch_size = 4;
  t.seed = 5;
  return t;
}

double pairwise_auc(const std::vector<double>& s, const std::vector<double>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1.0 || y[j] != 0.0) continue;
      pairs += 1.0;
      num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return num / pairs;
}

}  // namespace

TEST(Adam, ConvergesOnQuadratic) {
  ParamStore ps;
  ps.add("w", Matrix(1, 1, 0.0));
  Adam opt(ps);
  for (int k = 0; k < 500; ++k) {
    auto& p = ps.params()[0];
    p.grad(0, 0) = 2.0 * (p.value(0, 0) - 3.0);
    opt.step(ps, 0.1);
  }
  EXPECT_LT(std::fabs(ps.params()[0].value(0, 0) - 3.0), 1e-3);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore ps;
  ps.add("w", Matrix{{1.0, -2.0}});
  ps.params()[0].grad = Matrix{{0.5, -40.0}};
  Adam opt(ps);
  opt.step(ps, 0.01);
  // Bias correction makes the first update lr * g / (|g| + eps).
  EXPECT_NEAR(ps.params()[0].value(0, 0), 1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(ps.params()[0].value(0, 1), -2.0 + 0.01 * 40.0 / (40.0 + 1e-8), 1e-15);
}

TEST(Adam, ZeroGradientKeepsParameters) {
  ParamStore ps;
  ps.add("w", Matrix{{1.5, -0.25}});
  Adam opt(ps);
  for (int k = 0; k < 3; ++k) opt.step(ps, 0.1);
  EXPECT_EQ(ps.params()[0].value, (Matrix{{1.5, -0.25}}));
}

TEST(Adam, RejectsNonFiniteGradient) {
  ParamStore ps;
  ps.add("w", Matrix(1, 1, 1.0));
  ps.params()[0].grad(0, 0) = std::nan("");
  Adam opt(ps);
  EXPECT_THROW(opt.step(ps, 0.1), TrainError);
  EXPECT_EQ(ps.params()[0].value(0, 0), 1.0);
}

TEST(ClipGradNorm, ScalesAboveThreshold) {
  ParamStore ps;
  ps.add("a", Matrix(1, 1));
  ps.add("b", Matrix(1, 1));
  ps.params()[0].grad(0, 0) = 3.0;
  ps.params()[1].grad(0, 0) = 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(ps.params()[0].grad(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(ps.params()[1].grad(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(grad_norm(ps), 1.0, 1e-15);
}

TEST(ClipGradNorm, LeavesSmallGradients) {
  ParamStore ps;
  ps.add("a", Matrix{{0.3, -0.4}});
  ps.params()[0].grad = Matrix{{0.3, -0.4}};
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 0.5);
  EXPECT_EQ(ps.params()[0].grad, (Matrix{{0.3, -0.4}}));
  EXPECT_THROW(clip_grad_norm(ps, 0.0), TrainError);
}

TEST(AucRoc, HandCases) {
  EXPECT_EQ(auc_roc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<double>{0, 0, 1, 1}), 0.75);
  EXPECT_EQ(auc_roc(std::vector<double>{1, 2, 3}, std::vector<double>{0, 1, 1}), 1.0);
  EXPECT_EQ(auc_roc(std::vector<double>{3, 2, 1}, std::vector<double>{0, 1, 1}), 0.0);
  EXPECT_EQ(auc_roc(std::vector<double>{7, 7, 7, 7}, std::vector<double>{0, 1, 0, 1}), 0.5);
  EXPECT_THROW(auc_roc(std::vector<double>{1, 2}, std::vector<double>{1, 1}), MetricError);
  EXPECT_THROW(auc_roc(std::vector<double>{1, 2}, std::vector<double>{0, 2}), MetricError);
}

TEST(AucRoc, MatchesPairwiseOracle) {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n), y(n);
    const bool ties = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = ties ? static_cast<double>(rng.below(5)) : rng.uniform(-1.0, 1.0);
      y[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    }
    y[0] = 1.0;
    y[1] = 0.0;
    EXPECT_NEAR(auc_roc(s, y), pairwise_auc(s, y), 1e-15) << "trial " << trial;
  }
}

TEST(RegressionMetrics, HandCases) {
  const std::vector<double> p{1, 2, 3}, t{1, 2, 5};
  EXPECT_DOUBLE_EQ(rmse(p, t), std::sqrt(4.0 / 3.0));
  EXPECT_DOUBLE_EQ(mae(p, t), 2.0 / 3.0);
  // mean 8/3, SS_tot = 26/3, SS_res = 4
  EXPECT_DOUBLE_EQ(*r2(p, t), 1.0 - 4.0 / (26.0 / 3.0));
  EXPECT_FALSE(r2(p, std::vector<double>{2, 2, 2}).has_value());
}

TEST(RegressionMetrics, MaskSelectsRows) {
  Matrix pred{{1.0}, {10.0}, {3.0}}, target{{0.0}, {-10.0}, {3.0}};
  const std::vector<std::uint8_t> mask{1, 0, 1};
  EXPECT_DOUBLE_EQ(rmse(pred, target, mask), std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(mae(pred, target, mask), 0.5);
  EXPECT_THROW(rmse(pred, target, std::vector<std::uint8_t>{0, 0, 0}), MetricError);
  EXPECT_THROW(rmse(pred, target, std::vector<std::uint8_t>{1, 1}), MetricError);
}

TEST(MeanCi, NormalInterval) {
  const std::vector<double> v{1, 2, 3};
  auto s = mean_ci95(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_NEAR(s.ci95, 1.96 / std::sqrt(3.0), 1e-15);
  EXPECT_EQ(mean_ci95(std::vector<double>{4.0}).ci95, 0.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ModelConfig cfg = eign_cfg();
  cfg.in_equ = 1;
  cfg.in_inv = 3;
  ParamStore ps = init_params(cfg, 77);
  ps.params()[0].value(0, 0) = 0.1 + 0.2;
  std::stringstream ss;
  save_checkpoint(ss, cfg, ps);
  ParamStore back = load_checkpoint(ss, cfg);
  ASSERT_EQ(back.size(), ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_EQ(back.params()[i].name, ps.params()[i].name);
    EXPECT_EQ(back.params()[i].value, ps.params()[i].value);
  }
}

TEST(Checkpoint, RejectsOtherConfigAndTruncation) {
  ModelConfig cfg = eign_cfg();
  cfg.in_inv = 2;
  std::stringstream ss;
  save_checkpoint(ss, cfg, init_params(cfg, 1));
  const std::string bytes = ss.str();
  ModelConfig other = cfg;
  other.hidden = 16;
  std::stringstream a(bytes);
  EXPECT_THROW(load_checkpoint(a, other), CheckpointError);
  std::stringstream b(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_checkpoint(b, cfg), CheckpointError);
  std::stringstream c("not a checkpoint at all");
  EXPECT_THROW(load_checkpoint(c, cfg), CheckpointError);
}

TEST(TrainModel, ZeroEpochsReportsInitialParameters) {
  const Dataset ds = small_tri_flow(10, 3);
  const auto rep = train_model(eign_cfg(), quick(0), ds);
  EXPECT_EQ(rep.best_epoch, 0u);
  ASSERT_EQ(rep.history.size(), 1u);
  const auto init = init_params(rep.model, derive_seed(5, 1));
  EXPECT_EQ(rep.params.flat_values(), init.flat_values());
  const auto direct = evaluate(rep.model, init, ds, Split::Test);
  EXPECT_EQ(*rep.test.rmse, *direct.rmse);
}

TEST(TrainModel, IsDeterministic) {
  const Dataset ds = small_tri_flow(10, 4);
  const auto a = train_model(eign_cfg(), quick(3), ds);
  const auto b = train_model(eign_cfg(), quick(3), ds);
  EXPECT_EQ(a.params.flat_values(), b.params.flat_values());
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
  EXPECT_EQ(*a.test.rmse, *b.test.rmse);
}

TEST(TrainModel, LossDecreasesWithinTenEpochs) {
  const Dataset ds = small_tri_flow(10, 6);
  const auto rep = train_model(eign_cfg(), quick(10, 0.01), ds);
  EXPECT_LT(rep.history.back().train_loss, rep.history[1].train_loss);
}

TEST(TrainModel, BestValidationEpochIsKept) {
  const Dataset ds = small_tri_flow(10, 7);
  const auto rep = train_model(eign_cfg(), quick(6, 0.03), ds);
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (const auto& h : rep.history)
    if (*h.val_metric < best) {
      best = *h.val_metric;
      arg = h.epoch;
    }
  EXPECT_EQ(rep.best_epoch, arg);
  EXPECT_DOUBLE_EQ(*rep.val.rmse, best);
}

TEST(TrainModel, TestRmseIgnoresOrientation) {
  const Dataset ds = small_tri_flow(10, 8);
  Dataset flipped = ds;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    flipped.samples[i] = apply_flip(ds.samples[i], random_orientation_flip(ds.samples[i].graph, 100 + i));
  const auto a = train_model(eign_cfg(), quick(4), ds);
  const auto b = train_model(eign_cfg(), quick(4), flipped);
  EXPECT_NEAR(*a.test.rmse, *b.test.rmse, 1e-8);
  // same parameters on either orientation
  EXPECT_NEAR(*evaluate(a.model, a.params, flipped, Split::Test).rmse, *a.test.rmse, 1e-12);
}

TEST(TrainModel, ClassificationUsesAuc) {
  Dataset ds = generate_dataset("ld-cycles", 12, 9);
  const auto rep = train_model(eign_cfg(8, 2), quick(2), ds);
  EXPECT_TRUE(rep.test.auc.has_value());
  EXPECT_FALSE(rep.test.rmse.has_value());
  EXPECT_GE(*rep.test.auc, 0.0);
  EXPECT_LE(*rep.test.auc, 1.0);
}

TEST(TrainModel, RejectsBadConfig) {
  const Dataset ds = small_tri_flow(4, 1);
  TrainConfig t = quick(1);
  t.lr = 0.0;
  EXPECT_THROW(train_model(eign_cfg(), t, ds), TrainError);
  ModelConfig c = eign_cfg();
  c.hidden = 3;
  EXPECT_THROW(train_model(c, quick(1), ds), ModelError);
}

TEST(TrainModel, MetricsJsonEchoesConfig) {
  const Dataset ds = small_tri_flow(6, 2);
  const auto rep = train_model(eign_cfg(), quick(2), ds);
  const auto j = to_json(rep);
  EXPECT_EQ(j["model"]["arch"], "eign");
  EXPECT_EQ(j["model"]["hidden"], 8);
  EXPECT_EQ(j["train"]["epochs"], 2);
  EXPECT_EQ(j["history"].size(), 3u);
  EXPECT_TRUE(j["metrics"]["test"]["rmse"].is_number());
  EXPECT_TRUE(j["metrics"]["test"]["auc"].is_null());
  EXPECT_GE(j["wall_seconds"].get<double>(), 0.0);
}

TEST(RunGrid, FullGridHasThirtySixRows) {
  const Dataset ds = generate_dataset("circuits", 8, 3);
  TrainConfig t = quick(1);
  GridSpec spec;
  std::size_t seen = 0;
  const auto g = run_grid(eign_cfg(), t, ds, spec, 1, [&](const GridRow&) { ++seen; });
  EXPECT_EQ(g.rows.size(), 36u);
  EXPECT_EQ(seen, 36u);
  for (const auto& r : g.rows) {
    EXPECT_EQ(r.test.size(), 1u);
    EXPECT_EQ(r.test_stat.ci95, 0.0);
  }
  for (const auto& r : g.rows) EXPECT_GE(r.val_stat.mean, g.rows[g.best].val_stat.mean);
}

TEST(RunGrid, RepeatsGiveInterval) {
  const Dataset ds = generate_dataset("circuits", 8, 4);
  GridSpec spec{{0.01}, {8}, {2}, 3};
  const auto g = run_grid(eign_cfg(), quick(2), ds, spec, 2);
  ASSERT_EQ(g.rows.size(), 1u);
  const auto& r = g.rows[0];
  ASSERT_EQ(r.test.size(), 3u);
  EXPECT_NEAR(r.test_stat.ci95, mean_ci95(r.test).ci95, 0.0);
  EXPECT_GT(r.test_stat.ci95, 0.0);
  // repeat 0 equals a direct run with the derived seed
  TrainConfig t = quick(2);
  t.seed = derive_seed(t.seed, 0);
  EXPECT_EQ(*train_model(eign_cfg(), t, ds).test.rmse, r.test[0]);
}

TEST(DiodeViolations, CountsReverseCurrents) {
  const Dataset ds = generate_dataset("circuits", 30, 11);
  ModelConfig cfg = configure_for(ModelConfig{}, ds);
  ParamStore ps = init_params(cfg, 0);
  for (auto& p : ps.params()) p.value.fill(0.0);
  // the zero predictor never violates
  EXPECT_EQ(diode_violation_rate(cfg, ps, ds, Split::Test), 0.0);
  const Dataset rw = generate_dataset("rw-comp", 2, 1);
  EXPECT_THROW(diode_violation_rate(configure_for(ModelConfig{}, rw), init_params(configure_for(ModelConfig{}, rw), 0),
                                    rw, Split::Test),
               TrainError);
}
