#include <gdt/trainer.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"

using namespace gdt;

namespace {

LabeledDataset toy_two() { return {{{1.0, 0.5, -0.2}, {0.9, 0.6, -0.1}}, {1, 2}}; }

TrainConfig config(double step, std::size_t epochs, double lambda = 0.5) {
  TrainConfig c;
  c.loss.lambda = lambda;
  c.step_size = step;
  c.max_epochs = epochs;
  return c;
}

}  // namespace

TEST(Train, ZeroStepConvergesAfterPatienceWindow) {
  const auto net = init_network({3, 4, 2}, 1);
  TrainConfig cfg = config(0.0, 1000);
  cfg.patience_window = 7;
  const TrainReport r = train(net, toy_two(), cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.epochs_run, 8u);
  for (double j : r.objective_history) EXPECT_EQ(j, r.objective_history.front());
  EXPECT_EQ(r.final_net, net);
}

TEST(Train, ToyObjectiveDecreases) {
  const TrainReport r = train(init_network({3, 5, 3}, 2, 0.5), toy_two(), config(0.005, 400));
  ASSERT_FALSE(r.objective_history.empty());
  EXPECT_LE(r.objective_history.back(), r.objective_history.front());
  EXPECT_LT(r.objective_history.back(), 1e-3);
  for (double j : r.objective_history) EXPECT_TRUE(std::isfinite(j));
}

TEST(Train, UnorderedStepEqualsOrderedHalfStep) {
  Rng rng(4);
  const LabeledDataset ds{gdt::testing::random_vectors(rng, 3, 4), {1, 1, 2}};
  const auto net = init_network({4, 6, 3}, 9, 0.4);
  const auto unordered = enumerate_pairs(ds, 0.5);
  auto ordered = unordered;
  for (const PairTarget& p : unordered) ordered.push_back({p.j, p.i, p.label, p.target});

  const BatchGradient a = batch_gradient(net, ds.features, unordered);
  const BatchGradient b = batch_gradient(net, ds.features, ordered);
  EXPECT_NEAR(b.objective, 2.0 * a.objective, 1e-12);
  const auto na = updated(net, a.grad, 0.1);
  const auto nb = updated(net, b.grad, 0.05);
  for (std::size_t k = 0; k < na.depth(); ++k) {
    for (std::size_t i = 0; i < na.layer(k).bias.size(); ++i)
      EXPECT_NEAR(na.layer(k).bias[i], nb.layer(k).bias[i], 1e-12);
    const auto& wa = na.layer(k).weight.data();
    const auto& wb = nb.layer(k).weight.data();
    for (std::size_t i = 0; i < wa.size(); ++i) EXPECT_NEAR(wa[i], wb[i], 1e-12);
  }
}

TEST(Train, BatchGradientMatchesFiniteDifferences) {
  Rng rng(11);
  const LabeledDataset ds = gdt::testing::random_dataset(rng, 5, 4, 2);
  auto net = init_network({4, 5, 3}, 3, 0.5);
  const auto pairs = enumerate_pairs(ds, 0.3);
  const BatchGradient bg = batch_gradient(net, ds.features, pairs);
  std::vector<Layer> layers = net.layers();
  const auto objective = [&] { return batch_gradient(FeedForwardNet(layers), ds.features, pairs).objective; };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& w = layers[k].weight.data();
    for (std::size_t i = 0; i < w.size(); i += 3) {
      const double num = gdt::testing::central_difference(w[i], objective);
      EXPECT_LT(gdt::testing::relative_error(bg.grad.layers[k].weight.data()[i], num), 1e-6);
    }
    for (std::size_t i = 0; i < layers[k].bias.size(); ++i) {
      const double num = gdt::testing::central_difference(layers[k].bias[i], objective);
      EXPECT_LT(gdt::testing::relative_error(bg.grad.layers[k].bias[i], num), 1e-6);
    }
  }
}

TEST(Train, Deterministic) {
  Rng rng(5);
  const LabeledDataset ds = gdt::testing::random_dataset(rng, 10, 6, 2);
  const auto cfg = config(0.002, 50);
  const TrainReport a = train(init_network({6, 8, 4}, 3, 0.5), ds, cfg);
  const TrainReport b = train(init_network({6, 8, 4}, 3, 0.5), ds, cfg);
  EXPECT_EQ(a.objective_history, b.objective_history);
  EXPECT_EQ(a.final_net, b.final_net);
  EXPECT_EQ(a.epochs_run, b.epochs_run);
  EXPECT_LT(a.objective_history.back(), a.objective_history.front());
}

TEST(Train, CallbackSeesEveryEpoch) {
  std::vector<double> seen;
  const TrainReport r = train(init_network({3, 4, 2}, 1), toy_two(), config(0.01, 12),
                              [&](std::size_t e, double j) {
                                EXPECT_EQ(e, seen.size());
                                seen.push_back(j);
                              });
  EXPECT_EQ(seen, r.objective_history);
}

TEST(Train, DmlModesRun) {
  Rng rng(6);
  const LabeledDataset ds = gdt::testing::random_dataset(rng, 8, 5, 2);
  for (LossMode m : {LossMode::HingeDml, LossMode::SmoothedDml, LossMode::MetricLearning, LossMode::Classification}) {
    TrainConfig cfg = config(0.01, 30);
    cfg.loss.mode = m;
    const TrainReport r = train(init_network({5, 6, 3}, 2), ds, cfg);
    for (double j : r.objective_history) EXPECT_TRUE(std::isfinite(j));
  }
}

TEST(Train, Errors) {
  const auto net = init_network({3, 4, 2}, 1);
  EXPECT_THROW(train(net, toy_two(), config(-1.0, 10)), ConfigError);
  EXPECT_THROW(train(net, toy_two(), config(0.1, 0)), ConfigError);
  EXPECT_THROW(train(net, toy_two(), config(0.1, 10, 1.5)), ConfigError);
  EXPECT_THROW(train(net, LabeledDataset{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}, {1, 1}}, config(0.1, 10)), InvalidInput);
  EXPECT_THROW(train(init_network({4, 2}, 1), toy_two(), config(0.1, 10)), ShapeError);
  // All-zero output layer makes every output degenerate.
  auto layers = net.layers();
  layers.back().weight = Matrix(2, 4, 0.0);
  try {
    train(FeedForwardNet(layers), toy_two(), config(0.1, 10));
    FAIL();
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.epoch(), 0u);
  }
}

TEST(Train, StabilityRule) {
  EXPECT_FALSE(objective_stable({1.0, 1.0}, 2, 1e-5));
  EXPECT_TRUE(objective_stable({1.0, 1.0, 1.0}, 2, 1e-5));
  EXPECT_FALSE(objective_stable({1.0, 0.5, 0.99}, 2, 1e-5));
  EXPECT_TRUE(objective_stable({0.0, 0.0}, 1, 1e-5));
}

TEST(Train, LogFormat) {
  const TrainReport r = train(init_network({3, 4, 2}, 1), toy_two(), config(0.01, 3));
  const auto dir = gdt::testing::scratch_dir("train_log");
  write_training_log(r, dir / "log.csv");
  std::ifstream in(dir / "log.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,J");
  for (std::size_t e = 0; e < 3; ++e) {
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, std::to_string(e + 1) + "," + format_double(r.objective_history[e]));
  }
  EXPECT_FALSE(std::getline(in, line));
}
