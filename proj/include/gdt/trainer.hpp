#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "gdt/data.hpp"
#include "gdt/error.hpp"
#include "gdt/format.hpp"
#include "gdt/loss.hpp"
#include "gdt/network.hpp"

namespace gdt {

struct TrainConfig {
  LossConfig loss{};
  double step_size = 0.05;
  std::size_t max_epochs = 5000;
  double rel_tol = 1e-5;
  std::size_t patience_window = 10;

  void validate() const {
    check_lambda(loss.lambda);
    if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw ConfigError("step_size must be finite and >= 0");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (!(rel_tol > 0.0)) throw ConfigError("rel_tol must be > 0");
    if (patience_window < 1) throw ConfigError("patience_window must be >= 1");
  }
};

struct TrainReport {
  std::vector<double> objective_history;  // J before each epoch's update
  std::size_t epochs_run = 0;
  bool converged = false;
  FeedForwardNet final_net;
};

/// Objective value and full-batch parameter gradient at the current parameters.
struct BatchGradient {
  double objective = 0.0;
  NetGradient grad;
};

/// One forward pass over all samples, dJ/dy per sample, then backprop summed
/// over samples in index order.
inline BatchGradient batch_gradient(const FeedForwardNet& net, const std::vector<Vector>& inputs,
                                    const std::vector<PairTarget>& pairs, LossMode mode = LossMode::Gdt) {
  std::vector<ForwardTrace> traces;
  traces.reserve(inputs.size());
  std::vector<Vector> ys;
  ys.reserve(inputs.size());
  for (const Vector& x : inputs) {
    traces.push_back(forward(net, x));
    ys.push_back(traces.back().output());
  }
  LossAndGradient lg = pair_objective(ys, pairs, mode);
  BatchGradient out{lg.value, NetGradient::zeros_like(net)};
  for (std::size_t i = 0; i < inputs.size(); ++i) backward_accumulate(net, traces[i], lg.grads[i], out.grad);
  return out;
}

/// |J_t - J_{t-w}| / max(J_{t-w}, 1e-12) < rel_tol over the last w epochs.
inline bool objective_stable(const std::vector<double>& history, std::size_t window, double rel_tol) {
  if (history.size() <= window) return false;
  const double now = history.back();
  const double then = history[history.size() - 1 - window];
  return std::abs(now - then) / std::max(then, 1e-12) < rel_tol;
}

/// Optional per-epoch hook: (epoch index, objective).
using EpochCallback = std::function<void(std::size_t, double)>;

/// Full-batch gradient descent on the pair objective.
///
/// Every epoch evaluates J and its gradient at the current parameters and
/// records J. If J has been stable over the patience window the loop stops
/// before updating; otherwise all parameters move by -step_size * dJ/dparam.
inline TrainReport train(FeedForwardNet net, const LabeledDataset& ds, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  ds.validate();
  if (ds.size() < 2 || ds.class_count() < 2) throw InvalidInput("training needs >= 2 samples from >= 2 classes");
  if (ds.dim() != net.input_dim())
    throw ShapeError("dataset dim " + std::to_string(ds.dim()) + " != network input dim " +
                     std::to_string(net.input_dim()));

  const std::vector<PairTarget> pairs = enumerate_pairs(ds, cfg.loss.effective_lambda());
  TrainReport report;
  report.objective_history.reserve(std::min<std::size_t>(cfg.max_epochs, 100000));
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    BatchGradient bg;
    try {
      bg = batch_gradient(net, ds.features, pairs, cfg.loss.mode);
    } catch (const DegenerateVector& e) {
      throw TrainingDiverged(e.what(), epoch);
    }
    if (!std::isfinite(bg.objective)) throw TrainingDiverged("non-finite objective", epoch);
    report.objective_history.push_back(bg.objective);
    if (on_epoch) on_epoch(epoch, bg.objective);
    if (objective_stable(report.objective_history, cfg.patience_window, cfg.rel_tol)) {
      report.converged = true;
      break;
    }
    apply_update(net, bg.grad, cfg.step_size);
  }
  report.epochs_run = report.objective_history.size();
  report.final_net = std::move(net);
  return report;
}

/// `epoch,J` rows, epochs numbered from 1.
inline void write_training_log(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "epoch,J\n";
  for (std::size_t e = 0; e < report.objective_history.size(); ++e)
    out << e + 1 << ',' << format_double(report.objective_history[e]) << '\n';
}

}  // namespace gdt
