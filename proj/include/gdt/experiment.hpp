#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gdt/config.hpp"
#include "gdt/data.hpp"
#include "gdt/eval.hpp"
#include "gdt/format.hpp"
#include "gdt/network.hpp"
#include "gdt/robustness.hpp"
#include "gdt/trainer.hpp"

namespace gdt {

enum class Task { Synthetic, IdxSubset, CsvDataset };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::Synthetic: return "synthetic";
    case Task::IdxSubset: return "idx-subset";
    case Task::CsvDataset: return "csv-dataset";
  }
  return "?";
}

/// splitmix64 of (seed, stream): independent seeds for data, init and pair sampling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Everything one run or sweep needs, validated up front.
struct ExperimentConfig {
  Task task = Task::Synthetic;
  std::uint64_t seed = 1;

  // data
  SyntheticConfig synthetic{};
  std::size_t train_per_class = 40;
  std::size_t test_per_class = 1000;
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::filesystem::path train_csv, test_csv;

  // network: widths after the input layer
  std::vector<std::size_t> layer_widths{100, 100};
  double init_scale = 0.1;

  TrainConfig train{};

  // evaluation
  std::size_t verification_pairs = 500;  // per pair label; 0 disables ROC/AUC

  // robustness
  double gamma = 0.5;
  Metric metric = Metric::Angular;
  std::optional<double> lipschitz;

  // sweep
  std::vector<double> lambda_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::size_t> sizes;  // train_per_class values; empty = {train_per_class}

  std::optional<std::filesystem::path> model_path;
  std::filesystem::path output_dir = "out";

  double lipschitz_A() const { return lipschitz.value_or(default_lipschitz(train.loss.mode)); }

  std::vector<std::size_t> size_grid() const { return sizes.empty() ? std::vector<std::size_t>{train_per_class} : sizes; }

  /// Copy with one sweep cell's settings applied.
  ExperimentConfig cell(double lambda, std::uint64_t cell_seed, std::size_t per_class) const {
    ExperimentConfig c = *this;
    c.train.loss.lambda = lambda;
    c.seed = cell_seed;
    c.train_per_class = per_class;
    return c;
  }

  static ExperimentConfig from(const Config& kv) {
    ExperimentConfig c;
    const std::string task = kv.get_string("task", "synthetic");
    if (task == "synthetic") c.task = Task::Synthetic;
    else if (task == "idx-subset") c.task = Task::IdxSubset;
    else if (task == "csv-dataset") c.task = Task::CsvDataset;
    else throw ConfigError("task: unknown task '" + task + "'");

    c.seed = kv.get_uint("seed", c.seed);
    c.synthetic.embed_dim = kv.get_uint("data.embed_dim", c.synthetic.embed_dim);
    c.train_per_class = kv.get_uint("data.train_per_class", c.train_per_class);
    c.test_per_class = kv.get_uint("data.test_per_class", c.task == Task::Synthetic ? 1000 : 0);
    if (c.task == Task::IdxSubset) {
      c.train_images = kv.require_string("data.train_images");
      c.train_labels = kv.require_string("data.train_labels");
      c.test_images = kv.require_string("data.test_images");
      c.test_labels = kv.require_string("data.test_labels");
      if (c.test_per_class == 0) throw ConfigError("data.test_per_class: must be > 0 for idx-subset");
    }
    if (c.task == Task::CsvDataset) {
      c.train_csv = kv.require_string("data.train_csv");
      c.test_csv = kv.require_string("data.test_csv");
    }
    if (c.task == Task::Synthetic && c.synthetic.embed_dim < 3) throw ConfigError("data.embed_dim: must be >= 3");

    const auto widths = kv.get_uint_list("net.layers", {100, 100});
    c.layer_widths.assign(widths.begin(), widths.end());
    if (c.layer_widths.empty()) throw ConfigError("net.layers: need at least one layer width");
    for (std::size_t w : c.layer_widths)
      if (w == 0) throw ConfigError("net.layers: widths must be positive");
    c.init_scale = kv.get_double("net.init_scale", c.init_scale);
    if (!(c.init_scale >= 0.0) || !std::isfinite(c.init_scale)) throw ConfigError("net.init_scale: must be >= 0");

    c.train.loss.lambda = kv.get_double("train.lambda", 0.4);
    try {
      c.train.loss.mode = parse_loss_mode(kv.get_string("train.loss", "gdt"));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("train.loss: ") + e.what());
    }
    c.train.step_size = kv.get_double("train.step_size", c.train.step_size);
    c.train.max_epochs = kv.get_uint("train.max_epochs", c.train.max_epochs);
    c.train.rel_tol = kv.get_double("train.rel_tol", c.train.rel_tol);
    c.train.patience_window = kv.get_uint("train.patience", c.train.patience_window);
    if (!(c.train.loss.lambda >= 0.0 && c.train.loss.lambda <= 1.0))
      throw ConfigError("train.lambda: must lie in [0, 1], got " + kv.get_string("train.lambda", ""));
    if (!(c.train.step_size >= 0.0) || !std::isfinite(c.train.step_size))
      throw ConfigError("train.step_size: must be >= 0");
    if (c.train.max_epochs < 1) throw ConfigError("train.max_epochs: must be >= 1");
    if (!(c.train.rel_tol > 0.0)) throw ConfigError("train.rel_tol: must be > 0");
    if (c.train.patience_window < 1) throw ConfigError("train.patience: must be >= 1");

    c.verification_pairs = kv.get_uint("eval.verification_pairs", c.verification_pairs);

    c.gamma = kv.get_double("robustness.gamma", c.gamma);
    if (!(c.gamma > 0.0) || !std::isfinite(c.gamma)) throw ConfigError("robustness.gamma: must be > 0");
    try {
      c.metric = parse_metric(kv.get_string("robustness.metric", "angular"));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("robustness.metric: ") + e.what());
    }
    if (kv.has("robustness.lipschitz")) {
      c.lipschitz = kv.get_double("robustness.lipschitz", 0.0);
      if (!(*c.lipschitz > 0.0) || !std::isfinite(*c.lipschitz))
        throw ConfigError("robustness.lipschitz: must be > 0");
    }

    c.lambda_grid = kv.get_double_list("sweep.lambdas", c.lambda_grid);
    if (c.lambda_grid.empty()) throw ConfigError("sweep.lambdas: must not be empty");
    for (double l : c.lambda_grid)
      if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("sweep.lambdas: values must lie in [0, 1]");
    c.seeds = kv.get_uint_list("sweep.seeds", c.seeds);
    if (c.seeds.empty()) throw ConfigError("sweep.seeds: must not be empty");
    const auto sizes = kv.get_uint_list("sweep.sizes", {});
    c.sizes.assign(sizes.begin(), sizes.end());

    if (kv.has("model.path") && !kv.get_string("model.path", "").empty())
      c.model_path = kv.get_string("model.path", "");
    c.output_dir = kv.get_string("output_dir", c.output_dir.string());

    const auto unknown = kv.unused();
    if (!unknown.empty()) throw ConfigError(unknown.front() + ": unknown setting");
    return c;
  }
};

struct DataSplit {
  LabeledDataset train;
  LabeledDataset test;
};

inline DataSplit load_data(const ExperimentConfig& cfg) {
  DataSplit d;
  switch (cfg.task) {
    case Task::Synthetic: {
      SyntheticConfig s = cfg.synthetic;
      s.train_per_class = cfg.train_per_class;
      s.test_per_class = cfg.test_per_class;
      s.seed = cfg.seed;
      TwoPlaneData g = gen_two_plane_dataset(s);
      d.train = std::move(g.train);
      d.test = std::move(g.test);
      break;
    }
    case Task::IdxSubset:
      d.train = load_idx_subset(cfg.train_images, cfg.train_labels, cfg.train_per_class, cfg.seed);
      d.test = load_idx_subset(cfg.test_images, cfg.test_labels, cfg.test_per_class, derive_seed(cfg.seed, 3));
      break;
    case Task::CsvDataset:
      d.train = load_dataset_csv(cfg.train_csv);
      d.test = load_dataset_csv(cfg.test_csv);
      break;
  }
  d.train.validate();
  d.test.validate();
  if (d.train.dim() != d.test.dim()) throw SchemaError("train and test feature dimensions differ", 0);
  return d;
}

inline FeedForwardNet build_network(const ExperimentConfig& cfg, std::size_t input_dim) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), cfg.layer_widths.begin(), cfg.layer_widths.end());
  return init_network(dims, derive_seed(cfg.seed, 1), cfg.init_scale);
}

/// Outcome of data -> train -> eval -> robustness for one configuration.
struct RunResult {
  DataSplit data;
  TrainReport train;  // empty history when the model was loaded
  EvalReport eval;
  RocCurve roc;
  RobustnessReport robustness;
};

inline RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult r;
  r.data = load_data(cfg);
  if (cfg.model_path) {
    r.train.final_net = load_network(*cfg.model_path);
    if (r.train.final_net.input_dim() != r.data.train.dim())
      throw ShapeError("model input dim does not match the data");
  } else {
    r.train = train(build_network(cfg, r.data.train.dim()), r.data.train, cfg.train);
  }
  const FeedForwardNet& net = r.train.final_net;
  r.eval = evaluate(net, r.data.train, r.data.test);
  if (cfg.verification_pairs > 0) {
    const auto pairs =
        sample_verification_pairs(r.data.test, cfg.verification_pairs, cfg.verification_pairs, derive_seed(cfg.seed, 2));
    r.roc = verification_roc(net, pairs);
    r.eval.auc = r.roc.auc;
  }
  r.robustness = analyze_robustness(net, r.data.train, cfg.gamma, cfg.lipschitz_A(), cfg.metric);
  return r;
}

// ---- artifact writers --------------------------------------------------------

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

inline nlohmann::json eval_report_json(const EvalReport& e) { return to_json(e); }

inline nlohmann::json robustness_report_json(const RobustnessReport& r, Metric m) { return to_json(r, m); }

/// Which files a CLI verb emits.
enum class Verb { GenData, Train, Eval, Robustness };

inline void write_run_artifacts(const RunResult& r, const ExperimentConfig& cfg, Verb verb,
                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  if (verb == Verb::Train) {
    write_training_log(r.train, dir / "train_log.csv");
    save_network(r.train.final_net, dir / "net.json");
  }
  if (verb == Verb::Train || verb == Verb::Eval) {
    write_json(eval_report_json(r.eval), dir / "eval_report.json");
    if (cfg.verification_pairs > 0) write_roc_csv(r.roc, dir / "roc.csv");
  }
  if (verb == Verb::Train || verb == Verb::Robustness)
    write_json(robustness_report_json(r.robustness, cfg.metric), dir / "robustness_report.json");
}

/// gen-data: the train/test split as CSV.
inline void run_gen_data(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  const DataSplit d = load_data(cfg);
  std::filesystem::create_directories(dir);
  save_dataset_csv(d.train, dir / "train.csv");
  save_dataset_csv(d.test, dir / "test.csv");
}

/// train / eval / robustness verbs.
inline RunResult run_single(const ExperimentConfig& cfg, Verb verb, const std::filesystem::path& dir) {
  RunResult r = run_experiment(cfg);
  write_run_artifacts(r, cfg, verb, dir);
  return r;
}

// ---- sweeps ------------------------------------------------------------------

struct SweepRow {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_per_class = 0;
  double r_emp = NAN, r_hat = NAN, gap = NAN, knn_accuracy = NAN, delta_hat = NAN;
  double K = NAN, epsilon = NAN;
  std::optional<double> auc;
  bool diverged = false;
};

struct MeanSd {
  double mean = NAN;
  double sd = NAN;  // sample standard deviation; nan with fewer than 2 values
};

inline MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd m;
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / static_cast<double>(v.size());
  if (v.size() >= 2) {
    double q = 0.0;
    for (double x : v) q += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(q / static_cast<double>(v.size() - 1));
  }
  return m;
}

struct SweepSummaryRow {
  double lambda = 0.0;
  std::size_t n_per_class = 0;
  std::size_t seeds_ok = 0;
  MeanSd r_emp, r_hat, gap, abs_gap, knn_accuracy, delta_hat, K, epsilon;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSummaryRow> summary;

  const SweepSummaryRow& at(double lambda, std::size_t n_per_class) const {
    for (const auto& s : summary)
      if (s.lambda == lambda && s.n_per_class == n_per_class) return s;
    throw InvalidInput("no sweep summary for that cell");
  }
};

inline const char* kSweepHeader = "lambda,seed,n_per_class,r_emp,r_hat,gap,knn_accuracy,delta_hat,K,epsilon,status";
inline const char* kSweepSummaryHeader =
    "lambda,n_per_class,seeds_ok,r_emp_mean,r_emp_sd,r_hat_mean,r_hat_sd,gap_mean,gap_sd,abs_gap_mean,abs_gap_sd,"
    "knn_accuracy_mean,knn_accuracy_sd,delta_hat_mean,delta_hat_sd,K_mean,K_sd,epsilon_mean,epsilon_sd";

inline std::vector<SweepSummaryRow> summarize(const std::vector<SweepRow>& rows) {
  std::vector<SweepSummaryRow> out;
  std::vector<std::pair<std::size_t, double>> keys;
  for (const SweepRow& r : rows)
    if (std::find(keys.begin(), keys.end(), std::pair{r.n_per_class, r.lambda}) == keys.end())
      keys.emplace_back(r.n_per_class, r.lambda);
  for (const auto& [n, lambda] : keys) {
    std::vector<double> r_emp, r_hat, gap, abs_gap, acc, delta, K, eps;
    for (const SweepRow& r : rows) {
      if (r.n_per_class != n || r.lambda != lambda || r.diverged) continue;
      r_emp.push_back(r.r_emp);
      r_hat.push_back(r.r_hat);
      gap.push_back(r.gap);
      abs_gap.push_back(std::abs(r.gap));
      acc.push_back(r.knn_accuracy);
      delta.push_back(r.delta_hat);
      K.push_back(r.K);
      eps.push_back(r.epsilon);
    }
    out.push_back({lambda, n, r_emp.size(), mean_sd(r_emp), mean_sd(r_hat), mean_sd(gap), mean_sd(abs_gap),
                   mean_sd(acc), mean_sd(delta), mean_sd(K), mean_sd(eps)});
  }
  return out;
}

inline std::string sweep_cell_name(double lambda, std::uint64_t seed, std::size_t n_per_class) {
  return "n" + std::to_string(n_per_class) + "_lambda" + format_double(lambda) + "_seed" + std::to_string(seed);
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    out << format_double(r.lambda) << ',' << r.seed << ',' << r.n_per_class << ',' << format_double(r.r_emp) << ','
        << format_double(r.r_hat) << ',' << format_double(r.gap) << ',' << format_double(r.knn_accuracy) << ','
        << format_double(r.delta_hat) << ',' << format_double(r.K) << ',' << format_double(r.epsilon) << ','
        << (r.diverged ? "diverged" : "ok") << '\n';
  }
}

inline void write_sweep_summary_csv(const std::vector<SweepSummaryRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << kSweepSummaryHeader << '\n';
  for (const SweepSummaryRow& s : rows) {
    out << format_double(s.lambda) << ',' << s.n_per_class << ',' << s.seeds_ok;
    for (const MeanSd* m : {&s.r_emp, &s.r_hat, &s.gap, &s.abs_gap, &s.knn_accuracy, &s.delta_hat, &s.K, &s.epsilon})
      out << ',' << format_double(m->mean) << ',' << format_double(m->sd);
    out << '\n';
  }
}

using ProgressFn = std::function<void(const SweepRow&)>;

/// Every (size, lambda, seed) cell, optionally on `jobs` worker threads.
///
/// Rows keep grid order whatever the scheduling. Diverged cells are recorded
/// and the sweep goes on; any other error stops the sweep after the workers
/// join. With a non-empty `dir`, each cell writes its artifacts to its own
/// subdirectory and the sweep and summary CSVs are written at the end.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& dir, unsigned jobs = 1,
                             const ProgressFn& progress = {}) {
  struct Cell {
    double lambda;
    std::uint64_t seed;
    std::size_t n;
  };
  std::vector<Cell> cells;
  for (std::size_t n : cfg.size_grid())
    for (double lambda : cfg.lambda_grid)
      for (std::uint64_t seed : cfg.seeds) cells.push_back({lambda, seed, n});

  SweepResult result;
  result.rows.resize(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr fatal;

  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= cells.size()) return;
      {
        std::lock_guard lock(mu);
        if (fatal) return;
      }
      const Cell& c = cells[k];
      SweepRow row;
      row.lambda = c.lambda;
      row.seed = c.seed;
      row.n_per_class = c.n;
      try {
        const ExperimentConfig cell_cfg = cfg.cell(c.lambda, c.seed, c.n);
        const RunResult r = run_experiment(cell_cfg);
        row.r_emp = r.eval.r_emp;
        row.r_hat = r.eval.r_hat;
        row.gap = r.eval.gap;
        row.knn_accuracy = r.eval.knn_accuracy;
        row.auc = r.eval.auc;
        row.delta_hat = r.robustness.delta_hat;
        row.K = static_cast<double>(r.robustness.K);
        row.epsilon = r.robustness.epsilon;
        if (!dir.empty()) write_run_artifacts(r, cell_cfg, Verb::Train, dir / "cells" / sweep_cell_name(c.lambda, c.seed, c.n));
      } catch (const TrainingDiverged&) {
        row.diverged = true;
      } catch (...) {
        std::lock_guard lock(mu);
        if (!fatal) fatal = std::current_exception();
        return;
      }
      std::lock_guard lock(mu);
      result.rows[k] = row;
      if (progress) progress(row);
    }
  };

  const unsigned n_workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cells.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  result.summary = summarize(result.rows);
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    write_sweep_csv(result.rows, dir / "sweep.csv");
    write_sweep_summary_csv(result.summary, dir / "sweep_summary.csv");
  }
  return result;
}

}  // namespace gdt
