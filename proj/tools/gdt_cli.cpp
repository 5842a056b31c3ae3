// gdt: data generation, training, evaluation, robustness diagnostics and sweeps.

#include <CLI11.hpp>

#include <gdt/config.hpp>
#include <gdt/experiment.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <system_error>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kConfigError = 2, kInputError = 3, kDiverged = 4 };

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  unsigned jobs = 1;
};

gdt::ExperimentConfig load_config(const Options& opt) {
  gdt::Config kv;
  try {
    if (!opt.config_path.empty()) kv = gdt::Config::load(opt.config_path);
    for (const std::string& a : opt.overrides) kv.set_assignment(a);
  } catch (const gdt::ParseError& e) {
    throw gdt::ConfigError(std::string(e.what()) + " (line " + std::to_string(e.line()) + ")");
  }
  gdt::ExperimentConfig cfg = gdt::ExperimentConfig::from(kv);
  if (!opt.out.empty()) cfg.output_dir = opt.out;
  return cfg;
}

// Outputs are staged in a sibling directory and moved into place only once
// the whole command has succeeded.
class Staging {
 public:
  explicit Staging(fs::path target) : target_(std::move(target)) {
    if (!target_.has_filename()) target_ = target_.parent_path();
    if (target_.empty()) target_ = ".";
    target_ = fs::absolute(target_).lexically_normal();
    dir_ = target_.parent_path() / ("." + target_.filename().string() + ".partial." + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  const fs::path& dir() const { return dir_; }

  void commit() {
    fs::create_directories(target_);
    move_tree(dir_, target_);
  }

 private:
  static void move_tree(const fs::path& from, const fs::path& to) {
    for (const fs::directory_entry& e : fs::directory_iterator(from)) {
      const fs::path dest = to / e.path().filename();
      if (e.is_directory()) {
        fs::create_directories(dest);
        move_tree(e.path(), dest);
      } else {
        fs::rename(e.path(), dest);
      }
    }
  }

  fs::path target_;
  fs::path dir_;
};

void print_summary(const gdt::RunResult& r, bool trained) {
  if (trained)
    std::cerr << "epochs " << r.train.epochs_run << (r.train.converged ? " (converged)" : "") << ", final J "
              << gdt::format_double(r.train.objective_history.back()) << '\n';
  std::cerr << "r_emp " << gdt::format_double(r.eval.r_emp) << "  r_hat " << gdt::format_double(r.eval.r_hat)
            << "  knn " << gdt::format_double(r.eval.knn_accuracy);
  if (r.eval.auc) std::cerr << "  auc " << gdt::format_double(*r.eval.auc);
  std::cerr << "\ndelta_hat " << gdt::format_double(r.robustness.delta_hat) << "  K " << r.robustness.K
            << "  epsilon " << gdt::format_double(r.robustness.epsilon) << '\n';
}

int run(const std::string& verb, const Options& opt) {
  const gdt::ExperimentConfig cfg = load_config(opt);
  if ((verb == "eval" || verb == "robustness") && !cfg.model_path)
    throw gdt::ConfigError("model.path: required for " + verb);

  Staging stage(cfg.output_dir);
  if (verb == "gen-data") {
    gdt::run_gen_data(cfg, stage.dir());
  } else if (verb == "sweep") {
    const gdt::SweepResult s = gdt::run_sweep(cfg, stage.dir(), opt.jobs, [](const gdt::SweepRow& row) {
      std::cerr << gdt::sweep_cell_name(row.lambda, row.seed, row.n_per_class)
                << (row.diverged ? "  diverged" : "  gap " + gdt::format_double(row.gap)) << '\n';
    });
    for (const gdt::SweepSummaryRow& row : s.summary)
      std::cerr << "lambda " << gdt::format_double(row.lambda) << "  n " << row.n_per_class << "  |gap| "
                << gdt::format_double(row.abs_gap.mean) << "  knn " << gdt::format_double(row.knn_accuracy.mean)
                << '\n';
  } else {
    const gdt::Verb v = verb == "train" ? gdt::Verb::Train : verb == "eval" ? gdt::Verb::Eval : gdt::Verb::Robustness;
    print_summary(gdt::run_single(cfg, v, stage.dir()), v == gdt::Verb::Train);
  }
  stage.commit();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise cosine-similarity transform training and robustness diagnostics"};
  app.require_subcommand(1);
  Options opt;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", opt.overrides, "override a setting, key=value (repeatable)");
    sub->add_option("--out", opt.out, "output directory (overrides output_dir)");
  };
  const std::vector<std::pair<std::string, std::string>> verbs{
      {"gen-data", "write the train/test split as CSV"},
      {"train", "train a network and write log, model, eval and robustness reports"},
      {"eval", "evaluate the network at model.path"},
      {"robustness", "robustness diagnostics for the network at model.path"},
      {"sweep", "train every lambda x seed x size cell and summarize"}};
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (name == "sweep") sub->add_option("--jobs", opt.jobs, "parallel workers")->check(CLI::Range(1u, 1024u));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    return run(verb, opt);
  } catch (const gdt::TrainingDiverged& e) {
    std::cerr << "error: training diverged at epoch " << e.epoch() << ": " << e.what() << '\n';
    return kDiverged;
  } catch (const gdt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const gdt::ParseError& e) {
    std::cerr << "parse error (line " << e.line() << "): " << e.what() << '\n';
    return kInputError;
  } catch (const gdt::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kInputError;
  } catch (const gdt::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
