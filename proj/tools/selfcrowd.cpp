// selfcrowd: generate crowd datasets, run self-training, sweep sparsity.
//
//   selfcrowd gen       -c run.ini [-o DIR]
//   selfcrowd selftrain -c run.ini [-o DIR] [--replay run.json]
//   selfcrowd sweep     -c run.ini [-o DIR] [--jobs N]
//   selfcrowd eval      --checkpoint model.ckpt --dataset DIR
//   selfcrowd validate  --dataset DIR
//
// Any config value can be overridden with --set section.key=value.
// Precedence: flags > $SELFCROWD_OUTPUT_DIR > config file > defaults.

#include <iostream>

#include "CLI11.hpp"

#include "selfcrowd/cli.hpp"
#include "selfcrowd/dataset_io.hpp"
#include "selfcrowd/errors.hpp"
#include "selfcrowd/text_util.hpp"

namespace sc = selfcrowd;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string output_dir;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "INI config file (optional; defaults apply)");
    cmd->add_option("-o,--output", output_dir, "output directory (overrides run.output_dir)");
    cmd->add_option("--set", overrides, "override a value: section.key=value (repeatable)");
  }

  std::vector<std::string> all_overrides() const {
    auto o = overrides;
    if (!output_dir.empty()) o.push_back("run.output_dir=" + output_dir);
    return o;
  }

  sc::RunConfig load() const { return sc::load_run_config(config_path, all_overrides()); }
};

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const sc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return sc::cli::kConfigError;
  } catch (const sc::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return sc::cli::kDataError;
  } catch (const sc::DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << '\n';
    return sc::cli::kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sc::cli::kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-training for sparse, class-imbalanced crowdsourced labels"};
  app.set_version_flag("--version", sc::cli::kToolVersion);
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, sweep_opts;
  auto* gen = app.add_subcommand("gen", "generate a synthetic train/test dataset bundle");
  gen_opts.attach(gen);

  auto* selftrain = app.add_subcommand("selftrain", "run self-training and write history.csv + run.json");
  train_opts.attach(selftrain);
  std::string replay;
  selftrain->add_option("--replay", replay, "re-run the config embedded in a run.json");

  auto* sweep = app.add_subcommand("sweep", "sparsity sweep over removal fractions and strategies");
  sweep_opts.attach(sweep);
  int jobs = 0;
  sweep->add_option("--jobs", jobs, "parallel sweep cells (overrides sweep.jobs)")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "accuracy of a checkpoint on a labelled bundle");
  std::string ckpt_path, eval_dataset;
  eval->add_option("--checkpoint", ckpt_path, "model.ckpt written by selftrain")->required();
  eval->add_option("--dataset", eval_dataset, "bundle directory with truth.csv")->required();

  auto* validate = app.add_subcommand("validate", "check a dataset bundle and list every violation");
  std::string validate_dataset;
  validate->add_option("--dataset", validate_dataset, "bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sc::cli::kConfigError;
  }

  if (*gen) {
    return guarded([&] {
      const auto config = gen_opts.load();
      sc::cli::cmd_gen(config);
      std::cout << "wrote " << (config.output_dir / "train").string() << " and "
                << (config.output_dir / "test").string() << '\n';
      return 0;
    });
  }
  if (*selftrain) {
    return guarded([&] {
      const auto config = replay.empty() ? train_opts.load() : sc::cli::replay_config(replay, train_opts.all_overrides());
      const int rc = sc::cli::cmd_selftrain(config);
      std::cout << "wrote " << (config.output_dir / "history.csv").string() << '\n';
      return rc;
    });
  }
  if (*sweep) {
    return guarded([&] {
      auto overrides = sweep_opts.all_overrides();
      if (jobs > 0) overrides.push_back("sweep.jobs=" + std::to_string(jobs));
      const auto config = sc::load_run_config(sweep_opts.config_path, overrides);
      const int rc = sc::cli::cmd_sweep(config);
      std::cout << "wrote " << (config.output_dir / "sweep.csv").string() << '\n';
      return rc;
    });
  }
  if (*eval) {
    return guarded([&] {
      std::cout << "accuracy=" << sc::text::format_double(sc::cli::cmd_eval(ckpt_path, eval_dataset)) << '\n';
      return 0;
    });
  }
  if (*validate) {
    return guarded([&] {
      const auto ds = sc::read_dataset(validate_dataset);
      const auto report = sc::validate_dataset(ds);
      for (const auto& v : report) std::cout << v.message << '\n';
      std::cout << report.size() << " violation(s)\n";
      return report.empty() ? 0 : static_cast<int>(sc::cli::kDataError);
    });
  }
  return 0;
}
