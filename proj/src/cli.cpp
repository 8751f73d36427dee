#include "selfcrowd/cli.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "selfcrowd/checkpoint.hpp"
#include "selfcrowd/dataset_io.hpp"
#include "selfcrowd/errors.hpp"
#include "selfcrowd/report.hpp"
#include "selfcrowd/selftrain.hpp"
#include "selfcrowd/synth.hpp"

namespace selfcrowd::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

json provenance(const RunConfig& config, const std::string& command) {
  const std::string ini = to_ini(config);
  json j;
  j["tool"] = "selfcrowd";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["seed"] = config.seed;
  j["config_hash"] = config_hash(ini);
  j["config"] = ini;
  return j;
}

void write_json(const fs::path& p, const json& j) {
  auto out = open_out(p);
  out << j.dump(2) << '\n';
}

}  // namespace

std::string config_hash(const std::string& canonical_ini) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_ini) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Inputs prepare_inputs(const RunConfig& config, bool apply_sparsity) {
  Inputs in;
  if (config.dataset_dir.empty()) {
    auto gen = generate_crowd_dataset(config.synth);
    in.train = std::move(gen.train);
    in.test = std::move(gen.test);
  } else {
    in.train = load_dataset(config.dataset_dir / "train");
    in.test = load_dataset(config.dataset_dir / "test");
  }
  if (apply_sparsity && config.sparsity.removal_fraction > 0.0) in.train = sparsify(in.train, config.sparsity);
  return in;
}

void cmd_gen(const RunConfig& config) {
  const auto gen = generate_crowd_dataset(config.synth);
  fs::create_directories(config.output_dir);
  save_dataset(gen.train, config.output_dir / "train");
  save_dataset(gen.test, config.output_dir / "test");
  auto j = provenance(config, "gen");
  const auto counts = annotation_counts(gen.train);
  j["train_instances"] = gen.train.num_instances();
  j["test_instances"] = gen.test.num_instances();
  j["annotations"] = gen.train.annotations.size();
  if (counts.total > 0) {
    const auto stats = imbalance_ratio(counts);
    j["annotation_imbalance_ratio"] = stats.ratio;
    j["annotation_class_std_percent"] = stats.class_std_percent;
  }
  write_json(config.output_dir / "provenance.json", j);
}

int cmd_selftrain(const RunConfig& config) {
  const auto in = prepare_inputs(config, true);
  const auto history = run_self_training(in.train, in.test, config.selftrain);
  fs::create_directories(config.output_dir);
  {
    auto out = open_out(config.output_dir / "history.csv");
    write_history_csv(out, history, in.train.num_classes);
  }
  {
    auto out = open_out(config.output_dir / "selections.csv");
    write_selections_csv(out, history);
  }
  if (!history.diverged) {
    TrainConfig tc = config.selftrain.train;
    tc.seed = iteration_train_seed(config.selftrain.seed, history.records.back().iteration);
    save_checkpoint({history.final_model, tc}, config.output_dir / "model.ckpt");
  }

  auto j = provenance(config, "selftrain");
  j["outputs"] = {"history.csv", "selections.csv", "model.ckpt"};
  j["iterations_completed"] = history.records.empty() ? 0 : history.records.back().iteration;
  j["pool_exhausted"] = history.pool_exhausted;
  j["diverged"] = history.diverged ? json(*history.diverged) : json(nullptr);
  if (!history.records.empty()) {
    const auto& last = history.records.back();
    j["final"] = {{"test_accuracy", last.test_accuracy},
                  {"cumulative_pseudo_total", last.cumulative_pseudo_total},
                  {"r_combined", last.r_combined ? json(*last.r_combined) : json(nullptr)}};
  }
  write_json(config.output_dir / "run.json", j);
  return history.diverged ? kDivergence : kOk;
}

int cmd_sweep(const RunConfig& config) {
  const auto in = prepare_inputs(config, false);
  const auto result = sweep_sparsity(in.train, in.test, config.sweep, config.selftrain);
  fs::create_directories(config.output_dir);
  {
    auto out = open_out(config.output_dir / "sweep.csv");
    write_sweep_csv(out, result);
  }
  auto j = provenance(config, "sweep");
  j["outputs"] = {"sweep.csv"};
  std::size_t failed = 0;
  for (const auto& cell : result.cells) failed += cell.accuracy ? 0 : 1;
  j["cells"] = result.cells.size();
  j["failed_cells"] = failed;
  write_json(config.output_dir / "run.json", j);
  return failed == result.cells.size() ? kFailure : kOk;
}

double cmd_eval(const fs::path& checkpoint, const fs::path& dataset_dir) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto ds = load_dataset(dataset_dir);
  if (!ds.ground_truth) throw DataError(dataset_dir.string() + " has no truth.csv");
  return evaluate(ckpt.model, ds.features, *ds.ground_truth);
}

RunConfig replay_config(const fs::path& run_json, const std::vector<std::string>& overrides) {
  std::ifstream in(run_json, std::ios::binary);
  if (!in) throw ConfigError("<replay>", "cannot read " + run_json.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("<replay>", std::string("invalid run.json: ") + e.what());
  }
  if (!j.contains("config") || !j["config"].is_string()) throw ConfigError("<replay>", "run.json has no config");
  return parse_run_config(j["config"].get<std::string>(), overrides);
}

}  // namespace selfcrowd::cli
