#pragma once

#include <filesystem>
#include <string>

#include "selfcrowd/config.hpp"
#include "selfcrowd/dataset.hpp"

namespace selfcrowd::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Process exit statuses; stable for scripting.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kDivergence = 4,
};

/// 64-bit FNV-1a of the canonical config text, as 16 hex digits.
std::string config_hash(const std::string& canonical_ini);

struct Inputs {
  CrowdDataset train;
  CrowdDataset test;
};

/// Loads <dataset>/train and <dataset>/test, or generates them from [synth]
/// when run.dataset is empty. With `apply_sparsity` the training
/// annotations are then thinned by [sparsity].
Inputs prepare_inputs(const RunConfig& config, bool apply_sparsity);

/// Writes <output_dir>/train, <output_dir>/test and provenance.json.
void cmd_gen(const RunConfig& config);

/// Writes history.csv, selections.csv, model.ckpt and run.json into the
/// output directory. Returns kDivergence (after writing the partial
/// history) when training diverged, kOk otherwise.
int cmd_selftrain(const RunConfig& config);

/// Writes sweep.csv and run.json. Returns kFailure only if every cell failed.
int cmd_sweep(const RunConfig& config);

/// Accuracy of a checkpoint on a bundle with ground truth.
double cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset_dir);

/// Config embedded in a run.json written by selftrain or sweep.
RunConfig replay_config(const std::filesystem::path& run_json, const std::vector<std::string>& overrides = {});

}  // namespace selfcrowd::cli
