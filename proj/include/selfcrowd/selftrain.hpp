#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selfcrowd/crowdlayer.hpp"
#include "selfcrowd/dataset.hpp"
#include "selfcrowd/selection.hpp"

namespace selfcrowd {

enum class RetrainMode { kCold, kWarm };

std::string_view retrain_mode_name(RetrainMode m);
std::optional<RetrainMode> parse_retrain_mode(std::string_view name);

struct SelfTrainConfig {
  Strategy strategy = Strategy::kBalanced;
  std::int64_t pseudo_per_iteration = 10000;
  int num_iterations = 14;
  TrainConfig train;
  RetrainMode retrain_mode = RetrainMode::kCold;
  std::uint64_t seed = 1;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;  // 0 = observed annotations only
  double test_accuracy = 0.0;
  std::optional<double> r_pseudo;    // imbalance ratio of this iteration's selections
  std::optional<double> r_combined;  // observed + every pseudo-annotation so far
  std::vector<std::int64_t> pseudo_counts;  // this iteration's selections per class
  std::int64_t cumulative_pseudo_total = 0;
  double final_train_loss = 0.0;  // last epoch's mean data loss
};

struct IterationSelection {
  int iteration = 0;
  SelectionResult result;
};

struct RunHistory {
  SelfTrainConfig config;
  std::vector<IterationRecord> records;       // iteration 0..T, or fewer on early stop
  std::vector<IterationSelection> selections;  // one per iteration >= 1
  CrowdModel final_model;
  bool pool_exhausted = false;          // stopped early: no candidates left
  std::optional<std::string> diverged;  // set when training diverged; records are partial
};

/// Seed of the model trained at `iteration`. Cold retrains also initialize
/// from it. Independent of the strategy.
std::uint64_t iteration_train_seed(std::uint64_t master, int iteration);

/// Seed handed to the random strategy at `iteration`.
std::uint64_t iteration_selection_seed(std::uint64_t master, int iteration);

/// Train on the observed annotations, then repeatedly score unannotated
/// (instance, worker) pairs, select pseudo-annotations with the configured
/// strategy, add them as hard labels and retrain. `test` needs ground truth.
///
/// Throws DataError on invalid inputs. A training divergence does not throw:
/// the returned history carries the records gathered so far and `diverged`.
RunHistory run_self_training(const CrowdDataset& train, const CrowdDataset& test, const SelfTrainConfig& config);

/// Test accuracy after training on the observed annotations only, with the
/// same seed a self-training run would use for its iteration 0.
double baseline_accuracy(const CrowdDataset& train, const CrowdDataset& test, const SelfTrainConfig& config);

// Sparsity sweep.

struct SweepConfig {
  std::vector<double> removal_fractions = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int repeats = 5;
  std::vector<std::string> methods = {"baseline", "random", "confidence", "balanced"};
  std::uint64_t seed = 1;
  int jobs = 1;

  void validate() const;
};

struct SweepCell {
  double removal_fraction = 0.0;
  std::string method;
  int repeat = 0;
  std::optional<double> accuracy;
  std::string error;
};

struct SweepRow {
  double removal_fraction = 0.0;
  std::string method;
  double mean_accuracy = 0.0;  // NaN when every repeat failed
  double std_accuracy = 0.0;   // sample std over successful repeats, 0 for one run
  int runs_ok = 0;
  std::string errors;          // "; "-joined messages of failed repeats
};

struct SweepResult {
  std::vector<SweepCell> cells;  // p-major, then method, then repeat
  std::vector<SweepRow> rows;    // p-major, then method
};

/// Seed of the sparsification in repeat `repeat`. The same for every p, so
/// larger p removes a superset of what smaller p removes.
std::uint64_t sweep_sparsify_seed(std::uint64_t master, int repeat);

/// Master seed of the self-training runs in repeat `repeat`.
std::uint64_t sweep_run_seed(std::uint64_t master, int repeat);

/// For every p, method and repeat: sparsify the training annotations, then
/// run self-training ("baseline" trains once on the remaining observations).
/// Cells are independent; `jobs > 1` runs them on worker threads with
/// identical results.
SweepResult sweep_sparsity(const CrowdDataset& train, const CrowdDataset& test, const SweepConfig& sweep,
                           const SelfTrainConfig& base);

}  // namespace selfcrowd
