#include "selfcrowd/selftrain.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "selfcrowd/errors.hpp"
#include "selfcrowd/rng.hpp"
#include "selfcrowd/synth.hpp"

namespace selfcrowd {

namespace {

enum SeedStream : std::uint64_t {
  kTrainStream = 11,
  kSelectStream = 12,
  kSweepSparsifyStream = 13,
  kSweepRunStream = 14,
};

void check_inputs(const CrowdDataset& train, const CrowdDataset& test) {
  require_valid(train);
  require_valid(test);
  if (!test.ground_truth) throw DataError("test split has no ground truth");
  if (test.feature_dim() != train.feature_dim() || test.num_classes != train.num_classes) {
    throw DimensionError("test split shape does not match the training data");
  }
}

std::optional<double> ratio_or_empty(const ClassCounts& counts) {
  if (counts.total == 0) return std::nullopt;
  return imbalance_ratio(counts).ratio;
}

class Runner {
 public:
  Runner(const CrowdDataset& train, const CrowdDataset& test, const SelfTrainConfig& config)
      : train_(train), test_(test), config_(config), combined_(train.annotations) {}

  TrainResult fit(int iteration, const CrowdModel* warm) const {
    TrainConfig tc = config_.train;
    tc.seed = iteration_train_seed(config_.seed, iteration);
    CrowdModel init = warm != nullptr ? *warm
                                      : CrowdModel::initialize(train_.feature_dim(), tc.hidden_units,
                                                               train_.num_classes, train_.num_workers, tc.seed);
    return train(std::move(init), train_.features, combined_, tc);
  }

  IterationRecord record(int iteration, const TrainResult& fitted, const SelectionResult* selection) const {
    IterationRecord rec;
    rec.iteration = iteration;
    rec.test_accuracy = evaluate(fitted.model, test_.features, *test_.ground_truth);
    rec.final_train_loss = fitted.epoch_losses.empty() ? 0.0 : fitted.epoch_losses.back();
    rec.pseudo_counts.assign(static_cast<std::size_t>(train_.num_classes), 0);
    if (selection != nullptr) {
      rec.pseudo_counts = selection->per_class.counts;
      rec.r_pseudo = ratio_or_empty(selection->per_class);
    }
    rec.cumulative_pseudo_total = static_cast<std::int64_t>(pseudo_.size());
    std::vector<int> labels;
    labels.reserve(combined_.size());
    for (const auto& a : combined_) labels.push_back(a.label);
    rec.r_combined = ratio_or_empty(class_counts(labels, train_.num_classes));
    return rec;
  }

  void add(const SelectionResult& selection) {
    for (const auto& s : selection.chosen) {
      const Annotation a{s.instance, s.worker, s.label};
      pseudo_.push_back(a);
      combined_.push_back(a);
    }
  }

  const std::vector<Annotation>& pseudo() const { return pseudo_; }

 private:
  const CrowdDataset& train_;
  const CrowdDataset& test_;
  const SelfTrainConfig& config_;
  std::vector<Annotation> combined_;
  std::vector<Annotation> pseudo_;
};

}  // namespace

std::string_view retrain_mode_name(RetrainMode m) { return m == RetrainMode::kCold ? "cold" : "warm"; }

std::optional<RetrainMode> parse_retrain_mode(std::string_view name) {
  if (name == "cold") return RetrainMode::kCold;
  if (name == "warm") return RetrainMode::kWarm;
  return std::nullopt;
}

void SelfTrainConfig::validate() const {
  if (pseudo_per_iteration < 1) throw ConfigError("selftrain.pseudo_per_iteration", "must be >= 1");
  if (num_iterations < 1) throw ConfigError("selftrain.num_iterations", "must be >= 1");
  train.validate();
}

std::uint64_t iteration_train_seed(std::uint64_t master, int iteration) {
  return derive_seed(master, {kTrainStream, static_cast<std::uint64_t>(iteration)});
}

std::uint64_t iteration_selection_seed(std::uint64_t master, int iteration) {
  return derive_seed(master, {kSelectStream, static_cast<std::uint64_t>(iteration)});
}

RunHistory run_self_training(const CrowdDataset& train, const CrowdDataset& test, const SelfTrainConfig& config) {
  config.validate();
  check_inputs(train, test);

  RunHistory history;
  history.config = config;
  Runner runner(train, test, config);

  TrainResult current;
  try {
    current = runner.fit(0, nullptr);
  } catch (const DivergenceError& e) {
    history.diverged = e.what();
    return history;
  }
  history.records.push_back(runner.record(0, current, nullptr));

  for (int t = 1; t <= config.num_iterations; ++t) {
    const auto candidates = predict_pseudo_candidates(current.model, train, runner.pseudo());
    if (candidates.empty()) {
      history.pool_exhausted = true;
      break;
    }
    auto selection = select(config.strategy, candidates, config.pseudo_per_iteration, train.num_classes,
                            iteration_selection_seed(config.seed, t));
    runner.add(selection);
    try {
      current = runner.fit(t, config.retrain_mode == RetrainMode::kWarm ? &current.model : nullptr);
    } catch (const DivergenceError& e) {
      history.diverged = "iteration " + std::to_string(t) + ": " + e.what();
      history.selections.push_back({t, std::move(selection)});
      break;
    }
    history.records.push_back(runner.record(t, current, &selection));
    history.selections.push_back({t, std::move(selection)});
  }
  history.final_model = std::move(current.model);
  return history;
}

double baseline_accuracy(const CrowdDataset& train, const CrowdDataset& test, const SelfTrainConfig& config) {
  config.validate();
  check_inputs(train, test);
  Runner runner(train, test, config);
  const auto fitted = runner.fit(0, nullptr);
  return evaluate(fitted.model, test.features, *test.ground_truth);
}

void SweepConfig::validate() const {
  if (removal_fractions.empty()) throw ConfigError("sweep.removal_fractions", "must not be empty");
  for (double p : removal_fractions) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("sweep.removal_fractions", "entries must lie in [0, 1)");
  }
  if (repeats < 1) throw ConfigError("sweep.repeats", "must be >= 1");
  if (methods.empty()) throw ConfigError("sweep.methods", "must not be empty");
  for (const auto& m : methods) {
    if (m != "baseline" && !parse_strategy(m)) throw ConfigError("sweep.methods", "unknown method '" + m + "'");
  }
  if (jobs < 1) throw ConfigError("sweep.jobs", "must be >= 1");
}

std::uint64_t sweep_sparsify_seed(std::uint64_t master, int repeat) {
  return derive_seed(master, {kSweepSparsifyStream, static_cast<std::uint64_t>(repeat)});
}

std::uint64_t sweep_run_seed(std::uint64_t master, int repeat) {
  return derive_seed(master, {kSweepRunStream, static_cast<std::uint64_t>(repeat)});
}

SweepResult sweep_sparsity(const CrowdDataset& train, const CrowdDataset& test, const SweepConfig& sweep,
                           const SelfTrainConfig& base) {
  sweep.validate();
  base.validate();
  check_inputs(train, test);

  SweepResult out;
  for (double p : sweep.removal_fractions)
    for (const auto& m : sweep.methods)
      for (int k = 0; k < sweep.repeats; ++k) out.cells.push_back({p, m, k, std::nullopt, {}});

  auto run_cell = [&](SweepCell& cell) {
    try {
      const auto sparse = sparsify(train, {cell.removal_fraction, sweep_sparsify_seed(sweep.seed, cell.repeat)});
      SelfTrainConfig cfg = base;
      cfg.seed = sweep_run_seed(sweep.seed, cell.repeat);
      if (cell.method == "baseline") {
        cell.accuracy = baseline_accuracy(sparse, test, cfg);
        return;
      }
      cfg.strategy = *parse_strategy(cell.method);
      const auto history = run_self_training(sparse, test, cfg);
      if (history.diverged) {
        cell.error = *history.diverged;
      } else {
        cell.accuracy = history.records.back().test_accuracy;
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < out.cells.size(); k = next++) run_cell(out.cells[k]);
  };
  const int threads = std::min<int>(sweep.jobs, static_cast<int>(out.cells.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  const std::size_t per_row = static_cast<std::size_t>(sweep.repeats);
  for (std::size_t start = 0; start < out.cells.size(); start += per_row) {
    SweepRow row;
    row.removal_fraction = out.cells[start].removal_fraction;
    row.method = out.cells[start].method;
    std::vector<double> acc;
    for (std::size_t k = start; k < start + per_row; ++k) {
      const auto& cell = out.cells[k];
      if (cell.accuracy) {
        acc.push_back(*cell.accuracy);
      } else {
        if (!row.errors.empty()) row.errors += "; ";
        row.errors += "repeat " + std::to_string(cell.repeat) + ": " + cell.error;
      }
    }
    row.runs_ok = static_cast<int>(acc.size());
    if (acc.empty()) {
      row.mean_accuracy = std::numeric_limits<double>::quiet_NaN();
    } else {
      double mean = 0.0;
      for (double a : acc) mean += a;
      mean /= static_cast<double>(acc.size());
      double ss = 0.0;
      for (double a : acc) ss += (a - mean) * (a - mean);
      row.mean_accuracy = mean;
      row.std_accuracy = acc.size() > 1 ? std::sqrt(ss / static_cast<double>(acc.size() - 1)) : 0.0;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace selfcrowd
