#pragma once

#include <cstdint>
#include <vector>

#include "selfcrowd/dataset.hpp"
#include "selfcrowd/rng.hpp"

namespace selfcrowd {

/// Parameters of the synthetic crowd generator. Defaults mirror the LabelMe
/// crowd: 8 classes, 59 workers, 69.2% +- 18.1% worker accuracy and 2.547
/// annotations per training image.
struct SynthConfig {
  int num_classes = 8;
  int num_instances = 1000;
  int num_test_instances = 1688;
  int feature_dim = 16;
  /// Empty means labelme_like_priors(num_classes).
  std::vector<double> class_priors;
  /// Distance between class centroids in units of the within-class std.
  double cluster_separation = 3.0;
  int num_workers = 59;
  double worker_accuracy_mean = 0.692;
  double worker_accuracy_std = 0.181;
  double annotations_per_instance_mean = 2.547;
  std::uint64_t seed = 1;

  /// Priors actually used (resolves the empty default).
  std::vector<double> resolved_priors() const;
  /// Throws ConfigError with a "synth.<field>" path.
  void validate() const;
};

/// Mild linear ramp whose class-proportion std is ~1.85%, like the LabelMe
/// ground truth.
std::vector<double> labelme_like_priors(int num_classes);

/// Geometric priors whose largest/smallest ratio is `max_to_min`, largest first.
std::vector<double> skewed_priors(int num_classes, double max_to_min);

/// Row = true class, column = emitted label. Rows sum to one.
struct WorkerProfile {
  Eigen::MatrixXd confusion;

  /// Diagonal `accuracy`, remaining mass spread uniformly off the diagonal.
  static WorkerProfile uniform_noise(int num_classes, double accuracy);
};

struct SparsityConfig {
  double removal_fraction = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GeneratedData {
  CrowdDataset train;  // annotations + ground truth
  CrowdDataset test;   // ground truth only
  std::vector<WorkerProfile> workers;
};

/// One label drawn from row `true_class` of the worker's confusion matrix.
int sample_worker_annotation(const WorkerProfile& profile, int true_class, Rng& rng);

/// Deterministic in config.seed. Single-threaded by construction.
GeneratedData generate_crowd_dataset(const SynthConfig& config);

/// Removes exactly round(p * |annotations|) annotations uniformly without
/// replacement. Everything else is copied unchanged; remaining annotations
/// keep their relative order.
CrowdDataset sparsify(const CrowdDataset& dataset, const SparsityConfig& config);

}  // namespace selfcrowd
