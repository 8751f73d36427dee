#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace selfcrowd {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Class labels are 0-based inside the library. Files and printed output use
// 1..C, with 0 reserved for "not annotated"; conversion happens in dataset_io
// and report writers only.

struct Annotation {
  int instance = 0;
  int worker = 0;
  int label = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Instances, sparse worker annotations and optional ground truth.
///
/// This is a plain value: nothing stops a caller from building an invalid
/// one, which is what validate_dataset() is for. Loaders and generators only
/// hand out datasets that pass validation.
struct CrowdDataset {
  FeatureMatrix features;  // N x d
  std::vector<Annotation> annotations;
  std::optional<std::vector<int>> ground_truth;
  int num_classes = 0;
  int num_workers = 0;

  int num_instances() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }

  std::span<const double> instance_features(int i) const {
    return {features.data() + static_cast<std::ptrdiff_t>(i) * features.cols(),
            static_cast<std::size_t>(features.cols())};
  }

  friend bool operator==(const CrowdDataset& a, const CrowdDataset& b);
};

struct ClassCounts {
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;

  int num_classes() const { return static_cast<int>(counts.size()); }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct ImbalanceStats {
  double ratio = 0.0;
  std::int64_t n_max = 0;
  std::int64_t n_min = 0;
  std::int64_t n_anno = 0;
  double class_std_percent = 0.0;
};

/// Tally of 0-based labels. Throws DataError naming the first out-of-range index.
ClassCounts class_counts(std::span<const int> labels, int num_classes);

/// Per-class tally of a dataset's annotation labels.
ClassCounts annotation_counts(const CrowdDataset& dataset);

/// (N_max - N_min) / N_anno over all classes, zero-count classes included.
/// Throws DataError when counts.total == 0.
ImbalanceStats imbalance_ratio(const ClassCounts& counts);

/// Population standard deviation of the per-class proportions, in percent.
double class_proportion_std(const ClassCounts& counts);

struct Violation {
  enum class Kind { kLabelOutOfRange, kDuplicatePair, kIndexOutOfRange, kDimension, kGroundTruth, kNonFiniteFeature };
  Kind kind;
  int instance = -1;
  int worker = -1;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

/// Every invariant violation in the dataset; empty means valid.
ValidationReport validate_dataset(const CrowdDataset& dataset);

/// Throws DataError summarizing the report if it is non-empty.
void require_valid(const CrowdDataset& dataset);

}  // namespace selfcrowd
