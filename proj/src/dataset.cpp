#include "selfcrowd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "selfcrowd/errors.hpp"

namespace selfcrowd {

bool operator==(const CrowdDataset& a, const CrowdDataset& b) {
  return a.num_classes == b.num_classes && a.num_workers == b.num_workers &&
         a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
         a.features == b.features && a.annotations == b.annotations &&
         a.ground_truth == b.ground_truth;
}

ClassCounts class_counts(std::span<const int> labels, int num_classes) {
  ClassCounts out;
  out.counts.assign(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const int c = labels[k];
    if (c < 0 || c >= num_classes) {
      throw DataError("label at index " + std::to_string(k) + " is " + std::to_string(c + 1) +
                      ", outside 1.." + std::to_string(num_classes));
    }
    ++out.counts[static_cast<std::size_t>(c)];
  }
  out.total = static_cast<std::int64_t>(labels.size());
  return out;
}

ClassCounts annotation_counts(const CrowdDataset& dataset) {
  std::vector<int> labels;
  labels.reserve(dataset.annotations.size());
  for (const auto& a : dataset.annotations) labels.push_back(a.label);
  return class_counts(labels, dataset.num_classes);
}

ImbalanceStats imbalance_ratio(const ClassCounts& counts) {
  if (counts.total <= 0 || counts.counts.empty()) {
    throw DataError("imbalance ratio undefined: no annotations");
  }
  const auto [lo, hi] = std::minmax_element(counts.counts.begin(), counts.counts.end());
  ImbalanceStats s;
  s.n_max = *hi;
  s.n_min = *lo;
  s.n_anno = counts.total;
  s.ratio = static_cast<double>(s.n_max - s.n_min) / static_cast<double>(s.n_anno);
  s.class_std_percent = class_proportion_std(counts);
  return s;
}

double class_proportion_std(const ClassCounts& counts) {
  if (counts.total <= 0 || counts.counts.empty()) {
    throw DataError("class proportion std undefined: no annotations");
  }
  const double n = static_cast<double>(counts.total);
  const double k = static_cast<double>(counts.counts.size());
  double mean = 0.0;
  for (auto c : counts.counts) mean += static_cast<double>(c) / n;
  mean /= k;
  double var = 0.0;
  for (auto c : counts.counts) {
    const double d = static_cast<double>(c) / n - mean;
    var += d * d;
  }
  return 100.0 * std::sqrt(var / k);
}

ValidationReport validate_dataset(const CrowdDataset& ds) {
  ValidationReport report;
  auto add = [&](Violation::Kind kind, int i, int r, std::string msg) {
    report.push_back({kind, i, r, std::move(msg)});
  };
  if (ds.num_classes < 2) add(Violation::Kind::kDimension, -1, -1, "num_classes must be >= 2");
  if (ds.num_workers < 1) add(Violation::Kind::kDimension, -1, -1, "num_workers must be >= 1");
  if (ds.num_instances() < 1) add(Violation::Kind::kDimension, -1, -1, "no instances");
  if (ds.feature_dim() < 1) add(Violation::Kind::kDimension, -1, -1, "feature_dim must be >= 1");

  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    if (!ds.features.row(i).allFinite()) {
      add(Violation::Kind::kNonFiniteFeature, static_cast<int>(i), -1,
          "instance " + std::to_string(i) + " has a non-finite feature");
    }
  }

  std::set<std::pair<int, int>> seen;
  for (const auto& a : ds.annotations) {
    const std::string where =
        "(instance " + std::to_string(a.instance) + ", worker " + std::to_string(a.worker) + ")";
    if (a.instance < 0 || a.instance >= ds.num_instances() || a.worker < 0 ||
        a.worker >= ds.num_workers) {
      add(Violation::Kind::kIndexOutOfRange, a.instance, a.worker, where + " index out of range");
      continue;
    }
    if (a.label < 0 || a.label >= ds.num_classes) {
      add(Violation::Kind::kLabelOutOfRange, a.instance, a.worker,
          where + " label " + std::to_string(a.label + 1) + " outside 1.." +
              std::to_string(ds.num_classes));
    }
    if (!seen.emplace(a.instance, a.worker).second) {
      add(Violation::Kind::kDuplicatePair, a.instance, a.worker, where + " annotated twice");
    }
  }

  if (ds.ground_truth) {
    const auto& gt = *ds.ground_truth;
    if (static_cast<int>(gt.size()) != ds.num_instances()) {
      add(Violation::Kind::kGroundTruth, -1, -1,
          "ground truth has " + std::to_string(gt.size()) + " labels for " +
              std::to_string(ds.num_instances()) + " instances");
    }
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i] < 0 || gt[i] >= ds.num_classes) {
        add(Violation::Kind::kGroundTruth, static_cast<int>(i), -1,
            "ground truth of instance " + std::to_string(i) + " outside 1.." +
                std::to_string(ds.num_classes));
      }
    }
  }
  return report;
}

void require_valid(const CrowdDataset& dataset) {
  const auto report = validate_dataset(dataset);
  if (report.empty()) return;
  std::string msg = std::to_string(report.size()) + " dataset violation(s): " + report.front().message;
  if (report.size() > 1) msg += " ...";
  throw DataError(msg);
}

}  // namespace selfcrowd
