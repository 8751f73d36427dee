#pragma once

#include <filesystem>

#include "selfcrowd/dataset.hpp"

namespace selfcrowd {

// On-disk bundle, one directory per dataset:
//
//   meta             key=value lines: format, num_classes, num_workers,
//                    num_instances, feature_dim, has_truth
//   features.csv     N rows of d comma-separated reals, no header
//   annotations.csv  header "instance,worker,label"; 0-based instance and
//                    worker, label in 1..C (0 is reserved for "missing")
//   truth.csv        optional; header "instance,label"

inline constexpr const char* kBundleFormat = "selfcrowd-bundle-1";

/// Writes the bundle, creating `dir` if needed. Byte-stable for equal datasets.
void save_dataset(const CrowdDataset& dataset, const std::filesystem::path& dir);

/// Parses a bundle without semantic validation. Malformed rows throw
/// ParseError with the line number; row/column counts that disagree with
/// meta throw DimensionError.
CrowdDataset read_dataset(const std::filesystem::path& dir);

/// read_dataset() followed by require_valid().
CrowdDataset load_dataset(const std::filesystem::path& dir);

/// Answer-matrix layout used by several public crowd releases: one
/// whitespace-separated row per instance, one column per worker, 0-based
/// class or -1 where the worker gave no label. Returns 0-based annotations.
std::vector<Annotation> read_answer_matrix(const std::filesystem::path& path);

/// One 0-based class label per line.
std::vector<int> read_label_list(const std::filesystem::path& path);

}  // namespace selfcrowd
