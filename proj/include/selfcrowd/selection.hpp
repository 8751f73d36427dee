#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfcrowd/candidate.hpp"
#include "selfcrowd/dataset.hpp"

namespace selfcrowd {

enum class Strategy { kRandom, kConfidence, kBalanced };

/// "random" | "confidence" | "balanced"
std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

/// Shannon entropy in nats, 0 * log 0 = 0. Throws DataError when the entries
/// do not sum to 1 within 1e-6 or any entry is negative.
double entropy(std::span<const double> distribution);

struct SelectionQuota {
  std::int64_t total = 0;               // min(M, available candidates)
  std::vector<std::int64_t> per_class;  // M_c, sums to `total`, M_c <= N'_c
  std::vector<double> fractions;        // t_c, proportional to 1/N'_c, zero for empty classes
};

/// Per-class selection counts inversely proportional to the candidate class
/// counts N'_c. Integerized by largest remainder (ties to the lower class);
/// a class whose share exceeds its supply is filled and the rest is
/// re-apportioned among the others.
SelectionQuota quotas(const ClassCounts& candidate_counts, std::int64_t total);

struct SelectedPseudo {
  int instance = 0;
  int worker = 0;
  int label = 0;  // 0-based argmax class
  double entropy = 0.0;

  friend bool operator==(const SelectedPseudo&, const SelectedPseudo&) = default;
};

struct SelectionResult {
  std::vector<SelectedPseudo> chosen;
  ClassCounts per_class;
  Strategy strategy = Strategy::kBalanced;
};

/// Candidate order used for every "most confident" choice: entropy, then
/// instance, then worker.
bool more_confident(const PseudoCandidate& a, const PseudoCandidate& b);

/// The M_c most confident candidates of each argmax class, with N'_c counted
/// over this pool. Output grouped by class, confidence order within a class.
SelectionResult select_distribution_aware(std::span<const PseudoCandidate> candidates, std::int64_t total,
                                          int num_classes);

/// Globally most confident min(M, |pool|) candidates, in confidence order.
SelectionResult select_confidence(std::span<const PseudoCandidate> candidates, std::int64_t total,
                                  int num_classes);

/// Uniform sample without replacement of min(M, |pool|) candidates.
SelectionResult select_random(std::span<const PseudoCandidate> candidates, std::int64_t total, int num_classes,
                              std::uint64_t seed);

SelectionResult select(Strategy strategy, std::span<const PseudoCandidate> candidates, std::int64_t total,
                       int num_classes, std::uint64_t seed);

}  // namespace selfcrowd
