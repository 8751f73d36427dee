#include "selfcrowd/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selfcrowd/errors.hpp"
#include "selfcrowd/rng.hpp"

namespace selfcrowd {

namespace {

SelectionResult make_result(Strategy strategy, std::span<const PseudoCandidate> pool,
                            const std::vector<std::size_t>& picked, int num_classes) {
  SelectionResult out;
  out.strategy = strategy;
  out.chosen.reserve(picked.size());
  std::vector<int> labels;
  labels.reserve(picked.size());
  for (auto k : picked) {
    const auto& c = pool[k];
    out.chosen.push_back({c.instance, c.worker, c.argmax_class, c.entropy});
    labels.push_back(c.argmax_class);
  }
  out.per_class = class_counts(labels, num_classes);
  return out;
}

std::vector<std::size_t> most_confident(std::span<const PseudoCandidate> pool, std::vector<std::size_t> idx,
                                        std::size_t take) {
  take = std::min(take, idx.size());
  auto less = [&](std::size_t a, std::size_t b) { return more_confident(pool[a], pool[b]); };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), less);
  idx.resize(take);
  return idx;
}

std::size_t clamp_total(std::int64_t total, std::size_t available) {
  if (total <= 0) return 0;
  return std::min(static_cast<std::size_t>(total), available);
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kRandom: return "random";
    case Strategy::kConfidence: return "confidence";
    case Strategy::kBalanced: return "balanced";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (auto s : {Strategy::kRandom, Strategy::kConfidence, Strategy::kBalanced}) {
    if (strategy_name(s) == name) return s;
  }
  return std::nullopt;
}

double entropy(std::span<const double> p) {
  double sum = 0.0;
  double h = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw DataError("entropy of a vector with a negative or NaN entry");
    sum += x;
    if (x > 0.0) h -= x * std::log(x);
  }
  if (std::abs(sum - 1.0) > 1e-6) throw DataError("entropy of a vector summing to " + std::to_string(sum));
  return std::max(h, 0.0);
}

SelectionQuota quotas(const ClassCounts& candidate_counts, std::int64_t total) {
  const auto& supply = candidate_counts.counts;
  const std::size_t C = supply.size();
  SelectionQuota q;
  q.per_class.assign(C, 0);
  q.fractions.assign(C, 0.0);

  std::int64_t available = 0;
  double weight_sum = 0.0;
  std::vector<double> weight(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    if (supply[c] > 0) {
      weight[c] = 1.0 / static_cast<double>(supply[c]);
      weight_sum += weight[c];
      available += supply[c];
    }
  }
  if (available == 0 || total <= 0) return q;
  for (std::size_t c = 0; c < C; ++c) q.fractions[c] = weight[c] / weight_sum;
  q.total = std::min(total, available);

  std::vector<char> open(C);
  for (std::size_t c = 0; c < C; ++c) open[c] = supply[c] > 0;
  std::int64_t remaining = q.total;
  std::vector<std::int64_t> share(C);
  std::vector<double> remainder(C);
  std::vector<std::size_t> order;
  while (remaining > 0) {
    double open_weight = 0.0;
    for (std::size_t c = 0; c < C; ++c) if (open[c]) open_weight += weight[c];

    std::int64_t assigned = 0;
    order.clear();
    for (std::size_t c = 0; c < C; ++c) {
      share[c] = 0;
      remainder[c] = -1.0;
      if (!open[c]) continue;
      const double exact = static_cast<double>(remaining) * weight[c] / open_weight;
      share[c] = static_cast<std::int64_t>(std::floor(exact));
      remainder[c] = exact - static_cast<double>(share[c]);
      assigned += share[c];
      order.push_back(c);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < remaining; ++k, ++assigned) ++share[order[k % order.size()]];

    bool capped = false;
    for (std::size_t c = 0; c < C; ++c) {
      if (open[c] && share[c] > supply[c] - q.per_class[c]) {
        remaining -= supply[c] - q.per_class[c];
        q.per_class[c] = supply[c];
        open[c] = 0;
        capped = true;
      }
    }
    if (capped) continue;
    for (std::size_t c = 0; c < C; ++c) q.per_class[c] += share[c];
    remaining = 0;
  }
  return q;
}

bool more_confident(const PseudoCandidate& a, const PseudoCandidate& b) {
  if (a.entropy != b.entropy) return a.entropy < b.entropy;
  if (a.instance != b.instance) return a.instance < b.instance;
  return a.worker < b.worker;
}

SelectionResult select_distribution_aware(std::span<const PseudoCandidate> candidates, std::int64_t total,
                                          int num_classes) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  std::vector<int> labels;
  labels.reserve(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    labels.push_back(candidates[k].argmax_class);
  }
  const ClassCounts supply = class_counts(labels, num_classes);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    by_class[static_cast<std::size_t>(candidates[k].argmax_class)].push_back(k);
  }
  const SelectionQuota q = quotas(supply, total);
  std::vector<std::size_t> picked;
  picked.reserve(static_cast<std::size_t>(q.total));
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto best = most_confident(candidates, std::move(by_class[c]), static_cast<std::size_t>(q.per_class[c]));
    picked.insert(picked.end(), best.begin(), best.end());
  }
  return make_result(Strategy::kBalanced, candidates, picked, num_classes);
}

SelectionResult select_confidence(std::span<const PseudoCandidate> candidates, std::int64_t total,
                                  int num_classes) {
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto picked = most_confident(candidates, std::move(idx), clamp_total(total, candidates.size()));
  return make_result(Strategy::kConfidence, candidates, picked, num_classes);
}

SelectionResult select_random(std::span<const PseudoCandidate> candidates, std::int64_t total, int num_classes,
                              std::uint64_t seed) {
  const std::size_t n = candidates.size();
  const std::size_t take = clamp_total(total, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t j = 0; j < take; ++j) {
    std::swap(idx[j], idx[j + static_cast<std::size_t>(rng.below(n - j))]);
  }
  idx.resize(take);
  return make_result(Strategy::kRandom, candidates, idx, num_classes);
}

SelectionResult select(Strategy strategy, std::span<const PseudoCandidate> candidates, std::int64_t total,
                       int num_classes, std::uint64_t seed) {
  switch (strategy) {
    case Strategy::kRandom: return select_random(candidates, total, num_classes, seed);
    case Strategy::kConfidence: return select_confidence(candidates, total, num_classes);
    case Strategy::kBalanced: return select_distribution_aware(candidates, total, num_classes);
  }
  throw ConfigError("selftrain.strategy", "unknown strategy");
}

}  // namespace selfcrowd
