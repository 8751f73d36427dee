#include "doctest.h"

#include <limits>

#include "selfcrowd/dataset.hpp"
#include "selfcrowd/errors.hpp"
#include "selfcrowd/rng.hpp"
#include "test_support.hpp"

using namespace selfcrowd;

namespace {

ClassCounts counts_of(std::vector<std::int64_t> c) {
  ClassCounts out;
  out.counts = std::move(c);
  for (auto v : out.counts) out.total += v;
  return out;
}

}  // namespace

TEST_CASE("class_counts tallies 0-based labels") {
  const std::vector<int> labels = {0, 0, 1, 2};  // 1,1,2,3 externally
  const auto c = class_counts(labels, 3);
  CHECK(c.counts == std::vector<std::int64_t>{2, 1, 1});
  CHECK(c.total == 4);

  const auto empty = class_counts({}, 8);
  CHECK(empty.counts == std::vector<std::int64_t>(8, 0));
  CHECK(empty.total == 0);
}

TEST_CASE("class_counts matches an independent tally over multinomial draws") {
  Rng rng(42);
  const std::vector<double> p = {0.5, 0.2, 0.2, 0.1};
  std::vector<int> labels;
  for (int k = 0; k < 1000; ++k) {
    const double u = rng.uniform();
    double acc = 0.0;
    int c = 0;
    for (; c < 3; ++c) {
      acc += p[static_cast<std::size_t>(c)];
      if (u < acc) break;
    }
    labels.push_back(c);
  }
  std::vector<std::int64_t> tally(4, 0);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    for (int c = 0; c < 4; ++c) {
      if (labels[k] == c) tally[static_cast<std::size_t>(c)] += 1;
    }
  }
  const auto got = class_counts(labels, 4);
  CHECK(got.counts == tally);
  CHECK(got.total == 1000);
}

TEST_CASE("class_counts rejects out-of-range labels and names the index") {
  const std::vector<int> labels = {0, 1, 3};
  try {
    class_counts(labels, 3);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }
  const std::vector<int> negative = {-1};
  CHECK_THROWS_AS(class_counts(negative, 3), DataError);
}

TEST_CASE("imbalance_ratio") {
  CHECK(imbalance_ratio(counts_of({5, 5, 5, 5})).ratio == 0.0);
  CHECK(imbalance_ratio(counts_of({10, 0})).ratio == 1.0);
  const auto s = imbalance_ratio(counts_of({7, 2, 1}));
  CHECK(s.ratio == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(s.n_max == 7);
  CHECK(s.n_min == 1);
  CHECK(s.n_anno == 10);

  // A class with no annotations forces n_min = 0.
  CHECK(imbalance_ratio(counts_of({4, 4, 0})).n_min == 0);
  CHECK_THROWS_AS(imbalance_ratio(counts_of({0, 0, 0})), DataError);
}

TEST_CASE("class_proportion_std uses the population convention, in percent") {
  CHECK(class_proportion_std(counts_of({5, 5, 5, 5})) == 0.0);
  CHECK(class_proportion_std(counts_of({3, 1})) == doctest::Approx(25.0).epsilon(1e-12));
  CHECK_THROWS_AS(class_proportion_std(counts_of({0, 0})), DataError);
}

TEST_CASE("imbalance properties over random count vectors") {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const int C = 2 + static_cast<int>(rng.below(7));
    std::vector<std::int64_t> c(static_cast<std::size_t>(C));
    for (auto& v : c) v = static_cast<std::int64_t>(rng.below(50));
    if (trial % 5 == 0) std::fill(c.begin(), c.end(), 1 + static_cast<std::int64_t>(rng.below(9)));
    const auto base = counts_of(c);
    if (base.total == 0) continue;
    const auto s = imbalance_ratio(base);
    CHECK(s.ratio >= 0.0);
    CHECK(s.ratio <= 1.0);

    const auto k = 1 + static_cast<std::int64_t>(rng.below(20));
    auto scaled = c;
    for (auto& v : scaled) v *= k;
    CHECK(imbalance_ratio(counts_of(scaled)).ratio == doctest::Approx(s.ratio).epsilon(1e-12));

    const bool uniform = std::all_of(c.begin(), c.end(), [&](auto v) { return v == c.front(); });
    CHECK((s.ratio == 0.0) == uniform);
    CHECK((class_proportion_std(base) <= 1e-12) == uniform);

    const bool all_in_one = s.n_max == base.total && s.n_min == 0;
    CHECK((s.ratio == 1.0) == all_in_one);
  }
}

TEST_CASE("summing class_counts reproduces the sequence length") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> labels(rng.below(300));
    for (auto& l : labels) l = static_cast<int>(rng.below(5));
    const auto c = class_counts(labels, 5);
    std::int64_t sum = 0;
    for (auto v : c.counts) sum += v;
    CHECK(sum == static_cast<std::int64_t>(labels.size()));
    CHECK(c.total == sum);
  }
}

TEST_CASE("validate_dataset") {
  auto ds = testing::random_dataset(20, 3, 4, 5, 30, 11);
  CHECK(validate_dataset(ds).empty());

  SUBCASE("label C+1 gives one violation naming the pair") {
    ds.annotations[4].label = 4;  // external label 5 with C = 4
    const auto report = validate_dataset(ds);
    REQUIRE(report.size() == 1);
    CHECK(report[0].kind == Violation::Kind::kLabelOutOfRange);
    CHECK(report[0].instance == ds.annotations[4].instance);
    CHECK(report[0].worker == ds.annotations[4].worker);
    CHECK_THROWS_AS(require_valid(ds), DataError);
  }

  SUBCASE("each injected duplicate is reported once") {
    Rng rng(5);
    const int injected = 7;
    for (int k = 0; k < injected; ++k) {
      auto dup = ds.annotations[rng.below(30)];
      dup.label = (dup.label + 1) % 4;
      ds.annotations.push_back(dup);
    }
    std::size_t dups = 0;
    for (const auto& v : validate_dataset(ds)) dups += v.kind == Violation::Kind::kDuplicatePair;
    CHECK(validate_dataset(ds).size() == static_cast<std::size_t>(injected));
    CHECK(dups == static_cast<std::size_t>(injected));
  }

  SUBCASE("ground truth length and range") {
    ds.ground_truth->pop_back();
    CHECK(validate_dataset(ds).size() == 1);
    ds.ground_truth->push_back(9);
    CHECK(validate_dataset(ds).size() == 1);
  }

  SUBCASE("indices out of range") {
    ds.annotations.push_back({20, 0, 0});
    ds.annotations.push_back({0, 5, 0});
    CHECK(validate_dataset(ds).size() == 2);
  }

  SUBCASE("non-finite features") {
    ds.features(2, 1) = std::numeric_limits<double>::infinity();
    const auto report = validate_dataset(ds);
    REQUIRE(report.size() == 1);
    CHECK(report[0].kind == Violation::Kind::kNonFiniteFeature);
    CHECK(report[0].instance == 2);
  }
}
