#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "selfcrowd/errors.hpp"
#include "selfcrowd/rng.hpp"
#include "selfcrowd/selection.hpp"

using namespace selfcrowd;

namespace {

PseudoCandidate make(int instance, int worker, int cls, double ent, int C = 3) {
  PseudoCandidate c;
  c.instance = instance;
  c.worker = worker;
  c.argmax_class = cls;
  c.entropy = ent;
  c.distribution = Eigen::VectorXd::Constant(C, 0.0);
  c.distribution(cls) = 1.0;
  return c;
}

ClassCounts counts_of(std::vector<std::int64_t> v) {
  ClassCounts c;
  c.counts = v;
  c.total = std::accumulate(v.begin(), v.end(), std::int64_t{0});
  return c;
}

// Entropies drawn from a small grid so that ties are common.
std::vector<PseudoCandidate> random_pool(Rng& rng, int size, int C) {
  std::vector<PseudoCandidate> pool;
  std::set<std::pair<int, int>> used;
  while (static_cast<int>(pool.size()) < size) {
    const int i = static_cast<int>(rng.below(40));
    const int r = static_cast<int>(rng.below(5));
    if (!used.insert({i, r}).second) continue;
    const int cls = static_cast<int>(rng.below(static_cast<std::uint64_t>(C)));
    pool.push_back(make(i, r, cls, 0.05 * static_cast<double>(rng.below(12)), C));
  }
  return pool;
}

bool oracle_less(const PseudoCandidate& a, const PseudoCandidate& b) {
  if (a.entropy != b.entropy) return a.entropy < b.entropy;
  if (a.instance != b.instance) return a.instance < b.instance;
  return a.worker < b.worker;
}

std::vector<std::pair<int, int>> keys(const SelectionResult& r) {
  std::vector<std::pair<int, int>> k;
  for (const auto& s : r.chosen) k.emplace_back(s.instance, s.worker);
  return k;
}

}  // namespace

TEST_CASE("entropy") {
  const std::vector<double> one_hot = {0.0, 1.0, 0.0};
  CHECK(entropy(one_hot) == 0.0);
  const std::vector<double> uniform(8, 0.125);
  CHECK(std::abs(entropy(uniform) - std::log(8.0)) <= 1e-12);
  const std::vector<double> p = {0.5, 0.25, 0.25};
  CHECK(entropy(p) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-14));

  const std::vector<double> unnormalized = {0.5, 0.6};
  CHECK_THROWS_AS(entropy(unnormalized), DataError);
  const std::vector<double> negative = {1.2, -0.2};
  CHECK_THROWS_AS(entropy(negative), DataError);
}

TEST_CASE("entropy is permutation invariant and maximal at uniform") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int C = 2 + static_cast<int>(rng.below(9));
    std::vector<double> p(static_cast<std::size_t>(C));
    for (double& v : p) v = rng.uniform() + 1e-3;
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= s;
    auto q = p;
    for (std::size_t k = q.size() - 1; k > 0; --k) std::swap(q[k], q[rng.below(k + 1)]);
    CHECK(std::abs(entropy(p) - entropy(q)) <= 1e-12);
    CHECK(entropy(p) < std::log(static_cast<double>(C)));
  }
}

TEST_CASE("quotas: worked examples") {
  SUBCASE("symmetric") {
    const auto q = quotas(counts_of({10, 10}), 8);
    CHECK(q.per_class == std::vector<std::int64_t>{4, 4});
    CHECK(q.fractions[0] == doctest::Approx(0.5));
    CHECK(q.total == 8);
  }
  SUBCASE("inverse proportions") {
    const auto q = quotas(counts_of({100, 50, 25}), 7);
    CHECK(q.per_class == std::vector<std::int64_t>{1, 2, 4});
    CHECK(q.fractions[0] == doctest::Approx(1.0 / 7));
    CHECK(q.fractions[1] == doctest::Approx(2.0 / 7));
    CHECK(q.fractions[2] == doctest::Approx(4.0 / 7));
  }
  SUBCASE("cap and redistribute") {
    const auto q = quotas(counts_of({3, 1000}), 10);
    CHECK(q.per_class == std::vector<std::int64_t>{3, 7});
  }
  SUBCASE("empty supply") {
    const auto q = quotas(counts_of({0, 0, 0}), 10);
    CHECK(q.total == 0);
    CHECK(q.per_class == std::vector<std::int64_t>{0, 0, 0});
  }
  SUBCASE("M above supply takes everything") {
    const auto q = quotas(counts_of({2, 0, 5}), 100);
    CHECK(q.per_class == std::vector<std::int64_t>{2, 0, 5});
    CHECK(q.fractions[1] == 0.0);
  }
}

TEST_CASE("quotas: conservation and caps over random cases") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const int C = 1 + static_cast<int>(rng.below(10));
    std::vector<std::int64_t> n(static_cast<std::size_t>(C));
    for (auto& v : n) v = rng.bernoulli(0.2) ? 0 : static_cast<std::int64_t>(rng.below(500));
    const auto cc = counts_of(n);
    const auto m = static_cast<std::int64_t>(rng.below(800));
    const auto q = quotas(cc, m);
    const std::int64_t want = std::min(m, cc.total);
    CHECK(q.total == want);
    CHECK(std::accumulate(q.per_class.begin(), q.per_class.end(), std::int64_t{0}) == want);
    double tsum = 0.0;
    for (int c = 0; c < C; ++c) {
      CHECK(q.per_class[static_cast<std::size_t>(c)] <= n[static_cast<std::size_t>(c)]);
      CHECK(q.per_class[static_cast<std::size_t>(c)] >= 0);
      tsum += q.fractions[static_cast<std::size_t>(c)];
    }
    if (cc.total > 0) CHECK(std::abs(tsum - 1.0) <= 1e-12);
  }
}

TEST_CASE("quotas favour scarcer classes when nothing is capped") {
  Rng rng(78);
  for (int trial = 0; trial < 500; ++trial) {
    const int C = 2 + static_cast<int>(rng.below(6));
    std::vector<std::int64_t> n(static_cast<std::size_t>(C));
    for (auto& v : n) v = 100 + static_cast<std::int64_t>(rng.below(900));
    const auto m = 10 + static_cast<std::int64_t>(rng.below(90));  // far below every supply
    const auto q = quotas(counts_of(n), m);
    for (int a = 0; a < C; ++a)
      for (int b = 0; b < C; ++b)
        if (n[static_cast<std::size_t>(a)] < n[static_cast<std::size_t>(b)])
          CHECK(q.per_class[static_cast<std::size_t>(a)] >= q.per_class[static_cast<std::size_t>(b)]);
  }
}

TEST_CASE("select_confidence") {
  SUBCASE("takes the lowest entropies") {
    const std::vector<PseudoCandidate> pool = {make(0, 0, 0, 0.3), make(1, 0, 1, 0.1), make(2, 0, 2, 0.2)};
    const auto r = select_confidence(pool, 2, 3);
    CHECK(keys(r) == std::vector<std::pair<int, int>>{{1, 0}, {2, 0}});
    CHECK(r.per_class.counts == std::vector<std::int64_t>{0, 1, 1});
  }
  SUBCASE("M beyond the pool takes everything") {
    const std::vector<PseudoCandidate> pool = {make(0, 0, 0, 0.3), make(1, 0, 1, 0.1)};
    CHECK(select_confidence(pool, 10, 3).chosen.size() == 2);
  }
  SUBCASE("matches sort-then-take on 1000 candidates") {
    Rng rng(9);
    std::vector<PseudoCandidate> pool;
    for (int k = 0; k < 1000; ++k) pool.push_back(make(k / 7, k % 7, static_cast<int>(rng.below(3)), rng.uniform()));
    auto sorted = pool;
    std::sort(sorted.begin(), sorted.end(), oracle_less);
    const auto r = select_confidence(pool, 100, 3);
    REQUIRE(r.chosen.size() == 100);
    for (std::size_t k = 0; k < 100; ++k) {
      CHECK(r.chosen[k].instance == sorted[k].instance);
      CHECK(r.chosen[k].worker == sorted[k].worker);
      CHECK(r.chosen[k].label == sorted[k].argmax_class);
    }
  }
}

TEST_CASE("select_distribution_aware") {
  SUBCASE("single class pool") {
    std::vector<PseudoCandidate> pool;
    for (int k = 0; k < 10; ++k) pool.push_back(make(k, 0, 1, 1.0 - 0.1 * k));
    const auto r = select_distribution_aware(pool, 4, 3);
    CHECK(keys(r) == std::vector<std::pair<int, int>>{{9, 0}, {8, 0}, {7, 0}, {6, 0}});
  }
  SUBCASE("two per class from a balanced pool") {
    Rng rng(3);
    std::vector<PseudoCandidate> pool;
    for (int c = 0; c < 4; ++c)
      for (int k = 0; k < 6; ++k) pool.push_back(make(c * 10 + k, 0, c, rng.uniform(), 4));
    const auto r = select_distribution_aware(pool, 8, 4);
    CHECK(r.per_class.counts == std::vector<std::int64_t>{2, 2, 2, 2});
    for (int c = 0; c < 4; ++c) {
      std::vector<PseudoCandidate> cls;
      for (const auto& p : pool)
        if (p.argmax_class == c) cls.push_back(p);
      std::sort(cls.begin(), cls.end(), oracle_less);
      CHECK(r.chosen[static_cast<std::size_t>(2 * c)].instance == cls[0].instance);
      CHECK(r.chosen[static_cast<std::size_t>(2 * c + 1)].instance == cls[1].instance);
    }
  }
  SUBCASE("equal entropy ties go to the smaller (instance, worker)") {
    const std::vector<PseudoCandidate> pool = {make(5, 1, 0, 0.2), make(5, 0, 0, 0.2), make(7, 0, 0, 0.2)};
    const auto r = select_distribution_aware(pool, 1, 3);
    CHECK(keys(r) == std::vector<std::pair<int, int>>{{5, 0}});
    const auto c = select_confidence(pool, 1, 3);
    CHECK(keys(c) == std::vector<std::pair<int, int>>{{5, 0}});
  }
}

TEST_CASE("selectors match a sort/partition oracle on random pools") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int C = 2 + static_cast<int>(rng.below(5));
    const int size = 1 + static_cast<int>(rng.below(100));
    const auto pool = random_pool(rng, size, C);
    const auto m = static_cast<std::int64_t>(rng.below(120));

    auto sorted = pool;
    std::sort(sorted.begin(), sorted.end(), oracle_less);
    const auto conf = select_confidence(pool, m, C);
    const auto take = static_cast<std::size_t>(std::min<std::int64_t>(m, size));
    REQUIRE(conf.chosen.size() == take);
    for (std::size_t k = 0; k < take; ++k) {
      CHECK(conf.chosen[k].instance == sorted[k].instance);
      CHECK(conf.chosen[k].worker == sorted[k].worker);
    }

    ClassCounts cc;
    cc.counts.assign(static_cast<std::size_t>(C), 0);
    for (const auto& p : pool) ++cc.counts[static_cast<std::size_t>(p.argmax_class)];
    cc.total = size;
    const auto q = quotas(cc, m);
    std::vector<std::pair<int, int>> expect;
    for (int c = 0; c < C; ++c) {
      std::int64_t left = q.per_class[static_cast<std::size_t>(c)];
      for (const auto& p : sorted)
        if (p.argmax_class == c && left > 0) {
          expect.emplace_back(p.instance, p.worker);
          --left;
        }
    }
    const auto bal = select_distribution_aware(pool, m, C);
    CHECK(keys(bal) == expect);
    CHECK(bal.per_class.counts == q.per_class);
  }
}

TEST_CASE("select_random") {
  Rng rng(1);
  const auto pool = random_pool(rng, 30, 3);
  SUBCASE("deterministic per seed and without replacement") {
    const auto a = select_random(pool, 12, 3, 99);
    const auto b = select_random(pool, 12, 3, 99);
    CHECK(a.chosen == b.chosen);
    std::set<std::pair<int, int>> distinct;
    for (const auto& s : a.chosen) distinct.insert({s.instance, s.worker});
    CHECK(distinct.size() == 12);
    CHECK_FALSE(select_random(pool, 12, 3, 100).chosen == a.chosen);
  }
  SUBCASE("M beyond the pool takes everything") {
    CHECK(select_random(pool, 1000, 3, 5).chosen.size() == 30);
  }
  SUBCASE("uniform frequency") {
    const std::vector<PseudoCandidate> four = {make(0, 0, 0, 0.1), make(1, 0, 1, 0.2), make(2, 0, 2, 0.3),
                                               make(3, 0, 0, 0.4)};
    std::map<int, int> hits;
    for (std::uint64_t t = 0; t < 10000; ++t) ++hits[select_random(four, 1, 3, t).chosen[0].instance];
    for (int i = 0; i < 4; ++i) CHECK(std::abs(hits[i] - 2500) <= 150);
  }
}

TEST_CASE("balanced selection is at least as balanced as confidence selection on a skewed pool") {
  Rng rng(8);
  std::vector<PseudoCandidate> pool;
  // Class 0 dominates and is also the most confident.
  for (int k = 0; k < 600; ++k) {
    const int cls = k < 450 ? 0 : 1 + static_cast<int>(rng.below(3));
    pool.push_back(make(k, 0, cls, cls == 0 ? 0.5 * rng.uniform() : 0.5 + rng.uniform(), 4));
  }
  const auto bal = select_distribution_aware(pool, 100, 4);
  const auto conf = select_confidence(pool, 100, 4);
  CHECK(imbalance_ratio(bal.per_class).ratio < imbalance_ratio(conf.per_class).ratio);
}

TEST_CASE("strategy names") {
  for (auto s : {Strategy::kRandom, Strategy::kConfidence, Strategy::kBalanced})
    CHECK(parse_strategy(strategy_name(s)) == s);
  CHECK_FALSE(parse_strategy("margin").has_value());
}
