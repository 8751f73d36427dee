#include "selfcrowd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selfcrowd/errors.hpp"

namespace selfcrowd {

namespace {

constexpr double kPriorTolerance = 1e-9;

// Class centroids with pairwise distance `separation`. Axis-aligned when the
// feature space has room, otherwise random directions of the same norm.
std::vector<Eigen::VectorXd> make_centroids(int classes, int dim, double separation, Rng& rng) {
  const double radius = separation / std::sqrt(2.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    if (classes <= dim) {
      v(c) = radius;
    } else {
      for (int k = 0; k < dim; ++k) v(k) = rng.normal();
      v *= radius / v.norm();
    }
    out.push_back(std::move(v));
  }
  return out;
}

int sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  // u landed in the rounding slack past the last cumulative sum.
  for (std::size_t k = probs.size(); k-- > 0;) {
    if (probs[k] > 0.0) return static_cast<int>(k);
  }
  return 0;
}

void fill_instances(CrowdDataset& ds, int n, const std::vector<double>& priors,
                    const std::vector<Eigen::VectorXd>& centroids, Rng& rng) {
  const int dim = static_cast<int>(centroids.front().size());
  ds.features.resize(n, dim);
  std::vector<int> truth(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = sample_categorical(priors, rng);
    truth[static_cast<std::size_t>(i)] = c;
    for (int k = 0; k < dim; ++k) ds.features(i, k) = centroids[static_cast<std::size_t>(c)](k) + rng.normal();
  }
  ds.ground_truth = std::move(truth);
}

}  // namespace

std::vector<double> labelme_like_priors(int num_classes) {
  // Linear ramp with step chosen so the proportion std is 1.85%.
  const double k = num_classes;
  const double step = 0.0185 / std::sqrt((k * k - 1.0) / 12.0);
  std::vector<double> p(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) p[static_cast<std::size_t>(c)] = 1.0 / k + step * ((k - 1.0) / 2.0 - c);
  if (p.back() <= 0.0) return std::vector<double>(p.size(), 1.0 / k);
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= sum;
  return p;
}

std::vector<double> skewed_priors(int num_classes, double max_to_min) {
  std::vector<double> p(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const double t = num_classes > 1 ? static_cast<double>(c) / (num_classes - 1) : 0.0;
    p[static_cast<std::size_t>(c)] = std::pow(max_to_min, -t);
  }
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= sum;
  return p;
}

std::vector<double> SynthConfig::resolved_priors() const {
  return class_priors.empty() ? labelme_like_priors(num_classes) : class_priors;
}

void SynthConfig::validate() const {
  if (num_classes < 2) throw ConfigError("synth.num_classes", "must be >= 2");
  if (num_instances < 1) throw ConfigError("synth.num_instances", "must be >= 1");
  if (num_test_instances < 0) throw ConfigError("synth.num_test_instances", "must be >= 0");
  if (feature_dim < 1) throw ConfigError("synth.feature_dim", "must be >= 1");
  if (num_workers < 1) throw ConfigError("synth.num_workers", "must be >= 1");
  if (!(cluster_separation > 0.0)) throw ConfigError("synth.cluster_separation", "must be > 0");
  if (!(worker_accuracy_mean > 0.0 && worker_accuracy_mean <= 1.0)) {
    throw ConfigError("synth.worker_accuracy_mean", "must lie in (0, 1]");
  }
  if (!(worker_accuracy_std >= 0.0)) throw ConfigError("synth.worker_accuracy_std", "must be >= 0");
  if (!(annotations_per_instance_mean > 0.0)) {
    throw ConfigError("synth.annotations_per_instance_mean", "must be > 0");
  }
  if (annotations_per_instance_mean > num_workers) {
    throw ConfigError("synth.annotations_per_instance_mean", "exceeds num_workers");
  }
  if (!class_priors.empty()) {
    if (static_cast<int>(class_priors.size()) != num_classes) {
      throw ConfigError("synth.class_priors", "needs exactly num_classes entries");
    }
    double sum = 0.0;
    for (double p : class_priors) {
      if (!(p >= 0.0)) throw ConfigError("synth.class_priors", "entries must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kPriorTolerance) {
      throw ConfigError("synth.class_priors", "must sum to 1 (got " + std::to_string(sum) + ")");
    }
  }
}

void SparsityConfig::validate() const {
  if (!(removal_fraction >= 0.0 && removal_fraction < 1.0)) {
    throw ConfigError("sparsity.removal_fraction", "must lie in [0, 1)");
  }
}

WorkerProfile WorkerProfile::uniform_noise(int num_classes, double accuracy) {
  const double off = num_classes > 1 ? (1.0 - accuracy) / (num_classes - 1) : 0.0;
  WorkerProfile w;
  w.confusion = Eigen::MatrixXd::Constant(num_classes, num_classes, off);
  w.confusion.diagonal().setConstant(accuracy);
  return w;
}

int sample_worker_annotation(const WorkerProfile& profile, int true_class, Rng& rng) {
  const Eigen::RowVectorXd row = profile.confusion.row(true_class);
  return sample_categorical({row.data(), static_cast<std::size_t>(row.size())}, rng);
}

GeneratedData generate_crowd_dataset(const SynthConfig& config) {
  config.validate();
  const auto priors = config.resolved_priors();
  const int C = config.num_classes;
  const int R = config.num_workers;
  Rng rng(config.seed);

  GeneratedData out;
  out.workers.reserve(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r) {
    double a = rng.normal(config.worker_accuracy_mean, config.worker_accuracy_std);
    a = std::clamp(a, 1.0 / C, 1.0);
    out.workers.push_back(WorkerProfile::uniform_noise(C, a));
  }

  const auto centroids = make_centroids(C, config.feature_dim, config.cluster_separation, rng);
  for (CrowdDataset* ds : {&out.train, &out.test}) {
    ds->num_classes = C;
    ds->num_workers = R;
  }
  fill_instances(out.train, config.num_instances, priors, centroids, rng);
  fill_instances(out.test, config.num_test_instances, priors, centroids, rng);

  const double m = config.annotations_per_instance_mean;
  const double base = std::floor(m);
  std::vector<int> workers(static_cast<std::size_t>(R));
  const auto& truth = *out.train.ground_truth;
  for (int i = 0; i < config.num_instances; ++i) {
    int k = static_cast<int>(base) + (rng.bernoulli(m - base) ? 1 : 0);
    k = std::clamp(k, 1, R);
    std::iota(workers.begin(), workers.end(), 0);
    for (int j = 0; j < k; ++j) {
      const auto pick = j + static_cast<int>(rng.below(static_cast<std::uint64_t>(R - j)));
      std::swap(workers[static_cast<std::size_t>(j)], workers[static_cast<std::size_t>(pick)]);
    }
    std::sort(workers.begin(), workers.begin() + k);
    for (int j = 0; j < k; ++j) {
      const int r = workers[static_cast<std::size_t>(j)];
      const int label = sample_worker_annotation(out.workers[static_cast<std::size_t>(r)],
                                                 truth[static_cast<std::size_t>(i)], rng);
      out.train.annotations.push_back({i, r, label});
    }
  }
  return out;
}

CrowdDataset sparsify(const CrowdDataset& dataset, const SparsityConfig& config) {
  config.validate();
  const std::size_t n = dataset.annotations.size();
  const auto remove = static_cast<std::size_t>(std::llround(config.removal_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  for (std::size_t j = 0; j < remove; ++j) {
    const auto pick = j + static_cast<std::size_t>(rng.below(n - j));
    std::swap(order[j], order[pick]);
  }
  std::vector<char> drop(n, 0);
  for (std::size_t j = 0; j < remove; ++j) drop[order[j]] = 1;

  CrowdDataset out;
  out.features = dataset.features;
  out.ground_truth = dataset.ground_truth;
  out.num_classes = dataset.num_classes;
  out.num_workers = dataset.num_workers;
  out.annotations.reserve(n - remove);
  for (std::size_t k = 0; k < n; ++k) {
    if (!drop[k]) out.annotations.push_back(dataset.annotations[k]);
  }
  return out;
}

}  // namespace selfcrowd
