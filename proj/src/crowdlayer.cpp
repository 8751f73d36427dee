#include "selfcrowd/crowdlayer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selfcrowd/errors.hpp"
#include "selfcrowd/rng.hpp"
#include "selfcrowd/selection.hpp"

namespace selfcrowd {

namespace {

enum SeedStream : std::uint64_t { kInitStream = 1, kShuffleStream = 2, kDropoutStream = 3 };

void fill_uniform(Eigen::MatrixXd& m, double bound, Rng& rng) {
  // Row-major draw order so the stream does not depend on storage layout.
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = bound * (2.0 * rng.uniform() - 1.0);
}

void softmax_rows(Eigen::MatrixXd& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp();
    z.row(i) /= z.row(i).sum();
  }
}

// First maximal index; Eigen's visitor does not document its tie order.
template <typename Vec>
Eigen::Index argmax_first(const Vec& v) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (v(k) > v(best)) best = k;
  }
  return best;
}

void check_features(const CrowdModel& model, Eigen::Index cols) {
  if (cols != model.feature_dim()) {
    throw DimensionError("feature vector has length " + std::to_string(cols) + ", model expects " +
                         std::to_string(model.feature_dim()));
  }
}

// Scratch buffers reused across mini-batches.
struct BatchWorkspace {
  Eigen::MatrixXd x, pre, hidden, probs, dprobs, dlogits, dhidden;
  Eigen::MatrixXd dropout_scale;
  std::vector<char> worker_present;
};

// Writes the mini-batch objective gradient into `grad` (overwriting it) and
// returns the mean data loss. With a non-null `dropout` the hidden layer uses
// inverted dropout masks drawn from it.
double batch_gradients(const CrowdModel& model, const FeatureMatrix& features,
                       std::span<const Annotation> batch, double weight_decay, CrowdModel& grad,
                       BatchWorkspace& ws, Rng* dropout, double dropout_rate) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const int C = model.num_classes();
  const int H = model.hidden_units();

  ws.x.resize(B, model.feature_dim());
  for (Eigen::Index b = 0; b < B; ++b) ws.x.row(b) = features.row(batch[static_cast<std::size_t>(b)].instance);

  ws.pre.noalias() = ws.x * model.hidden_weights.transpose();
  ws.pre.rowwise() += model.hidden_bias.transpose();
  ws.hidden = ws.pre.cwiseMax(0.0);
  if (dropout != nullptr) {
    ws.dropout_scale.resize(B, H);
    const double keep = 1.0 - dropout_rate;
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index h = 0; h < H; ++h) ws.dropout_scale(b, h) = dropout->uniform() < keep ? 1.0 / keep : 0.0;
    ws.hidden.array() *= ws.dropout_scale.array();
  }
  ws.probs.noalias() = ws.hidden * model.output_weights.transpose();
  ws.probs.rowwise() += model.output_bias.transpose();
  softmax_rows(ws.probs);

  grad.hidden_weights.setZero();
  grad.hidden_bias.setZero();
  grad.output_weights.setZero();
  grad.output_bias.setZero();
  for (auto& w : grad.worker_matrices) w.setZero();
  ws.worker_present.assign(static_cast<std::size_t>(model.num_workers()), 0);

  const double inv_b = 1.0 / static_cast<double>(B);
  ws.dprobs.resize(B, C);
  double total = 0.0;
  Eigen::VectorXd f(C), g(C);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& a = batch[static_cast<std::size_t>(b)];
    const auto& w = model.worker_matrices[static_cast<std::size_t>(a.worker)];
    f = ws.probs.row(b).transpose();
    g = softmax(w.transpose() * f);
    total -= std::log(std::max(g(a.label), kProbabilityFloor));
    g(a.label) -= 1.0;  // d loss / d worker logits
    g *= inv_b;
    grad.worker_matrices[static_cast<std::size_t>(a.worker)].noalias() += f * g.transpose();
    ws.dprobs.row(b).noalias() = (w * g).transpose();
    ws.worker_present[static_cast<std::size_t>(a.worker)] = 1;
  }

  // Back through the classifier softmax: dz = f .* (df - <f, df>).
  ws.dlogits = ws.probs.cwiseProduct(ws.dprobs);
  const Eigen::VectorXd inner = ws.dlogits.rowwise().sum();
  ws.dlogits -= ws.probs.cwiseProduct(inner.replicate(1, C));

  grad.output_weights.noalias() = ws.dlogits.transpose() * ws.hidden;
  grad.output_bias = ws.dlogits.colwise().sum().transpose();
  ws.dhidden.noalias() = ws.dlogits * model.output_weights;
  ws.dhidden.array() *= (ws.pre.array() > 0.0).cast<double>();
  if (dropout != nullptr) ws.dhidden.array() *= ws.dropout_scale.array();
  grad.hidden_weights.noalias() = ws.dhidden.transpose() * ws.x;
  grad.hidden_bias = ws.dhidden.colwise().sum().transpose();

  if (weight_decay > 0.0) {
    grad.hidden_weights += 2.0 * weight_decay * model.hidden_weights;
    grad.output_weights += 2.0 * weight_decay * model.output_weights;
    for (std::size_t r = 0; r < ws.worker_present.size(); ++r) {
      if (ws.worker_present[r]) grad.worker_matrices[r] += 2.0 * weight_decay * model.worker_matrices[r];
    }
  }
  return total * inv_b;
}

class Adam {
 public:
  Adam(const CrowdModel& model, const TrainConfig& config)
      : config_(config), m_(model.parameter_count(), 0.0), v_(model.parameter_count(), 0.0) {}

  void step(CrowdModel& model, CrowdModel& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.adam_beta1, t_);
    const double c2 = 1.0 - std::pow(config_.adam_beta2, t_);
    const double lr = config_.learning_rate * std::sqrt(c2) / c1;
    auto params = model.tensors();
    auto grads = grad.tensors();
    std::size_t k = 0;
    for (std::size_t t = 0; t < params.size(); ++t) {
      auto p = params[t].values;
      auto g = grads[t].values;
      for (std::size_t j = 0; j < p.size(); ++j, ++k) {
        m_[k] = config_.adam_beta1 * m_[k] + (1.0 - config_.adam_beta1) * g[j];
        v_[k] = config_.adam_beta2 * v_[k] + (1.0 - config_.adam_beta2) * g[j] * g[j];
        p[j] -= lr * m_[k] / (std::sqrt(v_[k]) + config_.adam_epsilon);
      }
    }
  }

 private:
  TrainConfig config_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be > 0");
  if (epochs < 0) throw ConfigError("train.epochs", "must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay", "must be >= 0");
  if (hidden_units < 1) throw ConfigError("train.hidden_units", "must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("train.dropout_rate", "must lie in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("train.adam_beta1", "must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("train.adam_beta2", "must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("train.adam_epsilon", "must be > 0");
}

CrowdModel CrowdModel::zeros(int feature_dim, int hidden_units, int num_classes, int num_workers) {
  CrowdModel m;
  m.hidden_weights = Eigen::MatrixXd::Zero(hidden_units, feature_dim);
  m.hidden_bias = Eigen::VectorXd::Zero(hidden_units);
  m.output_weights = Eigen::MatrixXd::Zero(num_classes, hidden_units);
  m.output_bias = Eigen::VectorXd::Zero(num_classes);
  m.worker_matrices.assign(static_cast<std::size_t>(num_workers), Eigen::MatrixXd::Zero(num_classes, num_classes));
  return m;
}

CrowdModel CrowdModel::initialize(int feature_dim, int hidden_units, int num_classes, int num_workers,
                                  std::uint64_t seed) {
  CrowdModel m = zeros(feature_dim, hidden_units, num_classes, num_workers);
  Rng rng(derive_seed(seed, {kInitStream}));
  fill_uniform(m.hidden_weights, std::sqrt(6.0 / feature_dim), rng);   // ReLU layer
  fill_uniform(m.output_weights, std::sqrt(3.0 / hidden_units), rng);  // softmax layer
  for (auto& w : m.worker_matrices) w.setIdentity();
  return m;
}

std::vector<CrowdModel::Tensor> CrowdModel::tensors() {
  auto span_of = [](auto& t) { return std::span<double>(t.data(), static_cast<std::size_t>(t.size())); };
  std::vector<Tensor> out;
  out.reserve(4 + worker_matrices.size());
  out.push_back({span_of(hidden_weights), true});
  out.push_back({span_of(hidden_bias), false});
  out.push_back({span_of(output_weights), true});
  out.push_back({span_of(output_bias), false});
  for (std::size_t r = 0; r < worker_matrices.size(); ++r) {
    out.push_back({span_of(worker_matrices[r]), true, static_cast<int>(r)});
  }
  return out;
}

std::size_t CrowdModel::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(hidden_weights.size() + hidden_bias.size() + output_weights.size() +
                                           output_bias.size());
  for (const auto& w : worker_matrices) n += static_cast<std::size_t>(w.size());
  return n;
}

bool operator==(const CrowdModel& a, const CrowdModel& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  if (!same(a.hidden_weights, b.hidden_weights) || !same(a.hidden_bias, b.hidden_bias) ||
      !same(a.output_weights, b.output_weights) || !same(a.output_bias, b.output_bias) ||
      a.worker_matrices.size() != b.worker_matrices.size()) {
    return false;
  }
  for (std::size_t r = 0; r < a.worker_matrices.size(); ++r) {
    if (!same(a.worker_matrices[r], b.worker_matrices[r])) return false;
  }
  return true;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::VectorXd forward_classifier(const CrowdModel& model, std::span<const double> x) {
  check_features(model, static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd hidden = (model.hidden_weights * v + model.hidden_bias).cwiseMax(0.0);
  return softmax(model.output_weights * hidden + model.output_bias);
}

Eigen::MatrixXd predict_proba(const CrowdModel& model, const FeatureMatrix& features) {
  check_features(model, features.cols());
  Eigen::MatrixXd hidden = features * model.hidden_weights.transpose();
  hidden.rowwise() += model.hidden_bias.transpose();
  hidden = hidden.cwiseMax(0.0);
  Eigen::MatrixXd probs = hidden * model.output_weights.transpose();
  probs.rowwise() += model.output_bias.transpose();
  softmax_rows(probs);
  return probs;
}

Eigen::VectorXd forward_worker(const Eigen::VectorXd& class_probs, const Eigen::MatrixXd& worker_matrix) {
  if (worker_matrix.rows() != class_probs.size() || worker_matrix.cols() != class_probs.size()) {
    throw DimensionError("crowd matrix is " + std::to_string(worker_matrix.rows()) + "x" +
                         std::to_string(worker_matrix.cols()) + " for " + std::to_string(class_probs.size()) +
                         " classes");
  }
  return softmax(worker_matrix.transpose() * class_probs);
}

LossValue loss(const CrowdModel& model, const CrowdDataset& dataset, double weight_decay) {
  LossValue out;
  if (!dataset.annotations.empty()) {
    const Eigen::MatrixXd probs = predict_proba(model, dataset.features);
    for (const auto& a : dataset.annotations) {
      const Eigen::VectorXd p =
          forward_worker(probs.row(a.instance).transpose(), model.worker_matrices[static_cast<std::size_t>(a.worker)]);
      out.data_loss -= std::log(std::max(p(a.label), kProbabilityFloor));
    }
  }
  double sq = model.hidden_weights.squaredNorm() + model.output_weights.squaredNorm();
  for (const auto& w : model.worker_matrices) sq += w.squaredNorm();
  out.l2_penalty = weight_decay * sq;
  return out;
}

GradientResult gradients(const CrowdModel& model, const FeatureMatrix& features,
                         std::span<const Annotation> batch, double weight_decay) {
  if (batch.empty()) throw DataError("gradient of an empty batch");
  check_features(model, features.cols());
  GradientResult out{CrowdModel::zeros(model.feature_dim(), model.hidden_units(), model.num_classes(),
                                       model.num_workers()),
                     0.0};
  BatchWorkspace ws;
  out.mean_data_loss = batch_gradients(model, features, batch, weight_decay, out.grad, ws, nullptr, 0.0);
  return out;
}

TrainResult train(CrowdModel initial, const FeatureMatrix& features, std::span<const Annotation> annotations,
                  const TrainConfig& config) {
  config.validate();
  check_features(initial, features.cols());
  TrainResult out{std::move(initial), {}};
  const std::size_t n = annotations.size();
  if (n == 0 || config.epochs == 0) {
    out.epoch_losses.assign(static_cast<std::size_t>(config.epochs), 0.0);
    return out;
  }

  CrowdModel& model = out.model;
  CrowdModel grad = CrowdModel::zeros(model.feature_dim(), model.hidden_units(), model.num_classes(),
                                      model.num_workers());
  Adam adam(model, config);
  BatchWorkspace ws;
  Rng shuffle(derive_seed(config.seed, {kShuffleStream}));
  Rng dropout(derive_seed(config.seed, {kDropoutStream}));
  Rng* dropout_ptr = config.dropout_rate > 0.0 ? &dropout : nullptr;

  std::vector<Annotation> order(annotations.begin(), annotations.end());
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t j = n - 1; j > 0; --j) {
      std::swap(order[j], order[static_cast<std::size_t>(shuffle.below(j + 1))]);
    }
    double seen = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      const std::span<const Annotation> slice(order.data() + start, len);
      const double mean = batch_gradients(model, features, slice, config.weight_decay, grad, ws, dropout_ptr,
                                          config.dropout_rate);
      if (!std::isfinite(mean)) throw DivergenceError(epoch, "non-finite training loss");
      seen += mean * static_cast<double>(len);
      adam.step(model, grad);
    }
    out.epoch_losses.push_back(seen / static_cast<double>(n));
  }
  return out;
}

TrainResult train(const CrowdDataset& dataset, const TrainConfig& config) {
  config.validate();
  auto init = CrowdModel::initialize(dataset.feature_dim(), config.hidden_units, dataset.num_classes,
                                     dataset.num_workers, config.seed);
  return train(std::move(init), dataset.features, dataset.annotations, config);
}

std::vector<PseudoCandidate> predict_pseudo_candidates(const CrowdModel& model, const CrowdDataset& dataset,
                                                       std::span<const Annotation> excluded) {
  const int N = dataset.num_instances();
  const int R = dataset.num_workers;
  if (R != model.num_workers()) {
    throw DimensionError("model has " + std::to_string(model.num_workers()) + " workers, dataset " +
                         std::to_string(R));
  }
  std::vector<char> taken(static_cast<std::size_t>(N) * static_cast<std::size_t>(R), 0);
  auto slot = [R](const Annotation& a) {
    return static_cast<std::size_t>(a.instance) * static_cast<std::size_t>(R) + static_cast<std::size_t>(a.worker);
  };
  for (const auto& a : dataset.annotations) taken[slot(a)] = 1;
  for (const auto& a : excluded) {
    if (taken[slot(a)] == 1) {
      throw DataError("excluded pair (instance " + std::to_string(a.instance) + ", worker " +
                      std::to_string(a.worker) + ") is an observed annotation");
    }
    taken[slot(a)] = 2;
  }

  const Eigen::MatrixXd probs = predict_proba(model, dataset.features);
  std::vector<PseudoCandidate> out;
  out.reserve(taken.size() - static_cast<std::size_t>(std::count(taken.begin(), taken.end(), 1)) -
              excluded.size());
  Eigen::VectorXd f;
  for (int i = 0; i < N; ++i) {
    f = probs.row(i).transpose();
    for (int r = 0; r < R; ++r) {
      if (taken[static_cast<std::size_t>(i) * static_cast<std::size_t>(R) + static_cast<std::size_t>(r)]) continue;
      PseudoCandidate c;
      c.instance = i;
      c.worker = r;
      c.distribution = forward_worker(f, model.worker_matrices[static_cast<std::size_t>(r)]);
      c.entropy = entropy({c.distribution.data(), static_cast<std::size_t>(c.distribution.size())});
      c.argmax_class = static_cast<int>(argmax_first(c.distribution));
      out.push_back(std::move(c));
    }
  }
  return out;
}

double evaluate(const CrowdModel& model, const FeatureMatrix& features, std::span<const int> labels) {
  if (labels.empty() || features.rows() == 0) throw DataError("empty test set");
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw DimensionError("test set has " + std::to_string(features.rows()) + " rows and " +
                         std::to_string(labels.size()) + " labels");
  }
  const Eigen::MatrixXd probs = predict_proba(model, features);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (static_cast<int>(argmax_first(probs.row(i))) == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace selfcrowd
