#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "selfcrowd/candidate.hpp"
#include "selfcrowd/dataset.hpp"

namespace selfcrowd {

struct TrainConfig {
  double learning_rate = 0.001;
  int epochs = 25;
  int batch_size = 512;
  double weight_decay = 0.0005;
  int hidden_units = 128;
  double dropout_rate = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 1;

  /// Throws ConfigError with a "train.<field>" path. epochs == 0 is allowed
  /// and makes train() a no-op.
  void validate() const;
};

/// Classifier d -> H (ReLU) -> C (softmax) followed by one unconstrained
/// C x C crowd matrix per worker.
///
/// The same struct doubles as the gradient container: gradients() returns
/// a CrowdModel whose tensors hold partial derivatives.
struct CrowdModel {
  Eigen::MatrixXd hidden_weights;  // H x d
  Eigen::VectorXd hidden_bias;     // H
  Eigen::MatrixXd output_weights;  // C x H
  Eigen::VectorXd output_bias;     // C
  std::vector<Eigen::MatrixXd> worker_matrices;  // R of C x C; row = true class

  int feature_dim() const { return static_cast<int>(hidden_weights.cols()); }
  int hidden_units() const { return static_cast<int>(hidden_weights.rows()); }
  int num_classes() const { return static_cast<int>(output_weights.rows()); }
  int num_workers() const { return static_cast<int>(worker_matrices.size()); }

  /// All-zero model of the given shape.
  static CrowdModel zeros(int feature_dim, int hidden_units, int num_classes, int num_workers);

  /// Fan-in scaled uniform weights, zero biases, identity crowd matrices.
  static CrowdModel initialize(int feature_dim, int hidden_units, int num_classes, int num_workers,
                               std::uint64_t seed);

  /// One view per parameter tensor, in a fixed order: hidden weights,
  /// hidden bias, output weights, output bias, then each worker matrix.
  struct Tensor {
    std::span<double> values;
    bool decayed;     // weight matrices get L2, biases do not
    int worker = -1;  // crowd matrix index, -1 for classifier tensors
  };
  std::vector<Tensor> tensors();
  std::size_t parameter_count() const;

  friend bool operator==(const CrowdModel& a, const CrowdModel& b);
};

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Classifier class probabilities f(x). Dropout is never applied here.
Eigen::VectorXd forward_classifier(const CrowdModel& model, std::span<const double> x);

/// Class probabilities for every row of `features` (N x C).
Eigen::MatrixXd predict_proba(const CrowdModel& model, const FeatureMatrix& features);

/// Worker annotation distribution softmax(f * W_r), with f as a row vector.
Eigen::VectorXd forward_worker(const Eigen::VectorXd& class_probs, const Eigen::MatrixXd& worker_matrix);

/// Probabilities are floored at this value before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossValue {
  double data_loss = 0.0;   // sum over observed annotations of -log p(label)
  double l2_penalty = 0.0;  // lambda * sum of squared weights (all workers)
};

LossValue loss(const CrowdModel& model, const CrowdDataset& dataset, double weight_decay);

struct GradientResult {
  CrowdModel grad;
  double mean_data_loss = 0.0;
};

/// Exact gradient of the mini-batch objective
///
///   (1/B) * sum_batch -log p(label)
///     + lambda * (|W_hidden|^2 + |W_output|^2 + sum_{r in batch} |W_r|^2)
///
/// Crowd matrices of workers with no annotation in the batch receive a zero
/// gradient. Throws DataError on an empty batch.
GradientResult gradients(const CrowdModel& model, const FeatureMatrix& features,
                         std::span<const Annotation> batch, double weight_decay);

struct TrainResult {
  CrowdModel model;
  std::vector<double> epoch_losses;  // mean data loss seen during each epoch
};

/// Mini-batch Adam with coupled L2 decay. Batches are reshuffled every epoch
/// from config.seed; the result is bit-for-bit reproducible.
/// Throws DivergenceError (1-based epoch) on a non-finite loss.
TrainResult train(CrowdModel initial, const FeatureMatrix& features,
                  std::span<const Annotation> annotations, const TrainConfig& config);

/// Fresh initialization from config.seed, then train().
TrainResult train(const CrowdDataset& dataset, const TrainConfig& config);

/// One candidate per (instance, worker) pair that is neither observed in
/// `dataset` nor listed in `excluded`, ordered by instance then worker.
std::vector<PseudoCandidate> predict_pseudo_candidates(const CrowdModel& model, const CrowdDataset& dataset,
                                                       std::span<const Annotation> excluded);

/// Fraction of rows whose argmax class (lowest index on ties) equals the
/// label. Throws DataError on an empty test set.
double evaluate(const CrowdModel& model, const FeatureMatrix& features, std::span<const int> labels);

}  // namespace selfcrowd
