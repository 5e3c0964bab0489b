#pragma once

// Fully-connected ReLU network with a two-way softmax head, trained with Adam
// on a class-weighted cross-entropy.

#include <vector>

#include <Eigen/Dense>

#include "mmbeam/channel.hpp"  // Rng

namespace mmbeam {

/// Per-class weights derived from inverse class frequency.
/// mu1 = N / #non-blocked scales the non-blocked term and
/// mu2 = N / #blocked scales the blocked term, so that each class carries a
/// total weight of N.
struct ClassWeights {
  double mu1 = 1.0;
  double mu2 = 1.0;
};

ClassWeights class_weights(const std::vector<int>& labels);

/// -(1/N) sum [mu2 y log p + mu1 (1 - y) log(1 - p)] on probabilities of the
/// blocked class, with 0 log 0 taken as 0.
double weighted_cross_entropy(const Eigen::VectorXd& p_blocked, const Eigen::VectorXi& y, const ClassWeights& w);

class Mlp {
 public:
  Mlp() = default;
  /// `layer_sizes` lists input, hidden..., output sizes.
  explicit Mlp(std::vector<int> layer_sizes);

  /// He-normal weights, zero biases.
  void he_init(Rng& rng);

  int input_size() const { return sizes_.front(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::size_t layers() const { return weights_.size(); }

  /// Pre-activations of every layer; the last entry holds the logits.
  std::vector<Eigen::MatrixXd> forward_all(const Eigen::MatrixXd& x) const;

  /// Row-wise softmax probabilities (n x 2); column 1 is P(blocked).
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;

  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
  };

  /// Weighted cross-entropy averaged over the batch plus l2 * sum ||W||^2
  /// (biases are not regularised). Fills `grad` when non-null.
  double loss(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ClassWeights& w, double l2,
              Gradients* grad = nullptr) const;

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;  // out x in
  std::vector<Eigen::VectorXd> biases_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const Mlp& model, AdamConfig cfg);
  void step(Mlp& model, const Mlp::Gradients& grad);

 private:
  AdamConfig cfg_;
  long t_ = 0;
  Mlp::Gradients m_, v_;
};

}  // namespace mmbeam
