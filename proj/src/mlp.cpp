#include "mmbeam/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace mmbeam {

ClassWeights class_weights(const std::vector<int>& labels) {
  std::size_t ones = 0;
  for (int y : labels) ones += y == 1 ? 1 : 0;
  const std::size_t zeros = labels.size() - ones;
  if (ones == 0 || zeros == 0) {
    throw std::invalid_argument("class weights need both blocked and non-blocked samples");
  }
  const double n = static_cast<double>(labels.size());
  return {n / static_cast<double>(zeros), n / static_cast<double>(ones)};
}

double weighted_cross_entropy(const Eigen::VectorXd& p_blocked, const Eigen::VectorXi& y, const ClassWeights& w) {
  if (p_blocked.size() != y.size() || y.size() == 0) throw std::invalid_argument("batch size mismatch");
  double acc = 0.0;
  for (Eigen::Index n = 0; n < y.size(); ++n) {
    if (y(n) == 1) {
      if (p_blocked(n) != 1.0) acc += w.mu2 * std::log(p_blocked(n));
    } else {
      if (p_blocked(n) != 0.0) acc += w.mu1 * std::log(1.0 - p_blocked(n));
    }
  }
  return -acc / static_cast<double>(y.size());
}

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("an MLP needs at least an input and an output layer");
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    weights_.push_back(Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]));
    biases_.push_back(Eigen::VectorXd::Zero(sizes_[i + 1]));
  }
}

void Mlp::he_init(Rng& rng) {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    std::normal_distribution<double> n(0.0, std::sqrt(2.0 / sizes_[i]));
    for (Eigen::Index c = 0; c < weights_[i].cols(); ++c)
      for (Eigen::Index r = 0; r < weights_[i].rows(); ++r) weights_[i](r, c) = n(rng);
    biases_[i].setZero();
  }
}

std::vector<Eigen::MatrixXd> Mlp::forward_all(const Eigen::MatrixXd& x) const {
  if (x.cols() != sizes_.front()) throw std::invalid_argument("input width does not match the network");
  std::vector<Eigen::MatrixXd> pre;
  pre.reserve(weights_.size());
  Eigen::MatrixXd a = x;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    Eigen::MatrixXd z = a * weights_[i].transpose();
    z.rowwise() += biases_[i].transpose();
    pre.push_back(z);
    if (i + 1 < weights_.size()) a = z.cwiseMax(0.0);
  }
  return pre;
}

namespace {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(r).array() - mx).exp().matrix();
    p.row(r) = e / e.sum();
  }
  return p;
}

}  // namespace

Eigen::MatrixXd Mlp::predict_proba(const Eigen::MatrixXd& x) const { return softmax_rows(forward_all(x).back()); }

double Mlp::loss(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ClassWeights& w, double l2,
                 Gradients* grad) const {
  const auto pre = forward_all(x);
  const Eigen::MatrixXd& logits = pre.back();
  if (logits.cols() != 2) throw std::invalid_argument("weighted cross-entropy expects a two-way output");
  const auto n = static_cast<double>(x.rows());

  double ce = 0.0;
  Eigen::MatrixXd delta(logits.rows(), 2);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log(std::exp(logits(r, 0) - mx) + std::exp(logits(r, 1) - mx));
    const int cls = y(r) == 1 ? 1 : 0;
    const double weight = cls == 1 ? w.mu2 : w.mu1;
    ce -= weight * (logits(r, cls) - lse);
    for (int c = 0; c < 2; ++c) {
      const double p = std::exp(logits(r, c) - lse);
      delta(r, c) = weight * (p - (c == cls ? 1.0 : 0.0)) / n;
    }
  }
  ce /= n;

  double reg = 0.0;
  for (const auto& wm : weights_) reg += wm.squaredNorm();
  const double total = ce + l2 * reg;
  if (grad == nullptr) return total;

  const std::size_t layers = weights_.size();
  grad->weights.assign(layers, Eigen::MatrixXd());
  grad->biases.assign(layers, Eigen::VectorXd());
  for (std::size_t i = layers; i-- > 0;) {
    const Eigen::MatrixXd a_in = i == 0 ? x : Eigen::MatrixXd(pre[i - 1].cwiseMax(0.0));
    grad->weights[i] = delta.transpose() * a_in + 2.0 * l2 * weights_[i];
    grad->biases[i] = delta.colwise().sum().transpose();
    if (i > 0) {
      Eigen::MatrixXd back = delta * weights_[i];
      delta = back.array() * (pre[i - 1].array() > 0.0).cast<double>();
    }
  }
  return total;
}

AdamOptimizer::AdamOptimizer(const Mlp& model, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& w : model.weights()) {
    m_.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    v_.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : model.biases()) {
    m_.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    v_.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  }
}

void AdamOptimizer::step(Mlp& model, const Mlp::Gradients& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    param.array() -= cfg_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
  };
  for (std::size_t i = 0; i < model.weights().size(); ++i) {
    update(model.weights()[i], grad.weights[i], m_.weights[i], v_.weights[i]);
    update(model.biases()[i], grad.biases[i], m_.biases[i], v_.biases[i]);
  }
}

}  // namespace mmbeam
