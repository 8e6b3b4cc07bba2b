#include "cate_ebm/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cate_ebm/error.hpp"

namespace cate_ebm {

MlpNet::MlpNet(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw dimension_error("MlpNet needs an input and an output width");
  for (std::size_t w : widths_)
    if (w == 0) throw dimension_error("MlpNet layer widths must be positive");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(total);
    total += widths_[l + 1] * widths_[l] + widths_[l + 1];
  }
  params_.assign(total, 0.0);
}

MlpNet MlpNet::random(std::vector<std::size_t> widths, SeededRng& rng, double gain,
                      double output_gain, double bias_std) {
  MlpNet net(std::move(widths));
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const double fan_in = static_cast<double>(net.widths_[l]);
    const double scale = (l + 1 == net.layer_count() ? output_gain : gain) / std::sqrt(fan_in);
    auto w = net.weight(l);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * rng.normal();
    auto b = net.bias(l);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = bias_std > 0.0 ? bias_std * rng.normal() : 0.0;
  }
  return net;
}

MlpNet::WeightMap MlpNet::weight(std::size_t layer) {
  return WeightMap(params_.data() + weight_offset(layer),
                   static_cast<Eigen::Index>(widths_[layer + 1]),
                   static_cast<Eigen::Index>(widths_[layer]));
}
MlpNet::ConstWeightMap MlpNet::weight(std::size_t layer) const {
  return ConstWeightMap(params_.data() + weight_offset(layer),
                        static_cast<Eigen::Index>(widths_[layer + 1]),
                        static_cast<Eigen::Index>(widths_[layer]));
}
MlpNet::BiasMap MlpNet::bias(std::size_t layer) {
  return BiasMap(params_.data() + bias_offset(layer), static_cast<Eigen::Index>(widths_[layer + 1]));
}
MlpNet::ConstBiasMap MlpNet::bias(std::size_t layer) const {
  return ConstBiasMap(params_.data() + bias_offset(layer),
                      static_cast<Eigen::Index>(widths_[layer + 1]));
}

Eigen::MatrixXd MlpNet::run(const Eigen::MatrixXd& x, Tape* tape) const {
  if (widths_.empty()) throw dimension_error("MlpNet is empty");
  if (static_cast<std::size_t>(x.cols()) != input_width())
    throw dimension_error("MlpNet input has " + std::to_string(x.cols()) + " columns, expected " +
                          std::to_string(input_width()));
  Eigen::MatrixXd h = x;
  if (tape) {
    tape->input = x;
    tape->activations.clear();
  }
  for (std::size_t l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd z = h * weight(l).transpose();
    z.rowwise() += bias(l).transpose();
    if (l + 1 < layer_count()) z = z.cwiseMax(0.0);
    h = std::move(z);
    if (tape) tape->activations.push_back(h);
  }
  return h;
}

Vector MlpNet::forward(const Vector& x) const {
  Eigen::MatrixXd row = x.transpose();
  return run(row, nullptr).row(0).transpose();
}

Matrix MlpNet::forward(const Matrix& x) const { return run(Eigen::MatrixXd(x), nullptr); }

Matrix MlpNet::forward(const Matrix& x, Tape& tape) const {
  return run(Eigen::MatrixXd(x), &tape);
}

std::vector<double> MlpNet::backward(const Tape& tape, const Matrix& upstream,
                                     Matrix* input_grad) const {
  if (tape.activations.size() != layer_count())
    throw dimension_error("backward: tape does not belong to this network");
  const Eigen::MatrixXd& out = tape.activations.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw dimension_error("backward: upstream gradient shape does not match output");

  std::vector<double> grads(params_.size(), 0.0);
  Eigen::MatrixXd delta = upstream; // dL/dz for the current layer
  for (std::size_t l = layer_count(); l-- > 0;) {
    const Eigen::MatrixXd& layer_in = l == 0 ? tape.input : tape.activations[l - 1];
    Eigen::Map<Eigen::MatrixXd> gw(grads.data() + weight_offset(l),
                                   static_cast<Eigen::Index>(widths_[l + 1]),
                                   static_cast<Eigen::Index>(widths_[l]));
    Eigen::Map<Eigen::VectorXd> gb(grads.data() + bias_offset(l),
                                   static_cast<Eigen::Index>(widths_[l + 1]));
    gw.noalias() = delta.transpose() * layer_in;
    gb = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd back = delta * weight(l);
      // ReLU derivative; the kink at 0 takes derivative 0.
      back.array() *= (layer_in.array() > 0.0).cast<double>();
      delta = std::move(back);
    } else if (input_grad) {
      *input_grad = delta * weight(0);
    }
  }
  return grads;
}

AdamState::AdamState(std::size_t parameter_count, AdamConfig config)
    : config_(config), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw dimension_error("adam: parameter/gradient size does not match state");
  for (double g : grads)
    if (!std::isfinite(g)) throw training_diverged_error(-1, "adam: non-finite gradient");

  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / correction1;
    const double v_hat = v_[i] / correction2;
    params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
  return std::abs(analytic - numeric) / denom;
}

} // namespace cate_ebm
