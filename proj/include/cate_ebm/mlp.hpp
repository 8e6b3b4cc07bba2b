#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cate_ebm/linalg.hpp"
#include "cate_ebm/rng.hpp"

namespace cate_ebm {

// Fully connected network: ReLU on hidden layers, identity on the output.
// All parameters live in one flat buffer so optimizers and gradient checks
// can treat them uniformly. Layer l stores its weight matrix (out x in,
// column-major) followed by its bias vector.
class MlpNet {
public:
  using WeightMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstWeightMap = Eigen::Map<const Eigen::MatrixXd>;
  using BiasMap = Eigen::Map<Eigen::VectorXd>;
  using ConstBiasMap = Eigen::Map<const Eigen::VectorXd>;

  MlpNet() = default;
  // widths = {input, hidden..., output}; all parameters start at zero.
  explicit MlpNet(std::vector<std::size_t> widths);

  // Gaussian weights with std = gain / sqrt(fan_in) (hidden layers) and
  // std = output_gain / sqrt(fan_in) on the output layer; biases Gaussian
  // with std bias_std.
  static MlpNet random(std::vector<std::size_t> widths, SeededRng& rng, double gain,
                       double output_gain, double bias_std = 0.0);

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }
  std::size_t layer_count() const { return widths_.size() - 1; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  WeightMap weight(std::size_t layer);
  ConstWeightMap weight(std::size_t layer) const;
  BiasMap bias(std::size_t layer);
  ConstBiasMap bias(std::size_t layer) const;

  Vector forward(const Vector& x) const;
  // Row-major batch: one sample per row.
  Matrix forward(const Matrix& x) const;

  // Intermediate values kept for the backward pass.
  struct Tape {
    Eigen::MatrixXd input;                    // n x d
    std::vector<Eigen::MatrixXd> activations; // post-activation, per layer
  };
  Matrix forward(const Matrix& x, Tape& tape) const;

  // Reverse-mode gradient of sum_i <upstream_i, f(x_i)> w.r.t. params, in the
  // same flat layout as params(). When input_grad is given it receives the
  // gradient w.r.t. the batch inputs.
  std::vector<double> backward(const Tape& tape, const Matrix& upstream,
                               Matrix* input_grad = nullptr) const;

  bool operator==(const MlpNet& other) const = default;

private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + widths_[layer + 1] * widths_[layer];
  }
  Eigen::MatrixXd run(const Eigen::MatrixXd& x, Tape* tape) const;

  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
public:
  AdamState() = default;
  AdamState(std::size_t parameter_count, AdamConfig config);

  // Bias-corrected Adam update. Throws training_diverged_error on a
  // non-finite gradient, leaving params and state untouched.
  void step(std::span<double> params, std::span<const double> grads);

  void set_learning_rate(double lr) noexcept { config_.learning_rate = lr; }
  long steps() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }
  std::span<const double> first_moment() const noexcept { return m_; }
  std::span<const double> second_moment() const noexcept { return v_; }

private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  long step_ = 0;
};

// Largest relative disagreement between `analytic` and central differences
// of `loss` at `params`. Above 10^4 parameters a seeded subsample of 10^4
// coordinates is checked.
template <class Loss>
double grad_check(Loss&& loss, std::span<const double> analytic, std::span<const double> params,
                  double h, std::uint64_t subsample_seed = 0);

double relative_error(double analytic, double numeric);

} // namespace cate_ebm

#include "cate_ebm/detail/grad_check_impl.hpp"
