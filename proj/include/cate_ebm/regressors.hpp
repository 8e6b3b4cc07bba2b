#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cate_ebm/linalg.hpp"

namespace cate_ebm {

enum class RegressorKind { ridge, kernel_ridge };

std::string to_string(RegressorKind kind);
RegressorKind parse_regressor_kind(const std::string& name);

// Base model family for outcome and effect regressions. With tune set, the
// penalty (and RBF bandwidth) are picked by k-fold CV on the observed
// targets; gamma grid entries are multiples of the median-distance
// heuristic 1 / median ||x_i - x_j||^2.
struct BaseSpec {
  RegressorKind kind = RegressorKind::kernel_ridge;
  double lambda = 1e-1;
  double gamma = 0.0; // <= 0: median heuristic
  bool tune = true;
  std::vector<double> lambda_grid = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::vector<double> gamma_scales = {0.25, 1.0, 4.0};
  std::size_t cv_folds = 5;
  std::size_t cv_max_rows = 500;
  std::uint64_t cv_seed = 0;
};

// Ridge: y ~ intercept + x^T w with an unpenalized intercept.
// Kernel ridge: y ~ intercept + sum_i alpha_i exp(-gamma ||x - x_i||^2).
// Both accept optional per-row weights (weighted least squares).
class BaseRegressor {
public:
  RegressorKind kind() const noexcept { return kind_; }
  double lambda() const noexcept { return lambda_; }
  double gamma() const noexcept { return gamma_; }
  double intercept() const noexcept { return intercept_; }
  const Vector& coefficients() const noexcept { return coef_; } // ridge weights or dual alpha
  std::size_t input_dim() const noexcept { return input_dim_; }

  Vector predict(const Matrix& x) const;

  friend BaseRegressor ridge_fit(const Matrix& x, const Vector& y, double lambda, const Vector& weights);
  friend BaseRegressor kernel_ridge_fit(const Matrix& x, const Vector& y, double lambda, double gamma,
                                        const Vector& weights);

private:
  RegressorKind kind_ = RegressorKind::ridge;
  double lambda_ = 0.0;
  double gamma_ = 0.0;
  double intercept_ = 0.0;
  Vector coef_;
  Matrix train_x_;
  std::size_t input_dim_ = 0;
};

BaseRegressor ridge_fit(const Matrix& x, const Vector& y, double lambda, const Vector& weights = {});
BaseRegressor kernel_ridge_fit(const Matrix& x, const Vector& y, double lambda, double gamma,
                               const Vector& weights = {});

// exp(-gamma ||a_i - b_j||^2)
Eigen::MatrixXd rbf_kernel(const Matrix& a, const Matrix& b, double gamma);
double median_heuristic_gamma(const Matrix& x, std::size_t max_rows = 500);

struct TunedChoice {
  double lambda = 0.0;
  double gamma = 0.0;
  double cv_error = 0.0;
};

TunedChoice tune_regressor(const Matrix& x, const Vector& y, const BaseSpec& spec, const Vector& weights = {});
BaseRegressor fit_regressor(const Matrix& x, const Vector& y, const BaseSpec& spec, const Vector& weights = {});

// L2-penalized logistic regression (unpenalized intercept) fit by Newton's
// method; predictions are clipped to [clip, 1 - clip].
class PropensityModel {
public:
  Vector predict(const Matrix& x) const;
  const Vector& coefficients() const noexcept { return coef_; }
  double intercept() const noexcept { return intercept_; }
  bool converged() const noexcept { return converged_; }
  double clip() const noexcept { return clip_; }

  friend PropensityModel propensity_fit(const Matrix& x, const Vector& a, double l2, double clip);

private:
  Vector coef_;
  double intercept_ = 0.0;
  double l2_ = 1.0;
  double clip_ = 0.01;
  bool converged_ = false;
};

PropensityModel propensity_fit(const Matrix& x, const Vector& a, double l2 = 1.0, double clip = 0.01);

} // namespace cate_ebm
