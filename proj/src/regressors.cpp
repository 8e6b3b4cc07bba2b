#include "cate_ebm/regressors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cate_ebm/error.hpp"
#include "cate_ebm/rng.hpp"

namespace cate_ebm {

std::string to_string(RegressorKind kind) {
  return kind == RegressorKind::ridge ? "ridge" : "kernel_ridge";
}

RegressorKind parse_regressor_kind(const std::string& name) {
  if (name == "ridge") return RegressorKind::ridge;
  if (name == "kernel_ridge" || name == "krr") return RegressorKind::kernel_ridge;
  throw config_error("unknown regressor kind '" + name + "' (valid: ridge, kernel_ridge)");
}

namespace {

Vector resolve_weights(const Vector& weights, Eigen::Index n) {
  if (weights.size() == 0) return Vector::Ones(n);
  if (weights.size() != n) throw dimension_error("regression weights length differs from rows");
  if ((weights.array() < 0.0).any() || !weights.allFinite())
    throw input_error("regression weights must be finite and non-negative");
  if (weights.sum() <= 0.0) throw input_error("regression weights sum to zero");
  return weights;
}

void check_fit_inputs(const Matrix& x, const Vector& y, double lambda) {
  if (x.rows() < 1) throw too_few_samples_error("regression needs at least one row");
  if (y.size() != x.rows()) throw dimension_error("regression target length differs from rows");
  if (!(lambda > 0.0)) throw input_error("regression penalty must be positive");
  if (!x.allFinite() || !y.allFinite()) throw numeric_error("regression inputs are not finite");
}

} // namespace

BaseRegressor ridge_fit(const Matrix& x, const Vector& y, double lambda, const Vector& weights) {
  check_fit_inputs(x, y, lambda);
  const Vector w = resolve_weights(weights, x.rows());
  const double wsum = w.sum();
  const Eigen::RowVectorXd x_mean = (w.transpose() * x) / wsum;
  const double y_mean = w.dot(y) / wsum;
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Vector yc = y.array() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * w.asDiagonal() * xc;
  gram.diagonal().array() += lambda;
  const Vector rhs = xc.transpose() * (w.asDiagonal() * yc);

  BaseRegressor model;
  model.kind_ = RegressorKind::ridge;
  model.lambda_ = lambda;
  model.input_dim_ = static_cast<std::size_t>(x.cols());
  model.coef_ = spd_solve(gram, rhs);
  model.intercept_ = y_mean - x_mean.dot(model.coef_);
  return model;
}

Eigen::MatrixXd rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
  if (a.cols() != b.cols()) throw dimension_error("rbf_kernel: column counts differ");
  const Vector an = a.rowwise().squaredNorm();
  const Vector bn = b.rowwise().squaredNorm();
  Eigen::MatrixXd k = -2.0 * (a * b.transpose());
  k.colwise() += an;
  k.rowwise() += bn.transpose();
  return (-gamma * k.array().max(0.0)).exp().matrix();
}

BaseRegressor kernel_ridge_fit(const Matrix& x, const Vector& y, double lambda, double gamma,
                               const Vector& weights) {
  check_fit_inputs(x, y, lambda);
  if (!(gamma > 0.0)) throw input_error("kernel ridge bandwidth gamma must be positive");
  const Vector w = resolve_weights(weights, x.rows());
  const double y_mean = w.dot(y) / w.sum();
  const Vector s = w.cwiseSqrt();

  // (S K S + lambda I) beta = S (y - mean), alpha = S beta solves the
  // weighted normal equations (W K + lambda I) alpha = W (y - mean).
  Eigen::MatrixXd system = s.asDiagonal() * rbf_kernel(x, x, gamma) * s.asDiagonal();
  system.diagonal().array() += lambda;
  const Vector rhs = s.cwiseProduct((y.array() - y_mean).matrix());

  BaseRegressor model;
  model.kind_ = RegressorKind::kernel_ridge;
  model.lambda_ = lambda;
  model.gamma_ = gamma;
  model.input_dim_ = static_cast<std::size_t>(x.cols());
  model.intercept_ = y_mean;
  model.coef_ = s.cwiseProduct(Vector(spd_solve(system, rhs)));
  model.train_x_ = x;
  return model;
}

Vector BaseRegressor::predict(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim_)
    throw dimension_error("predict: input has " + std::to_string(x.cols()) + " columns, model expects " +
                          std::to_string(input_dim_));
  if (kind_ == RegressorKind::ridge) return (x * coef_).array() + intercept_;
  // Chunked to bound the size of the cross-kernel block.
  Vector out(x.rows());
  constexpr Eigen::Index chunk = 4096;
  for (Eigen::Index start = 0; start < x.rows(); start += chunk) {
    const Eigen::Index len = std::min(chunk, x.rows() - start);
    const Matrix block = x.middleRows(start, len);
    out.segment(start, len) = (rbf_kernel(block, train_x_, gamma_) * coef_).array() + intercept_;
  }
  return out;
}

double median_heuristic_gamma(const Matrix& x, std::size_t max_rows) {
  const Eigen::Index n = std::min<Eigen::Index>(x.rows(), static_cast<Eigen::Index>(max_rows));
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d2.push_back((x.row(i) - x.row(j)).squaredNorm());
  if (d2.empty()) return 1.0;
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  return *mid > 0.0 ? 1.0 / *mid : 1.0;
}

TunedChoice tune_regressor(const Matrix& x, const Vector& y, const BaseSpec& spec, const Vector& weights) {
  if (spec.lambda_grid.empty()) throw config_error("lambda grid is empty");
  if (spec.cv_folds < 2) throw config_error("cv folds must be >= 2");
  const Vector w_all = resolve_weights(weights, x.rows());
  const double gamma0 = spec.gamma > 0.0 ? spec.gamma : median_heuristic_gamma(x);

  // CV runs on a seeded subsample of at most cv_max_rows rows.
  SeededRng rng(spec.cv_seed);
  std::vector<std::size_t> rows = rng.permutation(static_cast<std::size_t>(x.rows()));
  if (rows.size() > spec.cv_max_rows) rows.resize(spec.cv_max_rows);
  const std::size_t m = rows.size();
  const std::size_t folds = std::min(spec.cv_folds, m);
  if (folds < 2) return {spec.lambda_grid.front(), gamma0, 0.0};

  Matrix xs(static_cast<Eigen::Index>(m), x.cols());
  Vector ys(static_cast<Eigen::Index>(m));
  Vector ws(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    xs.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    ys(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
    ws(static_cast<Eigen::Index>(i)) = w_all(static_cast<Eigen::Index>(rows[i]));
  }

  std::vector<double> gammas;
  if (spec.kind == RegressorKind::kernel_ridge)
    for (double s : spec.gamma_scales) gammas.push_back(s * gamma0);
  else
    gammas.push_back(0.0);

  TunedChoice best{spec.lambda_grid.front(), gammas.front(), std::numeric_limits<double>::infinity()};
  for (double gamma : gammas) {
    for (double lambda : spec.lambda_grid) {
      double err = 0.0;
      double wsum = 0.0;
      bool ok = true;
      for (std::size_t f = 0; f < folds && ok; ++f) {
        std::vector<std::size_t> tr, va;
        for (std::size_t i = 0; i < m; ++i) (i % folds == f ? va : tr).push_back(i);
        auto pick = [&](const std::vector<std::size_t>& idx, Matrix& xo, Vector& yo, Vector& wo) {
          xo.resize(static_cast<Eigen::Index>(idx.size()), xs.cols());
          yo.resize(static_cast<Eigen::Index>(idx.size()));
          wo.resize(static_cast<Eigen::Index>(idx.size()));
          for (std::size_t i = 0; i < idx.size(); ++i) {
            xo.row(static_cast<Eigen::Index>(i)) = xs.row(static_cast<Eigen::Index>(idx[i]));
            yo(static_cast<Eigen::Index>(i)) = ys(static_cast<Eigen::Index>(idx[i]));
            wo(static_cast<Eigen::Index>(i)) = ws(static_cast<Eigen::Index>(idx[i]));
          }
        };
        Matrix xtr, xva;
        Vector ytr, yva, wtr, wva;
        pick(tr, xtr, ytr, wtr);
        pick(va, xva, yva, wva);
        if (wtr.sum() <= 0.0) continue;
        try {
          const BaseRegressor model = spec.kind == RegressorKind::ridge
                                          ? ridge_fit(xtr, ytr, lambda, wtr)
                                          : kernel_ridge_fit(xtr, ytr, lambda, gamma, wtr);
          const Vector resid = model.predict(xva) - yva;
          err += wva.dot(resid.cwiseAbs2());
          wsum += wva.sum();
        } catch (const ill_conditioned_error&) {
          ok = false;
        }
      }
      if (!ok || wsum <= 0.0) continue;
      const double score = err / wsum;
      if (score < best.cv_error) best = {lambda, gamma, score};
    }
  }
  return best;
}

BaseRegressor fit_regressor(const Matrix& x, const Vector& y, const BaseSpec& spec, const Vector& weights) {
  double lambda = spec.lambda;
  double gamma = spec.gamma;
  if (spec.tune) {
    const TunedChoice choice = tune_regressor(x, y, spec, weights);
    lambda = choice.lambda;
    gamma = choice.gamma;
  } else if (spec.kind == RegressorKind::kernel_ridge && !(gamma > 0.0)) {
    gamma = median_heuristic_gamma(x);
  }
  return spec.kind == RegressorKind::ridge ? ridge_fit(x, y, lambda, weights)
                                           : kernel_ridge_fit(x, y, lambda, gamma, weights);
}

PropensityModel propensity_fit(const Matrix& x, const Vector& a, double l2, double clip) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (a.size() != n) throw dimension_error("propensity_fit: treatment length differs from rows");
  if (!(l2 > 0.0)) throw input_error("propensity_fit: L2 strength must be positive");
  if (!(clip > 0.0 && clip < 0.5)) throw input_error("propensity_fit: clip must lie in (0, 0.5)");
  const double treated = a.sum();
  if (treated <= 0.0 || treated >= static_cast<double>(n))
    throw empty_arm_error("propensity_fit: both treatment classes must be present");

  // Parameters: [intercept, w]. Intercept is not penalized.
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = x;
  Vector theta = Vector::Zero(d + 1);
  const double rate = treated / static_cast<double>(n);
  theta(0) = std::log(rate / (1.0 - rate));
  Vector penalty = Vector::Constant(d + 1, l2);
  penalty(0) = 0.0;

  PropensityModel model;
  for (int iter = 0; iter < 100; ++iter) {
    const Vector eta = design * theta;
    const Vector p = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    const Vector grad = design.transpose() * (p - a) + penalty.cwiseProduct(theta);
    if (grad.norm() < 1e-12 * static_cast<double>(n)) {
      model.converged_ = true;
      break;
    }
    const Vector curv = (p.array() * (1.0 - p.array())).max(1e-12).matrix();
    Eigen::MatrixXd hess = design.transpose() * curv.asDiagonal() * design;
    hess.diagonal() += penalty;
    hess(0, 0) += 1e-10;
    theta -= spd_solve(hess, grad);
  }
  model.intercept_ = theta(0);
  model.coef_ = theta.tail(d);
  model.l2_ = l2;
  model.clip_ = clip;
  return model;
}

Vector PropensityModel::predict(const Matrix& x) const {
  if (x.cols() != coef_.size()) throw dimension_error("propensity predict: column count differs");
  const Vector eta = (x * coef_).array() + intercept_;
  return (1.0 / (1.0 + (-eta.array()).exp())).max(clip_).min(1.0 - clip_).matrix();
}

} // namespace cate_ebm
