#pragma once

#include <Eigen/Dense>

#include "cate_ebm/rng.hpp"

namespace cate_ebm {

// Data matrices are row-major: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m);
bool all_finite(const Matrix& m);

// k x k matrix with B B^T = I; columns are the per-subset coefficient
// vectors of the partially randomized EBM.
class OrthogonalMatrix {
public:
  OrthogonalMatrix() = default;
  // Throws numeric_error when ||B B^T - I||_max > 1e-8.
  explicit OrthogonalMatrix(Eigen::MatrixXd b);

  std::size_t k() const noexcept { return static_cast<std::size_t>(b_.rows()); }
  const Eigen::MatrixXd& matrix() const noexcept { return b_; }
  auto column(std::size_t j) const { return b_.col(static_cast<Eigen::Index>(j)); }

  double orthogonality_error() const;

private:
  Eigen::MatrixXd b_;
};

struct SymmetricEigen {
  Vector values;          // descending
  Eigen::MatrixXd vectors; // column i pairs with values(i)
};

// Cyclic Jacobi rotations; stops once the off-diagonal Frobenius norm drops
// below tol (relative to the total norm) or after max_sweeps.
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& symmetric, double tol = 1e-12,
                            int max_sweeps = 100);

// Eigenvectors of the symmetrized Gaussian matrix (B0 + B0^T) / 2.
OrthogonalMatrix random_orthogonal(std::size_t k, SeededRng& rng);

struct Standardized {
  Matrix values;
  Vector mean;
  Vector std; // population convention, divisor n
};

Standardized standardize_columns(const Matrix& m);
Matrix apply_standardization(const Matrix& m, const Vector& mean, const Vector& std);

// Solves A x = rhs for symmetric positive definite A. Retries with growing
// diagonal jitter; throws ill_conditioned_error if that still fails.
Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& rhs);

// Population mean and variance of each column.
Vector column_means(const Matrix& m);

} // namespace cate_ebm
