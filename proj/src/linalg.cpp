#include "cate_ebm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cate_ebm/error.hpp"

namespace cate_ebm {

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

OrthogonalMatrix::OrthogonalMatrix(Eigen::MatrixXd b) : b_(std::move(b)) {
  if (b_.rows() != b_.cols() || b_.rows() == 0)
    throw invalid_dimension_error("orthogonal matrix must be square and non-empty");
  if (orthogonality_error() > 1e-8)
    throw numeric_error("matrix is not orthogonal: ||B B^T - I||_max = " +
                        std::to_string(orthogonality_error()));
}

double OrthogonalMatrix::orthogonality_error() const {
  const Eigen::MatrixXd gram = b_ * b_.transpose();
  return (gram - Eigen::MatrixXd::Identity(b_.rows(), b_.cols())).cwiseAbs().maxCoeff();
}

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& symmetric, double tol, int max_sweeps) {
  const Eigen::Index n = symmetric.rows();
  if (n == 0 || symmetric.cols() != n)
    throw dimension_error("jacobi_eigen expects a non-empty square matrix");

  Eigen::MatrixXd a = symmetric;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * scale) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index r = 0; r < n; ++r) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double apr = a(p, r);
          const double aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    out.values(i) = a(src, src);
    out.vectors.col(i) = v.col(src);
    // Re-normalize to remove drift accumulated over many rotations.
    out.vectors.col(i).normalize();
  }
  return out;
}

OrthogonalMatrix random_orthogonal(std::size_t k, SeededRng& rng) {
  if (k == 0) throw invalid_dimension_error("random_orthogonal: k must be >= 1");
  const auto n = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd b0(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) b0(i, j) = rng.normal();
  const Eigen::MatrixXd sym = 0.5 * (b0 + b0.transpose());
  return OrthogonalMatrix(jacobi_eigen(sym).vectors);
}

Vector column_means(const Matrix& m) {
  Vector mean = Vector::Zero(m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) mean += m.row(i).transpose();
  return mean / static_cast<double>(m.rows());
}

Standardized standardize_columns(const Matrix& m) {
  if (m.rows() < 2) throw too_few_samples_error("standardize_columns needs at least 2 rows");
  Standardized out;
  out.mean = column_means(m);
  out.std.resize(m.cols());
  const double n = static_cast<double>(m.rows());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    double ss = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double dev = m(i, c) - out.mean(c);
      ss += dev * dev;
    }
    const double sd = std::sqrt(ss / n);
    // Relative threshold: a column that is constant up to round-off counts
    // as degenerate.
    if (!(sd > 1e-12 * std::max(1.0, std::abs(out.mean(c)))))
      throw degenerate_column_error(static_cast<std::size_t>(c),
                                    "zero-variance column " + std::to_string(c));
    out.std(c) = sd;
  }
  out.values = apply_standardization(m, out.mean, out.std);
  return out;
}

Matrix apply_standardization(const Matrix& m, const Vector& mean, const Vector& std) {
  if (mean.size() != m.cols() || std.size() != m.cols())
    throw dimension_error("standardization statistics do not match column count");
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(i, c) = (m(i, c) - mean(c)) / std(c);
  return out;
}

Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& rhs) {
  if (a.rows() != a.cols() || a.rows() != rhs.rows())
    throw dimension_error("spd_solve: shape mismatch");
  const double diag_scale = std::max(a.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd shifted = a;
    if (jitter > 0.0) shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd x = llt.solve(rhs);
      if (x.allFinite()) return x;
    }
    jitter = jitter == 0.0 ? 1e-12 * diag_scale : jitter * 100.0;
  }
  throw ill_conditioned_error("system is not positive definite after jitter");
}

} // namespace cate_ebm
