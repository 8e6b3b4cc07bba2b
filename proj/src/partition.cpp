#include "cate_ebm/partition.hpp"

#include <limits>
#include <string>

#include "cate_ebm/error.hpp"

namespace cate_ebm {
namespace {

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

std::size_t nearest(const Matrix& centroids, const Matrix& x, Eigen::Index row, double* dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, row, centroids, c);
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

Matrix kmeanspp_seed(const Matrix& x, std::size_t k, SeededRng& rng) {
  const Eigen::Index n = x.rows();
  Matrix centroids(static_cast<Eigen::Index>(k), x.cols());
  centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = squared_distance(x, i, centroids, 0);

  for (Eigen::Index c = 1; c < static_cast<Eigen::Index>(k); ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc > target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n)));
    }
    centroids.row(c) = x.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], squared_distance(x, i, centroids, c));
  }
  return centroids;
}

} // namespace

PartitionModel kmeans_fit(const Matrix& x, std::size_t k, SeededRng& rng, KmeansOptions options) {
  if (k == 0) throw invalid_dimension_error("kmeans_fit: k must be >= 1");
  if (options.max_iter == 0) throw input_error("kmeans_fit: max_iter must be >= 1");
  if (options.tol < 0.0) throw input_error("kmeans_fit: tol must be >= 0");
  if (static_cast<std::size_t>(x.rows()) < k)
    throw too_few_samples_error("kmeans_fit: " + std::to_string(x.rows()) +
                                " samples for k = " + std::to_string(k));

  const Eigen::Index n = x.rows();
  const auto kk = static_cast<Eigen::Index>(k);
  PartitionModel model;
  model.centroids = kmeanspp_seed(x, k, rng);

  std::vector<std::size_t> labels(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    bool changed = iter == 0;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const std::size_t label = nearest(model.centroids, x, i, &dist[idx]);
      changed = changed || label != labels[idx];
      labels[idx] = label;
      inertia += dist[idx];
    }
    model.inertia_trace.push_back(inertia);
    model.inertia = inertia;
    if (!changed || previous - inertia < options.tol) break;
    previous = inertia;

    Matrix sums = Matrix::Zero(kk, x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t label = labels[static_cast<std::size_t>(i)];
      sums.row(static_cast<Eigen::Index>(label)) += x.row(i);
      ++counts[label];
    }
    for (Eigen::Index c = 0; c < kk; ++c) {
      const std::size_t count = counts[static_cast<std::size_t>(c)];
      if (count > 0) {
        model.centroids.row(c) = sums.row(c) / static_cast<double>(count);
        continue;
      }
      // Empty cluster: move it to the point currently worst served.
      Eigen::Index far = 0;
      for (Eigen::Index i = 1; i < n; ++i)
        if (dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
      model.centroids.row(c) = x.row(far);
      dist[static_cast<std::size_t>(far)] = 0.0;
    }
  }
  return model;
}

std::size_t assign(const PartitionModel& model, const Eigen::Ref<const Vector>& x) {
  if (static_cast<std::size_t>(x.size()) != model.dim())
    throw dimension_error("assign: point has " + std::to_string(x.size()) +
                          " coordinates, centroids have " + std::to_string(model.dim()));
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < model.centroids.rows(); ++c) {
    const double d = (model.centroids.row(c).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

std::vector<std::size_t> assign_rows(const PartitionModel& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.dim())
    throw dimension_error("assign_rows: column count does not match centroids");
  std::vector<std::size_t> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = nearest(model.centroids, x, i, nullptr);
  return out;
}

} // namespace cate_ebm
