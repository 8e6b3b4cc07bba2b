#pragma once

#include <vector>

#include "cate_ebm/linalg.hpp"
#include "cate_ebm/rng.hpp"

namespace cate_ebm {

// k centroids and the nearest-centroid rule that splits the covariate space
// into k disjoint subsets, one per EBM.
struct PartitionModel {
  Matrix centroids; // k x d
  double inertia = 0.0;
  // Inertia after each Lloyd iteration (first entry: after the first
  // assignment to the seeded centroids).
  std::vector<double> inertia_trace;

  std::size_t k() const { return static_cast<std::size_t>(centroids.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(centroids.cols()); }
};

struct KmeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-10;
};

// Lloyd's algorithm from k-means++ seeding. An empty cluster is re-seeded at
// the point farthest from its current centroid.
PartitionModel kmeans_fit(const Matrix& x, std::size_t k, SeededRng& rng,
                          KmeansOptions options = {});

// Nearest centroid (0-based); ties go to the lowest index.
std::size_t assign(const PartitionModel& model, const Eigen::Ref<const Vector>& x);
std::vector<std::size_t> assign_rows(const PartitionModel& model, const Matrix& x);

} // namespace cate_ebm
