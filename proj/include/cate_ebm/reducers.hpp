#pragma once

#include <cstdint>
#include <vector>

#include "cate_ebm/linalg.hpp"
#include "cate_ebm/mlp.hpp"

namespace cate_ebm {

// Top-k principal directions of the sample covariance.
struct PcaProjector {
  Vector mean;
  Eigen::MatrixXd components; // d x k, orthonormal columns
  Vector variances;           // k leading eigenvalues

  Matrix transform(const Matrix& x) const;
  Matrix reconstruct(const Matrix& codes) const;
};

PcaProjector pca_fit(const Matrix& x, std::size_t k);

struct AeConfig {
  std::vector<std::size_t> hidden = {20, 20, 20};
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t patience = 20;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
};

// Autoencoder baseline: encoder d -> hidden -> k, decoder mirrors it.
// Codes are standardized with training statistics, as for the EBM.
struct AutoEncoder {
  MlpNet encoder;
  MlpNet decoder;
  Vector code_mean;
  Vector code_std;
  double best_val_loss = 0.0;

  Matrix encode(const Matrix& x, bool standardized = true) const;
  Matrix reconstruct(const Matrix& x) const;
};

AutoEncoder ae_fit(const Matrix& x, std::size_t k, const AeConfig& config);

} // namespace cate_ebm
