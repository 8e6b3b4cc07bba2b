#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cate_ebm/linalg.hpp"
#include "cate_ebm/mlp.hpp"
#include "cate_ebm/partition.hpp"

namespace cate_ebm {

struct ModelFingerprint {
  std::uint64_t input_dim = 0;
  std::uint64_t k = 0;
  std::uint64_t corruption_hash = 0;
  std::uint64_t seed = 0;
  // Hash of the exact bytes of B; models are only comparable when it matches.
  std::uint64_t b_hash = 0;
  // Fingerprint of the experiment configuration that produced the model (0 if none).
  std::uint64_t config_hash = 0;

  bool operator==(const ModelFingerprint&) const = default;
  std::string hex() const;
};

std::uint64_t hash_orthogonal(const OrthogonalMatrix& b);

// Partially randomized EBM. Subset j (0-based) has energy beta_j^T f(x),
// with beta_j the j-th column of the fixed orthogonal matrix B.
struct EbmModel {
  MlpNet net;
  OrthogonalMatrix b_matrix;
  PartitionModel partition;
  Vector repr_mean;
  Vector repr_std;
  ModelFingerprint fingerprint;

  std::size_t k() const { return b_matrix.k(); }
  std::size_t input_dim() const { return net.input_width(); }
  bool has_repr_stats() const { return repr_std.size() > 0; }

  // Throws if network, B, partition and stats disagree on k or d.
  void validate() const;
};

double energy(const EbmModel& model, const Eigen::Ref<const Vector>& x, std::size_t subset);

// Rows are f(x_i), standardized with the stored training statistics when
// use_train_stats is set.
Matrix represent(const EbmModel& model, const Matrix& x, bool use_train_stats = true);

void save_model(const EbmModel& model, const std::filesystem::path& path);
EbmModel load_model(const std::filesystem::path& path);

// Byte-level container used by save_model/load_model; exposed for tests.
std::string encode_model(const EbmModel& model);
EbmModel decode_model(const std::string& bytes);

inline constexpr std::uint16_t kModelFormatVersion = 1;

} // namespace cate_ebm
