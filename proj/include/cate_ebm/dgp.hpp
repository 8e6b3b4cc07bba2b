#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "cate_ebm/csv.hpp"
#include "cate_ebm/linalg.hpp"
#include "cate_ebm/mlp.hpp"

namespace cate_ebm {

// Ground truth attached to synthetic (or semi-synthetic) rows.
struct OracleBlock {
  Vector tau;
  Vector mu0;
  Vector mu1;
  Vector pi;
  Matrix u;             // latent draws; may have zero columns for external data
  Vector outcome_noise; // synthetic only; empty when loaded from CSV
};

struct Dataset {
  Matrix x;
  Vector a; // 0/1
  Vector y;
  std::optional<OracleBlock> oracle;

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }
  std::size_t treated_count() const;

  // Throws on length mismatch, non-binary treatment or an empty arm.
  void validate() const;
  Dataset rows(const std::vector<std::size_t>& idx) const;
  // Same rows with covariates replaced (e.g. by a representation).
  Dataset with_features(Matrix features) const;
};

// Latent-variable generator: U ~ N(0, I), X ~ N(g(U), I), A ~ Bern(pi(U)),
// Y ~ N(mu_A(U), 1), tau(U) = mu1(U) - mu0(U).
struct DgpSpec {
  std::size_t latent_dim = 5;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  MlpNet g;       // latent -> d, three hidden ReLU layers of width 16
  MlpNet mu0_net; // latent -> 1, exp output
  MlpNet mu1_net; // latent -> 1, exp output
  MlpNet pi_net;  // latent -> 1, sigmoid output
  // Swap the arms: treated rows get mu0 and control rows mu1.
  bool literal_outcome = false;

  double mu0(const Eigen::Ref<const Vector>& u) const;
  double mu1(const Eigen::Ref<const Vector>& u) const;
  double pi(const Eigen::Ref<const Vector>& u) const;
};

DgpSpec gen_dgp(std::uint64_t seed, std::size_t d, std::size_t latent_dim = 5);

inline constexpr double kOverlapMargin = 0.02;

// Draws n rows. Retries with derived seeds if a draw has an empty arm and
// throws numeric_error after 5 attempts.
Dataset sample(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);

// Column roles for CSV ingestion. Covariates default to every column named
// x<number>, in numeric order.
struct CsvSchema {
  std::vector<std::string> covariates;
  std::string treatment = "a";
  std::string outcome = "y";
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset dataset_from_table(const CsvTable& table, const CsvSchema& schema, const std::string& origin);
CsvTable dataset_table(const Dataset& data);
void save_csv(const std::filesystem::path& path, const Dataset& data, std::vector<std::string> comments = {});

} // namespace cate_ebm
