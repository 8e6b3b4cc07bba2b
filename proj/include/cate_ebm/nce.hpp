#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cate_ebm/ebm.hpp"
#include "cate_ebm/linalg.hpp"
#include "cate_ebm/mlp.hpp"
#include "cate_ebm/rng.hpp"

namespace cate_ebm {

struct FeatureKind {
  bool categorical = false;
  std::vector<double> values; // admissible values when categorical

  static FeatureKind continuous() { return {}; }
  static FeatureKind categorical_over(std::vector<double> values) { return {true, std::move(values)}; }
};

// Noise distribution for NCE: each feature is selected independently with
// probability rho; selected continuous features get additive N(0, 1) noise,
// selected categorical features are resampled uniformly from their values.
struct CorruptionSpec {
  double rho = 0.5;
  std::vector<FeatureKind> kinds;
  std::size_t b = 1; // corrupted copies per clean sample

  static CorruptionSpec all_continuous(std::size_t d, double rho, std::size_t b);
  void validate() const;
  std::uint64_t hash() const;
};

Vector corrupt(const Eigen::Ref<const Vector>& x, const CorruptionSpec& spec, SeededRng& rng);

// b corrupted copies plus the clean sample, in random order.
struct CandidateSet {
  Matrix values; // (b + 1) x d
  std::size_t true_index = 0;
  std::size_t subset = 0;
};

CandidateSet build_candidates(const Eigen::Ref<const Vector>& x, std::size_t subset,
                              const CorruptionSpec& spec, SeededRng& rng);

// Probability that each candidate is the clean one. With a symmetric noise
// kernel the noise densities cancel and the score is beta_j^T f(v).
Vector posterior(const EbmModel& model, const CandidateSet& cs);
Vector posterior(const MlpNet& net, const OrthogonalMatrix& b, const CandidateSet& cs);

struct NceLoss {
  double value = 0.0;
  std::vector<double> grad; // empty unless requested
  std::size_t subsets_present = 0;
};

// Negative ranking objective: mean -log q(true | V) within each subset,
// then averaged over the subsets present in the batch.
NceLoss nce_loss(const MlpNet& net, const OrthogonalMatrix& b, std::span<const CandidateSet> batch,
                 bool with_grad);
double nce_loss(const EbmModel& model, std::span<const CandidateSet> batch);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;   // network init, validation split, corruption draws
  std::uint64_t b_seed = 0; // B and the k-means partition
  std::size_t b = 10;
  double rho = 0.5;
  std::vector<std::size_t> hidden = {20, 20, 20};
  std::size_t k = 4;
  std::size_t patience = 20;
  double validation_fraction = 0.2;
  std::size_t kmeans_max_iter = 300;
  double weight_decay = 0.0; // L2 penalty on network weights (not biases)
  bool lr_decay = false;     // linear decay of the learning rate to zero over epochs

  void validate() const;
};

struct TrainLogEntry {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  EbmModel model;
  std::vector<TrainLogEntry> log;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;
};

// Fits the partition, fixes B (given or drawn from config.b_seed), trains f
// with Adam on the NCE loss and keeps the parameters with the best
// validation loss. feature_kinds defaults to all-continuous.
TrainResult train_ebm(const Matrix& x, const TrainConfig& config,
                      std::optional<OrthogonalMatrix> b = std::nullopt,
                      std::vector<FeatureKind> feature_kinds = {});

// Euclidean projection onto the probability simplex.
Vector project_to_simplex(const Vector& v);

// Maximizes sum_a w_a log q_a over the simplex by projected gradient ascent
// with backtracking, starting from the uniform vector. This is the
// population problem the ranking loss solves for a single candidate set.
Vector maximize_log_score(const Vector& w, std::size_t steps = 500);

} // namespace cate_ebm
