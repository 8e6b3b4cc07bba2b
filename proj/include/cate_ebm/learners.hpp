#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cate_ebm/dgp.hpp"
#include "cate_ebm/regressors.hpp"

namespace cate_ebm {

enum class LearnerKind { t, x, dr, r };

std::string to_string(LearnerKind kind);
LearnerKind parse_learner_kind(const std::string& name);
const std::vector<LearnerKind>& all_learner_kinds();

struct LearnerSpec {
  BaseSpec base;
  double propensity_l2 = 1.0;
  double propensity_clip = 0.01;
  std::uint64_t split_seed = 0; // DR three-way split
};

// Known nuisance values per training row; replaces the fitted mu0, mu1 and
// pi inside the DR-learner.
struct NuisanceValues {
  Vector mu0;
  Vector mu1;
  Vector pi;
};

class CateModel {
public:
  LearnerKind kind() const noexcept { return kind_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  Vector predict(const Matrix& x) const;

private:
  friend CateModel t_learner(const Dataset&, const LearnerSpec&);
  friend CateModel x_learner(const Dataset&, const LearnerSpec&);
  friend CateModel r_learner(const Dataset&, const LearnerSpec&);
  friend CateModel dr_learner(const Dataset&, const LearnerSpec&, const NuisanceValues*);

  LearnerKind kind_ = LearnerKind::t;
  std::size_t input_dim_ = 0;
  std::vector<BaseRegressor> parts_; // T: mu0, mu1; X: tau0, tau1; DR/R: final
  std::optional<PropensityModel> propensity_; // X-learner weighting
};

CateModel t_learner(const Dataset& train, const LearnerSpec& spec);
CateModel x_learner(const Dataset& train, const LearnerSpec& spec);
CateModel r_learner(const Dataset& train, const LearnerSpec& spec);
// Three-way split: outcome models on the first part, propensity on the
// second, pseudo-outcome regression on the third. With injected nuisances
// no split is needed and every row enters the final regression.
CateModel dr_learner(const Dataset& train, const LearnerSpec& spec, const NuisanceValues* oracle = nullptr);

CateModel fit_learner(LearnerKind kind, const Dataset& train, const LearnerSpec& spec);

// Uncentered influence-function pseudo-outcome of the ATE.
Vector dr_pseudo_outcome(const Vector& a, const Vector& y, const Vector& mu0, const Vector& mu1, const Vector& pi);

} // namespace cate_ebm
