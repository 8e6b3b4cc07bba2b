#include "cate_ebm/learners.hpp"

#include "cate_ebm/error.hpp"
#include "cate_ebm/rng.hpp"

namespace cate_ebm {

std::string to_string(LearnerKind kind) {
  switch (kind) {
  case LearnerKind::t: return "t";
  case LearnerKind::x: return "x";
  case LearnerKind::dr: return "dr";
  case LearnerKind::r: return "r";
  }
  return "?";
}

LearnerKind parse_learner_kind(const std::string& name) {
  if (name == "t") return LearnerKind::t;
  if (name == "x") return LearnerKind::x;
  if (name == "dr") return LearnerKind::dr;
  if (name == "r") return LearnerKind::r;
  throw config_error("unknown learner '" + name + "' (valid: t, x, dr, r)");
}

const std::vector<LearnerKind>& all_learner_kinds() {
  static const std::vector<LearnerKind> kinds{LearnerKind::t, LearnerKind::x, LearnerKind::dr, LearnerKind::r};
  return kinds;
}

namespace {

struct ArmSplit {
  std::vector<std::size_t> treated;
  std::vector<std::size_t> control;
};

ArmSplit split_arms(const Vector& a) {
  ArmSplit s;
  for (Eigen::Index i = 0; i < a.size(); ++i) (a(i) == 1.0 ? s.treated : s.control).push_back(static_cast<std::size_t>(i));
  return s;
}

ArmSplit require_arms(const Dataset& train) {
  if (train.a.size() != train.x.rows() || train.y.size() != train.x.rows())
    throw dimension_error("learner: X, A and Y lengths differ");
  ArmSplit s = split_arms(train.a);
  if (s.treated.empty() || s.control.empty())
    throw empty_arm_error("learner: treated and control groups must both be non-empty");
  return s;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

Vector take(const Vector& v, const std::vector<std::size_t>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// Each stage gets its own CV seed so tuning subsamples differ by stage.
BaseSpec stage(const BaseSpec& base, std::uint64_t salt) {
  BaseSpec s = base;
  s.cv_seed = splitmix64(base.cv_seed ^ salt);
  return s;
}

} // namespace

Vector dr_pseudo_outcome(const Vector& a, const Vector& y, const Vector& mu0, const Vector& mu1, const Vector& pi) {
  const Eigen::Index n = a.size();
  if (y.size() != n || mu0.size() != n || mu1.size() != n || pi.size() != n)
    throw dimension_error("dr_pseudo_outcome: lengths differ");
  Vector phi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    phi(i) = a(i) / pi(i) * (y(i) - mu1(i)) + mu1(i) - (1.0 - a(i)) / (1.0 - pi(i)) * (y(i) - mu0(i)) - mu0(i);
  }
  return phi;
}

Vector CateModel::predict(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim_)
    throw dimension_error("CATE predict: input has " + std::to_string(x.cols()) + " columns, model expects " +
                          std::to_string(input_dim_));
  switch (kind_) {
  case LearnerKind::t: return parts_[1].predict(x) - parts_[0].predict(x);
  case LearnerKind::x: {
    const Vector g = propensity_->predict(x);
    const Vector t0 = parts_[0].predict(x);
    const Vector t1 = parts_[1].predict(x);
    return (g.array() * t0.array() + (1.0 - g.array()) * t1.array()).matrix();
  }
  case LearnerKind::dr:
  case LearnerKind::r: return parts_[0].predict(x);
  }
  return {};
}

CateModel t_learner(const Dataset& train, const LearnerSpec& spec) {
  const ArmSplit arms = require_arms(train);
  CateModel m;
  m.kind_ = LearnerKind::t;
  m.input_dim_ = train.dim();
  m.parts_.push_back(fit_regressor(take_rows(train.x, arms.control), take(train.y, arms.control), stage(spec.base, 10)));
  m.parts_.push_back(fit_regressor(take_rows(train.x, arms.treated), take(train.y, arms.treated), stage(spec.base, 11)));
  return m;
}

CateModel x_learner(const Dataset& train, const LearnerSpec& spec) {
  const ArmSplit arms = require_arms(train);
  const Matrix xt = take_rows(train.x, arms.treated);
  const Matrix xc = take_rows(train.x, arms.control);
  const Vector yt = take(train.y, arms.treated);
  const Vector yc = take(train.y, arms.control);
  const BaseRegressor mu0 = fit_regressor(xc, yc, stage(spec.base, 20));
  const BaseRegressor mu1 = fit_regressor(xt, yt, stage(spec.base, 21));
  const Vector d1 = yt - mu0.predict(xt); // imputed effects on the treated
  const Vector d0 = mu1.predict(xc) - yc; // imputed effects on the controls

  CateModel m;
  m.kind_ = LearnerKind::x;
  m.input_dim_ = train.dim();
  m.parts_.push_back(fit_regressor(xc, d0, stage(spec.base, 22)));
  m.parts_.push_back(fit_regressor(xt, d1, stage(spec.base, 23)));
  m.propensity_ = propensity_fit(train.x, train.a, spec.propensity_l2, spec.propensity_clip);
  return m;
}

CateModel r_learner(const Dataset& train, const LearnerSpec& spec) {
  require_arms(train);
  const BaseRegressor m_hat = fit_regressor(train.x, train.y, stage(spec.base, 30));
  const PropensityModel pi_hat = propensity_fit(train.x, train.a, spec.propensity_l2, spec.propensity_clip);
  const Vector y_res = train.y - m_hat.predict(train.x);
  const Vector a_res = train.a - pi_hat.predict(train.x);

  // sum (y_res - a_res tau(x))^2 = sum a_res^2 (y_res / a_res - tau(x))^2;
  // clipping keeps |a_res| >= clip.
  const Vector target = y_res.cwiseQuotient(a_res);
  const Vector weights = a_res.cwiseAbs2();
  CateModel m;
  m.kind_ = LearnerKind::r;
  m.input_dim_ = train.dim();
  m.parts_.push_back(fit_regressor(train.x, target, stage(spec.base, 31), weights));
  return m;
}

CateModel dr_learner(const Dataset& train, const LearnerSpec& spec, const NuisanceValues* oracle) {
  require_arms(train);
  const auto n = train.size();
  CateModel m;
  m.kind_ = LearnerKind::dr;
  m.input_dim_ = train.dim();

  if (oracle) {
    const Vector phi = dr_pseudo_outcome(train.a, train.y, oracle->mu0, oracle->mu1, oracle->pi);
    m.parts_.push_back(fit_regressor(train.x, phi, stage(spec.base, 43)));
    return m;
  }
  if (n < 30) throw too_few_samples_error("dr_learner: needs at least 30 rows");

  for (std::uint64_t attempt = 0; attempt < 5; ++attempt) {
    SeededRng rng(splitmix64(spec.split_seed + attempt));
    const std::vector<std::size_t> perm = rng.permutation(n);
    const std::size_t third = n / 3;
    const std::vector<std::size_t> d1(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(third));
    const std::vector<std::size_t> d2(perm.begin() + static_cast<std::ptrdiff_t>(third),
                                      perm.begin() + static_cast<std::ptrdiff_t>(2 * third));
    const std::vector<std::size_t> d3(perm.begin() + static_cast<std::ptrdiff_t>(2 * third), perm.end());
    const Dataset p1 = train.rows(d1);
    const Dataset p2 = train.rows(d2);
    const Dataset p3 = train.rows(d3);
    const ArmSplit a1 = split_arms(p1.a);
    const ArmSplit a2 = split_arms(p2.a);
    const ArmSplit a3 = split_arms(p3.a);
    if (a1.treated.empty() || a1.control.empty() || a2.treated.empty() || a2.control.empty() ||
        a3.treated.empty() || a3.control.empty())
      continue;

    const BaseRegressor mu0 = fit_regressor(take_rows(p1.x, a1.control), take(p1.y, a1.control), stage(spec.base, 40));
    const BaseRegressor mu1 = fit_regressor(take_rows(p1.x, a1.treated), take(p1.y, a1.treated), stage(spec.base, 41));
    const PropensityModel pi = propensity_fit(p2.x, p2.a, spec.propensity_l2, spec.propensity_clip);
    const Vector phi = dr_pseudo_outcome(p3.a, p3.y, mu0.predict(p3.x), mu1.predict(p3.x), pi.predict(p3.x));
    m.parts_.push_back(fit_regressor(p3.x, phi, stage(spec.base, 42)));
    return m;
  }
  throw empty_arm_error("dr_learner: every split attempt left an arm empty");
}

CateModel fit_learner(LearnerKind kind, const Dataset& train, const LearnerSpec& spec) {
  switch (kind) {
  case LearnerKind::t: return t_learner(train, spec);
  case LearnerKind::x: return x_learner(train, spec);
  case LearnerKind::dr: return dr_learner(train, spec);
  case LearnerKind::r: return r_learner(train, spec);
  }
  throw config_error("unknown learner kind");
}

} // namespace cate_ebm
