#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cate_ebm/error.hpp"
#include "cate_ebm/metrics.hpp"

using namespace cate_ebm;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("pehe") {
  Vector a(4), b(4);
  a << 1, 2, 3, 4;
  b << 1, 1, 3, 6;
  CHECK(pehe(a, b) == doctest::Approx(5.0 / 4.0).epsilon(1e-15));
  CHECK(root_pehe(a, b) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
  CHECK(pehe(a, a) == 0.0);
  CHECK(pehe(a, b) == pehe(b, a));
  CHECK_THROWS_AS(pehe(a, Vector::Ones(3)), dimension_error);
  CHECK_THROWS_AS(pehe(Vector(), Vector()), input_error);
}

TEST_CASE("mcc of identical, negated and affinely transformed representations") {
  SeededRng rng(2);
  Matrix r(100, 3);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal();
  CHECK(mcc(r, r) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(mcc(r, -r) == doctest::Approx(-1.0).epsilon(1e-14));
  Matrix affine = 3.0 * r;
  affine.array() += 7.0;
  CHECK(mcc(r, affine) == doctest::Approx(1.0).epsilon(1e-14));

  Matrix mixed = r;
  mixed.col(1) = -r.col(1);
  CHECK(mcc(r, mixed) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  Matrix flat = r;
  flat.col(2).setConstant(1.0);
  try {
    mcc(r, flat);
    FAIL("expected a degenerate column");
  } catch (const degenerate_column_error& e) {
    CHECK(e.column() == 2);
  }
  CHECK_THROWS_AS(mcc(r, Matrix(r.leftCols(2))), dimension_error);
  CHECK(mcc(r, r) == mcc(r, r));
}

TEST_CASE("mean_std uses the population convention") {
  const MeanStd m = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(m.count == 4);
  CHECK(mean_std({}).count == 0);
  CHECK(mean_std({5.0}).std == 0.0);
}

TEST_CASE("report tables") {
  ReportTable t;
  t.columns = {"learner", "pehe"};
  t.rows = {{"t", "1.5"}, {"dr", "0.25"}};
  t.comments = {"config=abc"};
  CHECK(t.csv() == "# config=abc\nlearner,pehe\nt,1.5\ndr,0.25\n");
  CHECK(t.text() == "# config=abc\nlearner  pehe\n-------------\nt        1.5\ndr       0.25\n");

  const auto dir = std::filesystem::temp_directory_path() / "cate_ebm_test_metrics";
  write_report(dir, "r", t);
  CHECK(slurp(dir / "r.csv") == t.csv());
  CHECK(slurp(dir / "r.txt") == t.text());
  CHECK(parse_reducer_kind("ae") == ReducerKind::ae);
  CHECK_THROWS_AS(parse_reducer_kind("vae"), config_error);
}

TEST_CASE("across-run effect variability") {
  const DgpSpec dgp = gen_dgp(3, 6);
  const Dataset train = sample(dgp, 200, 1);
  const Matrix test = sample(dgp, 50, 2).x;
  CateStdConfig cfg;
  cfg.learner = LearnerKind::t;
  cfg.learner_spec.base.kind = RegressorKind::ridge;
  cfg.learner_spec.base.tune = false;
  cfg.ebm.k = 2;
  cfg.ebm.b = 3;
  cfg.ebm.hidden = {8};
  cfg.ebm.epochs = 5;
  cfg.ae.hidden = {8};
  cfg.ae.epochs = 5;
  cfg.seeds = {1, 2, 3};
  for (ReducerKind r : {ReducerKind::ebm, ReducerKind::ae}) {
    cfg.reducer = r;
    const CateStdResult res = cate_std_experiment(train, test, cfg);
    CHECK(res.tau_hat.size() == 3);
    CHECK(res.per_sample_std.size() == 50);
    CHECK(res.per_sample_std.minCoeff() >= 0.0);
    CHECK(res.mean_std == doctest::Approx(res.per_sample_std.mean()));
    const CateStdResult again = cate_std_experiment(train, test, cfg);
    CHECK(again.per_sample_std == res.per_sample_std);
  }

  cfg.seeds = {4, 4};
  cfg.reducer = ReducerKind::ebm;
  CHECK(cate_std_experiment(train, test, cfg).mean_std == 0.0);
  cfg.seeds = {1};
  CHECK_THROWS_AS(cate_std_experiment(train, test, cfg), config_error);
}
