#include <doctest.h>

#include <cmath>
#include <vector>

#include "cate_ebm/dgp.hpp"
#include "cate_ebm/error.hpp"
#include "cate_ebm/nce.hpp"

using namespace cate_ebm;

namespace {

Matrix normal_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  SeededRng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

std::vector<CandidateSet> toy_batch(const Matrix& x, std::size_t k, std::size_t b, std::uint64_t seed) {
  const CorruptionSpec spec = CorruptionSpec::all_continuous(static_cast<std::size_t>(x.cols()), 0.5, b);
  SeededRng rng(seed);
  std::vector<CandidateSet> batch;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    batch.push_back(build_candidates(x.row(i).transpose(), static_cast<std::size_t>(i) % k, spec, rng));
  return batch;
}

// f(v) = v for a one-dimensional input and k = 1.
MlpNet identity_net() {
  MlpNet net({1, 1});
  net.weight(0)(0, 0) = 1.0;
  return net;
}

OrthogonalMatrix identity_b(std::size_t k) { return OrthogonalMatrix(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))); }

} // namespace

TEST_CASE("corruption of continuous features adds standard normal noise") {
  const CorruptionSpec spec = CorruptionSpec::all_continuous(1, 1.0, 1);
  SeededRng rng(1);
  Vector x(1);
  x << 2.0;
  constexpr int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = corrupt(x, spec, rng)(0) - 2.0;
    s += e;
    s2 += e * e;
  }
  const double mean = s / n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(s2 / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("categorical corruption resamples uniformly from the value set") {
  CorruptionSpec spec;
  spec.rho = 1.0;
  spec.b = 1;
  spec.kinds = {FeatureKind::categorical_over({0.0, 1.0})};
  SeededRng rng(2);
  Vector x(1);
  x << 0.0;
  int ones = 0;
  for (int i = 0; i < 10000; ++i) {
    const double v = corrupt(x, spec, rng)(0);
    CHECK((v == 0.0 || v == 1.0));
    ones += v == 1.0;
  }
  CHECK(std::abs(ones / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("corruption selects features with probability rho") {
  const CorruptionSpec spec = CorruptionSpec::all_continuous(50, 0.3, 1);
  SeededRng rng(3);
  const Vector x = Vector::Zero(50);
  int changed = 0;
  for (int i = 0; i < 2000; ++i) changed += static_cast<int>((corrupt(x, spec, rng).array() != 0.0).count());
  CHECK(std::abs(changed / (2000.0 * 50.0) - 0.3) < 0.01);

  const CorruptionSpec none = CorruptionSpec::all_continuous(50, 1e-300, 1);
  CHECK(corrupt(x, none, rng) == x);
  CHECK_THROWS_AS(corrupt(Vector::Zero(3), spec, rng), dimension_error);
}

TEST_CASE("corruption spec validation") {
  CHECK_THROWS_AS(CorruptionSpec::all_continuous(2, 0.0, 1).validate(), config_error);
  CHECK_THROWS_AS(CorruptionSpec::all_continuous(2, 1.5, 1).validate(), config_error);
  CHECK_THROWS_AS(CorruptionSpec::all_continuous(2, 0.5, 0).validate(), config_error);
  CorruptionSpec cat;
  cat.kinds = {FeatureKind::categorical_over({})};
  CHECK_THROWS_AS(cat.validate(), config_error);
  CHECK(CorruptionSpec::all_continuous(2, 0.5, 3).hash() != CorruptionSpec::all_continuous(2, 0.4, 3).hash());
}

TEST_CASE("candidate sets") {
  const Vector x = Vector::LinSpaced(4, 0.0, 3.0);
  SeededRng rng(4);
  const CorruptionSpec b1 = CorruptionSpec::all_continuous(4, 0.5, 1);
  int first = 0;
  for (int i = 0; i < 10000; ++i) {
    const CandidateSet cs = build_candidates(x, 0, b1, rng);
    first += cs.true_index == 0;
    CHECK(cs.values.row(static_cast<Eigen::Index>(cs.true_index)) == x.transpose());
  }
  CHECK(std::abs(first / 10000.0 - 0.5) < 0.02);

  const CorruptionSpec b3 = CorruptionSpec::all_continuous(4, 0.5, 3);
  for (int i = 0; i < 100; ++i) {
    const CandidateSet cs = build_candidates(x, 2, b3, rng);
    CHECK(cs.values.rows() == 4);
    CHECK(cs.subset == 2);
    CHECK(cs.true_index < 4);
  }

  const CorruptionSpec none = CorruptionSpec::all_continuous(4, 1e-300, 5);
  const CandidateSet same = build_candidates(x, 0, none, rng);
  for (Eigen::Index r = 0; r < same.values.rows(); ++r) CHECK(same.values.row(r) == x.transpose());
}

TEST_CASE("posterior basics") {
  SeededRng rng(11);
  const MlpNet zero({2, 3, 2});
  const CorruptionSpec spec = CorruptionSpec::all_continuous(2, 0.5, 3);
  const CandidateSet cs = build_candidates(Vector::Ones(2), 1, spec, rng);
  const Vector p0 = posterior(zero, identity_b(2), cs);
  for (Eigen::Index c = 0; c < 4; ++c) CHECK(p0(c) == doctest::Approx(0.25).epsilon(1e-15));

  CandidateSet two;
  two.values.resize(2, 1);
  const double s = 0.7;
  two.values << s, s + std::log(3.0);
  two.true_index = 0;
  const Vector p = posterior(identity_net(), identity_b(1), two);
  CHECK(p(0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p(1) == doctest::Approx(0.75).epsilon(1e-14));

  CandidateSet huge = two;
  huge.values << 1e300, 1e300;
  MlpNet big = identity_net();
  big.weight(0)(0, 0) = 1e10;
  CHECK_THROWS_AS(posterior(big, identity_b(1), huge), numeric_error);
}

TEST_CASE("posterior matches an extended-precision evaluation and is permutation equivariant") {
  SeededRng rng(11);
  const MlpNet net = MlpNet::random({2, 3, 2}, rng, 1.5, 1.5, 0.3);
  SeededRng brng(5);
  const OrthogonalMatrix b = random_orthogonal(2, brng);
  const CorruptionSpec spec = CorruptionSpec::all_continuous(2, 0.7, 2);
  for (int t = 0; t < 20; ++t) {
    Vector x(2);
    x << rng.normal(), rng.normal();
    const CandidateSet cs = build_candidates(x, static_cast<std::size_t>(t % 2), spec, rng);
    const Vector p = posterior(net, b, cs);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);

    long double z = 0.0L;
    std::vector<long double> e(3);
    for (Eigen::Index c = 0; c < 3; ++c) {
      const Vector f = net.forward(Vector(cs.values.row(c).transpose()));
      e[static_cast<std::size_t>(c)] = std::exp(static_cast<long double>(b.column(cs.subset).dot(f)));
      z += e[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < 3; ++c)
      CHECK(std::abs(static_cast<long double>(p(c)) - e[static_cast<std::size_t>(c)] / z) < 1e-12L);

    CandidateSet rev = cs;
    rev.values = cs.values.colwise().reverse();
    rev.true_index = 2 - cs.true_index;
    const Vector pr = posterior(net, b, rev);
    for (Eigen::Index c = 0; c < 3; ++c) CHECK(pr(c) == doctest::Approx(p(2 - c)).epsilon(1e-14));
  }
}

TEST_CASE("loss of a zero network is exactly chance level") {
  for (std::size_t b : {1u, 3u, 10u}) {
    const Matrix x = normal_matrix(25, 3, b);
    const auto batch = toy_batch(x, 2, b, 1);
    const MlpNet zero({3, 4, 2});
    const NceLoss l = nce_loss(zero, identity_b(2), batch, true);
    CHECK(std::abs(l.value - std::log(static_cast<double>(b) + 1.0)) < 1e-12);
    CHECK(l.subsets_present == 2);
  }
}

TEST_CASE("saturated separator drives the loss to zero") {
  CandidateSet cs;
  cs.values.resize(3, 1);
  cs.values << 0.0, 50.0, 0.0;
  cs.true_index = 1;
  const std::vector<CandidateSet> batch = {cs};
  const NceLoss l = nce_loss(identity_net(), identity_b(1), batch, false);
  CHECK(l.value < 1e-20);
  CHECK(l.value > 0.0);
}

TEST_CASE("loss weights subsets equally and skips absent subsets") {
  SeededRng rng(8);
  const MlpNet net = MlpNet::random({2, 5, 3}, rng, 1.4, 1.0, 0.2);
  SeededRng brng(9);
  const OrthogonalMatrix b = random_orthogonal(3, brng);
  const Matrix x = normal_matrix(5, 2, 3);
  const CorruptionSpec spec = CorruptionSpec::all_continuous(2, 0.5, 2);
  std::vector<CandidateSet> batch;
  const std::size_t subsets[] = {0, 0, 0, 2, 2};
  for (Eigen::Index i = 0; i < 5; ++i) batch.push_back(build_candidates(x.row(i).transpose(), subsets[i], spec, rng));

  double m0 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const double nl = -std::log(posterior(net, b, batch[i])(static_cast<Eigen::Index>(batch[i].true_index)));
    (subsets[i] == 0 ? m0 : m2) += nl;
  }
  const double expected = 0.5 * (m0 / 3.0 + m2 / 2.0);
  const NceLoss l = nce_loss(net, b, batch, false);
  CHECK(l.value == doctest::Approx(expected).epsilon(1e-13));
  CHECK(l.subsets_present == 2);
  CHECK_THROWS_AS(nce_loss(net, b, std::vector<CandidateSet>{}, false), input_error);
}

TEST_CASE("loss gradients match central finite differences") {
  struct Arch {
    std::vector<std::size_t> widths;
    std::size_t k, b;
  };
  const std::vector<Arch> grid = {{{2, 3, 2}, 2, 2}, {{4, 8, 3}, 3, 4}, {{3, 6, 6, 2}, 2, 1}, {{5, 1}, 1, 3}};
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const Arch& a = grid[g];
    const Matrix x = normal_matrix(32, a.widths.front(), 13 + g);
    const auto batch = toy_batch(x, a.k, a.b, 13 + g);
    SeededRng rng(13 + g);
    MlpNet net = MlpNet::random(a.widths, rng, std::sqrt(2.0), 1.0, 0.1);
    SeededRng brng(42);
    const OrthogonalMatrix b = random_orthogonal(a.k, brng);
    const NceLoss l = nce_loss(net, b, batch, true);
    MlpNet probe = net;
    auto loss = [&](std::span<const double> p) {
      std::copy(p.begin(), p.end(), probe.params().begin());
      return nce_loss(probe, b, batch, false).value;
    };
    CHECK(grad_check(loss, l.grad, net.params(), 1e-5) < 1e-4);
  }
}

TEST_CASE("training beats chance and is deterministic") {
  const DgpSpec dgp = gen_dgp(21, 10);
  const Matrix x = sample(dgp, 1000, 21).x;
  TrainConfig tc;
  tc.k = 3;
  tc.b = 5;
  tc.hidden = {32};
  tc.epochs = 20;
  tc.seed = 21;
  tc.b_seed = 21;
  const TrainResult a = train_ebm(x, tc);
  CHECK(a.best_val_loss < std::log(6.0));
  CHECK(!a.log.empty());
  CHECK(a.model.k() == 3);
  CHECK(a.model.input_dim() == 10);
  const TrainResult b = train_ebm(x, tc);
  CHECK(encode_model(a.model) == encode_model(b.model));

  // B and the partition follow b_seed only.
  TrainConfig other = tc;
  other.seed = 22;
  other.epochs = 2;
  const TrainResult c = train_ebm(x, other);
  CHECK(c.model.b_matrix.matrix() == a.model.b_matrix.matrix());
  CHECK(c.model.partition.centroids == a.model.partition.centroids);
  CHECK(!(c.model.net == a.model.net));
}

TEST_CASE("training preconditions") {
  const Matrix x = normal_matrix(7, 3, 1);
  TrainConfig tc;
  tc.k = 4;
  CHECK_THROWS_AS(train_ebm(x, tc), too_few_samples_error);
  tc.k = 2;
  tc.epochs = 0;
  CHECK_THROWS_AS(train_ebm(x, tc), config_error);
  tc.epochs = 1;
  tc.rho = 0.0;
  CHECK_THROWS_AS(train_ebm(x, tc), config_error);
  tc.rho = 0.5;
  SeededRng brng(1);
  CHECK_THROWS_AS(train_ebm(x, tc, random_orthogonal(3, brng)), dimension_error);
}

TEST_CASE("training diverges loudly") {
  const Matrix x = normal_matrix(100, 3, 2);
  TrainConfig tc;
  tc.k = 2;
  tc.epochs = 3;
  tc.learning_rate = 1e300;
  tc.hidden = {4};
  CHECK_THROWS_AS(train_ebm(x, tc), numeric_error);
}

TEST_CASE("best validation loss does not grow with the sample size") {
  const DgpSpec dgp = gen_dgp(5, 10);
  double previous = INFINITY;
  for (std::size_t n : {200u, 500u, 2000u}) {
    double total = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      TrainConfig tc;
      tc.k = 3;
      tc.b = 5;
      tc.hidden = {32};
      tc.epochs = 30;
      tc.seed = s;
      tc.b_seed = 1;
      total += train_ebm(sample(dgp, n, 50 + s).x, tc).best_val_loss;
    }
    const double mean = total / 5.0;
    CHECK(mean <= previous);
    previous = mean;
  }
}

TEST_CASE("simplex projection") {
  Vector v(4);
  v << 0.4, 0.3, 0.2, 0.1;
  CHECK((project_to_simplex(v) - v).cwiseAbs().maxCoeff() < 1e-15);
  v << 2.0, 0.0, 0.0, -1.0;
  const Vector p = project_to_simplex(v);
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p.minCoeff() >= 0.0);
  v << 0.5, 0.5, 0.5, 0.5;
  CHECK((project_to_simplex(v).array() - 0.25).abs().maxCoeff() < 1e-15);
}

TEST_CASE("maximizer of the expected log score is the target distribution") {
  SeededRng rng(17);
  for (int t = 0; t < 10; ++t) {
    Vector w(4);
    for (Eigen::Index a = 0; a < 4; ++a) w(a) = rng.uniform() + 1e-3;
    w /= w.sum();
    CHECK((maximize_log_score(w, 500) - w).cwiseAbs().maxCoeff() < 1e-4);
  }
  Vector bad(2);
  bad << 0.7, 0.7;
  CHECK_THROWS_AS(maximize_log_score(bad), invalid_dimension_error);
}
