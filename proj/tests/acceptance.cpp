#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cate_ebm/config.hpp"
#include "cate_ebm/dgp.hpp"
#include "cate_ebm/ebm.hpp"
#include "cate_ebm/learners.hpp"
#include "cate_ebm/metrics.hpp"
#include "cate_ebm/nce.hpp"
#include "cate_ebm/partition.hpp"
#include "cate_ebm/pipeline.hpp"

using namespace cate_ebm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Matrix normal_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  SeededRng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cate_ebm_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome orthogonality() {
  double worst = 0.0;
  for (std::size_t k = 1; k <= 16; ++k)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SeededRng rng(seed);
      worst = std::max(worst, random_orthogonal(k, rng).orthogonality_error());
    }
  return {worst <= 1e-8, "max |BB^T - I| = " + num(worst) + " (limit 1e-8)"};
}

Outcome gradients() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SeededRng rng(seed);
    const MlpNet net = MlpNet::random({2, 3, 2}, rng, std::sqrt(2.0), 1.0, 0.1);
    SeededRng brng(seed + 100);
    const OrthogonalMatrix b = random_orthogonal(2, brng);
    const Matrix x = normal_matrix(32, 2, seed + 200);
    const CorruptionSpec spec = CorruptionSpec::all_continuous(2, 0.5, 2);
    std::vector<CandidateSet> batch;
    for (Eigen::Index i = 0; i < 32; ++i)
      batch.push_back(build_candidates(x.row(i).transpose(), static_cast<std::size_t>(i % 2), spec, rng));
    const NceLoss l = nce_loss(net, b, batch, true);
    MlpNet probe = net;
    auto loss = [&](std::span<const double> p) {
      std::copy(p.begin(), p.end(), probe.params().begin());
      return nce_loss(probe, b, batch, false).value;
    };
    worst = std::max(worst, grad_check(loss, l.grad, net.params(), 1e-4));
  }
  return {worst < 1e-4, "worst relative error over 5 nets = " + num(worst) + " (limit 1e-4)"};
}

Outcome chance_level() {
  double worst = 0.0;
  for (std::size_t b : {1u, 3u, 10u}) {
    const Matrix x = normal_matrix(40, 4, b);
    const CorruptionSpec spec = CorruptionSpec::all_continuous(4, 0.5, b);
    SeededRng rng(b);
    std::vector<CandidateSet> batch;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      batch.push_back(build_candidates(x.row(i).transpose(), static_cast<std::size_t>(i % 3), spec, rng));
    const MlpNet zero({4, 6, 3});
    SeededRng brng(9);
    const double v = nce_loss(zero, random_orthogonal(3, brng), batch, false).value;
    worst = std::max(worst, std::abs(v - std::log(static_cast<double>(b) + 1.0)));
  }
  return {worst <= 1e-12, "max |loss - ln(b+1)| = " + num(worst) + " (limit 1e-12)"};
}

Outcome bias_shift() {
  const DgpSpec dgp = gen_dgp(2, 20);
  const Dataset train = sample(dgp, 500, 1);
  const Dataset test = sample(dgp, 500, 2);
  TrainConfig tc;
  tc.k = 3;
  tc.b = 5;
  tc.hidden = {32, 32};
  tc.epochs = 30;
  tc.seed = 3;
  const EbmModel model = train_ebm(train.x, tc).model;
  EbmModel shifted = model;
  Vector c(3);
  c << 3.5, -2.0, 11.0;
  shifted.net.bias(shifted.net.layer_count() - 1) += c;
  const Standardized s = standardize_columns(shifted.net.forward(train.x));
  shifted.repr_mean = s.mean;
  shifted.repr_std = s.std;

  const Matrix z_tr = represent(model, train.x), z_te = represent(model, test.x);
  const Matrix s_tr = represent(shifted, train.x), s_te = represent(shifted, test.x);
  const double repr_gap = std::max((z_tr - s_tr).cwiseAbs().maxCoeff(), (z_te - s_te).cwiseAbs().maxCoeff());
  double tau_gap = 0.0;
  for (LearnerKind kind : all_learner_kinds()) {
    LearnerSpec spec;
    spec.base.cv_seed = 4;
    const Vector a = fit_learner(kind, train.with_features(z_tr), spec).predict(z_te);
    const Vector b = fit_learner(kind, train.with_features(s_tr), spec).predict(s_te);
    tau_gap = std::max(tau_gap, (a - b).cwiseAbs().maxCoeff());
  }
  return {repr_gap <= 1e-10 && tau_gap <= 1e-8,
          "representation gap " + num(repr_gap) + " (limit 1e-10), tau gap over 4 learners " + num(tau_gap) +
              " (limit 1e-8)"};
}

// Mean pairwise MCC over 5 initialisations sharing one B, averaged over 3
// training draws.
double identifiability_mcc(std::size_t n) {
  const DgpSpec dgp = gen_dgp(1, 20);
  const Dataset test = sample(dgp, 2000, 500);
  SeededRng brng(7);
  const OrthogonalMatrix b = random_orthogonal(3, brng);
  double total = 0.0;
  for (std::uint64_t data_seed = 0; data_seed < 3; ++data_seed) {
    const Dataset train = sample(dgp, n, 100 + data_seed);
    std::vector<Matrix> reps;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ExperimentConfig c;
      apply_preset(c, "identifiability_d20");
      TrainConfig tc = c.ebm;
      tc.epochs = 200;
      tc.patience = 30;
      tc.seed = seed;
      tc.b_seed = 7;
      reps.push_back(represent(train_ebm(train.x, tc, b).model, test.x));
    }
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < reps.size(); ++i)
      for (std::size_t j = i + 1; j < reps.size(); ++j) {
        sum += mcc(reps[i], reps[j]);
        ++pairs;
      }
    total += sum / pairs;
  }
  return total / 3.0;
}

Outcome identifiability() {
  const double small = identifiability_mcc(200);
  const double large = identifiability_mcc(2000);
  return {large >= 0.9 && large > small, "MCC n=2000 " + num(large) + " (need >= 0.9), n=200 " + num(small)};
}

// Reads pehe_runs.csv and averages per (learner, features).
std::map<std::string, double> mean_pehe(const fs::path& dir) {
  std::ifstream in(dir / "pehe_runs.csv");
  std::map<std::string, std::pair<double, int>> acc;
  bool header = false;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    auto& [sum, count] = acc[cells[1] + "/" + cells[2]];
    sum += std::stod(cells[3]);
    ++count;
  }
  std::map<std::string, double> out;
  for (const auto& [key, v] : acc) out[key] = v.first / v.second;
  return out;
}

Outcome pehe_ordering() {
  ExperimentConfig c;
  apply_preset(c, "synth_d100_n250");
  c.eval.runs = 10;
  c.eval.test_n = 2000;
  c.learners.kinds = {LearnerKind::t, LearnerKind::r};
  c.io.out = scratch_dir("pehe");
  std::ostringstream log;
  const PipelineOutput out = cmd_pipeline(c, log, threads_from_env());
  const auto m = mean_pehe(out.dir);
  const double t_raw = m.at("t/raw"), t_ebm = m.at("t/ebm"), r_raw = m.at("r/raw"), r_ebm = m.at("r/ebm");
  return {t_ebm < t_raw && r_ebm < r_raw, "T: ebm " + num(t_ebm) + " vs raw " + num(t_raw) + "; R: ebm " +
                                              num(r_ebm) + " vs raw " + num(r_raw)};
}

Outcome cate_variance() {
  const DgpSpec dgp = gen_dgp(1, 20);
  const Dataset train = sample(dgp, 2000, 7);
  const Dataset test = sample(dgp, 1000, 8);
  ExperimentConfig preset;
  apply_preset(preset, "identifiability_d20");
  CateStdConfig c;
  c.learner = LearnerKind::r;
  c.ebm = preset.ebm;
  c.ebm.epochs = 200;
  c.ebm.patience = 30;
  c.ebm.b_seed = 1;
  c.ae.hidden = preset.ebm.hidden;
  c.ae.epochs = 200;
  c.ae.patience = 30;
  for (std::uint64_t s = 1; s <= 10; ++s) c.seeds.push_back(s);
  c.reducer = ReducerKind::ebm;
  const double ebm = cate_std_experiment(train, test.x, c).mean_std;
  c.reducer = ReducerKind::ae;
  const double ae = cate_std_experiment(train, test.x, c).mean_std;
  return {ebm < ae, "mean per-sample std: ebm " + num(ebm) + " vs ae " + num(ae)};
}

Outcome log_score_recovery() {
  SeededRng rng(21);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    Vector w(4);
    for (Eigen::Index i = 0; i < 4; ++i) w(i) = -std::log(1.0 - rng.uniform());
    w /= w.sum();
    worst = std::max(worst, (maximize_log_score(w) - w).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-4, "max |q - w| over 10 draws = " + num(worst) + " (limit 1e-4)"};
}

Dataset linear_dgp(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  const auto rows = static_cast<Eigen::Index>(n);
  Dataset d;
  d.x.resize(rows, 5);
  d.a.resize(rows);
  d.y.resize(rows);
  OracleBlock o;
  o.tau.resize(rows);
  o.mu0.resize(rows);
  o.mu1.resize(rows);
  o.pi.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) d.x(i, j) = rng.normal();
    o.mu0(i) = 1.0 + d.x(i, 0) - 0.5 * d.x(i, 1);
    o.tau(i) = 0.5 + d.x(i, 2) + 0.5 * d.x(i, 3);
    o.mu1(i) = o.mu0(i) + o.tau(i);
    o.pi(i) = 1.0 / (1.0 + std::exp(-0.5 * (d.x(i, 0) + d.x(i, 4))));
    d.a(i) = rng.bernoulli(o.pi(i)) ? 1.0 : 0.0;
    d.y(i) = (d.a(i) == 1.0 ? o.mu1(i) : o.mu0(i)) + rng.normal();
  }
  d.oracle = o;
  return d;
}

Outcome dr_consistency() {
  const Dataset test = linear_dgp(2000, 999);
  LearnerSpec spec;
  spec.base.kind = RegressorKind::ridge;
  spec.base.cv_seed = 1;
  auto mean_pehe_at = [&](std::size_t n) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Dataset train = linear_dgp(n, seed * 1000 + n);
      const NuisanceValues oracle{train.oracle->mu0, train.oracle->mu1, train.oracle->pi};
      total += pehe(dr_learner(train, spec, &oracle).predict(test.x), test.oracle->tau);
    }
    return total / 5.0;
  };
  const double small = mean_pehe_at(500), large = mean_pehe_at(4000);
  return {large < small, "DR PEHE n=4000 " + num(large) + " vs n=500 " + num(small)};
}

Outcome kmeans() {
  Matrix x(4, 2);
  x << 0.0, 0.0, 1.0, 0.2, 0.1, 5.0, 1.2, 5.3;
  bool exact = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeededRng rng(seed);
    const auto labels = assign_rows(kmeans_fit(x, 2, rng), x);
    exact = exact && labels[0] == labels[1] && labels[2] == labels[3] && labels[0] != labels[2];
  }
  bool monotone = true;
  std::size_t fits = 0;
  for (std::size_t k : {1u, 2u, 3u, 5u, 8u})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Matrix data = normal_matrix(300, 4, seed) + 3.0 * normal_matrix(300, 4, seed + 50).array().round().matrix();
      SeededRng rng(seed + 100);
      const PartitionModel m = kmeans_fit(data, k, rng);
      for (std::size_t i = 1; i < m.inertia_trace.size(); ++i)
        monotone = monotone && m.inertia_trace[i] <= m.inertia_trace[i - 1];
      ++fits;
    }
  return {exact && monotone, std::string("fixture partition ") + (exact ? "exact" : "WRONG") + ", inertia " +
                                 (monotone ? "monotone" : "NOT monotone") + " on " + std::to_string(fits) + " fits"};
}

Outcome determinism() {
  ExperimentConfig c;
  apply_preset(c, "desk");
  c.eval.mcc = true;
  std::vector<fs::path> dirs;
  for (const char* name : {"det_a", "det_b"}) {
    c.io.out = scratch_dir(name);
    std::ostringstream log;
    dirs.push_back(cmd_pipeline(c, log, threads_from_env()).dir);
  }
  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(dirs[0])) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dirs[0]);
    ++files;
    if (!fs::exists(dirs[1] / rel) || slurp(e.path()) != slurp(dirs[1] / rel)) ++differing;
  }
  bool has_models = fs::exists(dirs[0] / "models" / "run_0.preb") && fs::exists(dirs[0] / "repr" / "test_0.csv") &&
                    fs::exists(dirs[0] / "pehe.csv");
  return {differing == 0 && has_models, std::to_string(files) + " artifacts compared, " +
                                            std::to_string(differing) + " differ"};
}

struct Check {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
  const std::vector<Check> all = {
      {1, "orthogonality of B", orthogonality},
      {2, "NCE gradient vs finite differences", gradients},
      {3, "chance-level loss of a zero network", chance_level},
      {4, "output-bias shift invariance", bias_shift},
      {5, "identifiability trend (MCC)", identifiability},
      {6, "PEHE ordering, EBM vs raw (d=100, n=250)", pehe_ordering},
      {7, "CATE std ordering, EBM vs AE (R-learner)", cate_variance},
      {8, "log-score maximiser recovers w", log_score_recovery},
      {9, "DR consistency with oracle nuisances", dr_consistency},
      {10, "k-means fixture and monotone inertia", kmeans},
      {11, "byte-identical pipeline rerun", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Check& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
