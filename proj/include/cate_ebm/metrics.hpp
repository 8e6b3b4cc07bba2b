#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cate_ebm/dgp.hpp"
#include "cate_ebm/learners.hpp"
#include "cate_ebm/linalg.hpp"
#include "cate_ebm/nce.hpp"
#include "cate_ebm/reducers.hpp"

namespace cate_ebm {

// Mean squared difference between estimated and true effects.
double pehe(const Vector& tau_hat, const Vector& tau_true);
inline double root_pehe(const Vector& tau_hat, const Vector& tau_true) {
  return std::sqrt(pehe(tau_hat, tau_true));
}

double pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

// Pearson correlation of column i of r1 with column i of r2, averaged over
// columns. No sign or permutation alignment.
double mcc(const Matrix& r1, const Matrix& r2);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0; // population convention
  std::size_t count = 0;
};
MeanStd mean_std(const std::vector<double>& values);

enum class ReducerKind { ebm, ae };
std::string to_string(ReducerKind kind);
ReducerKind parse_reducer_kind(const std::string& name);

struct CateStdConfig {
  ReducerKind reducer = ReducerKind::ebm;
  LearnerKind learner = LearnerKind::r;
  LearnerSpec learner_spec;
  TrainConfig ebm;       // k, hidden widths, b, rho, ...; seed is replaced per run
  AeConfig ae;           // seed is replaced per run
  std::vector<std::uint64_t> seeds; // one init seed per run, size >= 2
};

struct CateStdResult {
  Vector per_sample_std; // one entry per test row
  double mean_std = 0.0;
  std::vector<Vector> tau_hat; // per run
};

// Trains one reducer per seed (B fixed across EBM runs), fits the learner on
// each representation and reports the across-run std of the test-set
// predictions.
CateStdResult cate_std_experiment(const Dataset& train, const Matrix& test_x, const CateStdConfig& config);

// Report tables: a CSV file and an aligned plain-text rendering.
struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments; // emitted first as "# " lines

  std::string csv() const;
  std::string text() const;
};

void write_report(const std::filesystem::path& dir, const std::string& name, const ReportTable& table);

} // namespace cate_ebm
