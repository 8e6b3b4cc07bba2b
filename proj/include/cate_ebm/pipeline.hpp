#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cate_ebm/config.hpp"
#include "cate_ebm/csv.hpp"
#include "cate_ebm/linalg.hpp"
#include "cate_ebm/metrics.hpp"

namespace cate_ebm {

// Each command reads its inputs from config.io (falling back to the files
// an earlier command writes into config.io.out) and reports progress on
// `log`. Errors surface as input_error or numeric_error.

struct GenDataOutput {
  std::filesystem::path train;
  std::filesystem::path test;
};
GenDataOutput cmd_gen_data(const ExperimentConfig& config, std::ostream& log);

struct FitEbmOutput {
  std::filesystem::path model;
  std::filesystem::path train_log;
  double best_val_loss = 0.0;
};
FitEbmOutput cmd_fit_ebm(const ExperimentConfig& config, std::ostream& log);

std::filesystem::path cmd_transform(const ExperimentConfig& config, std::ostream& log);

struct LearnerSummary {
  LearnerKind kind = LearnerKind::t;
  std::filesystem::path predictions;
  double mean_tau_hat = 0.0;
  bool has_pehe = false;
  double pehe = 0.0;
};
std::vector<LearnerSummary> cmd_fit_cate(const ExperimentConfig& config, std::ostream& log);

struct PipelineOutput {
  std::filesystem::path dir;
  ReportTable pehe;
  ReportTable mcc; // empty unless config.eval.mcc
};
// Runs are independent and may execute on up to `threads` workers; the
// artifacts do not depend on the thread count.
PipelineOutput cmd_pipeline(const ExperimentConfig& config, std::ostream& log, unsigned threads = 1);

struct MccOutput {
  Matrix pairwise; // models x models
  double mean = 0.0;
  double std = 0.0;
  std::filesystem::path report;
};
MccOutput cmd_mcc(const ExperimentConfig& config, std::ostream& log);

// Feature block of a CSV: the z<i> columns if present, else the x<i> columns.
Matrix feature_columns(const CsvTable& table, const std::string& origin);

// Parses CATE_EBM_THREADS; unset or empty means 1.
unsigned threads_from_env();

} // namespace cate_ebm
