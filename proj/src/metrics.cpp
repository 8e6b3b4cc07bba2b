#include "cate_ebm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cate_ebm/error.hpp"

namespace cate_ebm {

double pehe(const Vector& tau_hat, const Vector& tau_true) {
  if (tau_hat.size() != tau_true.size())
    throw dimension_error("pehe: lengths differ (" + std::to_string(tau_hat.size()) + " vs " +
                          std::to_string(tau_true.size()) + ")");
  if (tau_hat.size() == 0) throw input_error("pehe: empty input");
  return (tau_hat - tau_true).squaredNorm() / static_cast<double>(tau_hat.size());
}

double pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size() || a.size() < 2) throw dimension_error("pearson: need equal lengths >= 2");
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  const double na = ac.norm();
  const double nb = bc.norm();
  if (!(na > 0.0)) throw degenerate_column_error(0, "pearson: first argument is constant");
  if (!(nb > 0.0)) throw degenerate_column_error(0, "pearson: second argument is constant");
  return std::clamp(ac.dot(bc) / (na * nb), -1.0, 1.0);
}

double mcc(const Matrix& r1, const Matrix& r2) {
  if (r1.rows() != r2.rows() || r1.cols() != r2.cols())
    throw dimension_error("mcc: representation shapes differ");
  if (r1.cols() == 0) throw dimension_error("mcc: no dimensions");
  double sum = 0.0;
  for (Eigen::Index c = 0; c < r1.cols(); ++c) {
    try {
      sum += pearson(r1.col(c), r2.col(c));
    } catch (const degenerate_column_error&) {
      throw degenerate_column_error(static_cast<std::size_t>(c), "mcc: constant column " + std::to_string(c));
    }
  }
  return sum / static_cast<double>(r1.cols());
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

std::string to_string(ReducerKind kind) { return kind == ReducerKind::ebm ? "ebm" : "ae"; }

ReducerKind parse_reducer_kind(const std::string& name) {
  if (name == "ebm") return ReducerKind::ebm;
  if (name == "ae") return ReducerKind::ae;
  throw config_error("unknown reducer '" + name + "' (valid: ebm, ae)");
}

CateStdResult cate_std_experiment(const Dataset& train, const Matrix& test_x, const CateStdConfig& config) {
  if (config.seeds.size() < 2) throw config_error("cate_std_experiment: needs at least 2 runs");
  CateStdResult result;
  for (std::uint64_t seed : config.seeds) {
    Matrix train_repr, test_repr;
    try {
      if (config.reducer == ReducerKind::ebm) {
        TrainConfig tc = config.ebm;
        tc.seed = seed;
        const EbmModel model = train_ebm(train.x, tc).model;
        train_repr = represent(model, train.x);
        test_repr = represent(model, test_x);
      } else {
        AeConfig ac = config.ae;
        ac.seed = seed;
        const AutoEncoder ae = ae_fit(train.x, config.ebm.k, ac);
        train_repr = ae.encode(train.x);
        test_repr = ae.encode(test_x);
      }
    } catch (const std::exception& e) {
      throw numeric_error("cate_std_experiment: run with seed " + std::to_string(seed) + " failed: " + e.what());
    }
    const CateModel model = fit_learner(config.learner, train.with_features(train_repr), config.learner_spec);
    result.tau_hat.push_back(model.predict(test_repr));
  }

  const Eigen::Index n = test_x.rows();
  const double runs = static_cast<double>(result.tau_hat.size());
  result.per_sample_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mean = 0.0;
    for (const Vector& t : result.tau_hat) mean += t(i);
    mean /= runs;
    double ss = 0.0;
    for (const Vector& t : result.tau_hat) ss += (t(i) - mean) * (t(i) - mean);
    result.per_sample_std(i) = std::sqrt(ss / runs);
  }
  result.mean_std = result.per_sample_std.mean();
  return result;
}

std::string ReportTable::csv() const {
  std::string out;
  for (const auto& c : comments) out += "# " + c + '\n';
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(columns);
  for (const auto& r : rows) line(r);
  return out;
}

std::string ReportTable::text() const {
  std::vector<std::size_t> width(columns.size(), 0);
  for (std::size_t c = 0; c < columns.size(); ++c) width[c] = columns[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::string out;
  for (const auto& c : comments) out += "# " + c + '\n';
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += "  ";
      out += cells[c];
      if (c + 1 < cells.size()) out.append(width[c] - cells[c].size(), ' ');
    }
    out += '\n';
  };
  line(columns);
  std::size_t total = 0;
  for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
  out.append(total, '-');
  out += '\n';
  for (const auto& r : rows) line(r);
  return out;
}

void write_report(const std::filesystem::path& dir, const std::string& name, const ReportTable& table) {
  std::filesystem::create_directories(dir);
  for (const auto& [ext, body] : {std::pair{".csv", table.csv()}, std::pair{".txt", table.text()}}) {
    const auto path = dir / (name + ext);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot write " + path.string());
    out << body;
  }
}

} // namespace cate_ebm
