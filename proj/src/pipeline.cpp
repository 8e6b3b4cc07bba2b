#include "cate_ebm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "cate_ebm/dgp.hpp"
#include "cate_ebm/ebm.hpp"
#include "cate_ebm/error.hpp"
#include "cate_ebm/rng.hpp"

namespace cate_ebm {
namespace fs = std::filesystem;

namespace {

std::string config_tag(const ExperimentConfig& config) { return "config=" + config.fingerprint_hex(); }

fs::path or_default(const fs::path& given, const fs::path& fallback) { return given.empty() ? fallback : given; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw input_error("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw input_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw input_error("failed writing " + path.string());
}

std::uint64_t test_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x5eedf00d7e57ULL); }
std::uint64_t train_seed(std::uint64_t seed, std::size_t run) { return splitmix64(seed + 1 + run); }

DgpSpec make_dgp(const ExperimentConfig& config) {
  DgpSpec dgp = gen_dgp(config.dgp.seed, config.dgp.d, config.dgp.latent_dim);
  dgp.literal_outcome = config.dgp.literal_outcome;
  return dgp;
}

void write_train_log(const fs::path& path, const std::vector<TrainLogEntry>& entries, const std::string& tag) {
  CsvTable t;
  t.comments = {tag};
  t.header = {"epoch", "train_loss", "val_loss"};
  t.values.resize(static_cast<Eigen::Index>(entries.size()), 3);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    t.values(r, 0) = static_cast<double>(entries[i].epoch);
    t.values(r, 1) = entries[i].train_loss;
    t.values(r, 2) = entries[i].val_loss;
  }
  write_csv(path, t);
}

void write_repr(const fs::path& path, const Matrix& z, const std::string& tag) {
  CsvTable t;
  t.comments = {tag};
  t.header = numbered_names("z", static_cast<std::size_t>(z.cols()));
  t.values = z;
  write_csv(path, t);
}

void write_predictions(const fs::path& path, const Vector& tau_hat, const std::string& tag) {
  CsvTable t;
  t.comments = {tag};
  t.header = {"tau_hat"};
  t.values = tau_hat;
  write_csv(path, t);
}

Dataset read_dataset(const fs::path& path) {
  const CsvTable table = read_csv(path);
  return dataset_from_table(table, {}, path.string());
}

// Re-throws with a stage prefix, keeping the error family (and exit code).
[[noreturn]] void rethrow_in_stage(const std::string& stage) {
  try {
    throw;
  } catch (const input_error& e) {
    throw input_error(stage + ": " + e.what());
  } catch (const numeric_error& e) {
    throw numeric_error(stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw numeric_error(stage + ": " + e.what());
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

LearnerSpec run_learner_spec(const LearnerSpec& base, std::size_t run) {
  LearnerSpec s = base;
  s.base.cv_seed = base.base.cv_seed + run;
  s.split_seed = base.split_seed + run;
  return s;
}

} // namespace

unsigned threads_from_env() {
  const char* raw = std::getenv("CATE_EBM_THREADS");
  if (!raw || !*raw) return 1;
  const std::string text = raw;
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value == 0)
    throw config_error("CATE_EBM_THREADS must be a positive integer, got '" + text + "'");
  return value;
}

Matrix feature_columns(const CsvTable& table, const std::string& origin) {
  for (char prefix : {'z', 'x'}) {
    std::map<long, Eigen::Index> numbered;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const std::string& h = table.header[c];
      if (h.size() > 1 && h[0] == prefix &&
          std::all_of(h.begin() + 1, h.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
        numbered[std::stol(h.substr(1))] = static_cast<Eigen::Index>(c);
    }
    if (numbered.empty()) continue;
    Matrix out(table.values.rows(), static_cast<Eigen::Index>(numbered.size()));
    Eigen::Index j = 0;
    for (const auto& [_, c] : numbered) out.col(j++) = table.values.col(c);
    return out;
  }
  throw csv_error(origin + ": no feature columns (z0, z1, ... or x0, x1, ...)");
}

GenDataOutput cmd_gen_data(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  ensure_dir(config.io.out);
  const DgpSpec dgp = make_dgp(config);
  const Dataset train = sample(dgp, config.dgp.n, train_seed(config.dgp.seed, 0));
  const Dataset test = sample(dgp, config.eval.test_n, test_seed(config.dgp.seed));
  GenDataOutput out{config.io.out / "train.csv", config.io.out / "test.csv"};
  save_csv(out.train, train, {config_tag(config)});
  save_csv(out.test, test, {config_tag(config)});
  log << "wrote " << out.train.string() << " (" << train.size() << " rows, " << train.treated_count()
      << " treated) and " << out.test.string() << " (" << test.size() << " rows)\n";
  return out;
}

FitEbmOutput cmd_fit_ebm(const ExperimentConfig& config, std::ostream& log) {
  config.ebm.validate();
  const fs::path train_path = or_default(config.io.train, config.io.out / "train.csv");
  const Dataset train = read_dataset(train_path);
  if (config.ebm.k >= train.dim())
    throw config_error("ebm.k = " + std::to_string(config.ebm.k) + " must be smaller than the " +
                       std::to_string(train.dim()) + " covariates of " + train_path.string());
  ensure_dir(config.io.out);
  TrainResult result = train_ebm(train.x, config.ebm);
  result.model.fingerprint.config_hash = config.fingerprint();
  FitEbmOutput out{config.io.out / "model.preb", config.io.out / "train_log.csv", result.best_val_loss};
  save_model(result.model, out.model);
  write_train_log(out.train_log, result.log, config_tag(config));
  log << "trained on " << train.size() << " rows, best epoch " << result.best_epoch << ", validation loss "
      << fmt(result.best_val_loss) << " (chance " << fmt(std::log(static_cast<double>(config.ebm.b) + 1.0))
      << "), model " << out.model.string() << '\n';
  return out;
}

fs::path cmd_transform(const ExperimentConfig& config, std::ostream& log) {
  const fs::path model_path = or_default(config.io.model, config.io.out / "model.preb");
  const fs::path data_path = or_default(config.io.data, or_default(config.io.train, config.io.out / "train.csv"));
  const EbmModel model = load_model(model_path);
  const CsvTable table = read_csv(data_path);
  const Matrix x = feature_columns(table, data_path.string());
  if (static_cast<std::size_t>(x.cols()) != model.input_dim())
    throw dimension_error("model expects " + std::to_string(model.input_dim()) + " features but " +
                          data_path.string() + " has " + std::to_string(x.cols()));
  ensure_dir(config.io.out);
  const fs::path out = config.io.out / "repr.csv";
  write_repr(out, represent(model, x), "model=" + model.fingerprint.hex());
  log << "wrote " << out.string() << " (" << x.rows() << " x " << model.k() << ")\n";
  return out;
}

std::vector<LearnerSummary> cmd_fit_cate(const ExperimentConfig& config, std::ostream& log) {
  if (config.learners.kinds.empty()) throw config_error("learners.kinds is empty");
  const fs::path labels_path = or_default(config.io.train, config.io.out / "train.csv");
  const fs::path features_path = or_default(config.io.features, labels_path);
  const Dataset labels = read_dataset(labels_path);
  const Matrix features = feature_columns(read_csv(features_path), features_path.string());
  if (features.rows() != labels.x.rows())
    throw dimension_error(features_path.string() + " has " + std::to_string(features.rows()) + " rows but " +
                          labels_path.string() + " has " + std::to_string(labels.x.rows()));
  const Dataset train = labels.with_features(features);

  Matrix eval_x = features;
  std::optional<Vector> eval_tau;
  if (labels.oracle) eval_tau = labels.oracle->tau;
  if (!config.io.test_features.empty()) {
    eval_x = feature_columns(read_csv(config.io.test_features), config.io.test_features.string());
    eval_tau.reset();
    if (!config.io.test.empty()) {
      const Dataset test = read_dataset(config.io.test);
      if (test.oracle && test.oracle->tau.size() == eval_x.rows()) eval_tau = test.oracle->tau;
    }
  }
  if (eval_x.cols() != features.cols())
    throw dimension_error("prediction features have " + std::to_string(eval_x.cols()) + " columns, training features " +
                          std::to_string(features.cols()));

  ensure_dir(config.io.out);
  std::vector<LearnerSummary> out;
  for (LearnerKind kind : config.learners.kinds) {
    const CateModel model = fit_learner(kind, train, config.learners.spec);
    const Vector tau_hat = model.predict(eval_x);
    LearnerSummary s;
    s.kind = kind;
    s.predictions = config.io.out / ("predictions_" + to_string(kind) + ".csv");
    s.mean_tau_hat = tau_hat.mean();
    write_predictions(s.predictions, tau_hat, config_tag(config));
    log << to_string(kind) << "-learner: " << eval_x.rows() << " predictions, mean " << fmt(s.mean_tau_hat);
    if (eval_tau) {
      s.has_pehe = true;
      s.pehe = pehe(tau_hat, *eval_tau);
      log << ", PEHE " << fmt(s.pehe) << ", root PEHE " << fmt(std::sqrt(s.pehe));
    }
    log << ", " << s.predictions.string() << '\n';
    out.push_back(s);
  }
  return out;
}

PipelineOutput cmd_pipeline(const ExperimentConfig& config, std::ostream& log, unsigned threads) {
  config.validate();
  const std::string tag = config_tag(config);
  const std::string canonical = "# " + tag + '\n' + config.canonical();
  PipelineOutput out;
  out.dir = config.io.out / ("exp-" + config.fingerprint_hex());
  const fs::path stamp = out.dir / "config.ini";
  if (fs::exists(stamp)) {
    std::ifstream in(stamp, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (buf.str() != canonical)
      throw config_error(out.dir.string() + " holds artifacts of a different configuration; refusing to mix them");
  }
  for (const char* sub : {"data", "models", "repr", "logs", "predictions"}) ensure_dir(out.dir / sub);
  write_text(stamp, canonical);

  const std::size_t runs = config.eval.runs;
  DgpSpec dgp;
  Dataset test;
  std::vector<Dataset> trains(runs);
  try {
    dgp = make_dgp(config);
    test = sample(dgp, config.eval.test_n, test_seed(config.dgp.seed));
    save_csv(out.dir / "data" / "test.csv", test, {tag});
    for (std::size_t r = 0; r < runs; ++r) {
      trains[r] = sample(dgp, config.dgp.n, train_seed(config.dgp.seed, r));
      save_csv(out.dir / "data" / ("train_" + std::to_string(r) + ".csv"), trains[r], {tag});
    }
  } catch (...) {
    rethrow_in_stage("stage gen-data (seed " + std::to_string(config.dgp.seed) + ")");
  }
  log << "gen-data: " << runs << " training sets of " << config.dgp.n << " rows, test set of " << test.size()
      << " rows\n";

  const auto& kinds = config.learners.kinds;
  struct RunResult {
    std::vector<double> pehe_raw, pehe_ebm;
    Matrix test_repr;
    double val_loss = 0.0;
    std::exception_ptr error;
  };
  std::vector<RunResult> results(runs);

  auto do_run = [&](std::size_t r) {
    RunResult& res = results[r];
    const std::string run = std::to_string(r);
    TrainConfig tc = config.ebm;
    tc.seed = config.ebm.seed + r;
    std::string stage = "stage fit-ebm (run " + run + ", seed " + std::to_string(tc.seed) + ")";
    try {
      const Dataset& train = trains[r];
      TrainResult fit = train_ebm(train.x, tc);
      fit.model.fingerprint.config_hash = config.fingerprint();
      save_model(fit.model, out.dir / "models" / ("run_" + run + ".preb"));
      write_train_log(out.dir / "logs" / ("train_log_" + run + ".csv"), fit.log, tag);
      res.val_loss = fit.best_val_loss;

      stage = "stage transform (run " + run + ", seed " + std::to_string(tc.seed) + ")";
      const Matrix train_repr = represent(fit.model, train.x);
      res.test_repr = represent(fit.model, test.x);
      const std::string model_tag = "model=" + fit.model.fingerprint.hex();
      write_repr(out.dir / "repr" / ("train_" + run + ".csv"), train_repr, model_tag);
      write_repr(out.dir / "repr" / ("test_" + run + ".csv"), res.test_repr, model_tag);

      const LearnerSpec spec = run_learner_spec(config.learners.spec, r);
      const Dataset train_ebm_features = train.with_features(train_repr);
      for (LearnerKind kind : kinds) {
        stage = "stage fit-cate " + to_string(kind) + " (run " + run + ", seed " + std::to_string(spec.base.cv_seed) + ")";
        const Vector raw = fit_learner(kind, train, spec).predict(test.x);
        const Vector ebm = fit_learner(kind, train_ebm_features, spec).predict(res.test_repr);
        write_predictions(out.dir / "predictions" / (to_string(kind) + "_raw_" + run + ".csv"), raw, tag);
        write_predictions(out.dir / "predictions" / (to_string(kind) + "_ebm_" + run + ".csv"), ebm, tag);
        res.pehe_raw.push_back(pehe(raw, test.oracle->tau));
        res.pehe_ebm.push_back(pehe(ebm, test.oracle->tau));
      }
    } catch (...) {
      try {
        rethrow_in_stage(stage);
      } catch (...) {
        res.error = std::current_exception();
      }
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(runs)));
  if (workers == 1) {
    for (std::size_t r = 0; r < runs; ++r) do_run(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t r; (r = next.fetch_add(1)) < runs;) do_run(r);
      });
    for (auto& t : pool) t.join();
  }
  for (std::size_t r = 0; r < runs; ++r) {
    if (results[r].error) std::rethrow_exception(results[r].error);
    log << "run " << r << ": validation loss " << fmt(results[r].val_loss) << '\n';
  }

  out.pehe.comments = {tag};
  out.pehe.columns = {"learner", "features", "pehe_mean", "pehe_std", "root_pehe_mean", "root_pehe_std", "runs"};
  ReportTable per_run;
  per_run.comments = {tag};
  per_run.columns = {"run", "learner", "features", "pehe", "root_pehe"};
  for (std::size_t li = 0; li < kinds.size(); ++li) {
    for (const char* cond : {"raw", "ebm"}) {
      std::vector<double> values, roots;
      for (std::size_t r = 0; r < runs; ++r) {
        const double v = std::string(cond) == "raw" ? results[r].pehe_raw[li] : results[r].pehe_ebm[li];
        values.push_back(v);
        roots.push_back(std::sqrt(v));
        per_run.rows.push_back({std::to_string(r), to_string(kinds[li]), cond, format_double(v), format_double(roots.back())});
      }
      const MeanStd ms = mean_std(values), rs = mean_std(roots);
      out.pehe.rows.push_back({to_string(kinds[li]), cond, fmt(ms.mean), fmt(ms.std), fmt(rs.mean), fmt(rs.std),
                               std::to_string(runs)});
    }
  }
  write_report(out.dir, "pehe", out.pehe);
  write_report(out.dir, "pehe_runs", per_run);
  log << out.pehe.text();

  if (config.eval.mcc) {
    out.mcc.comments = {tag};
    out.mcc.columns = {"run_a", "run_b", "mcc"};
    std::vector<double> values;
    for (std::size_t a = 0; a < runs; ++a)
      for (std::size_t b = a + 1; b < runs; ++b) {
        const double v = mcc(results[a].test_repr, results[b].test_repr);
        values.push_back(v);
        out.mcc.rows.push_back({std::to_string(a), std::to_string(b), fmt(v)});
      }
    const MeanStd ms = mean_std(values);
    out.mcc.rows.push_back({"mean", "", fmt(ms.mean)});
    out.mcc.rows.push_back({"std", "", fmt(ms.std)});
    write_report(out.dir, "mcc", out.mcc);
    log << "MCC across runs: " << fmt(ms.mean) << " +- " << fmt(ms.std) << '\n';
  }
  log << "results in " << out.dir.string() << '\n';
  return out;
}

MccOutput cmd_mcc(const ExperimentConfig& config, std::ostream& log) {
  if (config.io.models.size() < 2) throw config_error("mcc needs at least two models (io.models)");
  const fs::path data_path = or_default(config.io.test, or_default(config.io.data, config.io.out / "test.csv"));
  std::vector<EbmModel> models;
  for (const auto& p : config.io.models) models.push_back(load_model(p));
  const ModelFingerprint& ref = models.front().fingerprint;
  for (std::size_t i = 1; i < models.size(); ++i) {
    const ModelFingerprint& f = models[i].fingerprint;
    if (f.input_dim != ref.input_dim || f.k != ref.k)
      throw dimension_error(config.io.models[i].string() + ": d or k differs from " + config.io.models[0].string());
    if (f.b_hash != ref.b_hash)
      throw input_error(config.io.models[i].string() + " was trained with a different B than " +
                        config.io.models[0].string() + "; correlations across different B are not comparable");
  }
  const Matrix x = feature_columns(read_csv(data_path), data_path.string());
  if (static_cast<std::size_t>(x.cols()) != ref.input_dim)
    throw dimension_error(data_path.string() + " has " + std::to_string(x.cols()) + " features, models expect " +
                          std::to_string(ref.input_dim));
  std::vector<Matrix> reprs;
  for (const auto& m : models) reprs.push_back(represent(m, x));

  MccOutput out;
  const auto m = static_cast<Eigen::Index>(models.size());
  out.pairwise = Matrix::Identity(m, m);
  std::vector<double> values;
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a + 1; b < m; ++b) {
      out.pairwise(a, b) = out.pairwise(b, a) = mcc(reprs[a], reprs[b]);
      values.push_back(out.pairwise(a, b));
    }
  const MeanStd ms = mean_std(values);
  out.mean = ms.mean;
  out.std = ms.std;

  ReportTable table;
  table.columns = {"model"};
  for (Eigen::Index b = 0; b < m; ++b) table.columns.push_back("m" + std::to_string(b));
  for (Eigen::Index a = 0; a < m; ++a) {
    std::vector<std::string> row = {config.io.models[a].string()};
    for (Eigen::Index b = 0; b < m; ++b) row.push_back(fmt(out.pairwise(a, b)));
    table.rows.push_back(row);
  }
  table.comments = {"mean=" + fmt(ms.mean), "std=" + fmt(ms.std)};
  ensure_dir(config.io.out);
  write_report(config.io.out, "mcc", table);
  out.report = config.io.out / "mcc.csv";
  log << table.text() << "mean MCC " << fmt(ms.mean) << " +- " << fmt(ms.std) << " over " << values.size()
      << " pairs\n";
  return out;
}

} // namespace cate_ebm
