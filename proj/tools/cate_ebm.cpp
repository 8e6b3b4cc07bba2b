#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cate_ebm/config.hpp"
#include "cate_ebm/error.hpp"
#include "cate_ebm/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cate_ebm;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string preset;
  bool mcc = false;
  std::string train, test, data, model, features, test_features;
  std::vector<std::string> models;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "experiment configuration file")->required();
  cmd->add_option("--out", o.out, "output directory (overrides io.out)");
  cmd->add_option("--seed", o.seed, "overrides dgp.seed and ebm.seed");
  cmd->add_option("--preset", o.preset, "named hyperparameter preset");
}

ExperimentConfig resolve(const Options& o) {
  std::optional<std::string> preset;
  if (!o.preset.empty()) preset = o.preset;
  ExperimentConfig c = load_config(o.config, preset);
  if (!o.out.empty()) c.io.out = o.out;
  if (o.seed) {
    c.dgp.seed = *o.seed;
    c.ebm.seed = *o.seed;
  }
  if (o.mcc) c.eval.mcc = true;
  if (!o.train.empty()) c.io.train = o.train;
  if (!o.test.empty()) c.io.test = o.test;
  if (!o.data.empty()) c.io.data = o.data;
  if (!o.model.empty()) c.io.model = o.model;
  if (!o.features.empty()) c.io.features = o.features;
  if (!o.test_features.empty()) c.io.test_features = o.test_features;
  if (!o.models.empty()) c.io.models.assign(o.models.begin(), o.models.end());
  return c;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partially randomized energy-based representations for CATE estimation"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "write seeded synthetic train.csv and test.csv");
  add_common(gen, o);

  auto* fit = app.add_subcommand("fit-ebm", "train an EBM on the covariates of a training file");
  add_common(fit, o);
  fit->add_option("--train", o.train, "training CSV (overrides io.train)");

  auto* tr = app.add_subcommand("transform", "write standardized representations of a data file");
  add_common(tr, o);
  tr->add_option("--model", o.model, "model file (overrides io.model)");
  tr->add_option("--data", o.data, "data CSV (overrides io.data)");

  auto* cate = app.add_subcommand("fit-cate", "fit CATE learners on raw or representation features");
  add_common(cate, o);
  cate->add_option("--train", o.train, "labels CSV with a and y (overrides io.train)");
  cate->add_option("--features", o.features, "training features CSV (overrides io.features)");
  cate->add_option("--test", o.test, "test labels CSV for PEHE (overrides io.test)");
  cate->add_option("--test-features", o.test_features, "features to predict on (overrides io.test_features)");

  auto* pipe = app.add_subcommand("pipeline", "gen-data, fit-ebm, transform and fit-cate over all runs");
  add_common(pipe, o);
  pipe->add_flag("--mcc", o.mcc, "also report the correlation of representations across runs");

  auto* mcc = app.add_subcommand("mcc", "per-dimension correlation between models sharing B");
  add_common(mcc, o);
  mcc->add_option("--models", o.models, "model files (overrides io.models)")->delimiter(',');
  mcc->add_option("--test", o.test, "evaluation CSV (overrides io.test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    const ExperimentConfig config = resolve(o);
    if (gen->parsed()) {
      cmd_gen_data(config, std::cout);
    } else if (fit->parsed()) {
      cmd_fit_ebm(config, std::cout);
    } else if (tr->parsed()) {
      cmd_transform(config, std::cout);
    } else if (cate->parsed()) {
      cmd_fit_cate(config, std::cout);
    } else if (pipe->parsed()) {
      cmd_pipeline(config, std::cout, threads_from_env());
    } else if (mcc->parsed()) {
      cmd_mcc(config, std::cout);
    }
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
