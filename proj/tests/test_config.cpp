#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cate_ebm/config.hpp"
#include "cate_ebm/error.hpp"

using namespace cate_ebm;

TEST_CASE("defaults parse from an empty file and validate") {
  const ExperimentConfig c = parse_config("");
  CHECK(c.dgp.d == 20);
  CHECK(c.ebm.k == 4);
  CHECK(c.ebm.hidden == std::vector<std::size_t>{20, 20, 20});
  CHECK(c.learners.kinds.size() == 4);
  CHECK_NOTHROW(c.validate());
  CHECK(c.preset.empty());
}

TEST_CASE("sections and keys") {
  const ExperimentConfig c = parse_config(R"(# comment line
[dgp]
d = 40
n = 300
seed = 9
literal_outcome = true

[ebm]
k = 6
b = 3
rho = 0.25
hidden = 32-16
lr = 0.005
lr_decay = true

[learners]
kinds = t, dr
base = ridge
tune = false
lambda_grid = 0.1, 1

[eval]
runs = 4
mcc = true

[io]
out = somewhere
)");
  CHECK(c.dgp.d == 40);
  CHECK(c.dgp.n == 300);
  CHECK(c.dgp.seed == 9);
  CHECK(c.dgp.literal_outcome);
  CHECK(c.ebm.k == 6);
  CHECK(c.ebm.b == 3);
  CHECK(c.ebm.rho == 0.25);
  CHECK(c.ebm.hidden == std::vector<std::size_t>{32, 16});
  CHECK(c.ebm.learning_rate == 0.005);
  CHECK(c.ebm.lr_decay);
  CHECK(c.learners.kinds == std::vector<LearnerKind>{LearnerKind::t, LearnerKind::dr});
  CHECK(c.learners.spec.base.kind == RegressorKind::ridge);
  CHECK(!c.learners.spec.base.tune);
  CHECK(c.learners.spec.base.lambda_grid == std::vector<double>{0.1, 1.0});
  CHECK(c.eval.runs == 4);
  CHECK(c.eval.mcc);
  CHECK(c.io.out == "somewhere");
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("presets apply first and explicit keys win") {
  const ExperimentConfig p = parse_config("preset = synth_d100_n250\n");
  CHECK(p.preset == "synth_d100_n250");
  CHECK(p.dgp.d == 100);
  CHECK(p.dgp.n == 250);
  CHECK(p.ebm.b == 10);
  CHECK(p.ebm.k == 4);
  CHECK(p.ebm.hidden == std::vector<std::size_t>{20, 20, 20});

  const ExperimentConfig o = parse_config("preset = synth_d100_n250\n[ebm]\nk = 7\n");
  CHECK(o.ebm.k == 7);
  CHECK(o.ebm.b == 10);

  const ExperimentConfig cli = parse_config("preset = synth_d100_n250\n", "<t>", std::string("desk"));
  CHECK(cli.preset == "desk");
  CHECK(cli.dgp.d == 20);
  CHECK(cli.ebm.hidden == std::vector<std::size_t>{128});

  const ExperimentConfig ihdp = parse_config("preset = ihdp_n100\n[dgp]\nd = 25\n");
  CHECK(ihdp.ebm.b == 1);
  CHECK(ihdp.ebm.hidden.size() == 6);
  CHECK(ihdp.dgp.d == 25);

  try {
    parse_config("preset = nope\n");
    FAIL("expected an unknown preset error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("desk") != std::string::npos);
  }
  for (const Preset& pr : presets()) {
    ExperimentConfig c;
    apply_preset(c, pr.name);
    CHECK(c.ebm.k == pr.k);
  }
}

TEST_CASE("unknown or malformed input is rejected") {
  CHECK_THROWS_AS(parse_config("[dgp]\nwidth = 3\n"), config_error);
  CHECK_THROWS_AS(parse_config("[model]\nk = 3\n"), config_error);
  CHECK_THROWS_AS(parse_config("k = 3\n"), config_error);
  CHECK_THROWS_AS(parse_config("[dgp]\nd = twenty\n"), config_error);
  CHECK_THROWS_AS(parse_config("[dgp]\nd = -3\n"), config_error);
  CHECK_THROWS_AS(parse_config("[ebm]\nlr_decay = maybe\n"), config_error);
  CHECK_THROWS_AS(parse_config("[learners]\nkinds = t, s\n"), config_error);
  CHECK_THROWS_AS(parse_config("[learners]\nbase = forest\n"), config_error);
  CHECK_THROWS_AS(parse_config("[ebm]\nhidden = 20--20\n"), config_error);
  CHECK_THROWS_AS(parse_config("[dgp\nd = 3\n"), config_error);
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.ini"), config_error);
}

TEST_CASE("validation") {
  auto bad = [](const std::string& text) { CHECK_THROWS_AS(parse_config(text).validate(), config_error); };
  bad("[dgp]\nd = 4\n[ebm]\nk = 4\n");
  bad("[dgp]\nn = 5\n[ebm]\nk = 3\n");
  bad("[dgp]\nn = 1\n");
  bad("[ebm]\nrho = 0\n");
  bad("[ebm]\nrho = 1.5\n");
  bad("[ebm]\nb = 0\n");
  bad("[ebm]\nvalidation_fraction = 1\n");
  bad("[learners]\ncv_folds = 1\n");
  bad("[learners]\npropensity_clip = 0.5\n");
  bad("[eval]\nruns = 1\nmcc = true\n");
  bad("[io]\ntrain = /nonexistent/train.csv\n");
  CHECK_NOTHROW(parse_config("[dgp]\nd = 5\n[ebm]\nk = 4\n").validate());
}

TEST_CASE("fingerprints follow the canonical form") {
  const ExperimentConfig a = parse_config("[dgp]\nd = 30\n");
  const ExperimentConfig b = parse_config("# same settings, different text\n[dgp]\nd=30\n[io]\nout = elsewhere\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint_hex().size() == 16);
  CHECK(a.fingerprint_hex() == b.fingerprint_hex());

  const ExperimentConfig c = parse_config("[dgp]\nd = 31\n");
  CHECK(a.fingerprint() != c.fingerprint());
  const ExperimentConfig r = parse_config("[ebm]\nrho = 0.5000000001\n");
  CHECK(r.fingerprint() != parse_config("").fingerprint());

  // The canonical text parses back to the same settings.
  std::string text, section;
  for (std::size_t pos = 0; pos < a.canonical().size();) {
    const std::size_t end = a.canonical().find('\n', pos);
    const std::string line = a.canonical().substr(pos, end - pos);
    pos = end + 1;
    const std::size_t dot = line.find('.');
    if (line.rfind("preset", 0) == 0) continue;
    const std::string s = line.substr(0, dot);
    if (s != section) text += "[" + (section = s) + "]\n";
    text += line.substr(dot + 1) + "\n";
  }
  CHECK(parse_config(text).canonical() == a.canonical());
}

TEST_CASE("width lists") {
  CHECK(parse_widths("20-20-20") == std::vector<std::size_t>{20, 20, 20});
  CHECK(parse_widths("128") == std::vector<std::size_t>{128});
  CHECK(format_widths({36, 36}) == "36-36");
  CHECK_THROWS_AS(parse_widths(""), config_error);
  CHECK_THROWS_AS(parse_widths("20-0"), config_error);
}

TEST_CASE("config files load from disk") {
  const auto p = std::filesystem::temp_directory_path() / "cate_ebm_test_config.ini";
  {
    std::ofstream out(p);
    out << "preset = desk\n[eval]\nruns = 2\n";
  }
  const ExperimentConfig c = load_config(p);
  CHECK(c.preset == "desk");
  CHECK(c.eval.runs == 2);
}
