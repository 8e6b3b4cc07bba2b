#include "cate_ebm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cate_ebm/csv.hpp"
#include "cate_ebm/error.hpp"

namespace cate_ebm {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw config_error("config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw config_error("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::string join_kinds(const std::vector<LearnerKind>& kinds) {
  std::string out;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (i) out += ',';
    out += to_string(kinds[i]);
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  for (const auto& item : split(raw, ',')) out.push_back(parse_number<double>(key, item));
  if (out.empty()) throw config_error("config key '" + key + "': empty list");
  return out;
}

void apply_key(ExperimentConfig& c, const std::string& section, const std::string& key, const std::string& v) {
  const std::string full = section + "." + key;
  auto size = [&] { return parse_number<std::size_t>(full, v); };
  auto u64 = [&] { return parse_number<std::uint64_t>(full, v); };
  auto dbl = [&] { return parse_number<double>(full, v); };

  if (section == "dgp") {
    if (key == "d") c.dgp.d = size();
    else if (key == "n") c.dgp.n = size();
    else if (key == "seed") c.dgp.seed = u64();
    else if (key == "latent_dim") c.dgp.latent_dim = size();
    else if (key == "literal_outcome") c.dgp.literal_outcome = parse_bool(full, v);
    else throw config_error("unknown config key '" + full + "'");
  } else if (section == "ebm") {
    TrainConfig& e = c.ebm;
    if (key == "k") e.k = size();
    else if (key == "b") e.b = size();
    else if (key == "rho") e.rho = dbl();
    else if (key == "hidden") e.hidden = parse_widths(v);
    else if (key == "epochs") e.epochs = size();
    else if (key == "lr") e.learning_rate = dbl();
    else if (key == "batch") e.batch_size = size();
    else if (key == "seed") e.seed = u64();
    else if (key == "b_seed") e.b_seed = u64();
    else if (key == "patience") e.patience = size();
    else if (key == "validation_fraction") e.validation_fraction = dbl();
    else if (key == "kmeans_max_iter") e.kmeans_max_iter = size();
    else if (key == "weight_decay") e.weight_decay = dbl();
    else if (key == "lr_decay") e.lr_decay = parse_bool(full, v);
    else throw config_error("unknown config key '" + full + "'");
  } else if (section == "learners") {
    LearnerSpec& s = c.learners.spec;
    if (key == "kinds") {
      c.learners.kinds.clear();
      for (const auto& name : split(v, ',')) c.learners.kinds.push_back(parse_learner_kind(name));
    } else if (key == "base") s.base.kind = parse_regressor_kind(trim(v));
    else if (key == "lambda") s.base.lambda = dbl();
    else if (key == "gamma") s.base.gamma = dbl();
    else if (key == "tune") s.base.tune = parse_bool(full, v);
    else if (key == "lambda_grid") s.base.lambda_grid = parse_doubles(full, v);
    else if (key == "gamma_scales") s.base.gamma_scales = parse_doubles(full, v);
    else if (key == "cv_folds") s.base.cv_folds = size();
    else if (key == "cv_max_rows") s.base.cv_max_rows = size();
    else if (key == "cv_seed") s.base.cv_seed = u64();
    else if (key == "propensity_l2") s.propensity_l2 = dbl();
    else if (key == "propensity_clip") s.propensity_clip = dbl();
    else if (key == "split_seed") s.split_seed = u64();
    else throw config_error("unknown config key '" + full + "'");
  } else if (section == "eval") {
    if (key == "runs") c.eval.runs = size();
    else if (key == "test_n") c.eval.test_n = size();
    else if (key == "mcc") c.eval.mcc = parse_bool(full, v);
    else throw config_error("unknown config key '" + full + "'");
  } else if (section == "io") {
    const std::filesystem::path p = trim(v);
    if (key == "out") c.io.out = p;
    else if (key == "train") c.io.train = p;
    else if (key == "test") c.io.test = p;
    else if (key == "data") c.io.data = p;
    else if (key == "model") c.io.model = p;
    else if (key == "features") c.io.features = p;
    else if (key == "test_features") c.io.test_features = p;
    else if (key == "models") {
      c.io.models.clear();
      for (const auto& m : split(v, ',')) c.io.models.emplace_back(m);
    } else throw config_error("unknown config key '" + full + "'");
  } else {
    throw config_error("unknown config section '[" + section + "]'");
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

} // namespace

std::string format_widths(const std::vector<std::size_t>& widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(widths[i]);
  }
  return out;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> out;
  const auto items = split(text, '-');
  if (items.empty() || std::count(text.begin(), text.end(), '-') + 1 != static_cast<long>(items.size()))
    throw config_error("hidden widths: expected positive integers joined by '-', got '" + text + "'");
  for (const auto& w : items) {
    out.push_back(parse_number<std::size_t>("hidden", w));
    if (out.back() == 0) throw config_error("hidden widths: a layer of width 0 in '" + text + "'");
  }
  return out;
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = {
      {"synth_d50_n100", 50, 100, 10, 3, {20, 20, 20}, 0.20},
      {"synth_d100_n250", 100, 250, 10, 4, {20, 20, 20}, 0.50},
      {"synth_d150_n500", 150, 500, 5, 3, {20, 20}, 0.20},
      {"synth_d200_n1000", 200, 1000, 3, 15, {20, 20, 20, 20}, 0.50},
      {"synth_d250_n1500", 250, 1500, 3, 20, {20, 20, 20}, 0.50},
      {"synth_d100_n100", 100, 100, 5, 15, {20, 20, 20, 20, 20, 20}, 0.20},
      {"synth_d100_n500", 100, 500, 3, 10, {20, 20, 20, 20}, 0.50},
      {"synth_d100_n1000", 100, 1000, 3, 20, {20, 20}, 0.35},
      {"synth_d100_n1500", 100, 1500, 3, 10, {20, 20}, 0.30},
      {"twins_n500", std::nullopt, 500, 5, 15, {20, 20, 20, 20, 20, 20}, 0.45},
      {"twins_n1000", std::nullopt, 1000, 5, 16, {20, 20, 20, 20, 20, 20}, 0.55},
      {"twins_n1500", std::nullopt, 1500, 5, 16, {20, 20, 20, 20, 20, 20}, 0.55},
      {"twins_n2000", std::nullopt, 2000, 4, 14, {20, 20, 20, 20, 20, 20}, 0.55},
      {"twins_n2500", std::nullopt, 2500, 4, 12, {20, 20, 20, 20, 20, 20}, 0.50},
      {"ihdp_n100", std::nullopt, 100, 1, 5, {36, 36, 36, 36, 36, 36}, 0.45},
      {"ihdp_n250", std::nullopt, 250, 1, 5, {36, 36, 36, 36, 36, 36}, 0.45},
      {"ihdp_n500", std::nullopt, 500, 1, 5, {36, 36, 36, 36, 36, 36}, 0.45},
      // Desk-scale settings for the identifiability and variance experiments.
      {"desk", 20, 500, 5, 3, {128}, 0.50},
      {"identifiability_d20", 20, 2000, 5, 3, {128}, 0.50},
  };
  return table;
}

void apply_preset(ExperimentConfig& config, const std::string& name) {
  for (const Preset& p : presets()) {
    if (p.name != name) continue;
    config.preset = name;
    if (p.d) config.dgp.d = *p.d;
    if (p.n) config.dgp.n = *p.n;
    config.ebm.b = p.b;
    config.ebm.k = p.k;
    config.ebm.hidden = p.hidden;
    config.ebm.rho = p.rho;
    return;
  }
  std::string names;
  for (const Preset& p : presets()) names += (names.empty() ? "" : ", ") + p.name;
  throw config_error("unknown preset '" + name + "' (known: " + names + ")");
}

void ExperimentConfig::validate() const {
  if (dgp.d < 1) throw config_error("dgp.d must be >= 1");
  if (dgp.n < 2) throw config_error("dgp.n must be >= 2");
  if (dgp.latent_dim < 1) throw config_error("dgp.latent_dim must be >= 1");
  if (ebm.k >= dgp.d) throw config_error("ebm.k must be smaller than dgp.d");
  if (dgp.n < 2 * ebm.k) throw config_error("dgp.n must be at least 2 * ebm.k");
  ebm.validate();
  if (learners.kinds.empty()) throw config_error("learners.kinds is empty");
  const BaseSpec& b = learners.spec.base;
  if (!(b.lambda > 0.0)) throw config_error("learners.lambda must be positive");
  for (double l : b.lambda_grid)
    if (!(l > 0.0)) throw config_error("learners.lambda_grid entries must be positive");
  for (double g : b.gamma_scales)
    if (!(g > 0.0)) throw config_error("learners.gamma_scales entries must be positive");
  if (b.cv_folds < 2) throw config_error("learners.cv_folds must be >= 2");
  if (!(learners.spec.propensity_l2 >= 0.0)) throw config_error("learners.propensity_l2 must be >= 0");
  if (!(learners.spec.propensity_clip > 0.0 && learners.spec.propensity_clip < 0.5))
    throw config_error("learners.propensity_clip must lie in (0, 0.5)");
  if (eval.runs < 1) throw config_error("eval.runs must be >= 1");
  if (eval.mcc && eval.runs < 2) throw config_error("eval.mcc needs eval.runs >= 2");
  if (eval.test_n < 1) throw config_error("eval.test_n must be >= 1");
  auto must_exist = [](const char* key, const std::filesystem::path& p) {
    if (!p.empty() && !std::filesystem::exists(p))
      throw config_error(std::string("io.") + key + ": no such file " + p.string());
  };
  must_exist("train", io.train);
  must_exist("test", io.test);
  must_exist("data", io.data);
  must_exist("model", io.model);
  must_exist("features", io.features);
  must_exist("test_features", io.test_features);
  for (const auto& m : io.models) must_exist("models", m);
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  auto put = [&](const std::string& key, const std::string& value) { out += key + " = " + value + '\n'; };
  put("preset", preset.empty() ? "none" : preset);
  put("dgp.d", std::to_string(dgp.d));
  put("dgp.n", std::to_string(dgp.n));
  put("dgp.seed", std::to_string(dgp.seed));
  put("dgp.latent_dim", std::to_string(dgp.latent_dim));
  put("dgp.literal_outcome", dgp.literal_outcome ? "true" : "false");
  put("ebm.k", std::to_string(ebm.k));
  put("ebm.b", std::to_string(ebm.b));
  put("ebm.rho", format_double(ebm.rho));
  put("ebm.hidden", format_widths(ebm.hidden));
  put("ebm.epochs", std::to_string(ebm.epochs));
  put("ebm.lr", format_double(ebm.learning_rate));
  put("ebm.batch", std::to_string(ebm.batch_size));
  put("ebm.seed", std::to_string(ebm.seed));
  put("ebm.b_seed", std::to_string(ebm.b_seed));
  put("ebm.patience", std::to_string(ebm.patience));
  put("ebm.validation_fraction", format_double(ebm.validation_fraction));
  put("ebm.kmeans_max_iter", std::to_string(ebm.kmeans_max_iter));
  put("ebm.weight_decay", format_double(ebm.weight_decay));
  put("ebm.lr_decay", ebm.lr_decay ? "true" : "false");
  const LearnerSpec& s = learners.spec;
  put("learners.kinds", join_kinds(learners.kinds));
  put("learners.base", to_string(s.base.kind));
  put("learners.lambda", format_double(s.base.lambda));
  put("learners.gamma", format_double(s.base.gamma));
  put("learners.tune", s.base.tune ? "true" : "false");
  put("learners.lambda_grid", join_doubles(s.base.lambda_grid));
  put("learners.gamma_scales", join_doubles(s.base.gamma_scales));
  put("learners.cv_folds", std::to_string(s.base.cv_folds));
  put("learners.cv_max_rows", std::to_string(s.base.cv_max_rows));
  put("learners.cv_seed", std::to_string(s.base.cv_seed));
  put("learners.propensity_l2", format_double(s.propensity_l2));
  put("learners.propensity_clip", format_double(s.propensity_clip));
  put("learners.split_seed", std::to_string(s.split_seed));
  put("eval.runs", std::to_string(eval.runs));
  put("eval.test_n", std::to_string(eval.test_n));
  put("eval.mcc", eval.mcc ? "true" : "false");
  return out;
}

std::uint64_t ExperimentConfig::fingerprint() const { return fnv1a(canonical()); }

std::string ExperimentConfig::fingerprint_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fingerprint()));
  return buf;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin,
                              const std::optional<std::string>& preset_override) {
  // The INI reader only knows ';' comments; accept '#' as well.
  std::string cleaned;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const std::string t = trim(line);
    if (!t.empty() && t[0] == '#') continue;
    cleaned += line + '\n';
  }
  pt::ptree tree;
  try {
    std::istringstream in(cleaned);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw config_error(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
  }

  ExperimentConfig config;
  std::optional<std::string> preset = preset_override;
  for (const auto& [key, node] : tree) {
    if (!node.empty() || (key != "preset" && node.data().empty())) continue;
    if (key != "preset") throw config_error(origin + ": unknown top-level key '" + key + "'");
    if (!preset) preset = trim(node.data());
  }
  if (preset && !preset->empty() && *preset != "none") apply_preset(config, *preset);

  for (const auto& [section, node] : tree) {
    if (node.empty()) continue;
    for (const auto& [key, leaf] : node) {
      if (!leaf.empty()) throw config_error(origin + ": nested keys are not supported under [" + section + "]");
      try {
        apply_key(config, section, key, leaf.data());
      } catch (const config_error& e) {
        throw config_error(origin + ": " + e.what());
      } catch (const std::exception& e) {
        throw config_error(origin + ": " + section + "." + key + ": " + e.what());
      }
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& preset_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string(), preset_override);
}

} // namespace cate_ebm
