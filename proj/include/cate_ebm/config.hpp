#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cate_ebm/learners.hpp"
#include "cate_ebm/nce.hpp"

namespace cate_ebm {

struct DgpSection {
  std::size_t d = 20;
  std::size_t n = 500;
  std::uint64_t seed = 1;
  std::size_t latent_dim = 5;
  bool literal_outcome = false;
};

struct LearnersSection {
  std::vector<LearnerKind> kinds = all_learner_kinds();
  LearnerSpec spec;
};

struct EvalSection {
  std::size_t runs = 3;
  std::size_t test_n = 2000;
  bool mcc = false;
};

// Input and output locations. Empty paths fall back to files inside `out`.
struct IoSection {
  std::filesystem::path out = "results";
  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path data;
  std::filesystem::path model;
  std::filesystem::path features;
  std::filesystem::path test_features;
  std::vector<std::filesystem::path> models;
};

struct ExperimentConfig {
  std::string preset;
  DgpSection dgp;
  TrainConfig ebm;
  LearnersSection learners;
  EvalSection eval;
  IoSection io;

  // Throws config_error naming the offending key.
  void validate() const;
  // Every setting except [io], one "section.key = value" per line.
  std::string canonical() const;
  std::uint64_t fingerprint() const;
  std::string fingerprint_hex() const;
};

struct Preset {
  std::string name;
  std::optional<std::size_t> d;
  std::optional<std::size_t> n;
  std::size_t b = 10;
  std::size_t k = 4;
  std::vector<std::size_t> hidden;
  double rho = 0.5;
};

const std::vector<Preset>& presets();
void apply_preset(ExperimentConfig& config, const std::string& name);

// Sectioned key = value text. A top-level `preset = <name>` (or the
// override) is applied first, then the explicit keys on top of it.
// Unknown sections or keys are rejected.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<memory>",
                              const std::optional<std::string>& preset_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::optional<std::string>& preset_override = std::nullopt);

std::string format_widths(const std::vector<std::size_t>& widths);
std::vector<std::size_t> parse_widths(const std::string& text);

} // namespace cate_ebm
