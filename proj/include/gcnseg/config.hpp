#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gcnseg/model.hpp"
#include "gcnseg/training.hpp"

namespace gcnseg {

// Everything a CLI run can be configured with. Files are `key=value` lines
// with `#` comments; later settings override earlier ones, and command-line
// flags are applied after the file.
struct RunConfig {
  TrainConfig train;
  Architecture arch;
  std::filesystem::path data_dir;
  std::filesystem::path eval_dir;
  std::filesystem::path history_path;  // default: "<checkpoint_path>.history.tsv"
  double split_ratio = 1.0;            // < 1 carves a spatial test split out of data_dir
  std::size_t stride = 19;
  std::size_t cheb_order = 8;
  std::size_t verify_max_n = 32;
  std::size_t verify_trials = 20;
  bool seed_set = false;
};

// Recognized keys, in documentation order.
const std::vector<std::string>& config_keys();

// Throws kConfig for an unknown key or a malformed value.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Parses `key=value` text. `origin` prefixes error messages (file name).
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "");
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Fills the seed from GCN_SEED when neither the file nor a flag set it.
void apply_seed_fallback(RunConfig& cfg);

}  // namespace gcnseg
