#include "gcnseg/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gcnseg/error.hpp"

namespace gcnseg {

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::kConfig, msg); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    config_error(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t parse_positive(const std::string& key, const std::string& v) {
  const std::uint64_t n = parse_u64(key, v);
  if (n == 0) config_error(key + " must be >= 1");
  return static_cast<std::size_t>(n);
}

double parse_double(const std::string& key, const std::string& v) {
  // from_chars for double is missing from older libstdc++.
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    config_error(key + ": expected a number, got '" + v + "'");
  }
  return d;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_positive(key, trim(item)));
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "learning_rate", "epochs",        "batch_size",  "seed",           "checkpoint_path",
      "log_every",     "loss_reduction", "threads",    "history_path",   "data_dir",
      "eval_dir",      "split_ratio",   "patch_size",  "stride",         "connectivity",
      "conv_channels", "gcn_dims",      "cheb_order",  "verify_max_n",   "verify_trials"};
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "learning_rate") {
    cfg.train.learning_rate = parse_double(key, v);
    if (!(cfg.train.learning_rate > 0.0)) config_error("learning_rate must be > 0");
  } else if (key == "epochs") {
    cfg.train.epochs = parse_positive(key, v);
  } else if (key == "batch_size") {
    cfg.train.batch_size = parse_positive(key, v);
  } else if (key == "seed") {
    cfg.train.seed = parse_u64(key, v);
    cfg.seed_set = true;
  } else if (key == "checkpoint_path") {
    cfg.train.checkpoint_path = v;
  } else if (key == "log_every") {
    cfg.train.log_every = static_cast<std::size_t>(parse_u64(key, v));
  } else if (key == "loss_reduction") {
    if (v == "mean") {
      cfg.train.loss_reduction = LossReduction::kMean;
    } else if (v == "sum") {
      cfg.train.loss_reduction = LossReduction::kSum;
    } else {
      config_error("loss_reduction must be 'mean' or 'sum'");
    }
  } else if (key == "threads") {
    cfg.train.threads = parse_positive(key, v);
  } else if (key == "history_path") {
    cfg.history_path = v;
  } else if (key == "data_dir") {
    cfg.data_dir = v;
  } else if (key == "eval_dir") {
    cfg.eval_dir = v;
  } else if (key == "split_ratio") {
    cfg.split_ratio = parse_double(key, v);
    if (!(cfg.split_ratio > 0.0 && cfg.split_ratio <= 1.0)) {
      config_error("split_ratio must lie in (0, 1]");
    }
  } else if (key == "patch_size") {
    cfg.arch.height = cfg.arch.width = parse_positive(key, v);
  } else if (key == "stride") {
    cfg.stride = parse_positive(key, v);
  } else if (key == "connectivity") {
    if (v == "4") {
      cfg.arch.connectivity = Connectivity::kFour;
    } else if (v == "8") {
      cfg.arch.connectivity = Connectivity::kEight;
    } else {
      config_error("connectivity must be 4 or 8");
    }
  } else if (key == "conv_channels") {
    cfg.arch.conv_channels = parse_list(key, v);
  } else if (key == "gcn_dims") {
    cfg.arch.gcn_dims = parse_list(key, v);
    if (cfg.arch.gcn_dims.empty()) config_error("gcn_dims needs at least one layer");
  } else if (key == "cheb_order") {
    cfg.cheb_order = static_cast<std::size_t>(parse_u64(key, v));
  } else if (key == "verify_max_n") {
    cfg.verify_max_n = parse_positive(key, v);
  } else if (key == "verify_trials") {
    cfg.verify_trials = static_cast<std::size_t>(parse_u64(key, v));
  } else {
    config_error("unknown key '" + key + "'");
  }
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where =
        (origin.empty() ? std::string("line ") : origin + ":") + std::to_string(lineno);
    if (eq == std::string::npos) config_error(where + ": expected key=value");
    try {
      apply_setting(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      config_error(where + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

void apply_seed_fallback(RunConfig& cfg) {
  if (cfg.seed_set) return;
  if (const char* env = std::getenv("GCN_SEED"); env != nullptr && *env != '\0') {
    cfg.train.seed = parse_u64("GCN_SEED", env);
    cfg.seed_set = true;
  }
}

}  // namespace gcnseg
