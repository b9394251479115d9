#pragma once

// Flat "key = value" run configuration. '#' starts a comment. Every key has a
// default; files and command-line overrides may only set known keys, and
// overrides are applied after the file.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>

#include "gta/data/synthetic.hpp"
#include "gta/error.hpp"
#include "gta/model/trainer.hpp"

namespace gta::app {

inline const std::map<std::string, std::string>& config_defaults() {
  static const std::map<std::string, std::string> defaults = {
      // paths; empty means "<out>/<default file name>"
      {"out", "."},
      {"train", ""},
      {"test", ""},
      {"checkpoint", ""},
      {"scores", ""},
      {"log", ""},
      {"graph", ""},
      {"metrics", ""},
      {"graph_truth", ""},
      {"labels", ""},  // optional labelled CSV for eval; default uses the score file's gt_label
      {"seed", "0"},
      // synthetic data; empty keeps the built-in default spec
      {"nodes", ""},
      {"length", ""},
      {"test_length", ""},
      {"edges", ""},
      {"lags", ""},
      {"couplings", ""},
      {"noise", ""},
      {"anomalies", ""},
      // preprocessing
      {"downsample", "1"},
      // model
      {"window", "60"},
      {"label_len", "30"},
      {"levels", "3"},
      {"kernel", "2"},
      {"base_channels", "32"},
      {"d_model", "128"},
      {"heads", "8"},
      {"m", "128"},
      {"encoder_layers", "3"},
      {"decoder_layers", "2"},
      {"d_ff", "128"},
      {"dropout", "0.05"},
      {"branch_mixing", "true"},
      {"p_init", "0.9"},
      // training
      {"epochs", "50"},
      {"patience", "10"},
      {"warmup", "5"},
      {"batch", "32"},
      {"stride", "1"},
      {"lr", "1e-4"},
      {"policy_lr", ""},  // empty: same as lr
      {"beta1", "0.9"},
      {"beta2", "0.99"},
      {"lambda_s", "0.01"},
      {"tau_start", "1.0"},
      {"tau_decay", "0.9"},
      {"tau_min", "0.1"},
      {"val_fraction", "0.1"},
      {"learn_graph", "true"},
      // detection; empty uses the threshold stored at training time
      {"threshold", ""},
      // bench
      {"bench_n", "64"},
      {"bench_d", "128"},
      {"bench_h", "8"},
      {"bench_m", "64"},
      {"bench_d1", "48"},
      {"bench_d2", "40"},
      {"bench_repeats", "5"},
  };
  return defaults;
}

class RunConfig {
 public:
  RunConfig() : values_(config_defaults()) {}

  void set(const std::string& key, const std::string& value) {
    if (!config_defaults().contains(key)) throw UsageError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  void load(std::istream& is, const std::string& origin = "config") {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto text = trim(line);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string::npos) {
        throw UsageError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      }
      const std::string key = trim(text.substr(0, eq));
      try {
        set(key, trim(text.substr(eq + 1)));
      } catch (const UsageError& e) {
        throw UsageError(origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open config file: " + path);
    load(is, path);
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
    return it->second;
  }

  bool is_set(const std::string& key) const { return !str(key).empty(); }

  std::size_t count(const std::string& key) const {
    const auto& v = str(key);
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
      throw UsageError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
    }
    return out;
  }

  std::uint64_t seed() const {
    const auto& v = str("seed");
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) throw UsageError("seed must be an unsigned integer");
    return out;
  }

  double real(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t used = 0;
      const double out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::logic_error&) {
      throw UsageError("config key '" + key + "' expects a number, got '" + v + "'");
    }
  }

  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("config key '" + key + "' expects true/false, got '" + v + "'");
  }

  /// Path for `key`, falling back to <out>/<fallback> when unset.
  std::string path(const std::string& key, const std::string& fallback) const {
    if (is_set(key)) return str(key);
    return (std::filesystem::path(str("out")) / fallback).string();
  }

  data::SyntheticSpec synthetic_spec() const {
    std::map<std::string, std::string> kv;
    for (const char* key : {"nodes", "length", "test_length", "edges", "lags", "couplings", "noise", "anomalies"})
      if (is_set(key)) kv[key] = str(key);
    return data::parse_synthetic_spec(kv);
  }

  model::ModelConfig model_config(std::size_t nodes) const {
    model::ModelConfig c;
    c.nodes = nodes;
    c.window = count("window");
    c.label_len = count("label_len");
    c.levels = count("levels");
    c.kernel = count("kernel");
    c.base_channels = count("base_channels");
    c.d_model = count("d_model");
    c.heads = count("heads");
    c.m = count("m");
    c.encoder_layers = count("encoder_layers");
    c.decoder_layers = count("decoder_layers");
    c.d_ff = count("d_ff");
    c.dropout = real("dropout");
    c.branch_mixing = flag("branch_mixing");
    c.p_init = real("p_init");
    if (!(c.p_init > 0.0 && c.p_init < 1.0)) throw UsageError("p_init must lie in (0, 1)");
    return c;
  }

  model::TrainConfig train_config() const {
    model::TrainConfig t;
    t.epochs = count("epochs");
    t.patience = count("patience");
    t.warmup = count("warmup");
    t.batch = count("batch");
    t.stride = count("stride");
    t.lr = real("lr");
    t.policy_lr = is_set("policy_lr") ? real("policy_lr") : t.lr;
    t.beta1 = real("beta1");
    t.beta2 = real("beta2");
    t.lambda_s = real("lambda_s");
    t.tau_start = real("tau_start");
    t.tau_decay = real("tau_decay");
    t.tau_min = real("tau_min");
    t.val_fraction = real("val_fraction");
    t.learn_graph = flag("learn_graph");
    t.validate();
    return t;
  }

  /// Every key in sorted order, for run headers.
  void dump(std::ostream& os, const std::string& prefix = "# ") const {
    for (const auto& [k, v] : values_) os << prefix << k << " = " << v << '\n';
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace gta::app
