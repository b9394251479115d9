// gta: synth | train | detect | eval | graph-report | bench
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gta/app/commands.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::string> seed;
  std::optional<std::string> out;
  std::vector<std::string> sets;
  std::map<std::string, std::string> named;  // dedicated flags → config keys
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "flat key = value config file");
  sub->add_option("--seed", f.seed, "RNG seed (overrides config)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--set", f.sets, "override any config key: --set key=value (repeatable)");
}

void add_key(CLI::App* sub, CommonFlags& f, const std::string& flag, const std::string& key, const std::string& help) {
  sub->add_option_function<std::string>(flag, [&f, key](const std::string& v) { f.named[key] = v; }, help);
}

gta::app::RunConfig resolve(const CommonFlags& f) {
  gta::app::RunConfig cfg;
  if (!f.config.empty()) cfg.load_file(f.config);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw gta::UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [k, v] : f.named) cfg.set(k, v);
  if (f.seed) cfg.set("seed", *f.seed);
  if (f.out) cfg.set("out", *f.out);
  cfg.seed();  // validate early
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-learning transformer anomaly detector for multivariate sensor series"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* synth = app.add_subcommand("synth", "generate a planted-graph synthetic dataset");
  add_common(synth, flags);
  add_key(synth, flags, "--nodes", "nodes", "sensor count");

  auto* train = app.add_subcommand("train", "train policy + forecaster, write checkpoint and log");
  add_common(train, flags);
  add_key(train, flags, "--train", "train", "training CSV");
  add_key(train, flags, "--checkpoint", "checkpoint", "checkpoint path");
  add_key(train, flags, "--epochs", "epochs", "epoch budget");

  auto* detect = app.add_subcommand("detect", "score a test CSV with a checkpoint");
  add_common(detect, flags);
  add_key(detect, flags, "--test", "test", "test CSV");
  add_key(detect, flags, "--checkpoint", "checkpoint", "checkpoint path");
  add_key(detect, flags, "--threshold", "threshold", "override stored threshold");

  auto* eval = app.add_subcommand("eval", "best-F1 / best-recall operating points of a score CSV");
  add_common(eval, flags);
  add_key(eval, flags, "--scores", "scores", "score CSV");
  add_key(eval, flags, "--labels", "labels", "labelled CSV (defaults to the score file's gt_label)");

  auto* report = app.add_subcommand("graph-report", "export the learned graph, optionally compare to a reference");
  add_common(report, flags);
  add_key(report, flags, "--checkpoint", "checkpoint", "checkpoint path");
  add_key(report, flags, "--truth", "graph_truth", "reference edge list");

  auto* bench = app.add_subcommand("bench", "parameter / mult-add counts and timings of attention variants");
  add_common(bench, flags);
  add_key(bench, flags, "--n", "bench_n", "sequence length");
  add_key(bench, flags, "--d", "bench_d", "model width");
  add_key(bench, flags, "--heads", "bench_h", "head count h");
  add_key(bench, flags, "--m", "bench_m", "global alignment size");
  add_key(bench, flags, "--d1", "bench_d1", "dot-product branch width");
  add_key(bench, flags, "--d2", "bench_d2", "global branch width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto cfg = resolve(flags);
    if (synth->parsed()) gta::app::cmd_synth(cfg, std::cout);
    if (train->parsed()) gta::app::cmd_train(cfg, std::cout);
    if (detect->parsed()) gta::app::cmd_detect(cfg, std::cout);
    if (eval->parsed()) gta::app::cmd_eval(cfg, std::cout);
    if (report->parsed()) gta::app::cmd_graph_report(cfg, std::cout);
    if (bench->parsed()) gta::app::cmd_bench(cfg, std::cout);
  } catch (const gta::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const gta::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const gta::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
