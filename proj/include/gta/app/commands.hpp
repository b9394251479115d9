#pragma once

// Subcommand implementations shared by the CLI and the acceptance runner.
// Every file written starts with a "# seed=N" line; tabular readers skip it.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gta/app/config.hpp"
#include "gta/data/series.hpp"
#include "gta/data/synthetic.hpp"
#include "gta/detector/detector.hpp"
#include "gta/forecaster/complexity.hpp"
#include "gta/model/gta_model.hpp"
#include "gta/model/trainer.hpp"

namespace gta::app {

namespace detail {

inline std::ofstream open_output(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  return os;
}

inline void require_readable(const std::string& path, const char* what) {
  std::ifstream is(path);
  if (!is) throw DataError(std::string("cannot read ") + what + ": " + path);
}

inline std::string seed_line(const RunConfig& cfg) { return "# seed=" + std::to_string(cfg.seed()) + "\n"; }

inline data::RawSeries load_series(const std::string& path, const RunConfig& cfg) {
  const std::size_t factor = cfg.count("downsample");
  if (factor == 0) throw UsageError("downsample must be >= 1");
  return data::median_downsample(data::read_csv(path), factor);
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct SynthResult {
  std::string train_path, test_path, graph_path;
  data::SyntheticSpec spec;
};

inline SynthResult cmd_synth(const RunConfig& cfg, std::ostream& report) {
  SynthResult r;
  r.spec = cfg.synthetic_spec();
  r.train_path = cfg.path("train", "train.csv");
  r.test_path = cfg.path("test", "test.csv");
  r.graph_path = cfg.path("graph_truth", "graph_true.txt");
  Generator gen(cfg.seed());
  const auto ds = data::generate_synthetic(r.spec, gen);
  {
    auto os = detail::open_output(r.train_path);
    os << detail::seed_line(cfg);
    data::write_csv(os, ds.train);
  }
  {
    auto os = detail::open_output(r.test_path);
    os << detail::seed_line(cfg);
    data::write_csv(os, ds.test);
  }
  {
    auto os = detail::open_output(r.graph_path);
    os << detail::seed_line(cfg);
    graph::write_edge_list(os, graph::adjacency_edges(ds.planted));
  }
  std::size_t anomalous = 0;
  for (auto v : ds.test.labels) anomalous += v;
  report << detail::seed_line(cfg) << "nodes=" << r.spec.nodes << " edges=" << r.spec.edges.size()
         << " train_length=" << r.spec.train_length << " test_length=" << r.spec.test_length
         << " anomalies=" << r.spec.anomalies.size() << " anomalous_steps=" << anomalous << '\n'
         << "wrote " << r.train_path << ", " << r.test_path << ", " << r.graph_path << '\n';
  return r;
}

// ---------------------------------------------------------------------------

struct TrainRunResult {
  model::TrainResult train;
  std::string checkpoint_path, log_path, graph_path;
  std::size_t edges = 0;
};

inline TrainRunResult cmd_train(const RunConfig& cfg, std::ostream& report) {
  TrainRunResult r;
  const std::string train_path = cfg.path("train", "train.csv");
  r.checkpoint_path = cfg.path("checkpoint", "model.gta");
  r.log_path = cfg.path("log", "train_log.csv");
  r.graph_path = cfg.path("graph", "graph.txt");
  detail::require_readable(train_path, "training CSV");
  const auto tc = cfg.train_config();

  const auto raw = detail::load_series(train_path, cfg);
  const auto stats = data::NormalizerStats::fit(raw);
  const auto train = data::normalize(raw, stats);
  const auto mc = cfg.model_config(raw.num_sensors());
  mc.validate();

  Generator gen(cfg.seed());
  Generator init_gen = gen.split();
  Generator train_gen = gen.split();
  auto model = model::GtaModel::init(mc, init_gen);

  auto log = detail::open_output(r.log_path);
  log << detail::seed_line(cfg) << "epoch,train_mse,val_mse,L_s,tau,edges,lr\n";
  log.flush();
  report << detail::seed_line(cfg);
  r.train = model::train_model(model, train, tc, train_gen, [&](const model::EpochRecord& e) {
    log << e.epoch << ',' << std::setprecision(10) << e.train_mse << ',' << e.val_mse << ',' << e.sparsity << ','
        << e.tau << ',' << e.edges << ',' << e.lr << '\n';
    log.flush();
    report << "epoch " << e.epoch << ": train_mse=" << std::setprecision(6) << e.train_mse << " val_mse=" << e.val_mse
           << " L_s=" << e.sparsity << " tau=" << e.tau << " edges=" << e.edges << std::endl;
  });

  if (auto parent = std::filesystem::path(r.checkpoint_path).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  model::save_model(r.checkpoint_path, model, {stats, r.train.threshold});
  const auto edges = graph::learned_edges(model.policy);
  r.edges = edges.size();
  {
    auto os = detail::open_output(r.graph_path);
    os << detail::seed_line(cfg);
    graph::write_edge_list(os, edges);
  }
  report << "best epoch " << r.train.best_epoch << " (val_mse=" << r.train.best_val_mse
         << "), threshold=" << std::setprecision(10) << r.train.threshold << ", edges=" << r.edges
         << (r.train.early_stopped ? ", early stop" : "") << '\n'
         << "wrote " << r.checkpoint_path << ", " << r.log_path << ", " << r.graph_path << '\n';
  return r;
}

// ---------------------------------------------------------------------------

struct DetectResult {
  std::vector<std::string> timestamps;
  std::vector<double> scores;
  detector::Labels truth;  // empty when the test CSV is unlabelled
  detector::Labels predicted;
  double threshold = 0.0;
  std::string scores_path;
};

inline DetectResult cmd_detect(const RunConfig& cfg, std::ostream& report) {
  DetectResult r;
  const std::string test_path = cfg.path("test", "test.csv");
  const std::string ckpt_path = cfg.path("checkpoint", "model.gta");
  r.scores_path = cfg.path("scores", "scores.csv");
  detail::require_readable(test_path, "test CSV");
  detail::require_readable(ckpt_path, "checkpoint");

  const auto raw = detail::load_series(test_path, cfg);
  const auto loaded = model::load_model(ckpt_path, cfg.model_config(raw.num_sensors()));
  const auto& model = loaded.model;
  const auto test = data::normalize(raw, loaded.extras.stats);
  const auto windows = data::make_windows(test, {model.cfg.window, model.cfg.label_len, 1});
  r.scores = model::score_windows(model, windows, graph::extract_adjacency(model.policy));
  r.threshold = cfg.is_set("threshold") ? cfg.real("threshold") : loaded.extras.threshold;
  r.predicted = detector::apply_threshold(r.scores, r.threshold);
  for (const auto& w : windows) {
    r.timestamps.push_back(test.timestamps[w.target_index]);
    if (test.has_labels()) r.truth.push_back(test.labels[w.target_index]);
  }

  auto os = detail::open_output(r.scores_path);
  os << detail::seed_line(cfg) << "timestamp,score,gt_label,pred_label\n" << std::setprecision(17);
  for (std::size_t k = 0; k < r.scores.size(); ++k) {
    os << r.timestamps[k] << ',' << r.scores[k] << ',';
    if (!r.truth.empty()) os << int(r.truth[k]);
    os << ',' << int(r.predicted[k]) << '\n';
  }
  std::size_t flagged = 0;
  for (auto v : r.predicted) flagged += v;
  report << detail::seed_line(cfg) << "scored " << r.scores.size() << " steps, threshold=" << std::setprecision(10)
         << r.threshold << ", flagged=" << flagged << "\nwrote " << r.scores_path << '\n';
  return r;
}

// ---------------------------------------------------------------------------

struct ScoreFile {
  std::vector<std::string> timestamps;
  std::vector<double> scores;
  detector::Labels truth;
};

inline ScoreFile read_score_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read score CSV: " + path);
  ScoreFile f;
  std::string line;
  bool header = false, all_labelled = true;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "timestamp,score,gt_label,pred_label") throw DataError(path + ": unexpected score CSV header");
      header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (fields.size() != 4) throw DataError(path + ":" + std::to_string(lineno) + ": expected 4 fields");
    f.timestamps.push_back(fields[0]);
    try {
      f.scores.push_back(std::stod(fields[1]));
    } catch (const std::logic_error&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": bad score");
    }
    if (fields[2] == "0" || fields[2] == "1") {
      f.truth.push_back(fields[2] == "1");
    } else if (fields[2].empty()) {
      all_labelled = false;
    } else {
      throw DataError(path + ":" + std::to_string(lineno) + ": gt_label must be 0, 1 or empty");
    }
  }
  if (!header) throw DataError(path + ": missing score CSV header");
  if (!all_labelled) f.truth.clear();
  return f;
}

struct EvalResult {
  detector::ThresholdSweep sweep;
  std::string metrics_path;
};

inline void write_metrics(std::ostream& os, const detector::ThresholdSweep& sweep) {
  os << "operating_point,threshold,precision,recall,f1,tp,fp,fn,tn\n" << std::setprecision(10);
  auto row = [&os](const char* tag, const detector::MetricsReport& m) {
    os << tag << ',' << m.threshold << ',' << m.precision << ',' << m.recall << ',' << m.f1 << ',' << m.tp << ','
       << m.fp << ',' << m.fn << ',' << m.tn << '\n';
  };
  row("** best_f1", sweep.best_f1);
  row("* best_recall", sweep.best_recall);
}

inline EvalResult cmd_eval(const RunConfig& cfg, std::ostream& report) {
  EvalResult r;
  const auto scores = read_score_csv(cfg.path("scores", "scores.csv"));
  detector::Labels truth = scores.truth;
  if (cfg.is_set("labels")) {
    const auto labelled = detail::load_series(cfg.str("labels"), cfg);
    if (!labelled.has_labels()) throw DataError("labels file has no label column: " + cfg.str("labels"));
    const std::size_t rows = scores.scores.size();
    if (labelled.length() < rows) throw DataError("labels file is shorter than the score file");
    const std::size_t offset = labelled.length() - rows;
    for (std::size_t k = 0; k < rows; ++k) {
      if (labelled.timestamps[offset + k] != scores.timestamps[k]) {
        throw DataError("score and label files are misaligned at timestamp " + scores.timestamps[k]);
      }
    }
    truth.assign(labelled.labels.begin() + static_cast<std::ptrdiff_t>(offset), labelled.labels.end());
  }
  if (truth.empty()) throw DataError("no ground-truth labels: score file has an empty gt_label column");
  r.sweep = detector::threshold_sweep(scores.scores, truth);
  r.metrics_path = cfg.path("metrics", "metrics.txt");
  auto os = detail::open_output(r.metrics_path);
  os << detail::seed_line(cfg);
  write_metrics(os, r.sweep);
  report << detail::seed_line(cfg);
  write_metrics(report, r.sweep);
  return r;
}

// ---------------------------------------------------------------------------

struct GraphReport {
  std::vector<graph::Edge> edges;
  std::optional<detector::MetricsReport> recovery;
};

inline GraphReport cmd_graph_report(const RunConfig& cfg, std::ostream& report) {
  GraphReport r;
  const std::string ckpt_path = cfg.path("checkpoint", "model.gta");
  detail::require_readable(ckpt_path, "checkpoint");
  const auto loaded = model::load_model(ckpt_path);
  const auto& policy = loaded.model.policy;
  r.edges = graph::learned_edges(policy);
  const std::string out_path = cfg.path("graph", "graph.txt");
  {
    auto os = detail::open_output(out_path);
    os << detail::seed_line(cfg);
    graph::write_edge_list(os, r.edges);
  }
  report << detail::seed_line(cfg) << "nodes=" << policy.num_nodes << " edges=" << r.edges.size() << " (pi1 > 0.5)\n";
  graph::write_edge_list(report, r.edges);
  if (cfg.is_set("graph_truth")) {
    const auto truth = graph::adjacency_from_edges(graph::read_edge_list(cfg.str("graph_truth")), policy.num_nodes);
    r.recovery = data::edge_recovery_metrics(graph::extract_adjacency(policy), truth);
    report << std::setprecision(6) << "edge recovery: precision=" << r.recovery->precision
           << " recall=" << r.recovery->recall << " f1=" << r.recovery->f1 << " (tp=" << r.recovery->tp
           << " fp=" << r.recovery->fp << " fn=" << r.recovery->fn << ")\n";
  }
  report << "wrote " << out_path << '\n';
  return r;
}

// ---------------------------------------------------------------------------

struct BenchRow {
  forecaster::AttentionKind kind;
  forecaster::Complexity complexity;
  double forward_ms = 0.0;
};

inline std::vector<BenchRow> cmd_bench(const RunConfig& cfg, std::ostream& report) {
  using namespace forecaster;
  const ComplexityShape s{cfg.count("bench_n"), cfg.count("bench_d"), cfg.count("bench_h"),
                          cfg.count("bench_m"), cfg.count("bench_d1"), cfg.count("bench_d2")};
  const std::size_t repeats = std::max<std::size_t>(1, cfg.count("bench_repeats"));
  if (s.n == 0 || s.d == 0 || s.h == 0 || s.m == 0 || s.d1 == 0) throw UsageError("bench sizes must be positive");
  if (s.d % s.h || s.d1 % s.h || s.d2 % s.h) throw UsageError("bench: h must divide d, d1 and d2");
  if (s.d1 + s.d2 > s.d) throw UsageError("bench: d1 + d2 exceeds d");
  if (s.n > s.m) throw UsageError("bench: n must not exceed m");

  Generator gen(cfg.seed());
  std::vector<double> xv(s.n * s.d);
  for (double& v : xv) v = gen.normal();
  const Tensor x = Tensor::matrix(s.n, s.d, std::move(xv));
  const auto dot = AttentionParams::init(s.d, s.h, gen);
  const auto global = GlobalAttentionParams::init(s.d, s.h, s.m, gen);
  const auto mixing = BranchParams::init({s.d1, s.d2, s.d - s.d1 - s.d2}, s.h, s.m, gen);

  auto time_ms = [repeats](auto&& fn) {
    NoGradGuard guard;
    fn();  // warm caches
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < repeats; ++k) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / double(repeats);
  };
  std::vector<BenchRow> rows{
      {AttentionKind::kScaledDotProduct, complexity_report(AttentionKind::kScaledDotProduct, s),
       time_ms([&] { return multi_head(x, dot); })},
      {AttentionKind::kGlobalLearned, complexity_report(AttentionKind::kGlobalLearned, s),
       time_ms([&] { return global_attention(x, global); })},
      {AttentionKind::kBranchMixing, complexity_report(AttentionKind::kBranchMixing, s),
       time_ms([&] { return branch_mix(x, mixing); })},
  };
  report << detail::seed_line(cfg) << "# n=" << s.n << " d=" << s.d << " h=" << s.h << " m=" << s.m
         << " d1=" << s.d1 << " d2=" << s.d2 << "\n"
         << "attention,params,mult_adds,forward_ms\n";
  for (const auto& r : rows) {
    report << to_string(r.kind) << ',' << r.complexity.params << ',' << r.complexity.mult_adds << ','
           << std::fixed << std::setprecision(3) << r.forward_ms << std::defaultfloat << '\n';
  }
  return rows;
}

}  // namespace gta::app
