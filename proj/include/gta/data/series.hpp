#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gta/error.hpp"
#include "gta/numerics/tensor.hpp"

namespace gta::data {

/// Multivariate series, sensor-major: values(i, t) is sensor i at step t.
struct RawSeries {
  std::vector<std::string> timestamps;
  std::vector<std::string> sensors;
  Tensor values;                      // [M × L]
  std::vector<std::uint8_t> labels;   // empty or length L

  std::size_t num_sensors() const { return values.dim(0); }
  std::size_t length() const { return values.dim(1); }
  bool has_labels() const { return !labels.empty(); }
  double at(std::size_t sensor, std::size_t t) const { return values[sensor * length() + t]; }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view s, std::size_t line, std::size_t column) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw DataError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                    ": not a finite number: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// Reads "timestamp,<sensor1>,…,<sensorM>[,label]". Rows with missing fields are
/// rejected. Leading lines starting with '#' are skipped.
inline RawSeries read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("CSV is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
  while (!line.empty() && line[0] == '#') {  // run metadata written by the tools
    if (!std::getline(is, line)) throw DataError("CSV has no header");
  }
  auto header = detail::split_fields(detail::trim(line));
  if (header.size() < 2 || detail::trim(header[0]) != "timestamp") {
    throw DataError("CSV header must start with 'timestamp' followed by sensor columns");
  }
  const bool labelled = detail::trim(header.back()) == "label";
  const std::size_t m = header.size() - 1 - (labelled ? 1 : 0);
  if (m == 0) throw DataError("CSV has no sensor columns");
  RawSeries s;
  for (std::size_t i = 1; i <= m; ++i) s.sensors.emplace_back(detail::trim(header[i]));
  std::vector<std::vector<double>> cols(m);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(detail::trim(line));
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    s.timestamps.emplace_back(detail::trim(fields[0]));
    for (std::size_t i = 0; i < m; ++i) cols[i].push_back(detail::parse_double(fields[i + 1], lineno, i + 2));
    if (labelled) {
      const double lab = detail::parse_double(fields.back(), lineno, header.size());
      if (lab != 0.0 && lab != 1.0) throw DataError("line " + std::to_string(lineno) + ": label must be 0 or 1");
      s.labels.push_back(static_cast<std::uint8_t>(lab));
    }
  }
  const std::size_t len = s.timestamps.size();
  if (len == 0) throw DataError("CSV has no data rows");
  std::vector<double> flat;
  flat.reserve(m * len);
  for (const auto& c : cols) flat.insert(flat.end(), c.begin(), c.end());
  s.values = Tensor::matrix(m, len, std::move(flat));
  return s;
}

inline RawSeries read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open CSV: " + path);
  return read_csv(is);
}

inline void write_csv(std::ostream& os, const RawSeries& s) {
  os << "timestamp";
  for (const auto& name : s.sensors) os << ',' << name;
  if (s.has_labels()) os << ",label";
  os << '\n' << std::setprecision(17);
  for (std::size_t t = 0; t < s.length(); ++t) {
    os << s.timestamps[t];
    for (std::size_t i = 0; i < s.num_sensors(); ++i) os << ',' << s.at(i, t);
    if (s.has_labels()) os << ',' << static_cast<int>(s.labels[t]);
    os << '\n';
  }
}

inline void write_csv(const std::string& path, const RawSeries& s) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write CSV: " + path);
  write_csv(os, s);
}

// ---------------------------------------------------------------------------
// Min-max normalization with statistics from the training split only.

inline constexpr double kRangeGuard = 1e-12;

struct NormalizerStats {
  std::vector<double> min, max;

  static NormalizerStats fit(const RawSeries& train) {
    NormalizerStats st;
    for (std::size_t i = 0; i < train.num_sensors(); ++i) {
      const auto row = train.values.data().subspan(i * train.length(), train.length());
      const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
      st.min.push_back(*lo);
      st.max.push_back(*hi);
    }
    return st;
  }

  double range(std::size_t i) const { return std::max(max[i] - min[i], kRangeGuard); }
};

/// x̃ = (x − min) / max(max − min, 1e-12). Values outside the training range are not clipped.
inline RawSeries normalize(const RawSeries& x, const NormalizerStats& st) {
  if (st.min.size() != x.num_sensors()) throw DataError("normalizer fitted on a different sensor count");
  RawSeries out = x;
  std::vector<double> v(x.values.data().begin(), x.values.data().end());
  for (std::size_t i = 0; i < x.num_sensors(); ++i)
    for (std::size_t t = 0; t < x.length(); ++t) {
      auto& e = v[i * x.length() + t];
      e = (e - st.min[i]) / st.range(i);
    }
  out.values = Tensor::matrix(x.num_sensors(), x.length(), std::move(v));
  return out;
}

inline RawSeries denormalize(const RawSeries& x, const NormalizerStats& st) {
  RawSeries out = x;
  std::vector<double> v(x.values.data().begin(), x.values.data().end());
  for (std::size_t i = 0; i < x.num_sensors(); ++i)
    for (std::size_t t = 0; t < x.length(); ++t) {
      auto& e = v[i * x.length() + t];
      e = e * st.range(i) + st.min[i];
    }
  out.values = Tensor::matrix(x.num_sensors(), x.length(), std::move(v));
  return out;
}

// ---------------------------------------------------------------------------

/// Median of a block; even sizes average the two middle values.
inline double median(std::vector<double> block) {
  if (block.empty()) throw DataError("median of empty block");
  const std::size_t mid = block.size() / 2;
  std::nth_element(block.begin(), block.begin() + static_cast<std::ptrdiff_t>(mid), block.end());
  const double upper = block[mid];
  if (block.size() % 2 == 1) return upper;
  const double lower = *std::max_element(block.begin(), block.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Non-overlapping blocks of `factor` steps: per-sensor median, label = block max,
/// timestamp = first of block. A trailing partial block is kept.
inline RawSeries median_downsample(const RawSeries& x, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("downsample factor must be >= 1");
  if (factor == 1) return x;
  const std::size_t len = x.length(), m = x.num_sensors();
  const std::size_t blocks = (len + factor - 1) / factor;
  RawSeries out;
  out.sensors = x.sensors;
  std::vector<double> v(m * blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * factor, hi = std::min(len, lo + factor);
    out.timestamps.push_back(x.timestamps[lo]);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> block;
      for (std::size_t t = lo; t < hi; ++t) block.push_back(x.at(i, t));
      v[i * blocks + b] = median(std::move(block));
    }
    if (x.has_labels()) {
      std::uint8_t any = 0;
      for (std::size_t t = lo; t < hi; ++t) any = std::max(any, x.labels[t]);
      out.labels.push_back(any);
    }
  }
  out.values = Tensor::matrix(m, blocks, std::move(v));
  return out;
}

// ---------------------------------------------------------------------------

struct WindowConfig {
  std::size_t window = 60;
  std::size_t label_len = 30;
  std::size_t stride = 1;

  void validate() const {
    if (window == 0 || stride == 0) throw std::invalid_argument("window and stride must be positive");
    if (label_len == 0 || label_len >= window) throw std::invalid_argument("label length must be in [1, window)");
  }
};

/// One training triple. `target_index` is the series position being predicted.
struct WindowSample {
  Tensor encoder_input;   // [M × n], steps target−n … target−1
  Tensor decoder_labels;  // [(label_len+1) × M], last label_len window steps then a zero row
  Tensor target;          // [M]
  std::size_t target_index = 0;
};

inline WindowSample make_window(const RawSeries& x, const WindowConfig& cfg, std::size_t target) {
  const std::size_t m = x.num_sensors(), n = cfg.window, len = x.length();
  if (target < n || target >= len) throw std::out_of_range("window target outside series");
  std::vector<double> enc(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) enc[i * n + k] = x.values[i * len + target - n + k];
  std::vector<double> dec((cfg.label_len + 1) * m, 0.0);
  for (std::size_t k = 0; k < cfg.label_len; ++k)
    for (std::size_t i = 0; i < m; ++i) dec[k * m + i] = x.values[i * len + target - cfg.label_len + k];
  std::vector<double> tgt(m);
  for (std::size_t i = 0; i < m; ++i) tgt[i] = x.values[i * len + target];
  return {Tensor::matrix(m, n, std::move(enc)), Tensor::matrix(cfg.label_len + 1, m, std::move(dec)),
          Tensor::vector(std::move(tgt)), target};
}

/// All windows whose target lies in [n, L), every `stride` steps.
inline std::vector<WindowSample> make_windows(const RawSeries& x, const WindowConfig& cfg) {
  cfg.validate();
  if (x.length() < cfg.window + 1) {
    throw DataError("series of length " + std::to_string(x.length()) + " is shorter than window + 1 = " +
                    std::to_string(cfg.window + 1));
  }
  std::vector<WindowSample> out;
  for (std::size_t t = cfg.window; t < x.length(); t += cfg.stride) out.push_back(make_window(x, cfg, t));
  return out;
}

}  // namespace gta::data
