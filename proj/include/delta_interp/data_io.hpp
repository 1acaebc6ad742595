#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "delta_interp/dataset.hpp"
#include "delta_interp/log.hpp"
#include "delta_interp/rng.hpp"

namespace delta_interp {

struct CsvSchema {
  /// Header name of the label column; without a header, its zero-based index.
  std::string label_column = "label";
  std::optional<std::string> weight_column;
  char delimiter = ',';
  bool has_header = true;
};

/// Unparsed CSV contents: header plus string cells.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InvalidArgument("csv: column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(cell);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string format17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline RawTable read_raw_csv(const std::string& path, char delimiter = ',', bool has_header = true) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  RawTable t;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split_line(line, delimiter);
    for (auto& c : cells) c = detail::trim(c);
    if (first && has_header) {
      t.header = std::move(cells);
    } else {
      const std::size_t width = has_header ? t.header.size() : (t.rows.empty() ? cells.size() : t.rows[0].size());
      if (cells.size() != width)
        throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) + " cells, got " +
                      std::to_string(cells.size()));
      t.rows.push_back(std::move(cells));
    }
    first = false;
  }
  if (t.rows.empty()) throw IoError("'" + path + "' holds no data rows");
  if (!has_header) {
    for (std::size_t j = 0; j < t.rows[0].size(); ++j) t.header.push_back(std::to_string(j));
  }
  return t;
}

/// Labels become dense indices. If every label token is an integer and the
/// set of values is exactly {0, ..., K-1}, the integers are kept; otherwise
/// tokens are numbered in first-appearance order. The token of each index is
/// stored as the dataset's label names.
inline Dataset table_to_dataset(const RawTable& t, const CsvSchema& schema, const std::string& origin = "csv") {
  std::size_t label_col;
  if (schema.has_header) {
    label_col = t.column(schema.label_column);
  } else {
    auto idx = detail::parse_double(schema.label_column);
    if (!idx || *idx < 0 || *idx >= static_cast<double>(t.header.size()))
      throw InvalidArgument("csv: label column index '" + schema.label_column + "' invalid");
    label_col = static_cast<std::size_t>(*idx);
  }
  std::optional<std::size_t> weight_col;
  if (schema.weight_column) weight_col = t.column(*schema.weight_column);

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (j != label_col && (!weight_col || j != *weight_col)) {
      feature_cols.push_back(j);
      names.push_back(t.header[j]);
    }

  Matrix x(t.rows.size(), feature_cols.size());
  std::vector<std::string> tokens;
  std::optional<std::vector<double>> weights;
  if (weight_col) weights.emplace();
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      auto v = detail::parse_double(row[feature_cols[j]]);
      if (!v)
        throw IoError(origin + ": non-numeric feature '" + row[feature_cols[j]] + "' at data row " +
                      std::to_string(i + 1) + ", column '" + t.header[feature_cols[j]] + "'");
      x(i, j) = *v;
    }
    tokens.push_back(row[label_col]);
    if (weight_col) {
      auto w = detail::parse_double(row[*weight_col]);
      if (!w) throw IoError(origin + ": non-numeric weight at data row " + std::to_string(i + 1));
      if (*w < 0.0) throw InvalidArgument(origin + ": negative weight at data row " + std::to_string(i + 1));
      weights->push_back(*w);
    }
  }

  std::vector<std::string> label_names;
  std::map<std::string, Label> index;
  for (const auto& tok : tokens)
    if (!index.contains(tok)) {
      index[tok] = static_cast<Label>(label_names.size());
      label_names.push_back(tok);
    }
  bool dense_ints = true;
  std::vector<Label> numeric(tokens.size());
  for (std::size_t i = 0; i < tokens.size() && dense_ints; ++i) {
    auto v = detail::parse_double(tokens[i]);
    dense_ints = v && *v >= 0 && *v == std::floor(*v) && *v < static_cast<double>(label_names.size());
    if (dense_ints) numeric[i] = static_cast<Label>(*v);
  }
  std::vector<Label> labels(tokens.size());
  if (dense_ints) {
    labels = numeric;
    std::vector<std::string> ordered(label_names.size());
    for (std::size_t k = 0; k < ordered.size(); ++k) ordered[k] = std::to_string(k);
    label_names = std::move(ordered);
  } else {
    for (std::size_t i = 0; i < tokens.size(); ++i) labels[i] = index[tokens[i]];
  }
  if (label_names.size() < 2) throw InvalidArgument(origin + ": label column holds fewer than 2 distinct labels");

  Dataset d(std::move(x), std::move(labels), static_cast<int>(label_names.size()), std::move(weights), names);
  d.set_label_names(std::move(label_names));
  return d;
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
  return table_to_dataset(read_raw_csv(path, schema.delimiter, schema.has_header), schema, path);
}

/// Header row then data rows; reals at 17 significant digits, labels as
/// their dense indices. The weight column is written only when the dataset
/// carries weights.
inline void save_csv(const Dataset& data, const std::string& path, const CsvSchema& schema = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  const char d = schema.delimiter;
  const std::string label_name = schema.has_header ? schema.label_column : "label";
  const std::string weight_name = schema.weight_column.value_or("weight");
  for (std::size_t j = 0; j < data.dim(); ++j)
    out << (data.feature_names().empty() ? "x" + std::to_string(j) : data.feature_names()[j]) << d;
  out << label_name;
  if (data.has_weights()) out << d << weight_name;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.x(i)) out << detail::format17(v) << d;
    out << data.y(i);
    if (data.has_weights()) out << d << detail::format17(data.weight(i));
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Special-value expansion for credit-bureau style tables (-7, -8, -9 codes).

struct FicoExpansion {
  Dataset data;
  std::size_t dropped_rows = 0;    // rows whose every feature was -9
  std::size_t isolated_minus9 = 0; // -9 cells kept as ordinary values
  std::vector<std::string> categorical_columns;
};

/// Every feature column c becomes (c_is7, c_is8, c_value): -7 -> (1,0,0),
/// -8 -> (0,1,0), v -> (0,0,v). Rows that are -9 in every feature are removed.
/// A column with any non-numeric token is categorical and is one-hot encoded
/// (lexicographic category order) before expansion.
inline FicoExpansion fico_expand(const RawTable& table, const std::string& label_column) {
  const std::size_t label_col = table.column(label_column);
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < table.header.size(); ++j)
    if (j != label_col) cols.push_back(j);

  FicoExpansion out;
  auto is_minus9 = [](const std::string& s) {
    auto v = detail::parse_double(s);
    return v && *v == -9.0;
  };
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const bool all9 = !cols.empty() && std::all_of(cols.begin(), cols.end(), [&](std::size_t j) { return is_minus9(row[j]); });
    if (all9)
      ++out.dropped_rows;
    else
      kept.push_back(i);
  }
  if (kept.empty()) throw InvalidArgument("fico_expand: every row is all -9");

  // One-hot pass: (name, source column, category or nullopt for numeric).
  struct Column {
    std::string name;
    std::size_t source;
    std::optional<std::string> category;
  };
  std::vector<Column> plan;
  for (auto j : cols) {
    std::set<std::string> cats;
    bool categorical = false;
    for (auto i : kept) {
      const auto& cell = table.rows[i][j];
      categorical = categorical || !detail::parse_double(cell);
      cats.insert(cell);
    }
    if (categorical) {
      out.categorical_columns.push_back(table.header[j]);
      for (const auto& c : cats) plan.push_back({table.header[j] + "=" + c, j, c});
    } else {
      plan.push_back({table.header[j], j, std::nullopt});
    }
  }

  Matrix x(kept.size(), 3 * plan.size());
  std::vector<std::string> names;
  for (const auto& c : plan) {
    names.push_back(c.name + "_is7");
    names.push_back(c.name + "_is8");
    names.push_back(c.name + "_value");
  }
  for (std::size_t r = 0; r < kept.size(); ++r) {
    const auto& row = table.rows[kept[r]];
    for (std::size_t p = 0; p < plan.size(); ++p) {
      const auto& cell = row[plan[p].source];
      double v;
      if (plan[p].category) {
        v = cell == *plan[p].category ? 1.0 : 0.0;
      } else {
        v = *detail::parse_double(cell);
        if (v == -9.0) ++out.isolated_minus9;
      }
      if (!plan[p].category && v == -7.0) {
        x(r, 3 * p) = 1.0;
      } else if (!plan[p].category && v == -8.0) {
        x(r, 3 * p + 1) = 1.0;
      } else {
        x(r, 3 * p + 2) = v;
      }
    }
  }
  if (out.isolated_minus9)
    log::warn("fico_expand: " + std::to_string(out.isolated_minus9) + " isolated -9 cells kept as ordinary values");

  RawTable labels_only;
  labels_only.header = {"label"};
  for (auto i : kept) labels_only.rows.push_back({table.rows[i][label_col]});
  Dataset lab = table_to_dataset(labels_only, CsvSchema{"label", std::nullopt, ',', true}, "fico");
  Dataset d(std::move(x), lab.labels(), lab.n_labels(), std::nullopt, std::move(names));
  d.set_label_names(lab.label_names());
  out.data = std::move(d);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generators.

/// Boundary of the 2-D curve problem: label 1 iff x2 > curve_boundary(x1).
inline double curve_boundary(double x1) noexcept { return 0.5 + 0.3 * std::sin(3.0 * std::numbers::pi * x1); }

/// Region receiving label noise: the upper-left corner of the unit square.
inline bool in_noise_region(std::span<const double> x) noexcept { return x[0] < 0.3 && x[1] > 0.7; }

struct CurveSample {
  Dataset data;
  std::vector<std::size_t> flipped;  // rows whose label was flipped
  double achieved_fraction = 0.0;
};

/// Points uniform on the unit square labelled by curve_boundary, then
/// round(noise_fraction * n) labels flipped inside the upper-left region (all
/// region points if it holds fewer).
inline CurveSample synthetic_curve(std::size_t n, double noise_fraction, std::uint64_t seed) {
  if (n < 10) throw InvalidArgument("synthetic_curve: n must be >= 10");
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0))
    throw InvalidArgument("synthetic_curve: noise_fraction must lie in [0, 1]");
  Rng rng(seed);
  Matrix x(n, 2);
  std::vector<Label> y(n);
  std::vector<std::size_t> region;
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform();
    x(i, 1) = rng.uniform();
    y[i] = x(i, 1) > curve_boundary(x(i, 0)) ? 1 : 0;
    if (in_noise_region(x.row(i))) region.push_back(i);
  }
  const auto target = static_cast<std::size_t>(std::llround(noise_fraction * static_cast<double>(n)));
  rng.shuffle(std::span<std::size_t>(region));
  CurveSample out;
  const std::size_t flips = std::min(target, region.size());
  if (flips < target)
    log::debug("synthetic_curve: noise region holds " + std::to_string(region.size()) + " points, wanted " +
               std::to_string(target));
  out.flipped.assign(region.begin(), region.begin() + static_cast<std::ptrdiff_t>(flips));
  std::sort(out.flipped.begin(), out.flipped.end());
  for (auto i : out.flipped) y[i] = 1 - y[i];
  out.achieved_fraction = static_cast<double>(flips) / static_cast<double>(n);
  out.data = Dataset(std::move(x), std::move(y), 2, std::nullopt, {"x1", "x2"});
  return out;
}

/// K unit-covariance Gaussian clusters in d dimensions. Cluster k is centred
/// at k * separation along the first axis, so neighbouring means sit exactly
/// `separation` apart. Row i has label i mod K.
inline Dataset synthetic_blobs(std::size_t n, int K, std::size_t d, double separation, std::uint64_t seed) {
  if (K < 2) throw InvalidArgument("synthetic_blobs: K must be >= 2");
  if (d < 1) throw InvalidArgument("synthetic_blobs: d must be >= 1");
  if (!(separation > 0.0)) throw InvalidArgument("synthetic_blobs: separation must be > 0");
  if (n < static_cast<std::size_t>(K)) throw InvalidArgument("synthetic_blobs: n must be >= K");
  Rng rng(seed);
  Matrix x(n, d);
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<Label>(i % static_cast<std::size_t>(K));
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
    x(i, 0) += separation * y[i];
  }
  return Dataset(std::move(x), std::move(y), K);
}

}  // namespace delta_interp
