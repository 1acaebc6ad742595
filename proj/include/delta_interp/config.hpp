#pragma once

// Experiment configuration file.
//
//   file    := { line }
//   line    := blank | comment | entry
//   comment := '#' ...
//   entry   := key '=' value [ '#' ... ]
//   key     := section '.' name | name      (e.g. data.n, cm.k, seeds)
//
// Values are bare text with surrounding whitespace trimmed. Lists are
// comma-separated; integer ranges may be written a..b (inclusive). Robustness
// sets are calls: identity, label_flip(0.1), feature_noise(0.05),
// class_skew(1). Keys may appear once. Unknown keys are errors.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "delta_interp/data_io.hpp"
#include "delta_interp/dataset.hpp"
#include "delta_interp/error.hpp"
#include "delta_interp/model_spec.hpp"
#include "delta_interp/robustness.hpp"
#include "delta_interp/split.hpp"
#include "delta_interp/transfer.hpp"

namespace delta_interp {

struct DataConfig {
  enum class Source { synthetic_curve, synthetic_blobs, csv };
  Source source = Source::synthetic_curve;
  std::size_t n = 1000;
  std::size_t test_n = 0;  // 0: same as n
  double noise_fraction = 0.05;
  int blobs_k = 3;
  std::size_t blobs_d = 2;
  double separation = 2.0;
  std::string path;
  std::string test_path;  // optional separate test file
  CsvSchema schema;
};

struct SplitConfig {
  enum class Kind { holdout, sequential };
  Kind kind = Kind::holdout;
  double fraction = 0.3;  // holdout: test share; sequential: train share
  bool cm_disjoint = false;
};

struct SweepConfig {
  std::string param;
  std::vector<double> values;
};

struct ExperimentConfig {
  DataConfig data;
  SplitConfig split;
  ModelSpec cm{Family::knn};
  ModelSpec tm{Family::linear_mle};
  TransferSpec transfer;
  std::vector<RobustnessSpec> robust{RobustnessSpec::label_flip(0.10)};
  std::vector<std::uint64_t> seeds{0};
  LossKind loss = LossKind::zero_one;
  std::string output_dir = "out";
  SweepConfig sweep;
  int jobs = 1;
};

namespace detail {

struct Entry {
  std::string value;
  std::size_t line;
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : s) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

inline double to_double(const Entry& e, const std::string& key) {
  auto v = parse_double(e.value);
  if (!v) throw ConfigError(key + ": expected a number, got '" + e.value + "'", e.line);
  return *v;
}

inline std::uint64_t to_uint(const Entry& e, const std::string& key, const std::string& text) {
  const auto v = parse_double(text);
  if (!v || *v < 0.0 || *v != std::floor(*v) || *v > 1.8e19)
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'", e.line);
  return static_cast<std::uint64_t>(*v);
}

inline bool to_bool(const Entry& e, const std::string& key) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ConfigError(key + ": expected true|false, got '" + e.value + "'", e.line);
}

inline std::vector<std::uint64_t> to_seeds(const Entry& e) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(e.value)) {
    if (auto dots = item.find(".."); dots != std::string::npos) {
      const auto a = to_uint(e, "seeds", trim(item.substr(0, dots)));
      const auto b = to_uint(e, "seeds", trim(item.substr(dots + 2)));
      if (b < a) throw ConfigError("seeds: empty range '" + item + "'", e.line);
      for (auto s = a; s <= b; ++s) out.push_back(s);
    } else {
      out.push_back(to_uint(e, "seeds", item));
    }
  }
  if (out.empty()) throw ConfigError("seeds: empty list", e.line);
  return out;
}

inline std::vector<double> to_doubles(const Entry& e, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(e.value)) {
    auto v = parse_double(item);
    if (!v) throw ConfigError(key + ": expected numbers, got '" + item + "'", e.line);
    out.push_back(*v);
  }
  if (out.empty()) throw ConfigError(key + ": empty list", e.line);
  return out;
}

inline RobustnessSpec parse_robust(const std::string& item, std::size_t line) {
  const auto open = item.find('(');
  const std::string name = trim(item.substr(0, open));
  std::optional<double> arg;
  if (open != std::string::npos) {
    if (item.back() != ')') throw ConfigError("robust.sets: malformed '" + item + "'", line);
    arg = parse_double(item.substr(open + 1, item.size() - open - 2));
    if (!arg) throw ConfigError("robust.sets: bad argument in '" + item + "'", line);
  }
  auto need = [&](bool want) {
    if (want != arg.has_value())
      throw ConfigError("robust.sets: '" + name + (want ? "' needs an argument" : "' takes no argument"), line);
  };
  if (name == "identity") {
    need(false);
    return RobustnessSpec::identity();
  }
  if (name == "label_flip") {
    need(true);
    if (*arg < 0.0 || *arg > 1.0) throw ConfigError("robust.sets: label_flip fraction must lie in [0, 1]", line);
    return RobustnessSpec::label_flip(*arg);
  }
  if (name == "feature_noise") {
    need(true);
    if (*arg < 0.0) throw ConfigError("robust.sets: feature_noise sigma must be >= 0", line);
    return RobustnessSpec::feature_noise(*arg);
  }
  if (name == "class_skew") {
    need(true);
    if (*arg < 0.0 || *arg != std::floor(*arg)) throw ConfigError("robust.sets: class_skew needs a label index", line);
    return RobustnessSpec::class_skew(static_cast<Label>(*arg));
  }
  throw ConfigError("robust.sets: unknown generator '" + name + "'", line);
}

inline bool is_tm_family(Family f) {
  return f == Family::linear_mle || f == Family::linear_erm_hinge || f == Family::decision_tree;
}

inline bool is_cm_family(Family f) { return f == Family::knn || f == Family::random_forest || f == Family::mlp1; }

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
  std::map<std::string, detail::Entry> entries;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + line + "'", no);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key", no);
    if (value.empty()) throw ConfigError(key + ": missing value", no);
    if (!entries.emplace(key, detail::Entry{value, no}).second)
      throw ConfigError("duplicate key '" + key + "' (first on line " + std::to_string(entries.at(key).line) + ")", no);
  }

  ExperimentConfig cfg;
  auto take = [&](const std::string& key) -> std::optional<detail::Entry> {
    auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    auto e = it->second;
    entries.erase(it);
    return e;
  };

  // Model specs first so their hyperparameter keys can be checked.
  auto model = [&](const std::string& section, Family fallback, bool tm_role) {
    Family fam = fallback;
    std::size_t fam_line = 0;
    if (auto e = take(section + ".family")) {
      fam_line = e->line;
      try {
        fam = parse_family(e->value);
      } catch (const Error& err) {
        throw ConfigError(section + ".family: " + err.what(), e->line);
      }
    }
    if (tm_role && !detail::is_tm_family(fam))
      throw ConfigError("tm.family must be linear_mle, linear_erm_hinge or decision_tree (got " + to_string(fam) + ")",
                        fam_line);
    if (!tm_role && !detail::is_cm_family(fam))
      throw ConfigError("cm.family must be knn, random_forest or mlp1 (got " + to_string(fam) + ")", fam_line);
    std::map<std::string, double> hp;
    const std::string prefix = section + ".";
    for (auto it = entries.begin(); it != entries.end();) {
      if (it->first.rfind(prefix, 0) != 0) {
        ++it;
        continue;
      }
      const std::string name = it->first.substr(prefix.size());
      if (!default_hyperparams(fam).contains(name))
        throw ConfigError(section + ": unknown hyperparameter '" + name + "' for " + to_string(fam), it->second.line);
      hp[name] = detail::to_double(it->second, it->first);
      const auto line_no = it->second.line;
      it = entries.erase(it);
      try {
        ModelSpec(fam, {{name, hp[name]}});
      } catch (const Error& err) {
        throw ConfigError(err.what(), line_no);
      }
    }
    try {
      return ModelSpec(fam, hp);
    } catch (const Error& err) {
      throw ConfigError(err.what(), fam_line);
    }
  };
  cfg.cm = model("cm", Family::knn, false);
  cfg.tm = model("tm", Family::linear_mle, true);

  if (auto e = take("data.source")) {
    if (e->value == "synthetic_curve")
      cfg.data.source = DataConfig::Source::synthetic_curve;
    else if (e->value == "synthetic_blobs")
      cfg.data.source = DataConfig::Source::synthetic_blobs;
    else if (e->value == "csv")
      cfg.data.source = DataConfig::Source::csv;
    else
      throw ConfigError("data.source must be synthetic_curve, synthetic_blobs or csv", e->line);
  }
  if (auto e = take("data.n")) cfg.data.n = detail::to_uint(*e, "data.n", e->value);
  if (auto e = take("data.test_n")) cfg.data.test_n = detail::to_uint(*e, "data.test_n", e->value);
  if (auto e = take("data.noise_fraction")) {
    cfg.data.noise_fraction = detail::to_double(*e, "data.noise_fraction");
    if (cfg.data.noise_fraction < 0.0 || cfg.data.noise_fraction > 1.0)
      throw ConfigError("data.noise_fraction must lie in [0, 1]", e->line);
  }
  if (auto e = take("data.k")) cfg.data.blobs_k = static_cast<int>(detail::to_uint(*e, "data.k", e->value));
  if (auto e = take("data.d")) cfg.data.blobs_d = detail::to_uint(*e, "data.d", e->value);
  if (auto e = take("data.separation")) {
    cfg.data.separation = detail::to_double(*e, "data.separation");
    if (!(cfg.data.separation > 0.0)) throw ConfigError("data.separation must be > 0", e->line);
  }
  if (auto e = take("data.path")) cfg.data.path = e->value;
  if (auto e = take("data.test_path")) cfg.data.test_path = e->value;
  if (auto e = take("data.label_column")) cfg.data.schema.label_column = e->value;
  if (auto e = take("data.weight_column")) cfg.data.schema.weight_column = e->value;
  if (auto e = take("data.delimiter")) {
    if (e->value.size() != 1) throw ConfigError("data.delimiter must be a single character", e->line);
    cfg.data.schema.delimiter = e->value[0];
  }
  if (cfg.data.source == DataConfig::Source::csv && cfg.data.path.empty())
    throw ConfigError("data.source = csv needs data.path");
  if (cfg.data.source != DataConfig::Source::csv && cfg.data.n < 10) throw ConfigError("data.n must be >= 10");

  if (auto e = take("split.kind")) {
    if (e->value == "holdout")
      cfg.split.kind = SplitConfig::Kind::holdout;
    else if (e->value == "sequential")
      cfg.split.kind = SplitConfig::Kind::sequential;
    else
      throw ConfigError("split.kind must be holdout or sequential", e->line);
  }
  if (auto e = take("split.fraction")) {
    cfg.split.fraction = detail::to_double(*e, "split.fraction");
    if (!(cfg.split.fraction > 0.0 && cfg.split.fraction < 1.0))
      throw ConfigError("split.fraction must lie in (0, 1)", e->line);
  }
  if (auto e = take("split.cm_disjoint")) cfg.split.cm_disjoint = detail::to_bool(*e, "split.cm_disjoint");

  if (auto e = take("transfer.procedure")) {
    try {
      cfg.transfer.procedure = parse_procedure(e->value);
    } catch (const Error& err) {
      throw ConfigError(err.what(), e->line);
    }
  }
  if (auto e = take("transfer.c")) {
    cfg.transfer.c = detail::to_double(*e, "transfer.c");
    if (!(cfg.transfer.c > 0.0)) throw ConfigError("transfer.c must be > 0", e->line);
  }
  if (auto e = take("transfer.margin")) {
    try {
      cfg.transfer.margin = parse_margin(e->value);
    } catch (const Error& err) {
      throw ConfigError(err.what(), e->line);
    }
  }
  const auto grid = take("transfer.grid");
  const auto folds = take("transfer.folds");
  const auto tune = take("transfer.tune");
  if ((tune && detail::to_bool(*tune, "transfer.tune")) || grid) {
    TransferSpec::Tuning t;
    if (grid) {
      t.grid = detail::to_doubles(*grid, "transfer.grid");
      for (double g : t.grid)
        if (!(g > 0.0)) throw ConfigError("transfer.grid values must be > 0", grid->line);
    }
    if (folds) {
      t.folds = static_cast<int>(detail::to_uint(*folds, "transfer.folds", folds->value));
      if (t.folds < 2) throw ConfigError("transfer.folds must be >= 2", folds->line);
    }
    cfg.transfer.tuning = t;
  }

  if (auto e = take("robust.sets")) {
    cfg.robust.clear();
    for (const auto& item : detail::split_list(e->value)) cfg.robust.push_back(detail::parse_robust(item, e->line));
    if (cfg.robust.empty()) throw ConfigError("robust.sets: empty list", e->line);
  }
  if (auto e = take("seeds")) cfg.seeds = detail::to_seeds(*e);
  if (auto e = take("loss")) {
    try {
      cfg.loss = parse_loss(e->value);
    } catch (const Error& err) {
      throw ConfigError(err.what(), e->line);
    }
  }
  if (auto e = take("output.dir")) cfg.output_dir = e->value;
  if (auto e = take("sweep.param")) {
    if (!default_hyperparams(cfg.cm.family).contains(e->value))
      throw ConfigError("sweep.param: '" + e->value + "' is not a " + to_string(cfg.cm.family) + " hyperparameter",
                        e->line);
    cfg.sweep.param = e->value;
  }
  if (auto e = take("sweep.values")) cfg.sweep.values = detail::to_doubles(*e, "sweep.values");
  if (auto e = take("jobs")) {
    cfg.jobs = static_cast<int>(detail::to_uint(*e, "jobs", e->value));
    if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1", e->line);
  }

  if (!entries.empty()) {
    const auto first = std::min_element(entries.begin(), entries.end(),
                                        [](const auto& a, const auto& b) { return a.second.line < b.second.line; });
    throw ConfigError("unknown key '" + first->first + "'", first->second.line);
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

}  // namespace delta_interp
