#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "delta_interp/config.hpp"
#include "delta_interp/data_io.hpp"
#include "delta_interp/metrics.hpp"
#include "delta_interp/transfer.hpp"

namespace delta_interp {

struct ExperimentData {
  Dataset train;
  Dataset test;
};

/// Training and test samples for one seed. Synthetic sources draw the test
/// set independently from the same generator; csv sources use data.test_path
/// or the configured split.
inline ExperimentData load_experiment_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  const Rng rng(seed);
  const auto& d = cfg.data;
  const std::size_t test_n = d.test_n ? d.test_n : d.n;
  switch (d.source) {
    case DataConfig::Source::synthetic_curve:
      return {synthetic_curve(d.n, d.noise_fraction, rng.derive(0)()).data,
              synthetic_curve(test_n, d.noise_fraction, rng.derive(1)()).data};
    case DataConfig::Source::synthetic_blobs:
      return {synthetic_blobs(d.n, d.blobs_k, d.blobs_d, d.separation, rng.derive(0)()),
              synthetic_blobs(test_n, d.blobs_k, d.blobs_d, d.separation, rng.derive(1)())};
    case DataConfig::Source::csv: {
      Dataset all = load_csv(d.path, d.schema);
      if (!d.test_path.empty()) return {std::move(all), load_csv(d.test_path, d.schema)};
      const auto spec = cfg.split.kind == SplitConfig::Kind::holdout ? SplitSpec::holdout(cfg.split.fraction, seed)
                                                                      : SplitSpec::sequential(cfg.split.fraction);
      auto p = split(all, spec);
      return {std::move(p.train), std::move(p.test)};
    }
  }
  throw InvalidArgument("unknown data source");
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  InterpretabilityReport report;
  double cm_test_error = 0.0;
};

struct RunResult {
  std::vector<SeedOutcome> seeds;
  InterpretabilityReport aggregate;
  SeedSummary delta_summary;
  SeedSummary gamma_summary;

  std::size_t n_ok() const {
    return static_cast<std::size_t>(std::count_if(seeds.begin(), seeds.end(), [](const auto& s) { return s.ok; }));
  }
};

/// Runs f(i) for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f) {
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

inline std::string procedure_label(const ExperimentConfig& cfg) {
  std::string s = to_string(cfg.transfer.procedure) + ":" + to_string(cfg.cm.family) + "->" + to_string(cfg.tm.family);
  if (cfg.transfer.margin == MarginKind::paper_f) s += "+f";
  return s;
}

/// One seed of the pipeline: data, CM, baseline TM, transfer, robustness
/// sets, evaluation.
inline SeedOutcome run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedOutcome out;
  out.seed = seed;
  const Rng rng = Rng(seed).derive(0x5eed);
  auto data = load_experiment_data(cfg, seed);
  Dataset cm_train = data.train, tm_train = data.train;
  if (cfg.split.cm_disjoint) {
    auto halves = split(data.train, SplitSpec::holdout(0.5, rng.derive(1)()));
    cm_train = std::move(halves.train);
    tm_train = std::move(halves.test);
  }
  const auto model_seed = rng.derive(2)();
  const auto cm = train(cfg.cm, cm_train, model_seed);
  const auto tm = train(cfg.tm, tm_train, model_seed);
  const auto tmI = transfer(cfg.tm, cm, tm_train, cfg.transfer, model_seed);

  std::vector<Dataset> robust;
  for (std::size_t i = 0; i < cfg.robust.size(); ++i) {
    auto spec = cfg.robust[i];
    spec.seed = rng.derive(100 + i)();
    robust.push_back(make_robust_set(data.test, spec));
  }
  out.report = evaluate(tm, tmI, data.test, robust, cfg.loss);
  out.report.provenance.seeds = {seed};
  out.report.provenance.procedure = procedure_label(cfg);
  out.report.provenance.hashes.insert(out.report.provenance.hashes.begin(), {"train", data.train.fingerprint()});
  out.cm_test_error = empirical_error(cm, data.test, cfg.loss);
  out.ok = true;
  return out;
}

inline RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult res;
  res.seeds.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    try {
      res.seeds[i] = run_seed(cfg, cfg.seeds[i]);
    } catch (const Error& e) {
      res.seeds[i].seed = cfg.seeds[i];
      res.seeds[i].failure = e.what();
      log::warn("seed " + std::to_string(cfg.seeds[i]) + " failed: " + e.what());
    }
  });

  std::vector<double> deltas, gammas;
  ErrorQuad mean{};
  auto& agg = res.aggregate;
  agg.loss = cfg.loss;
  agg.provenance.procedure = procedure_label(cfg);
  for (const auto& s : res.seeds) {
    if (!s.ok) continue;
    const auto& r = s.report;
    agg.provenance.seeds.push_back(s.seed);
    if (r.delta.value) deltas.push_back(*r.delta.value);
    if (r.gamma.value) gammas.push_back(*r.gamma.value);
    mean.tm_test += r.errors.tm_test;
    mean.tmI_test += r.errors.tmI_test;
    mean.tm_robust += r.errors.tm_robust;
    mean.tmI_robust += r.errors.tmI_robust;
    for (const auto& f : r.flags)
      if (std::find(agg.flags.begin(), agg.flags.end(), f) == agg.flags.end()) agg.flags.push_back(f);
    if (r.gamma_convention) agg.gamma_convention = r.gamma_convention;
    if (r.delta_max) agg.delta_max = std::max(agg.delta_max.value_or(*r.delta_max), *r.delta_max);
    if (r.gamma_max) agg.gamma_max = std::max(agg.gamma_max.value_or(*r.gamma_max), *r.gamma_max);
    for (const auto& [role, h] : r.provenance.hashes)
      agg.provenance.hashes.emplace_back(role + "@" + std::to_string(s.seed), h);
  }
  const auto ok = static_cast<double>(res.n_ok());
  if (ok > 0) {
    mean.tm_test /= ok;
    mean.tmI_test /= ok;
    mean.tm_robust /= ok;
    mean.tmI_robust /= ok;
  }
  agg.errors = mean;
  res.delta_summary = summarize(deltas);
  res.gamma_summary = summarize(gammas);
  if (!deltas.empty())
    agg.delta = {res.delta_summary.median, {}};
  else
    agg.delta = {std::nullopt, "no seed produced a defined delta"};
  if (!gammas.empty())
    agg.gamma = {res.gamma_summary.median, {}};
  else
    agg.gamma = {std::nullopt, agg.gamma_convention ? kIdentityFlag : "no seed produced a defined gamma"};
  return res;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// report.json: the aggregate report (median delta / gamma over seeds, mean
/// errors) plus per-seed reports, summaries and failed seeds.
inline Json run_json(const RunResult& res, const std::string& timestamp) {
  Json j = to_json(res.aggregate);
  j["summary"] = Json{{"delta", to_json(res.delta_summary)}, {"gamma", to_json(res.gamma_summary)}};
  Json per = Json::array();
  Json failed = Json::array();
  for (const auto& s : res.seeds) {
    if (s.ok) {
      Json r = to_json(s.report);
      r["cm_test_error"] = s.cm_test_error;
      per.push_back(std::move(r));
    } else {
      failed.push_back(Json{{"seed", s.seed}, {"reason", s.failure}});
    }
  }
  j["per_seed"] = std::move(per);
  j["failed_seeds"] = std::move(failed);
  j["timestamp"] = timestamp;
  return j;
}

namespace detail {

inline std::string csv_ratio(const Ratio& r) { return r.value ? format17(*r.value) : std::string{}; }

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

}  // namespace detail

inline std::string per_seed_csv(const RunResult& res) {
  std::string s = "seed,e_tm_test,e_tmI_test,e_tm_robust,e_tmI_robust,delta,gamma\n";
  for (const auto& o : res.seeds) {
    if (!o.ok) continue;
    const auto& e = o.report.errors;
    s += std::to_string(o.seed) + "," + detail::format17(e.tm_test) + "," + detail::format17(e.tmI_test) + "," +
         detail::format17(e.tm_robust) + "," + detail::format17(e.tmI_robust) + "," + detail::csv_ratio(o.report.delta) +
         "," + detail::csv_ratio(o.report.gamma) + "\n";
  }
  return s;
}

/// Writes report.json and per_seed.csv into `dir`.
inline void write_run(const RunResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::write_text(dir / "report.json", dump17(run_json(res, utc_timestamp())) + "\n");
  detail::write_text(dir / "per_seed.csv", per_seed_csv(res));
}

// ---------------------------------------------------------------------------
// Capacity sweep: the CM is trained on one half of the training data, the TM
// (baseline and transferred) on the other.

inline constexpr int kHistogramBins = 10;

struct SweepRow {
  double capacity = 0.0;
  double cm_error = 0.0;
  double tm_error = 0.0;
  double tmI_error = 0.0;
  Ratio delta;
  std::vector<double> histogram;  // fraction of transfer weights per bin on [0, 1]
};

inline std::vector<double> weight_histogram(std::span<const double> w, int bins = kHistogramBins) {
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  if (w.empty()) return h;
  for (double v : w) {
    auto b = static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * bins));
    h[static_cast<std::size_t>(std::min(b, bins - 1))] += 1.0;
  }
  for (auto& v : h) v /= static_cast<double>(w.size());
  return h;
}

/// One row per sweep value; errors and histograms are averaged over seeds and
/// delta is the ratio of the seed-averaged errors.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  if (cfg.sweep.param.empty() || cfg.sweep.values.empty())
    throw ConfigError("sweep needs sweep.param and sweep.values");
  const std::size_t G = cfg.sweep.values.size(), S = cfg.seeds.size();
  std::vector<SweepRow> cells(G * S);
  std::vector<std::string> failures(G * S);
  parallel_for(G * S, cfg.jobs, [&](std::size_t idx) {
    const std::size_t g = idx / S, s = idx % S;
    const auto seed = cfg.seeds[s];
    try {
      const Rng rng = Rng(seed).derive(0x5eed);
      auto data = load_experiment_data(cfg, seed);
      auto halves = split(data.train, SplitSpec::holdout(0.5, rng.derive(1)()));
      const auto cm_spec = cfg.cm.with(cfg.sweep.param, cfg.sweep.values[g]);
      const auto model_seed = rng.derive(2)();
      const auto cm = train(cm_spec, halves.train, model_seed);
      const auto tm = train(cfg.tm, halves.test, model_seed);
      auto tr = transfer_detailed(cfg.tm, cm, halves.test, cfg.transfer, model_seed);
      SweepRow& row = cells[idx];
      row.capacity = cfg.sweep.values[g];
      row.cm_error = empirical_error(cm, data.test, cfg.loss);
      row.tm_error = empirical_error(tm, data.test, cfg.loss);
      row.tmI_error = empirical_error(tr.model, data.test, cfg.loss);
      row.histogram = weight_histogram(tr.training_set.weights());
    } catch (const Error& e) {
      failures[idx] = e.what();
    }
  });

  std::vector<SweepRow> rows;
  for (std::size_t g = 0; g < G; ++g) {
    SweepRow r;
    r.capacity = cfg.sweep.values[g];
    r.histogram.assign(kHistogramBins, 0.0);
    int ok = 0;
    for (std::size_t s = 0; s < S; ++s) {
      const auto& c = cells[g * S + s];
      if (!failures[g * S + s].empty()) {
        log::warn("sweep " + cfg.sweep.param + "=" + detail::format17(r.capacity) + " seed " + std::to_string(cfg.seeds[s]) +
                  " failed: " + failures[g * S + s]);
        continue;
      }
      ++ok;
      r.cm_error += c.cm_error;
      r.tm_error += c.tm_error;
      r.tmI_error += c.tmI_error;
      for (int b = 0; b < kHistogramBins; ++b) r.histogram[static_cast<std::size_t>(b)] += c.histogram[static_cast<std::size_t>(b)];
    }
    if (ok == 0) throw TrainingError("sweep: every seed failed for " + cfg.sweep.param + "=" + detail::format17(r.capacity));
    r.cm_error /= ok;
    r.tm_error /= ok;
    r.tmI_error /= ok;
    for (auto& h : r.histogram) h /= ok;
    r.delta = delta(r.tm_error, r.tmI_error);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "cm_capacity,cm_error,tmI_error,delta,tm_error\n";
  for (const auto& r : rows)
    s += detail::format17(r.capacity) + "," + detail::format17(r.cm_error) + "," + detail::format17(r.tmI_error) + "," +
         detail::csv_ratio(r.delta) + "," + detail::format17(r.tm_error) + "\n";
  return s;
}

inline std::string histogram_csv(const std::vector<SweepRow>& rows) {
  std::string s = "cm_capacity,bin,bin_low,bin_high,fraction\n";
  for (const auto& r : rows)
    for (int b = 0; b < kHistogramBins; ++b)
      s += detail::format17(r.capacity) + "," + std::to_string(b) + "," + detail::format17(b / 10.0) + "," +
           detail::format17((b + 1) / 10.0) + "," + detail::format17(r.histogram[static_cast<std::size_t>(b)]) + "\n";
  return s;
}

inline void write_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::write_text(dir / "sweep.csv", sweep_csv(rows));
  detail::write_text(dir / "weight_histogram.csv", histogram_csv(rows));
}

}  // namespace delta_interp
