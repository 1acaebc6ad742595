// Command-line front end: run, sweep, verify-bounds, delta, gen-data,
// fico-expand.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "delta_interp/bounds.hpp"
#include "delta_interp/config.hpp"
#include "delta_interp/data_io.hpp"
#include "delta_interp/experiment.hpp"
#include "delta_interp/metrics.hpp"

namespace di = delta_interp;

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2, kViolation = 3 };

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  int jobs = 0;
  std::string out;
};

di::ExperimentConfig load(const RunArgs& a) {
  auto cfg = di::load_config(a.config);
  if (!a.seeds.empty()) {
    auto text = di::parse_config_text("seeds = " + a.seeds);
    cfg.seeds = text.seeds;
  } else if (a.seed) {
    cfg.seeds = {*a.seed};
  }
  if (a.jobs > 0) cfg.jobs = a.jobs;
  if (!a.out.empty()) cfg.output_dir = a.out;
  return cfg;
}

void add_run_flags(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("-c,--config", a.config, "experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "run a single seed");
  cmd->add_option("--seeds", a.seeds, "seed list, e.g. 0..9 or 1,2,5");
  cmd->add_option("-j,--jobs", a.jobs, "concurrent seeds")->check(CLI::PositiveNumber);
  cmd->add_option("-o,--out", a.out, "output directory (overrides output.dir)");
}

int cmd_run(const RunArgs& a) {
  const auto cfg = load(a);
  const auto res = di::run_experiment(cfg);
  if (res.n_ok() == 0) {
    di::log::error("run: every seed failed");
    return kRuntime;
  }
  di::write_run(res, cfg.output_dir);
  std::cout << di::dump17(di::to_json(res.aggregate)) << "\n";
  di::log::info("wrote " + (std::filesystem::path(cfg.output_dir) / "report.json").string());
  return kOk;
}

int cmd_sweep(const RunArgs& a) {
  const auto cfg = load(a);
  const auto rows = di::run_sweep(cfg);
  di::write_sweep(rows, cfg.output_dir);
  std::cout << di::sweep_csv(rows);
  return kOk;
}

std::string fixed4(const di::Ratio& r) {
  if (!r.value) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", *r.value);
  return buf;
}

int cmd_delta(std::vector<double> v, bool accuracy) {
  if (v.size() != 2 && v.size() != 4) {
    std::cerr << "delta: expected 2 values (e_before e_after) or 4 (e_tm_test e_tm_robust e_tmI_test e_tmI_robust)\n";
    return kUsage;
  }
  if (accuracy)
    for (auto& x : v) {
      if (x < 0.0 || x > 1.0) throw di::InvalidArgument("accuracies must lie in [0, 1]");
      x = 1.0 - x;
    }
  if (v.size() == 2) {
    std::cout << fixed4(di::delta(v[0], v[1])) << "\n";
    return kOk;
  }
  const auto d = di::delta(v[0], v[2]);
  const auto g = di::gamma(v[0], v[1], v[2], v[3]);
  std::cout << "delta=" << fixed4(d) << " gamma=" << fixed4(g) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-weighted transfer to simple models and (delta, gamma) interpretability scoring"};
  app.require_subcommand(1);

  RunArgs run_args, sweep_args;
  add_run_flags(app.add_subcommand("run", "run the transfer pipeline over seeds"), run_args);
  add_run_flags(app.add_subcommand("sweep", "complex-model capacity sweep"), sweep_args);

  auto* verify = app.add_subcommand("verify-bounds", "check the squared-error bounds on random finite domains");
  int instances = 100;
  std::uint64_t verify_seed = 0;
  double rhs_scale = 1.0;
  std::string verify_out;
  verify->add_option("-n,--instances", instances, "random instances")->capture_default_str();
  verify->add_option("--seed", verify_seed, "generator seed")->capture_default_str();
  verify->add_option("-o,--out", verify_out, "also write the summary JSON here");
  verify->add_option("--rhs-scale", rhs_scale, "multiply every right-hand side (negative control)")
      ->group("");  // test hook, hidden from help

  auto* delta_cmd = app.add_subcommand("delta", "delta (and gamma) from reported errors");
  std::vector<double> delta_values;
  bool accuracy = false;
  delta_cmd->add_option("values", delta_values, "e_before e_after | e_tm_test e_tm_robust e_tmI_test e_tmI_robust")
      ->required();
  delta_cmd->add_flag("--accuracy", accuracy, "inputs are accuracies; errors are 1 - accuracy");

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
  std::string gen_kind = "curve", gen_out;
  std::size_t gen_n = 1000, gen_d = 2;
  int gen_k = 3;
  double gen_noise = 0.05, gen_sep = 2.0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--kind", gen_kind, "curve | blobs")->check(CLI::IsMember({"curve", "blobs"}))->capture_default_str();
  gen->add_option("-n", gen_n, "rows")->capture_default_str();
  gen->add_option("--noise", gen_noise, "curve: label-noise fraction")->capture_default_str();
  gen->add_option("-k", gen_k, "blobs: labels")->capture_default_str();
  gen->add_option("-d", gen_d, "blobs: dimensions")->capture_default_str();
  gen->add_option("--separation", gen_sep, "blobs: distance between neighbouring means")->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("-o,--out", gen_out, "output CSV")->required();

  auto* fico = app.add_subcommand("fico-expand", "expand special values -7/-8/-9 into indicator columns");
  std::string fico_in, fico_out, fico_label;
  fico->add_option("-i,--in", fico_in, "input CSV")->required()->check(CLI::ExistingFile);
  fico->add_option("-o,--out", fico_out, "output CSV")->required();
  fico->add_option("-l,--label", fico_label, "label column")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand("run")) return cmd_run(run_args);
    if (app.got_subcommand("sweep")) return cmd_sweep(sweep_args);
    if (app.got_subcommand("verify-bounds")) {
      const auto s = di::bounds::verify_theorem1(instances, verify_seed, rhs_scale);
      const auto text = di::dump17(di::bounds::to_json(s));
      std::cout << text << "\n";
      if (!verify_out.empty()) di::detail::write_text(verify_out, text + "\n");
      if (!s.ok()) {
        di::log::error("bound violation: max_violation = " + std::to_string(s.max_violation));
        return kViolation;
      }
      return kOk;
    }
    if (app.got_subcommand("delta")) return cmd_delta(delta_values, accuracy);
    if (app.got_subcommand("gen-data")) {
      const auto data = gen_kind == "curve" ? di::synthetic_curve(gen_n, gen_noise, gen_seed).data
                                            : di::synthetic_blobs(gen_n, gen_k, gen_d, gen_sep, gen_seed);
      di::save_csv(data, gen_out);
      return kOk;
    }
    if (app.got_subcommand("fico-expand")) {
      const auto raw = di::read_raw_csv(fico_in);
      const auto res = di::fico_expand(raw, fico_label);
      di::save_csv(res.data, fico_out);
      std::cerr << "dropped " << res.dropped_rows << " all -9 rows; " << res.isolated_minus9
                << " isolated -9 cells kept\n";
      return kOk;
    }
  } catch (const di::ConfigError& e) {
    di::log::error(e.what());
    return kUsage;
  } catch (const di::InvalidArgument& e) {
    di::log::error(e.what());
    return kUsage;
  } catch (const std::exception& e) {
    di::log::error(e.what());
    return kRuntime;
  }
  return kUsage;
}
