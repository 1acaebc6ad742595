#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "delta_interp/experiment.hpp"

namespace di = delta_interp;
namespace fs = std::filesystem;

namespace {

di::ExperimentConfig small_curve() {
  return di::parse_config_text(
      "data.n = 300\ncm.family = knn\ntm.family = linear_mle\nrobust.sets = label_flip(0.1), identity\n"
      "seeds = 0..2\n");
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Experiment, ReportsAreDeterministicAcrossJobCounts) {
  auto cfg = small_curve();
  const auto a = di::dump17(di::run_json(di::run_experiment(cfg), "T"));
  cfg.jobs = 3;
  const auto b = di::dump17(di::run_json(di::run_experiment(cfg), "T"));
  EXPECT_EQ(a, b);
}

TEST(Experiment, WrittenFilesDifferOnlyInTimestamp) {
  const auto cfg = small_curve();
  const auto dir = fs::path(::testing::TempDir()) / "di_run";
  auto read = [&](int k) {
    di::write_run(di::run_experiment(cfg), dir / std::to_string(k));
    std::ifstream in(dir / std::to_string(k) / "report.json");
    std::stringstream ss;
    ss << in.rdbuf();
    auto j = di::Json::parse(ss.str());
    EXPECT_TRUE(j.contains("timestamp"));
    j.erase("timestamp");
    return j.dump();
  };
  EXPECT_EQ(read(0), read(1));
}

TEST(Experiment, PerSeedCsvRows) {
  const auto res = di::run_experiment(small_curve());
  EXPECT_EQ(res.n_ok(), 3u);
  const auto csv = di::per_seed_csv(res);
  EXPECT_EQ(count_lines(csv), 4u);
  EXPECT_EQ(csv.rfind("seed,e_tm_test,e_tmI_test,e_tm_robust,e_tmI_robust,delta,gamma\n", 0), 0u);
}

TEST(Experiment, AggregateIsMedianOfSeeds) {
  const auto res = di::run_experiment(small_curve());
  ASSERT_TRUE(res.aggregate.delta.defined());
  EXPECT_EQ(*res.aggregate.delta.value, res.delta_summary.median);
  ASSERT_TRUE(res.aggregate.delta_max.has_value());
}

TEST(Experiment, IdentityOnlyRobustSetIsFlagged) {
  auto cfg = small_curve();
  cfg.robust = {di::RobustnessSpec::identity()};
  cfg.seeds = {0};
  const auto res = di::run_experiment(cfg);
  const auto& flags = res.seeds[0].report.flags;
  EXPECT_NE(std::find(flags.begin(), flags.end(), di::kIdentityFlag), flags.end());
  EXPECT_EQ(res.seeds[0].report.gamma_convention, 0.0);
  const auto j = di::run_json(res, "T");
  EXPECT_TRUE(j["gamma"].is_null());
  EXPECT_EQ(j["gamma_convention"], 0.0);
}

TEST(Experiment, FailedSeedsAreListed) {
  auto cfg = small_curve();
  // The margin term needs a linear target, so every seed fails.
  cfg.transfer.margin = di::MarginKind::paper_f;
  cfg.tm = di::ModelSpec(di::Family::decision_tree);
  cfg.seeds = {0, 1};
  const auto res = di::run_experiment(cfg);
  EXPECT_EQ(res.n_ok(), 0u);
  const auto j = di::run_json(res, "T");
  EXPECT_EQ(j["failed_seeds"].size(), 2u);
  EXPECT_TRUE(j["delta"].is_null());
}

TEST(Experiment, CmDisjointTrainsOnHalves) {
  auto cfg = small_curve();
  cfg.split.cm_disjoint = true;
  cfg.seeds = {4};
  EXPECT_EQ(di::run_experiment(cfg).n_ok(), 1u);
}

TEST(Sweep, SingleCapacitySingleRow) {
  auto cfg = di::parse_config_text(
      "data.source = synthetic_blobs\ndata.n = 200\ndata.separation = 3\ncm.family = knn\ntm.family = decision_tree\n"
      "tm.max_depth = 1\nsweep.param = k\nsweep.values = 5\nseeds = 0, 1\n");
  const auto rows = di::run_sweep(cfg);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].capacity, 5.0);
  double total = 0;
  for (double h : rows[0].histogram) total += h;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(*rows[0].delta.value, rows[0].tmI_error / rows[0].tm_error);
  EXPECT_EQ(count_lines(di::sweep_csv(rows)), 2u);
  EXPECT_EQ(count_lines(di::histogram_csv(rows)), 1u + di::kHistogramBins);
}

TEST(Sweep, NeedsParamAndValues) { EXPECT_THROW(di::run_sweep(small_curve()), di::ConfigError); }

TEST(Sweep, WeightHistogram) {
  const std::vector<double> w{0.0, 0.05, 0.55, 1.0};
  const auto h = di::weight_histogram(w);
  EXPECT_EQ(h[0], 0.5);
  EXPECT_EQ(h[5], 0.25);
  EXPECT_EQ(h[9], 0.25);
}

TEST(Data, SyntheticTestSetIsIndependentDraw) {
  auto cfg = small_curve();
  cfg.data.test_n = 120;
  const auto d = di::load_experiment_data(cfg, 5);
  EXPECT_EQ(d.train.size(), 300u);
  EXPECT_EQ(d.test.size(), 120u);
  EXPECT_NE(d.train.subset(std::vector<std::size_t>{0}).content_hash(),
            d.test.subset(std::vector<std::size_t>{0}).content_hash());
}
