#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "delta_interp/bounds.hpp"
#include "delta_interp/data_io.hpp"
#include "delta_interp/transfer.hpp"
#include "helpers.hpp"

namespace di = delta_interp;
using test_helpers::make_dataset;

namespace {

di::ConfidenceMatrix conf_of(std::vector<double> flat, std::size_t K) {
  const std::size_t n = flat.size() / K;
  return di::ConfidenceMatrix(di::Matrix(n, K, std::move(flat)), "cm");
}

di::Dataset two_points() { return make_dataset({{0.0}, {1.0}}, {0, 1}); }

struct CurveSetup {
  di::Dataset train;
  di::TrainedModel cm;
  di::ConfidenceMatrix conf;
};

CurveSetup curve_setup(std::size_t n, std::uint64_t seed) {
  auto train = di::synthetic_curve(n, 0.05, seed).data;
  auto cm = di::train(di::ModelSpec(di::Family::knn), train, seed);
  auto conf = di::confidence(cm, train.features());
  return {std::move(train), std::move(cm), std::move(conf)};
}

di::bounds::FiniteDomain uniform_domain(const di::Dataset& d, const di::ConfidenceMatrix& conf) {
  di::bounds::FiniteDomain dom;
  dom.points = d.features();
  dom.px.assign(d.size(), 1.0 / static_cast<double>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) dom.cm_plus.push_back(conf(i, 1));
  return dom;
}

}  // namespace

TEST(Weights, MleUsesConfidenceInTrainingLabel) {
  const auto d = two_points();
  const auto set = di::weights_mle(conf_of({0.8, 0.2, 0.3, 0.7}, 2), d);
  ASSERT_EQ(set.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(set.rows[0].weight, 0.8);
  EXPECT_DOUBLE_EQ(set.rows[1].weight, 0.7);
  EXPECT_EQ(set.rows[1].label, 1);
}

TEST(Weights, ErmBRelabelsAndWeightsByDistanceFromHalf) {
  const auto d = make_dataset({{0.0}, {1.0}, {2.0}}, {0, 0, 1});
  const auto set = di::weights_erm_b(conf_of({0.1, 0.9, 0.5, 0.5, 0.8, 0.2}, 2), d);
  EXPECT_EQ(set.rows[0].label, 1);
  EXPECT_NEAR(set.rows[0].weight, 0.4, 1e-15);
  EXPECT_EQ(set.rows[1].label, 0);
  EXPECT_EQ(set.rows[1].weight, 0.0);
  EXPECT_EQ(set.rows[2].label, 0);
  EXPECT_NEAR(set.rows[2].weight, 0.3, 1e-15);
}

TEST(Weights, ErmBRejectsMulticlassAndUniformConfidences) {
  const auto d3 = make_dataset({{0.0}, {1.0}, {2.0}}, {0, 1, 2}, 3);
  EXPECT_THROW(di::weights_erm_b(conf_of(std::vector<double>(9, 1.0 / 3.0), 3), d3), di::InvalidArgument);
  EXPECT_THROW(di::weights_erm_b(conf_of({0.5, 0.5, 0.5, 0.5}, 2), two_points()), di::TrainingError);
}

TEST(Weights, ErmAExpandsEveryLabel) {
  const auto set = di::expand_erm_a(conf_of({0.3, 0.7}, 2), make_dataset({{0.0}}, {0}), 1.0);
  ASSERT_EQ(set.rows.size(), 2u);
  EXPECT_EQ(set.rows[0].label, 0);
  EXPECT_DOUBLE_EQ(set.rows[0].weight, 0.3);
  EXPECT_EQ(set.rows[1].label, 1);
  EXPECT_DOUBLE_EQ(set.rows[1].weight, 0.7);
  const auto scaled = di::expand_erm_a(conf_of({0.3, 0.7}, 2), make_dataset({{0.0}}, {0}), 2.5);
  EXPECT_DOUBLE_EQ(scaled.rows[1].weight, 2.5 * 0.7);
  EXPECT_THROW(di::expand_erm_a(conf_of({0.3, 0.7}, 2), make_dataset({{0.0}}, {0}), 0.0), di::InvalidArgument);
}

TEST(Weights, MisalignedConfidencesRejected) {
  EXPECT_THROW(di::weights_mle(conf_of({0.5, 0.5}, 2), two_points()), di::DimensionMismatch);
}

TEST(Weights, MaterializedDatasetCarriesRows) {
  const auto set = di::expand_erm_a(conf_of({0.8, 0.2, 0.3, 0.7}, 2), two_points(), 1.0);
  const auto d = set.to_dataset();
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d.x(3)[0], 1.0);
  EXPECT_EQ(d.y(3), 1);
  EXPECT_DOUBLE_EQ(d.weight(2), 0.3);
}

TEST(Margin, PenaltyValues) {
  // A zero-margin risk model: a hinge model with all-zero weights.
  di::TrainedModel flat;
  flat.spec = di::ModelSpec(di::Family::linear_erm_hinge);
  flat.n_labels = 2;
  flat.feature_dim = 1;
  di::linear::LinearParams p;
  p.weights = di::Matrix(2, 2);
  flat.params = p;
  EXPECT_NEAR(di::margin_penalty(flat, std::vector<double>{0.0}, 1.0), std::log(2.0) + 2.0, 1e-12);
  EXPECT_NEAR(di::margin_penalty(flat, std::vector<double>{0.0}, 1.0), 2.6931, 1e-4);

  // A likelihood model with log-odds 1 at x = 0.
  di::TrainedModel mle = flat;
  mle.spec = di::ModelSpec(di::Family::linear_mle);
  p.weights(1, 1) = 1.0;
  mle.params = p;
  EXPECT_NEAR(di::margin_penalty(mle, std::vector<double>{0.0}, 1.0), 2.0 * std::exp(-2.0), 1e-12);
  EXPECT_NEAR(di::margin_penalty(mle, std::vector<double>{0.0}, 1.0), 0.2707, 1e-4);
}

TEST(Margin, NonIncreasing) {
  double prev_e = di::margin_f_erm(0.0), prev_m = di::margin_f_mle(0.0);
  for (double u = 0.01; u < 20.0; u += 0.01) {
    EXPECT_LE(di::margin_f_erm(u), prev_e);
    EXPECT_LE(di::margin_f_mle(u), prev_m);
    prev_e = di::margin_f_erm(u);
    prev_m = di::margin_f_mle(u);
  }
}

TEST(TuneC, SingletonGridReturnsItsValue) {
  const auto s = curve_setup(120, 1);
  EXPECT_EQ(di::tune_c({0.7}, s.train, s.conf, 3, 1, di::ModelSpec(di::Family::linear_erm_hinge)), 0.7);
}

TEST(TuneC, SelectsDominatingValueAndBreaksTiesLow) {
  EXPECT_EQ(di::select_c({5.0, 0.1, 2.0}, [](double c) { return c == 2.0 ? 0.1 : 0.3; }), 2.0);
  EXPECT_EQ(di::select_c({5.0, 1.0, 2.0}, [](double) { return 0.2; }), 1.0);
  EXPECT_THROW(di::select_c({}, [](double) { return 0.0; }), di::InvalidArgument);
}

TEST(TuneC, DeterministicForSeed) {
  const auto s = curve_setup(150, 2);
  const auto tm = di::ModelSpec(di::Family::linear_erm_hinge);
  const double a = di::tune_c(di::default_c_grid(), s.train, s.conf, 3, 9, tm);
  const double b = di::tune_c(di::default_c_grid(), s.train, s.conf, 3, 9, tm);
  EXPECT_EQ(a, b);
}

TEST(Transfer, PreservesTargetFamily) {
  const auto s = curve_setup(200, 3);
  for (auto proc : {di::Procedure::mle_weighting, di::Procedure::erm_a, di::Procedure::erm_b}) {
    di::TransferSpec spec;
    spec.procedure = proc;
    for (auto f : {di::Family::linear_mle, di::Family::linear_erm_hinge, di::Family::decision_tree}) {
      const auto m = di::transfer(di::ModelSpec(f), s.cm, s.train, spec, 1);
      EXPECT_EQ(m.family(), f);
    }
  }
}

TEST(Transfer, TunedErmAUsesGridValue) {
  const auto s = curve_setup(150, 4);
  di::TransferSpec spec;
  spec.procedure = di::Procedure::erm_a;
  spec.tuning = di::TransferSpec::Tuning{};
  const auto r = di::transfer_detailed(di::ModelSpec(di::Family::linear_erm_hinge), s.cm, s.train, spec, 2);
  const auto& g = di::default_c_grid();
  EXPECT_NE(std::find(g.begin(), g.end(), r.c), g.end());
}

TEST(Transfer, UniformComplexModelFailsErmB) {
  const auto d = di::synthetic_curve(50, 0.0, 1).data;
  di::TransferSpec spec;
  spec.procedure = di::Procedure::erm_b;
  EXPECT_THROW(di::transfer(di::ModelSpec(di::Family::linear_mle), test_helpers::uniform_model(2, 2), d, spec, 1),
               di::TrainingError);
}

TEST(Transfer, SpecValidation) {
  di::TransferSpec spec;
  spec.c = 0.0;
  EXPECT_THROW(spec.validate(), di::InvalidArgument);
  spec.c = 1.0;
  spec.tuning = di::TransferSpec::Tuning{{}, 3};
  EXPECT_THROW(spec.validate(), di::InvalidArgument);
  EXPECT_THROW(di::parse_procedure("erm_c"), di::InvalidArgument);
  EXPECT_THROW(di::parse_margin("hinge"), di::InvalidArgument);
}

TEST(Transfer, MarginRequiresMatchingFamily) {
  const auto s = curve_setup(80, 5);
  di::TransferSpec spec;
  spec.margin = di::MarginKind::paper_f;
  EXPECT_THROW(di::transfer(di::ModelSpec(di::Family::decision_tree), s.cm, s.train, spec, 1), di::InvalidArgument);
  spec.procedure = di::Procedure::erm_b;
  EXPECT_THROW(di::transfer(di::ModelSpec(di::Family::linear_erm_hinge), s.cm, s.train, spec, 1),
               di::InvalidArgument);
}

TEST(Transfer, MleObjectiveWithMarginIsTheBound) {
  const auto s = curve_setup(150, 6);
  di::TransferSpec spec;
  spec.margin = di::MarginKind::paper_f;
  const auto tm = di::ModelSpec(di::Family::linear_mle, {{"l2", 0.0}, {"max_iter", 4000}});
  const auto r = di::transfer_detailed(tm, s.cm, s.train, spec, 1);
  const double obj = di::transfer_objective(r.model, s.conf, s.train, spec);
  EXPECT_NEAR(r.model.info.objective, obj, 1e-10);

  std::vector<double> q, v(2);
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    di::confidence_row(r.model, s.train.x(i), v);
    q.push_back(v[1]);
  }
  EXPECT_NEAR(di::bounds::mle_rhs(uniform_domain(s.train, s.conf), q), obj, 1e-10);
}

TEST(Transfer, ErmAObjectiveWithMarginIsTheBound) {
  const auto s = curve_setup(150, 7);
  di::TransferSpec spec;
  spec.procedure = di::Procedure::erm_a;
  spec.margin = di::MarginKind::paper_f;
  spec.c = 2.0;
  const auto tm = di::ModelSpec(di::Family::linear_erm_hinge, {{"l2", 0.0}, {"max_iter", 4000}});
  const auto r = di::transfer_detailed(tm, s.cm, s.train, spec, 1);
  const double obj = di::transfer_objective(r.model, s.conf, s.train, spec);
  EXPECT_NEAR(r.model.info.objective, obj, 1e-10);

  std::vector<double> r1, r2, v(2);
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    di::risks(r.model, s.train.x(i), v);
    r1.push_back(v[1]);
    r2.push_back(v[0]);
  }
  EXPECT_NEAR(di::bounds::erm_a_rhs(uniform_domain(s.train, s.conf), r1, r2, 2.0, false), obj, 1e-10);
}

TEST(Transfer, WeightedObjectiveMatchesTrainerWithoutMargin) {
  const auto s = curve_setup(150, 8);
  for (auto proc : {di::Procedure::mle_weighting, di::Procedure::erm_b}) {
    di::TransferSpec spec;
    spec.procedure = proc;
    const auto fam = proc == di::Procedure::erm_b ? di::Family::linear_erm_hinge : di::Family::linear_mle;
    const auto r = di::transfer_detailed(di::ModelSpec(fam, {{"l2", 0.0}}), s.cm, s.train, spec, 1);
    EXPECT_NEAR(r.model.info.objective, di::transfer_objective(r.model, s.conf, s.train, spec), 1e-10);
  }
}
