#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "delta_interp/bounds.hpp"
#include "helpers.hpp"

namespace di = delta_interp;
namespace db = delta_interp::bounds;

namespace {

db::FiniteDomain line_domain(std::vector<double> px, std::vector<double> cm_plus) {
  db::FiniteDomain d;
  d.points = di::Matrix(px.size(), 1);
  for (std::size_t i = 0; i < px.size(); ++i) d.points(i, 0) = static_cast<double>(i);
  d.px = std::move(px);
  d.cm_plus = std::move(cm_plus);
  d.validate();
  return d;
}

// Linear binary model whose score for label 1 is slope * x + bias.
di::TrainedModel binary_linear(double slope, double bias) {
  di::TrainedModel m;
  m.spec = di::ModelSpec(di::Family::linear_mle);
  m.n_labels = 2;
  m.feature_dim = 1;
  di::linear::LinearParams p;
  p.weights = di::Matrix(2, 2);
  p.weights(1, 0) = slope;
  p.weights(1, 1) = bias;
  m.params = p;
  return m;
}

}  // namespace

TEST(Domain, Validation) {
  EXPECT_THROW(line_domain({0.5, 0.4}, {0.1, 0.2}), di::InvalidArgument);
  EXPECT_THROW(line_domain({0.5, 0.5}, {0.1, 1.2}), di::InvalidArgument);
  EXPECT_THROW(line_domain({}, {}), di::InvalidArgument);
}

TEST(ExactError, AgreeingModelOnDeterministicLabels) {
  // Label 1 for x >= 2, matching the model's sign.
  const auto d = line_domain({0.25, 0.25, 0.25, 0.25}, {0.0, 0.0, 1.0, 1.0});
  EXPECT_EQ(db::exact_error(d, binary_linear(1.0, -1.5)), 0.0);
  EXPECT_EQ(db::exact_error(d, binary_linear(-1.0, 1.5)), 1.0);
}

TEST(ExactError, UniformLabelsGiveHalf) {
  const auto d = line_domain({0.1, 0.2, 0.3, 0.4}, {0.5, 0.5, 0.5, 0.5});
  for (double s : {-2.0, 0.0, 3.0}) EXPECT_DOUBLE_EQ(db::exact_error(d, binary_linear(s, 0.7)), 0.5);
}

TEST(ExactError, MatchesMonteCarlo) {
  di::Rng rng(17);
  const auto d = db::random_domain(rng, 5, 1);
  const auto m = binary_linear(1.3, -0.2);
  const double exact = db::exact_error(d, m);

  std::vector<double> cdf(d.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) cdf[i] = (acc += d.px[i]);
  std::vector<di::Label> pred(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) pred[i] = di::predict(m, d.points.row(i));

  const std::size_t n = 10'000'000;
  std::size_t wrong = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double u = rng.uniform();
    std::size_t i = 0;
    while (i + 1 < d.size() && u >= cdf[i]) ++i;
    const di::Label y = rng.uniform() < d.cm_plus[i] ? 1 : 0;
    wrong += y != pred[i];
  }
  const double mc = static_cast<double>(wrong) / static_cast<double>(n);
  const double sigma = std::sqrt(exact * (1.0 - exact) / static_cast<double>(n));
  EXPECT_LE(std::abs(mc - exact), 3.0 * sigma);
}

TEST(ExactError, RiskTieFollowsComplexModel) {
  const auto d = line_domain({0.5, 0.5}, {0.8, 0.3});
  const std::vector<double> r{0.4, 0.4};
  EXPECT_NEAR(db::exact_error_risk(d, r, r), 0.5 * 0.2 + 0.5 * 0.3, 1e-15);
}

TEST(ErmA, ZeroRisks) {
  const auto d = line_domain({0.3, 0.7}, {0.2, 0.9});
  const std::vector<double> z{0.0, 0.0};
  EXPECT_NEAR(db::erm_a_rhs(d, z, z, 1.0), std::log(2.0) + 2.0, 1e-14);
  EXPECT_NEAR(db::erm_a_rhs(d, z, z, 5.0), std::log(2.0) + 2.0, 1e-14);
}

TEST(ErmA, LargeCIsDominatedByWeightedRisk) {
  const auto d = line_domain({0.5, 0.5}, {0.2, 0.9});
  const std::vector<double> r1{0.1, 0.6}, r2{0.8, 0.3};
  const double weighted = 0.5 * (0.2 * 0.1 + 0.8 * 0.8) + 0.5 * (0.9 * 0.6 + 0.1 * 0.3);
  const double c = 1e4;
  EXPECT_NEAR(db::erm_a_rhs(d, r1, r2, c) / c, weighted, 1e-8);
}

TEST(ErmA, RejectsRisksOutsideUnitInterval) {
  const auto d = line_domain({1.0}, {0.5});
  EXPECT_THROW(db::erm_a_rhs(d, std::vector<double>{1.5}, std::vector<double>{0.0}, 1.0), di::InvalidArgument);
  EXPECT_NO_THROW(db::erm_a_rhs(d, std::vector<double>{1.5}, std::vector<double>{0.0}, 1.0, false));
  EXPECT_THROW(db::erm_a_rhs(d, std::vector<double>{0.5}, std::vector<double>{0.0}, 0.0), di::InvalidArgument);
}

TEST(Mle, UniformConfidences) {
  const auto d = line_domain({0.5, 0.5}, {0.5, 0.5});
  EXPECT_NEAR(db::mle_rhs(d, std::vector<double>{0.5, 0.5}), std::log(2.0) + 2.0, 1e-14);
  EXPECT_NEAR(db::mle_rhs(d, std::vector<double>{0.5, 0.5}), 2.6931, 1e-4);
}

TEST(Mle, ConfidentAgreementDrivesBoundToZero) {
  const auto d = line_domain({0.5, 0.5}, {1.0, 0.0});
  const double eps = 1e-9;
  EXPECT_LT(db::mle_rhs(d, std::vector<double>{1.0 - eps, eps}), 1e-7);
}

TEST(Mle, RejectsUnclampedConfidences) {
  const auto d = line_domain({1.0}, {0.5});
  EXPECT_THROW(db::mle_rhs(d, std::vector<double>{0.0}), di::InvalidArgument);
  EXPECT_THROW(db::mle_rhs(d, std::vector<double>{1.0}), di::InvalidArgument);
}

TEST(Bounds, HoldOnRandomInstances) {
  di::Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const auto d = db::random_domain(rng, 2 + rng.below(9), 1);
    std::vector<double> q(d.size()), r1(d.size()), r2(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      q[i] = std::clamp(rng.uniform(), 1e-9, 1.0 - 1e-9);
      r1[i] = rng.uniform();
      r2[i] = rng.uniform();
    }
    const double em = db::exact_error_conf(d, q);
    EXPECT_LE(em * em, db::mle_rhs(d, q) + 1e-12);
    const double er = db::exact_error_risk(d, r1, r2);
    for (double c : {0.1, 1.0, 10.0}) EXPECT_LE(er * er, db::erm_a_rhs(d, r1, r2, c) + 1e-12);
  }
}

TEST(ErmBIdentity, DeterministicCorrectModel) {
  const auto d = line_domain({0.5, 0.5}, {0.0, 0.0});
  const std::vector<double> r1{1.0, 0.9}, r2{0.0, 0.2};
  const auto s = db::erm_b_identity(d, r1, r2);
  EXPECT_EQ(s.lhs, 0.0);
  EXPECT_EQ(s.rhs, 0.0);
}

TEST(ErmBIdentity, UniformComplexModel) {
  const auto d = line_domain({0.2, 0.8}, {0.5, 0.5});
  const auto s = db::erm_b_identity(d, std::vector<double>{0.1, 0.9}, std::vector<double>{0.7, 0.2});
  EXPECT_DOUBLE_EQ(s.lhs, 0.5);
  EXPECT_DOUBLE_EQ(s.rhs, 0.5);
}

TEST(ErmBIdentity, ExactOnRandomInstancesIncludingTies) {
  di::Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const auto d = db::random_domain(rng, 3 + rng.below(6), 1);
    std::vector<double> r1(d.size()), r2(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      r1[i] = rng.uniform();
      r2[i] = rng.below(4) == 0 ? r1[i] : rng.uniform();
    }
    const auto s = db::erm_b_identity(d, r1, r2);
    EXPECT_NEAR(s.lhs, s.rhs, 1e-12);
  }
}

TEST(Pinsker, Examples) {
  const auto same = db::pinsker_check(0.3, 0.3);
  EXPECT_EQ(same.tv, 0.0);
  EXPECT_NEAR(same.bound, 0.0, 1e-12);
  const auto r = db::pinsker_check(1.0, 0.5);
  EXPECT_DOUBLE_EQ(r.tv, 0.5);
  EXPECT_NEAR(r.bound, std::sqrt(std::log(2.0) / 2.0), 1e-15);
  EXPECT_NEAR(r.bound, 0.5887, 1e-4);
  EXPECT_THROW(db::pinsker_check(0.5, 0.0), di::InvalidArgument);
  EXPECT_THROW(db::pinsker_check(1.2, 0.5), di::InvalidArgument);
}

TEST(Pinsker, HoldsOnRandomPairs) {
  di::Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    const auto r = db::pinsker_check(rng.uniform(), 0.001 + 0.998 * rng.uniform());
    EXPECT_LE(r.tv, r.bound + 1e-12);
  }
}

TEST(PseudoConfidence, Decomposition) {
  // MLE bound at the pseudo-confidence equals ERM-a bound minus c*E[min(r1, r2)].
  const auto d = line_domain({0.4, 0.6}, {0.3, 0.8});
  const std::vector<double> r1{0.2, 0.7}, r2{0.5, 0.1};
  const double c = 1.7;
  std::vector<double> q{db::pseudo_plus(0.2, 0.5, c), db::pseudo_plus(0.7, 0.1, c)};
  const double emin = 0.4 * 0.2 + 0.6 * 0.1;
  EXPECT_NEAR(db::mle_rhs(d, q), db::erm_a_rhs(d, r1, r2, c) - c * emin, 1e-13);
}

TEST(Verify, HundredInstancesClean) {
  const auto s = db::verify_theorem1(100, 3);
  EXPECT_EQ(s.max_violation, 0.0);
  EXPECT_TRUE(s.ok());
  EXPECT_GT(s.checks, 0);
  EXPECT_LE(s.identity_max_gap, 1e-12);
}

TEST(Verify, Preconditions) {
  EXPECT_THROW(db::verify_theorem1(0, 1), di::InvalidArgument);
  EXPECT_TRUE(db::verify_theorem1(1, 1).ok());
}

TEST(Verify, BrokenRightHandSideIsCaught) { EXPECT_FALSE(db::verify_theorem1(10, 1, 0.0).ok()); }

TEST(Verify, SinglePointDomain) {
  const auto d = line_domain({1.0}, {0.7});
  for (double q : {0.2, 0.5, 0.9}) {
    const double e = db::exact_error_conf(d, std::vector<double>{q});
    EXPECT_LE(e * e, db::mle_rhs(d, std::vector<double>{q}));
  }
  for (double r : {0.0, 0.3, 1.0}) {
    const std::vector<double> r1{r}, r2{0.5};
    const double e = db::exact_error_risk(d, r1, r2);
    EXPECT_LE(e * e, db::erm_a_rhs(d, r1, r2, 1.0));
    const auto id = db::erm_b_identity(d, r1, r2);
    EXPECT_NEAR(id.lhs, id.rhs, 1e-15);
  }
}
