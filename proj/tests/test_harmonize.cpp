#include <gtest/gtest.h>

#include "eegbio/harmonize.hpp"
#include "eegbio/synth.hpp"
#include "support.hpp"

using namespace eegbio;

namespace {

// slope of y on x with intercept, by closed-form sums
double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// slope of y on age with one intercept per site (within-site centring)
double within_site_slope(const FeatureTable& t, std::size_t j) {
  std::map<std::string, std::pair<double, double>> means;
  std::map<std::string, int> n;
  for (std::size_t i = 0; i < t.n_records(); ++i) {
    auto& m = means[t.rows[i].site];
    m.first += t.rows[i].age;
    m.second += t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    ++n[t.rows[i].site];
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < t.n_records(); ++i) {
    const auto& m = means[t.rows[i].site];
    const double k = n[t.rows[i].site];
    const double dx = t.rows[i].age - m.first / k;
    const double dy = t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - m.second / k;
    sxy += dx * dy;
    sxx += dx * dx;
  }
  return sxy / sxx;
}

CohortSpec age_spec(double slope, double offset) {
  auto s = two_site_offset_spec(200, offset, 21);
  s.n_features = 3;
  s.noise_sd = 0.2;
  s.age_reference = 32.0;
  s.age_effects = {{0, slope}, {2, -slope}};
  return s;
}

}  // namespace

TEST(Combat, OffsetRemoved) {
  const auto t = generate_feature_cohort(two_site_offset_spec(200, 2.0, 7));
  const double before = site_smd(t)[0];
  ASSERT_EQ(t.n_records(), 400u);
  EXPECT_NEAR(before, 2.0, 0.2);
  const auto h = apply_combat(fit_combat(t), t);
  EXPECT_LT(site_smd(h)[0], 0.05);
}

TEST(Combat, SiteMeanDifferenceAfterAdjustment) {
  const auto t = generate_feature_cohort(two_site_offset_spec(200, 2.0, 7));
  const auto h = apply_combat(fit_combat(t), t);
  double ma = 0.0, mb = 0.0;
  int na = 0, nb = 0;
  for (std::size_t i = 0; i < h.n_records(); ++i)
    (h.rows[i].site == "A" ? (ma += h.values(static_cast<Eigen::Index>(i), 0), ++na)
                           : (mb += h.values(static_cast<Eigen::Index>(i), 0), ++nb));
  EXPECT_LT(std::abs(ma / na - mb / nb), 0.05);
}

TEST(Combat, SingleSiteRejected) {
  auto t = generate_feature_cohort(two_site_offset_spec(50, 2.0, 7));
  for (auto& r : t.rows) r.site = "A";
  EXPECT_THROW(fit_combat(t), DataError);
}

TEST(Combat, UnknownCovariateRejected) {
  const auto t = generate_feature_cohort(two_site_offset_spec(50, 2.0, 7));
  CombatOptions o;
  o.covariates = {"age", "height"};
  EXPECT_THROW(fit_combat(t, o), ParameterError);
}

TEST(Combat, AgeSlopeMatchesOlsOracle) {
  const auto t = generate_feature_cohort(age_spec(0.1, 0.0));
  const auto m = fit_combat(t);
  std::vector<double> age, y;
  for (std::size_t i = 0; i < t.n_records(); ++i) {
    age.push_back(t.rows[i].age);
    y.push_back(t.values(static_cast<Eigen::Index>(i), 0));
  }
  EXPECT_NEAR(m.beta(0, 0), 0.1, 0.01);
  EXPECT_NEAR(ols_slope(age, y), 0.1, 0.01);
}

TEST(Combat, AgeSlopePreserved) {
  const auto t = generate_feature_cohort(age_spec(0.1, 2.0));
  const auto h = apply_combat(fit_combat(t), t);
  for (std::size_t j : {0u, 2u}) {
    const double before = within_site_slope(t, j);
    const double after = within_site_slope(h, j);
    EXPECT_NEAR(after, before, 0.05 * std::abs(before)) << "feature " << j;
  }
}

TEST(Combat, ApproximatelyIdempotent) {
  // RMS change per feature, in SD units of the first-pass output
  const auto t = generate_feature_cohort(two_site_offset_spec(200, 2.0, 7));
  const auto h1 = apply_combat(fit_combat(t), t);
  const auto h2 = apply_combat(fit_combat(h1), h1);
  for (Eigen::Index j = 0; j < h1.values.cols(); ++j) {
    const auto c = h1.values.col(j);
    const double sd = std::sqrt((c.array() - c.mean()).square().sum() / static_cast<double>(c.size() - 1));
    const double rms = std::sqrt((h2.values.col(j) - c).squaredNorm() / static_cast<double>(c.size()));
    EXPECT_LT(rms, 1e-3 * sd) << h1.feature_names[j];
  }
}

TEST(Combat, SecondPassLeavesSiteMeansInPlace) {
  const auto t = generate_feature_cohort(default_cohort_spec(3));
  CombatOptions o;
  o.covariates = {"age", "sex", "group"};
  o.empirical_bayes = false;
  const auto h1 = apply_combat(fit_combat(t, o), t);
  const auto h2 = apply_combat(fit_combat(h1, o), h1);
  for (Eigen::Index j = 0; j < h1.values.cols(); ++j) {
    const auto c = h1.values.col(j);
    const double sd = std::sqrt((c.array() - c.mean()).square().sum() / static_cast<double>(c.size() - 1));
    EXPECT_LT(std::sqrt((h2.values.col(j) - c).squaredNorm() / static_cast<double>(c.size())), 0.02 * sd);
  }
}

TEST(Combat, DuplicatedSitesAreIdentity) {
  auto base = generate_feature_cohort(two_site_offset_spec(100, 0.0, 5));
  base.feature_names = synthetic_feature_names(1);
  std::vector<std::size_t> a_rows;
  for (std::size_t i = 0; i < base.n_records(); ++i)
    if (base.rows[i].site == "A") a_rows.push_back(i);
  auto a = base.select_rows(a_rows);
  // 3 features so the EB step runs
  FeatureTable t;
  t.feature_names = synthetic_feature_names(3);
  t.values.resize(static_cast<Eigen::Index>(2 * a.n_records()), 3);
  Rng rng(1);
  Eigen::MatrixXd block(static_cast<Eigen::Index>(a.n_records()), 3);
  for (Eigen::Index i = 0; i < block.size(); ++i) block(i) = rng.normal();
  for (int copy = 0; copy < 2; ++copy)
    for (std::size_t i = 0; i < a.n_records(); ++i) {
      auto r = a.rows[i];
      r.site = copy ? "B" : "A";
      r.subject_id = r.site + "-" + std::to_string(i);
      t.rows.push_back(r);
      t.values.row(static_cast<Eigen::Index>(copy * a.n_records() + i)) = block.row(static_cast<Eigen::Index>(i));
    }
  const auto h = apply_combat(fit_combat(t), t);
  EXPECT_LT((h.values - t.values).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Combat, EmpiricalBayesShrinksTowardPrior) {
  const auto t = generate_feature_cohort(default_cohort_spec(2));
  const auto m = fit_combat(t);
  ASSERT_TRUE(m.empirical_bayes);
  for (Eigen::Index k = 0; k < m.gamma_hat.rows(); ++k)
    for (Eigen::Index j = 0; j < m.gamma_hat.cols(); ++j) {
      const double lo = std::min(m.gamma_hat(k, j), m.gamma_bar(k));
      const double hi = std::max(m.gamma_hat(k, j), m.gamma_bar(k));
      EXPECT_GE(m.gamma_star(k, j), lo - 1e-12);
      EXPECT_LE(m.gamma_star(k, j), hi + 1e-12);
    }
}

TEST(Combat, ShapeAndDeterminism) {
  const auto t = generate_feature_cohort(default_cohort_spec(4));
  const auto m1 = fit_combat(t);
  const auto m2 = fit_combat(t);
  EXPECT_EQ(format_combat_model(m1), format_combat_model(m2));
  const auto h = apply_combat(m1, t);
  EXPECT_EQ(h.rows, t.rows);
  EXPECT_EQ(h.feature_names, t.feature_names);
}

TEST(Combat, ModelRoundTrip) {
  const auto t = generate_feature_cohort(default_cohort_spec(5));
  const auto m = fit_combat(t);
  const auto text = format_combat_model(m);
  const auto back = parse_combat_model(text);
  EXPECT_EQ(format_combat_model(back), text);
  EXPECT_EQ(apply_combat(back, t), apply_combat(m, t));
}

TEST(Combat, UnknownSiteOnApply) {
  const auto t = generate_feature_cohort(two_site_offset_spec(50, 1.0, 7));
  const auto m = fit_combat(t);
  auto u = t;
  u.rows[0].site = "Z";
  EXPECT_THROW(apply_combat(m, u), RosterError);
}

TEST(Combat, SingleFeatureSkipsEmpiricalBayes) {
  const auto t = generate_feature_cohort(two_site_offset_spec(50, 1.0, 7));
  log::Capture cap;
  const auto m = fit_combat(t);
  EXPECT_FALSE(m.empirical_bayes);
  EXPECT_EQ(m.gamma_star, m.gamma_hat);
  EXPECT_EQ(cap.messages().size(), 1u);
}

TEST(SiteSmd, WithinGroupFilter) {
  const auto t = generate_feature_cohort(default_cohort_spec(1));
  const auto all = site_smd(t);
  const auto hc = site_smd(t, Group::HC);
  EXPECT_EQ(all.size(), t.n_features());
  EXPECT_EQ(hc.size(), t.n_features());
}
