#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "eegbio/connectivity.hpp"
#include "eegbio/features.hpp"
#include "support.hpp"

using namespace eegbio;

namespace {

const BandScheme kBands = BandScheme::standard();

Series delayed_pair_source(Rng rng, std::size_t n_epochs, std::size_t n, std::size_t delay, Series* delayed) {
  Series x(n_epochs), y(n_epochs);
  for (std::size_t e = 0; e < n_epochs; ++e) {
    std::vector<double> src(n + delay);
    for (auto& v : src) v = rng.normal();
    x[e].assign(src.begin() + static_cast<std::ptrdiff_t>(delay), src.end());
    y[e].assign(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n));
  }
  *delayed = y;
  return x;
}

Series am_tone(double carrier, double modulator, double depth, std::size_t n_epochs, std::size_t n, double fs) {
  Series s(n_epochs, std::vector<double>(n));
  const double w = 2.0 * std::numbers::pi;
  for (std::size_t e = 0; e < n_epochs; ++e)
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      s[e][i] = (1.0 + depth * std::cos(w * modulator * t + 0.4 * e)) * std::sin(w * carrier * t + 1.1 * e);
    }
  return s;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST(Coherence, SelfCoherenceIsOne) {
  const auto x = test::noise_series(Rng(1), 12, 1250);
  for (double v : coherence(x, x, 250.0, kBands).per_band) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(Coherence, IndependentNoiseIsLow) {
  // 60 epochs x 2 segments = 120 segments; 95th percentile over 100 trials
  std::vector<double> maxima;
  const Rng root(77);
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto x = test::noise_series(root.derive(2 * t), 60, 1250);
    const auto y = test::noise_series(root.derive(2 * t + 1), 60, 1250);
    const auto r = coherence(x, y, 250.0, kBands);
    EXPECT_EQ(r.n_segments, 120u);
    maxima.push_back(*std::max_element(r.per_band.begin(), r.per_band.end()));
  }
  std::sort(maxima.begin(), maxima.end());
  EXPECT_LT(maxima[94], 0.15);
}

TEST(Coherence, DelayedCopy) {
  Series y;
  const auto x = delayed_pair_source(Rng(8), 12, 1250, 10, &y);
  for (double v : coherence(x, y, 250.0, kBands).per_band) EXPECT_GE(v, 0.95);
}

TEST(Coherence, SymmetricAndScaleInvariant) {
  const auto x = test::noise_series(Rng(2), 8, 1250);
  auto y = test::noise_series(Rng(3), 8, 1250);
  for (std::size_t e = 0; e < y.size(); ++e)
    for (std::size_t i = 0; i < y[e].size(); ++i) y[e][i] += 0.5 * x[e][i];
  const auto a = coherence(x, y, 250.0, kBands).per_band;
  const auto b = coherence(y, x, 250.0, kBands).per_band;
  const auto c = coherence(test::scaled(x, -3.0), y, 250.0, kBands).per_band;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k], b[k]);
    EXPECT_NEAR(a[k], c[k], 1e-12);
    EXPECT_GE(a[k], 0.0);
    EXPECT_LE(a[k], 1.0);
  }
}

TEST(Coherence, TooFewSegmentsRejected) {
  const auto x = test::noise_series(Rng(1), 1, 1250);
  EXPECT_THROW(coherence(x, x, 250.0, kBands), ParameterError);
}

TEST(AmplitudeModulation, GammaCarrierDeltaModulatorIsMaximal) {
  const auto s = am_tone(35.0, 4.0, 1.0, 12, 1250, 250.0);
  const auto r = amplitude_modulation(s, 250.0, kBands);
  const auto gamma = *kBands.index_of("gamma");
  const auto delta = *kBands.index_of("delta");
  const double target = *r.at(gamma, delta);
  for (const auto& c : r.cells) {
    EXPECT_LE(c.value, target);
    EXPECT_GE(c.value, 0.0);
    EXPECT_LE(c.value, 1.0);
  }
  EXPECT_GT(target, 0.25);  // raised cosine: 0.5 of 1.5 envelope power
}

TEST(AmplitudeModulation, UnmodulatedToneHasFlatEnvelope) {
  const auto s = am_tone(25.0, 4.0, 0.0, 12, 1250, 250.0);
  const auto r = amplitude_modulation(s, 250.0, kBands);
  const auto beta3 = *kBands.index_of("beta3");
  for (const auto& c : r.cells) {
    if (c.carrier == beta3) {
      EXPECT_LE(c.value, 0.05) << kBands[c.modulator].name;
    }
  }
  EXPECT_GE(r.residual[beta3], 0.9);
}

TEST(AmplitudeModulation, OnlyValidPairsAndSharesSumToOne) {
  const auto s = test::noise_series(Rng(5), 4, 2500);
  const auto r = amplitude_modulation(s, 250.0, kBands);
  EXPECT_EQ(r.cells.size(), am_pairs(kBands).size());
  for (const auto& c : r.cells) EXPECT_LE(kBands[c.modulator].hi, kBands[c.carrier].hi);
  for (std::size_t car = 0; car < kBands.size(); ++car) {
    double sum = r.residual[car];
    for (const auto& c : r.cells)
      if (c.carrier == car) sum += c.value;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  EXPECT_FALSE(r.at(*kBands.index_of("delta"), *kBands.index_of("gamma")).has_value());
}

TEST(AmplitudeModulation, ScaleInvariantAndNeedsEightSeconds) {
  const auto s = test::noise_series(Rng(6), 4, 2500);
  const auto a = amplitude_modulation(s, 250.0, kBands);
  const auto b = amplitude_modulation(test::scaled(s, 4.0), 250.0, kBands);
  for (std::size_t k = 0; k < a.cells.size(); ++k) EXPECT_NEAR(a.cells[k].value, b.cells[k].value, 1e-9);
  EXPECT_THROW(amplitude_modulation(test::noise_series(Rng(1), 1, 1250), 250.0, kBands), ParameterError);
}

TEST(SyncLikelihood, DefaultParameters) {
  const auto p = default_sl_params(kBands[*kBands.index_of("alpha1")], 250.0);
  EXPECT_EQ(p.lag, 8);   // round(250 / 31.5)
  EXPECT_EQ(p.m, 5);     // ceil(31.5 / 8.5) + 1
  EXPECT_EQ(p.w1, 64);   // 2 * 8 * 4
  EXPECT_EQ(p.w2, 264);  // 64 + 200
}

TEST(SyncLikelihood, SelfIsOne) {
  const auto x = test::noise_series(Rng(3), 2, 1250);
  const SlParams p{3, 2, 8, 208, 0.05};
  EXPECT_GE(synchronization_likelihood(x, x, p), 0.99);
}

TEST(SyncLikelihood, IndependentNoiseNearPref) {
  const SlParams p{3, 2, 8, 208, 0.05};
  const Rng root(99);
  std::vector<double> v;
  for (std::uint64_t t = 0; t < 100; ++t)
    v.push_back(synchronization_likelihood(test::noise_series(root.derive(2 * t), 1, 800),
                                           test::noise_series(root.derive(2 * t + 1), 1, 800), p));
  EXPECT_NEAR(mean_of(v), p.p_ref, 0.5 * p.p_ref);
  for (double s : v) EXPECT_NEAR(s, p.p_ref, 0.5 * p.p_ref);
}

TEST(SyncLikelihood, MonotoneInCoupledFraction) {
  const SlParams p{3, 2, 8, 208, 0.05};
  const auto x = test::noise_series(Rng(4), 4, 800);
  const auto z = test::noise_series(Rng(5), 4, 800);
  double previous = -1.0;
  for (std::size_t coupled = 0; coupled <= 4; ++coupled) {
    Series y = z;
    for (std::size_t e = 0; e < coupled; ++e) y[e] = x[e];
    const double sl = synchronization_likelihood(x, y, p);
    EXPECT_GT(sl, previous);
    if (coupled == 2) {
      EXPECT_GT(sl, p.p_ref);
      EXPECT_LT(sl, 1.0);
    }
    previous = sl;
  }
}

TEST(SyncLikelihood, SymmetricAndScaleInvariant) {
  const SlParams p{4, 3, 18, 218, 0.05};
  const auto x = test::noise_series(Rng(10), 2, 900);
  auto y = test::noise_series(Rng(11), 2, 900);
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t i = 0; i < 900; ++i) y[e][i] = 0.6 * y[e][i] + x[e][i];
  const double a = synchronization_likelihood(x, y, p);
  EXPECT_EQ(a, synchronization_likelihood(y, x, p));
  EXPECT_EQ(a, synchronization_likelihood(test::scaled(x, 2.0), test::scaled(y, 0.5), p));
  EXPECT_GE(a, 0.0);
  EXPECT_LE(a, 1.0);
}

TEST(SyncLikelihood, ShortEpochsRejected) {
  const SlParams p{5, 8, 64, 264, 0.05};
  const auto x = test::noise_series(Rng(1), 1, 200);
  EXPECT_THROW(synchronization_likelihood(x, x, p), ParameterError);
  EXPECT_THROW((SlParams{1, 1, 1, 10, 0.05}.validate()), ParameterError);
}

TEST(Features, NineComponentLayout) {
  FeatureConfig cfg;
  const auto names = feature_names(cfg, 9);
  EXPECT_EQ(names.size(), 8u * 9 + 8u * 9 + 8u * 36 + 8u * 36 + am_pairs(cfg.bands).size() * 9);
  EXPECT_EQ(names.size(), 1044u);
  EXPECT_NE(describe(cfg, 9).find("total: 1044"), std::string::npos);
  std::size_t coh = 0;
  for (const auto& n : names) coh += n.rfind("coherence__alpha1__", 0) == 0;
  EXPECT_EQ(coh, 36u);
}

TEST(Features, ExtractionAlignsWithNames) {
  FeatureConfig cfg;
  Rng rng(12);
  const auto x = test::make_epochs(250.0, 4, 3, 1250, [&](auto, auto, auto) { return rng.normal(); });
  const auto row = extract_features(x, cfg);
  EXPECT_EQ(row.size(), feature_names(cfg, 3).size());
  for (double v : row) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Features, TableIsThreadInvariant) {
  FeatureConfig cfg;
  cfg.sl = false;
  std::vector<EpochSet> recs;
  for (int k = 0; k < 4; ++k) {
    Rng rng(100 + k);
    auto x = test::make_epochs(250.0, 4, 2, 1250, [&](auto, auto, auto) { return rng.normal(); });
    x.meta.subject_id = "S" + std::to_string(k);
    recs.push_back(x);
  }
  EXPECT_EQ(extract_table(recs, cfg, 1), extract_table(recs, cfg, 3));
}

TEST(Features, RecordErrorNamesRecord) {
  FeatureConfig cfg;
  auto x = test::make_epochs(250.0, 1, 2, 1250, [](auto, auto, auto i) { return std::sin(0.3 * i); });
  x.meta.subject_id = "short-one";
  try {
    extract_table({x}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("short-one"), std::string::npos);
  }
}
