#include <gtest/gtest.h>

#include <complex>
#include <numbers>

#include "eegbio/spectral.hpp"
#include "support.hpp"

using namespace eegbio;

namespace {

constexpr double kPi = std::numbers::pi;

// Windowed periodogram average by direct DFT sums: no FFT, no shared helpers.
std::vector<double> dft_welch(const Series& x, double fs, std::size_t len, std::size_t step) {
  std::vector<double> w(len);
  double wp = 0.0;
  for (std::size_t n = 0; n < len; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(n) / static_cast<double>(len));
    wp += w[n] * w[n];
  }
  const std::size_t nb = len / 2 + 1;
  std::vector<double> acc(nb, 0.0);
  std::size_t segs = 0;
  for (const auto& ep : x) {
    for (std::size_t s = 0; s + len <= ep.size(); s += step) {
      double mean = 0.0;
      for (std::size_t n = 0; n < len; ++n) mean += ep[s + n];
      mean /= static_cast<double>(len);
      for (std::size_t k = 0; k < nb; ++k) {
        std::complex<double> z = 0.0;
        for (std::size_t n = 0; n < len; ++n)
          z += (ep[s + n] - mean) * w[n] *
               std::polar(1.0, -2.0 * kPi * static_cast<double>(k * n % len) / static_cast<double>(len));
        acc[k] += std::norm(z);
      }
      ++segs;
    }
  }
  for (std::size_t k = 0; k < nb; ++k) {
    const bool edge = k == 0 || (len % 2 == 0 && k == len / 2);
    acc[k] *= (edge ? 1.0 : 2.0) / (fs * wp * static_cast<double>(segs));
  }
  return acc;
}

EpochSet from_series(const Series& s, double fs) {
  return test::make_epochs(fs, s.size(), 1, s[0].size(), [&](auto e, auto, auto i) { return s[e][i]; });
}

}  // namespace

TEST(Welch, MatchesDirectDftOracle) {
  struct Case {
    double fs;
    std::size_t n_epochs, n;
    double seg_seconds, overlap;
  };
  const Case cases[] = {{128.0, 1, 1024, 2.0, 0.5}, {100.0, 2, 500, 1.0, 0.25}, {250.0, 1, 1000, 0.404, 0.5},
                        {64.0, 3, 256, 1.0, 0.0}};
  std::uint64_t seed = 1;
  for (const auto& c : cases) {
    const auto s = test::noise_series(Rng(seed++), c.n_epochs, c.n);
    const WelchParams p{c.seg_seconds, c.overlap};
    const auto seg = dsp::Segmentation::make(p, c.fs);
    const auto psd = welch_psd(from_series(s, c.fs), p);
    const auto oracle = dft_welch(s, c.fs, seg.length, seg.step);
    ASSERT_EQ(psd.power[0].size(), oracle.size());
    for (std::size_t k = 0; k < oracle.size(); ++k)
      EXPECT_NEAR(psd.power[0][k], oracle[k], 1e-6 * std::max(oracle[k], 1e-12)) << "bin " << k << " fs " << c.fs;
  }
}

TEST(Welch, ParsevalOnWhiteNoise) {
  const auto s = test::noise_series(Rng(5), 60, 1250);
  const auto psd = welch_psd(from_series(s, 250.0));
  double total = 0.0;
  for (double v : psd.power[0]) total += v * psd.df;
  EXPECT_NEAR(total, 1.0, 0.05);
}

TEST(Welch, SinePeakAtTenHertz) {
  const auto psd = welch_psd(from_series(test::sine_series(10.0, 250.0, 4, 1250), 250.0));
  const auto& p = psd.power[0];
  const auto k = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  EXPECT_LE(std::abs(psd.freqs[k] - 10.0), psd.df);
}

TEST(Welch, ZeroSignal) {
  const auto x = test::make_epochs(250.0, 2, 1, 1250, [](auto, auto, auto) { return 0.0; });
  const auto psd = welch_psd(x);
  EXPECT_TRUE(psd.zero_variance[0]);
  for (double v : psd.power[0]) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(relative_power(psd, BandScheme::standard()), UndefinedRatioError);
}

TEST(Welch, SegmentLongerThanEpochRejected) {
  const auto x = test::make_epochs(100.0, 1, 1, 100, [](auto, auto, auto i) { return std::sin(0.1 * i); });
  EXPECT_THROW(welch_psd(x, {2.0, 0.5}), ParameterError);
}

TEST(RelativePower, SineConcentratesInAlpha1) {
  const auto psd = welch_psd(from_series(test::sine_series(10.0, 250.0, 12, 1250), 250.0));
  const auto bands = BandScheme::standard();
  const auto rel = relative_power(psd, bands)[0];
  for (std::size_t b = 0; b < bands.size(); ++b) {
    if (bands[b].name == "alpha1") EXPECT_GE(rel[b], 0.95);
    else EXPECT_LE(rel[b], 0.05) << bands[b].name;
  }
}

TEST(RelativePower, SumsToOneAndBounded) {
  const auto bands = BandScheme::standard();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const double f = 2.0 + 40.0 * rng.uniform();
    auto s = test::noise_series(rng.derive(1), 3, 1250);
    const auto tone = test::sine_series(f, 250.0, 3, 1250);
    for (std::size_t e = 0; e < 3; ++e)
      for (std::size_t i = 0; i < 1250; ++i) s[e][i] = 0.3 * s[e][i] + tone[e][i];
    const auto rel = relative_power(welch_psd(from_series(s, 250.0)), bands)[0];
    double sum = 0.0;
    for (double v : rel) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(RelativePower, WhiteNoiseFlatShare) {
  const auto bands = BandScheme::standard();
  const auto rel = relative_power(welch_psd(from_series(test::noise_series(Rng(9), 60, 1250), 250.0)), bands)[0];
  EXPECT_NEAR(rel[*bands.index_of("beta3")], (30.0 - 21.0) / (45.0 - 1.5), 0.03);
}

TEST(RelativePower, AmplitudeScalingInvariance) {
  const auto bands = BandScheme::standard();
  const auto s = test::noise_series(Rng(4), 4, 1250);
  const auto a = welch_psd(from_series(s, 250.0));
  const auto b = welch_psd(from_series(test::scaled(s, -7.5), 250.0));
  const auto ra = relative_power(a, bands)[0], rb = relative_power(b, bands)[0];
  for (std::size_t k = 0; k < ra.size(); ++k) EXPECT_NEAR(ra[k], rb[k], 1e-12);
  for (const auto& band : bands) EXPECT_NEAR(spectral_entropy(a, 0, band), spectral_entropy(b, 0, band), 1e-12);
}

TEST(RelativePower, BandBeyondPsdRangeRejected) {
  const auto psd = welch_psd(from_series(test::noise_series(Rng(2), 1, 500), 50.0), {2.0, 0.5});
  EXPECT_THROW(relative_power(psd, BandScheme::standard()), ParameterError);
}

TEST(SpectralEntropy, HandCases) {
  const std::vector<double> freqs = {0, 1, 2, 3, 4, 5, 6, 7};
  EXPECT_NEAR(spectral_entropy(std::vector<double>(8, 2.5), freqs), 1.0, 1e-9);
  std::vector<double> spike(8, 0.0);
  spike[3] = 4.0;
  EXPECT_EQ(spectral_entropy(spike, freqs), 0.0);
  std::vector<double> two(8, 0.0);
  two[1] = two[6] = 1.0;
  EXPECT_NEAR(spectral_entropy(two, freqs), std::log(2.0) / std::log(8.0), 1e-12);
  EXPECT_THROW(spectral_entropy(std::vector<double>(8, 0.0), freqs), UndefinedRatioError);
  EXPECT_THROW(spectral_entropy(two, freqs, Band{"x", 2.5, 3.5}), ParameterError);
}

TEST(SpectralEntropy, BandRestricted) {
  const std::vector<double> freqs = {0, 1, 2, 3, 4, 5};
  const std::vector<double> p = {9, 9, 1, 1, 1, 1};
  EXPECT_NEAR(spectral_entropy(p, freqs, Band{"x", 2.0, 6.0}), 1.0, 1e-12);
}
