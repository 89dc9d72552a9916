#pragma once

// Signal-processing primitives shared by the spectral and connectivity features:
// segmenting, Welch auto/cross spectra, Butterworth band-pass, zero-phase
// filtering and the analytic-signal envelope.

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "eegbio/datamodel.hpp"
#include "eegbio/error.hpp"

namespace eegbio::dsp {

using cplx = std::complex<double>;

inline std::vector<cplx> fft(std::span<const double> x) {
  Eigen::FFT<double> engine;
  std::vector<double> in(x.begin(), x.end());
  std::vector<cplx> out;
  engine.fwd(out, in);
  return out;
}

inline std::vector<cplx> fft(const std::vector<cplx>& x) {
  Eigen::FFT<double> engine;
  std::vector<cplx> out;
  engine.fwd(out, x);
  return out;
}

inline std::vector<cplx> ifft(const std::vector<cplx>& x) {
  Eigen::FFT<double> engine;
  std::vector<cplx> out;
  engine.inv(out, x);  // Eigen scales the inverse by 1/n
  return out;
}

/// Periodic Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / N).
inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  return w;
}

struct WelchParams {
  double seg_seconds = 2.5;
  double overlap = 0.5;

  friend bool operator==(const WelchParams&, const WelchParams&) = default;
};

/// Concrete segmentation for one sampling rate.
struct Segmentation {
  std::size_t length = 0;  // samples per segment
  std::size_t step = 0;    // hop between segment starts

  static Segmentation make(const WelchParams& p, double fs) {
    if (!(p.overlap >= 0.0 && p.overlap < 1.0))
      throw ParameterError("Welch overlap must lie in [0, 1)");
    if (!(p.seg_seconds > 0.0)) throw ParameterError("Welch segment length must be positive");
    Segmentation s;
    s.length = static_cast<std::size_t>(std::llround(p.seg_seconds * fs));
    if (s.length < 8)
      throw ParameterError("Welch segment must span at least 8 samples (got " +
                           std::to_string(s.length) + ")");
    const auto overlap = static_cast<std::size_t>(std::floor(p.overlap * static_cast<double>(s.length)));
    s.step = s.length - overlap;
    return s;
  }

  std::size_t count(std::size_t n) const { return n < length ? 0 : (n - length) / step + 1; }
  std::size_t n_bins() const { return length / 2 + 1; }
};

inline std::vector<double> frequency_grid(const Segmentation& seg, double fs) {
  std::vector<double> f(seg.n_bins());
  const double df = fs / static_cast<double>(seg.length);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = df * static_cast<double>(k);
  return f;
}

/// Windowed one-sided spectrum of one segment (unscaled), mean removed unless told otherwise.
inline std::vector<cplx> segment_spectrum(std::span<const double> x, std::span<const double> window,
                                          bool remove_mean = true) {
  double mean = 0.0;
  if (remove_mean) {
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
  }
  std::vector<double> buf(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) buf[i] = (x[i] - mean) * window[i];
  auto full = fft(buf);
  full.resize(x.size() / 2 + 1);
  return full;
}

/// Density scaling and one-sided doubling, applied to |X|^2 or X* Y.
inline double density_factor(std::size_t k, std::size_t length, double fs, double window_power) {
  const bool edge = k == 0 || (length % 2 == 0 && k == length / 2);
  return (edge ? 1.0 : 2.0) / (fs * window_power);
}

/// Averaged auto/cross spectra for a pair of equally shaped series.
struct CrossSpectra {
  std::vector<double> freqs;
  std::vector<double> sxx, syy;
  std::vector<cplx> sxy;
  std::size_t n_segments = 0;
};

inline CrossSpectra cross_spectra(const Series& x, const Series& y, double fs,
                                  const WelchParams& p) {
  if (x.size() != y.size()) throw ParameterError("series have different epoch counts");
  const auto seg = Segmentation::make(p, fs);
  const auto window = hann(seg.length);
  double wp = 0.0;
  for (double w : window) wp += w * w;

  CrossSpectra cs;
  cs.freqs = frequency_grid(seg, fs);
  const std::size_t nb = seg.n_bins();
  cs.sxx.assign(nb, 0.0);
  cs.syy.assign(nb, 0.0);
  cs.sxy.assign(nb, cplx{});
  for (std::size_t e = 0; e < x.size(); ++e) {
    if (x[e].size() != y[e].size()) throw ParameterError("series have different lengths");
    const std::size_t count = seg.count(x[e].size());
    for (std::size_t s = 0; s < count; ++s) {
      const std::span<const double> xs(x[e].data() + s * seg.step, seg.length);
      const std::span<const double> ys(y[e].data() + s * seg.step, seg.length);
      const auto fx = segment_spectrum(xs, window);
      const auto fy = segment_spectrum(ys, window);
      for (std::size_t k = 0; k < nb; ++k) {
        cs.sxx[k] += std::norm(fx[k]);
        cs.syy[k] += std::norm(fy[k]);
        cs.sxy[k] += std::conj(fx[k]) * fy[k];
      }
      ++cs.n_segments;
    }
  }
  if (cs.n_segments == 0) throw ParameterError("Welch segment is longer than every epoch");
  for (std::size_t k = 0; k < nb; ++k) {
    const double f = density_factor(k, seg.length, fs, wp) / static_cast<double>(cs.n_segments);
    cs.sxx[k] *= f;
    cs.syy[k] *= f;
    cs.sxy[k] *= f;
  }
  return cs;
}

/// One-sided Welch PSD of a single series, averaged over all segments of all epochs.
inline std::vector<double> welch(const Series& x, double fs, const WelchParams& p,
                                 std::size_t* n_segments = nullptr, bool remove_mean = true) {
  const auto seg = Segmentation::make(p, fs);
  const auto window = hann(seg.length);
  double wp = 0.0;
  for (double w : window) wp += w * w;
  std::vector<double> psd(seg.n_bins(), 0.0);
  std::size_t used = 0;
  for (const auto& epoch : x) {
    const std::size_t count = seg.count(epoch.size());
    for (std::size_t s = 0; s < count; ++s) {
      const auto fx = segment_spectrum({epoch.data() + s * seg.step, seg.length}, window, remove_mean);
      for (std::size_t k = 0; k < psd.size(); ++k) psd[k] += std::norm(fx[k]);
      ++used;
    }
  }
  if (used == 0) throw ParameterError("Welch segment is longer than every epoch");
  for (std::size_t k = 0; k < psd.size(); ++k)
    psd[k] *= density_factor(k, seg.length, fs, wp) / static_cast<double>(used);
  if (n_segments) *n_segments = used;
  return psd;
}

// ---------------------------------------------------------------------------
// Butterworth band-pass as a cascade of biquads (transposed direct form II).

struct Biquad {
  double b0, b1, b2, a1, a2;  // a0 == 1
};

struct SosFilter {
  std::vector<Biquad> sections;
  double gain_at(double f, double fs) const {
    const cplx z = std::polar(1.0, 2.0 * std::numbers::pi * f / fs);
    cplx h = 1.0;
    for (const auto& s : sections)
      h *= (s.b0 + s.b1 / z + s.b2 / (z * z)) / (1.0 + s.a1 / z + s.a2 / (z * z));
    return std::abs(h);
  }
};

/// Order-`order` analog Butterworth prototype mapped to a band-pass by
/// LP->BP substitution and the bilinear transform with pre-warped edges; the
/// result has 2*order poles, one biquad per conjugate pole pair, unit gain at
/// the geometric centre frequency.
inline SosFilter butter_bandpass(int order, double f_lo, double f_hi, double fs) {
  if (order < 1) throw ParameterError("filter order must be >= 1");
  if (!(0.0 < f_lo && f_lo < f_hi && f_hi < fs / 2.0))
    throw ParameterError("band-pass edges must satisfy 0 < f_lo < f_hi < fs/2");
  const double pi = std::numbers::pi;
  const double k2 = 2.0 * fs;
  const double w1 = k2 * std::tan(pi * f_lo / fs);
  const double w2 = k2 * std::tan(pi * f_hi / fs);
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);

  std::vector<cplx> zpoles;
  for (int k = 0; k < order; ++k) {
    const cplx p = std::polar(1.0, pi * (2.0 * k + order + 1) / (2.0 * order));
    const cplx half = p * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0 * w0);
    for (cplx s : {half + root, half - root}) zpoles.push_back((k2 + s) / (k2 - s));
  }
  SosFilter f;
  for (const auto& z : zpoles) {
    if (z.imag() <= 0.0) continue;
    f.sections.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
  }
  if (f.sections.size() != static_cast<std::size_t>(order))
    throw NumericError("band-pass design produced unpaired poles");
  const double f0 = fs / pi * std::atan(w0 / k2);
  const double g = std::pow(1.0 / f.gain_at(f0, fs), 1.0 / static_cast<double>(order));
  for (auto& s : f.sections) {
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
  }
  return f;
}

namespace detail {

inline void sos_run(const SosFilter& f, std::vector<double>& x) {
  // Steady-state initial conditions for a step of height x[0] (as scipy's sosfilt_zi).
  double level = x.empty() ? 0.0 : x.front();
  for (const auto& s : f.sections) {
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double out = dc * level;
    double z2 = s.b2 * level - s.a2 * out;
    double z1 = out - s.b0 * level;
    for (double& v : x) {
      const double in = v;
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      v = y;
    }
    level = out;
  }
}

}  // namespace detail

/// Zero-phase forward-backward filtering with odd-symmetric edge padding.
inline std::vector<double> filtfilt(const SosFilter& f, std::span<const double> x) {
  const std::size_t n = x.size();
  std::size_t pad = 3 * (2 * f.sections.size() + 1);
  if (n < 2) return {x.begin(), x.end()};
  pad = std::min(pad, n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);
  detail::sos_run(f, ext);
  std::reverse(ext.begin(), ext.end());
  detail::sos_run(f, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

inline Series bandpass(const Series& x, const Band& band, double fs, int order = 4) {
  const auto f = butter_bandpass(order, band.lo, band.hi, fs);
  Series out;
  out.reserve(x.size());
  for (const auto& epoch : x) out.push_back(filtfilt(f, epoch));
  return out;
}

/// Magnitude of the analytic signal (FFT-based Hilbert transform).
inline std::vector<double> envelope(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<cplx> spec = fft(x);
  for (std::size_t k = 1; k < n; ++k) {
    if (2 * k < n) spec[k] *= 2.0;
    else if (2 * k > n) spec[k] = 0.0;
  }
  const auto analytic = ifft(spec);
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(analytic[i]);
  return env;
}

}  // namespace eegbio::dsp
