#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "eegbio/datamodel.hpp"
#include "eegbio/dsp.hpp"
#include "eegbio/error.hpp"

namespace eegbio {

using dsp::WelchParams;

struct Psd {
  std::vector<double> freqs;
  double df = 0.0;
  std::vector<std::vector<double>> power;  // [component][bin]
  std::vector<bool> zero_variance;         // per component
  std::size_t n_segments = 0;              // per component, pooled over epochs
  WelchParams params;

  std::size_t n_components() const { return power.size(); }
};

/// Welch PSD per component: periodic Hann, per-segment mean removal,
/// one-sided density scaling (sum(power) * df ~= variance), averaged over all
/// segments of all epochs.
inline Psd welch_psd(const EpochSet& x, const WelchParams& params = {}) {
  const auto seg = dsp::Segmentation::make(params, x.fs);
  if (seg.length > x.n_samples)
    throw ParameterError("Welch segment (" + std::to_string(seg.length) +
                         " samples) is longer than the epoch (" + std::to_string(x.n_samples) + ")");
  Psd psd;
  psd.params = params;
  psd.freqs = dsp::frequency_grid(seg, x.fs);
  psd.df = x.fs / static_cast<double>(seg.length);
  for (std::size_t c = 0; c < x.n_components; ++c) {
    psd.power.push_back(dsp::welch(x.component(c), x.fs, params, &psd.n_segments));
    bool zero = true;
    for (double v : psd.power.back()) zero = zero && v == 0.0;
    psd.zero_variance.push_back(zero);
  }
  return psd;
}

namespace detail {

inline std::vector<std::size_t> bins_in(const std::vector<double>& freqs, const Band& b) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < freqs.size(); ++k)
    if (b.contains(freqs[k])) idx.push_back(k);
  return idx;
}

}  // namespace detail

/// Trapezoid integral over the bins with f_lo <= f < f_hi.
inline double band_integral(const std::vector<double>& power, const std::vector<double>& freqs,
                            const Band& b) {
  const auto idx = detail::bins_in(freqs, b);
  double acc = 0.0;
  for (std::size_t i = 1; i < idx.size(); ++i)
    acc += 0.5 * (power[idx[i - 1]] + power[idx[i]]) * (freqs[idx[i]] - freqs[idx[i - 1]]);
  return acc;
}

/// Band power over the sum of all band powers, per component:
/// result[c][b] in [0, 1], rows sum to 1.
inline std::vector<std::vector<double>> relative_power(const Psd& psd, const BandScheme& bands) {
  if (!psd.freqs.empty() && bands.highest() > psd.freqs.back())
    throw ParameterError("band edges exceed the PSD frequency range");
  std::vector<std::vector<double>> out;
  for (std::size_t c = 0; c < psd.n_components(); ++c) {
    std::vector<double> row;
    double total = 0.0;
    for (const auto& b : bands) {
      row.push_back(band_integral(psd.power[c], psd.freqs, b));
      total += row.back();
    }
    if (!(total > 0.0))
      throw UndefinedRatioError("component " + component_name(c) +
                                (psd.zero_variance[c] ? " has zero variance" : " has no in-band power") +
                                "; relative power undefined");
    for (double& v : row) v /= total;
    out.push_back(std::move(row));
  }
  return out;
}

/// Normalized Shannon entropy of the bin-wise power distribution of one
/// component, restricted to `band` when given (otherwise every bin).
inline double spectral_entropy(const std::vector<double>& power, const std::vector<double>& freqs,
                               const std::optional<Band>& band = std::nullopt) {
  std::vector<std::size_t> idx;
  if (band) {
    idx = detail::bins_in(freqs, *band);
  } else {
    for (std::size_t k = 0; k < power.size(); ++k) idx.push_back(k);
  }
  if (idx.size() < 2) throw ParameterError("spectral entropy needs at least 2 bins in range");
  double total = 0.0;
  for (auto k : idx) total += power[k];
  if (!(total > 0.0)) throw UndefinedRatioError("zero power in range; entropy undefined");
  double h = 0.0;
  for (auto k : idx) {
    const double p = power[k] / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(idx.size()));
}

inline double spectral_entropy(const Psd& psd, std::size_t component,
                               const std::optional<Band>& band = std::nullopt) {
  return spectral_entropy(psd.power.at(component), psd.freqs, band);
}

}  // namespace eegbio
