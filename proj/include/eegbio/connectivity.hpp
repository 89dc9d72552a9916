#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "eegbio/datamodel.hpp"
#include "eegbio/dsp.hpp"
#include "eegbio/error.hpp"
#include "eegbio/spectral.hpp"

namespace eegbio {

// ---------------------------------------------------------------------------
// Magnitude-squared coherence

struct CoherenceResult {
  std::vector<double> per_band;  // mean MSC over the band's bins
  std::size_t n_segments = 0;
};

inline CoherenceResult coherence(const Series& x, const Series& y, double fs,
                                 const BandScheme& bands, const WelchParams& welch = {}) {
  const auto cs = dsp::cross_spectra(x, y, fs, welch);
  if (cs.n_segments < 4)
    throw ParameterError("coherence needs at least 4 Welch segments (got " +
                         std::to_string(cs.n_segments) + ")");
  CoherenceResult r;
  r.n_segments = cs.n_segments;
  for (const auto& b : bands) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < cs.freqs.size(); ++k) {
      if (!b.contains(cs.freqs[k])) continue;
      const double denom = cs.sxx[k] * cs.syy[k];
      if (!(denom > 0.0))
        throw UndefinedRatioError("zero auto-spectrum in band " + b.name + "; coherence undefined");
      acc += std::min(1.0, std::norm(cs.sxy[k]) / denom);
      ++n;
    }
    if (n == 0) throw ParameterError("band " + b.name + " contains no frequency bins");
    r.per_band.push_back(acc / static_cast<double>(n));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Amplitude modulation (envelope spectrum of each carrier band)

struct AmCell {
  std::size_t carrier = 0;    // band index
  std::size_t modulator = 0;  // band index, hi(modulator) <= hi(carrier)
  double value = 0.0;
};

struct AmResult {
  std::vector<AmCell> cells;
  std::vector<double> residual;  // per carrier: envelope power below the lowest band edge

  std::optional<double> at(std::size_t carrier, std::size_t modulator) const {
    for (const auto& c : cells)
      if (c.carrier == carrier && c.modulator == modulator) return c.value;
    return std::nullopt;
  }
};

/// Valid (modulator, carrier) pairs: every modulator band whose upper edge
/// does not exceed the carrier's upper edge.
inline std::vector<std::pair<std::size_t, std::size_t>> am_pairs(const BandScheme& bands) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t c = 0; c < bands.size(); ++c)
    for (std::size_t m = 0; m < bands.size(); ++m)
      if (bands[m].hi <= bands[c].hi) out.emplace_back(m, c);
  return out;
}

/// For each carrier band: zero-phase band-pass, analytic envelope, Welch PSD
/// of the envelope (mean kept), then the share of envelope power in
/// [0, f_hi(carrier)) that falls in each modulator band. The envelope mean
/// lands in the sub-band residual; bin sums make shares plus residual exactly 1.
inline AmResult amplitude_modulation(const Series& x, double fs, const BandScheme& bands,
                                     const WelchParams& welch = {}, int filter_order = 4) {
  std::size_t total_len = 0;
  for (const auto& e : x) total_len += e.size();
  if (static_cast<double>(total_len) < 8.0 * fs)
    throw ParameterError("amplitude modulation needs at least 8 s of signal");

  AmResult r;
  for (std::size_t c = 0; c < bands.size(); ++c) {
    const Band& carrier = bands[c];
    Series env;
    for (const auto& filtered : dsp::bandpass(x, carrier, fs, filter_order))
      env.push_back(dsp::envelope(filtered));
    std::size_t nseg = 0;
    const auto psd = dsp::welch(env, fs, welch, &nseg, false);
    const auto seg = dsp::Segmentation::make(welch, fs);
    const auto freqs = dsp::frequency_grid(seg, fs);

    double total = 0.0;
    for (std::size_t k = 0; k < freqs.size() && freqs[k] < carrier.hi; ++k) total += psd[k];
    if (!(total > 0.0))
      throw UndefinedRatioError("zero envelope power for carrier " + carrier.name);

    double covered = 0.0;
    for (std::size_t m = 0; m < bands.size(); ++m) {
      if (bands[m].hi > carrier.hi) continue;
      double acc = 0.0;
      for (std::size_t k = 0; k < freqs.size(); ++k)
        if (bands[m].contains(freqs[k])) acc += psd[k];
      r.cells.push_back({c, m, acc / total});
      covered += acc;
    }
    r.residual.push_back(std::max(0.0, (total - covered) / total));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Synchronization likelihood

struct SlParams {
  int m = 2;           // embedding dimension
  int lag = 1;         // samples
  int w1 = 1;          // Theiler window (samples)
  int w2 = 10;         // candidate window (samples)
  double p_ref = 0.05;

  friend bool operator==(const SlParams&, const SlParams&) = default;

  int span() const { return lag * (m - 1); }
  std::size_t min_length() const { return static_cast<std::size_t>(span() + w2); }

  void validate() const {
    if (m < 2) throw ParameterError("SL embedding dimension must be >= 2");
    if (lag < 1) throw ParameterError("SL lag must be >= 1");
    if (w1 < 0 || !(w1 < w2)) throw ParameterError("SL windows need 0 <= w1 < w2");
    if (!(p_ref > 0.0 && p_ref < 1.0)) throw ParameterError("SL p_ref must lie in (0, 1)");
  }
};

/// Per-band defaults: lag = max(1, round(fs / (3 f_hi))), m = ceil(3 f_hi / f_lo) + 1,
/// w1 = 2 lag (m - 1), w2 = w1 + ceil(10 / p_ref).
inline SlParams default_sl_params(const Band& band, double fs, double p_ref = 0.05) {
  SlParams p;
  p.p_ref = p_ref;
  p.lag = std::max(1, static_cast<int>(std::lround(fs / (3.0 * band.hi))));
  p.m = static_cast<int>(std::ceil(3.0 * band.hi / band.lo)) + 1;
  p.w1 = 2 * p.lag * (p.m - 1);
  p.w2 = p.w1 + static_cast<int>(std::ceil(10.0 / p_ref));
  return p;
}

/// Recurrence neighbours of every embedded state of one series: for reference
/// time i, the k = max(1, round(p_ref * n_candidates)) closest states among
/// candidates j with w1 < |i - j| < w2 in the same epoch (ties by index).
/// Computing these once per series lets SL for many pairs reuse them.
struct SlNeighbors {
  SlParams params;
  std::vector<std::size_t> vectors_per_epoch;
  std::vector<std::vector<std::uint32_t>> sets;  // sorted, one per reference time

  friend bool operator==(const SlNeighbors&, const SlNeighbors&) = default;
};

inline SlNeighbors sl_neighbors(const Series& x, const SlParams& p) {
  p.validate();
  SlNeighbors nb;
  nb.params = p;
  const auto span = static_cast<std::size_t>(p.span());
  std::vector<std::pair<double, std::uint32_t>> cand;
  for (const auto& epoch : x) {
    if (epoch.size() < p.min_length())
      throw ParameterError("SL needs epochs of at least " + std::to_string(p.min_length()) +
                           " samples (lag*(m-1) + w2), got " + std::to_string(epoch.size()));
    const std::size_t nv = epoch.size() - span;
    nb.vectors_per_epoch.push_back(nv);
    for (std::size_t i = 0; i < nv; ++i) {
      cand.clear();
      const std::size_t lo = i >= static_cast<std::size_t>(p.w2) ? i - p.w2 + 1 : 0;
      const std::size_t hi = std::min(nv, i + static_cast<std::size_t>(p.w2));
      for (std::size_t j = lo; j < hi; ++j) {
        const std::size_t gap = i > j ? i - j : j - i;
        if (gap <= static_cast<std::size_t>(p.w1)) continue;
        double d2 = 0.0;
        for (int k = 0; k < p.m; ++k) {
          const double diff = epoch[i + k * p.lag] - epoch[j + k * p.lag];
          d2 += diff * diff;
        }
        cand.emplace_back(d2, static_cast<std::uint32_t>(j));
      }
      std::vector<std::uint32_t> set;
      if (!cand.empty()) {
        const auto k = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(p.p_ref * static_cast<double>(cand.size()))));
        std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end());
        set.reserve(k);
        for (std::size_t t = 0; t < k; ++t) set.push_back(cand[t].second);
        std::sort(set.begin(), set.end());
      }
      nb.sets.push_back(std::move(set));
    }
  }
  return nb;
}

/// Mean over reference times of |N_x(i) ∩ N_y(i)| / k, clipped to [0, 1].
inline double synchronization_likelihood(const SlNeighbors& a, const SlNeighbors& b) {
  if (a.vectors_per_epoch != b.vectors_per_epoch || !(a.params == b.params))
    throw ParameterError("SL neighbour sets come from differently shaped inputs");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.sets.size(); ++i) {
    const auto& sa = a.sets[i];
    const auto& sb = b.sets[i];
    if (sa.empty()) continue;
    std::size_t common = 0;
    auto ia = sa.begin();
    auto ib = sb.begin();
    while (ia != sa.end() && ib != sb.end()) {
      if (*ia < *ib) ++ia;
      else if (*ib < *ia) ++ib;
      else {
        ++common;
        ++ia;
        ++ib;
      }
    }
    acc += static_cast<double>(common) / static_cast<double>(sa.size());
    ++n;
  }
  if (n == 0) throw ParameterError("SL has no reference times with candidates");
  return std::clamp(acc / static_cast<double>(n), 0.0, 1.0);
}

inline double synchronization_likelihood(const Series& x, const Series& y, const SlParams& p) {
  return synchronization_likelihood(sl_neighbors(x, p), sl_neighbors(y, p));
}

}  // namespace eegbio
