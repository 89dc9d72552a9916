#pragma once

// Record-level feature extraction: one grammar-named row per EpochSet.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "eegbio/connectivity.hpp"
#include "eegbio/datamodel.hpp"
#include "eegbio/error.hpp"
#include "eegbio/parallel.hpp"
#include "eegbio/spectral.hpp"

namespace eegbio {

struct FeatureConfig {
  BandScheme bands = BandScheme::standard();
  WelchParams welch;
  int filter_order = 4;
  double sl_p_ref = 0.05;
  // explicit SL overrides, applied to every band
  std::optional<int> sl_m, sl_lag, sl_w1, sl_w2;

  bool power = true;
  bool entropy = true;
  bool coherence = true;
  bool sl = true;
  bool crossfreq = true;

  SlParams sl_params(const Band& b, double fs) const {
    SlParams p = default_sl_params(b, fs, sl_p_ref);
    if (sl_m) p.m = *sl_m;
    if (sl_lag) p.lag = *sl_lag;
    if (sl_w1) p.w1 = *sl_w1;
    if (sl_w2) p.w2 = *sl_w2;
    else if (sl_w1 || sl_m || sl_lag) p.w2 = p.w1 + static_cast<int>(std::ceil(10.0 / sl_p_ref));
    p.validate();
    return p;
  }
};

inline std::vector<std::pair<std::size_t, std::size_t>> component_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) out.emplace_back(a, b);
  return out;
}

/// Column names in extraction order: metric, then band (or band pair), then
/// component (or component pair).
inline std::vector<std::string> feature_names(const FeatureConfig& cfg, std::size_t n_components) {
  std::vector<std::string> out;
  const auto& bands = cfg.bands;
  const auto pairs = component_pairs(n_components);
  if (cfg.power)
    for (const auto& b : bands)
      for (std::size_t c = 0; c < n_components; ++c) out.push_back(names::power(b, c));
  if (cfg.entropy)
    for (const auto& b : bands)
      for (std::size_t c = 0; c < n_components; ++c) out.push_back(names::entropy(b, c));
  if (cfg.coherence)
    for (const auto& b : bands)
      for (auto [x, y] : pairs) out.push_back(names::coherence(b, x, y));
  if (cfg.sl)
    for (const auto& b : bands)
      for (auto [x, y] : pairs) out.push_back(names::sl(b, x, y));
  if (cfg.crossfreq)
    for (auto [m, c] : am_pairs(bands))
      for (std::size_t k = 0; k < n_components; ++k) out.push_back(names::crossfreq(bands[m], bands[c], k));
  return out;
}

/// Human-readable feature count breakdown.
inline std::string describe(const FeatureConfig& cfg, std::size_t n_components) {
  const std::size_t nb = cfg.bands.size();
  const std::size_t np = n_components * (n_components - 1) / 2;
  const std::size_t na = am_pairs(cfg.bands).size();
  std::size_t total = 0;
  std::string out = "bands=" + std::to_string(nb) + " components=" + std::to_string(n_components) +
                    " component_pairs=" + std::to_string(np) + " am_pairs=" + std::to_string(na) + "\n";
  auto line = [&](bool on, const std::string& name, const std::string& formula, std::size_t n) {
    if (!on) return;
    out += name + ": " + formula + " = " + std::to_string(n) + "\n";
    total += n;
  };
  line(cfg.power, "power", "bands x components", nb * n_components);
  line(cfg.entropy, "entropy", "bands x components", nb * n_components);
  line(cfg.coherence, "coherence", "bands x component_pairs", nb * np);
  line(cfg.sl, "sl", "bands x component_pairs", nb * np);
  line(cfg.crossfreq, "crossfreq", "am_pairs x components", na * n_components);
  out += "total: " + std::to_string(total) + "\n";
  return out;
}

/// Features of one record, aligned with feature_names(cfg, x.n_components).
inline std::vector<double> extract_features(const EpochSet& x, const FeatureConfig& cfg) {
  validate(x);
  const auto& bands = cfg.bands;
  const std::size_t nc = x.n_components;
  const auto pairs = component_pairs(nc);
  std::vector<double> row;
  std::vector<Series> comps;
  for (std::size_t c = 0; c < nc; ++c) comps.push_back(x.component(c));

  if (cfg.power || cfg.entropy) {
    const auto psd = welch_psd(x, cfg.welch);
    if (cfg.power) {
      const auto rel = relative_power(psd, bands);
      for (std::size_t b = 0; b < bands.size(); ++b)
        for (std::size_t c = 0; c < nc; ++c) row.push_back(rel[c][b]);
    }
    if (cfg.entropy)
      for (const auto& b : bands)
        for (std::size_t c = 0; c < nc; ++c) row.push_back(spectral_entropy(psd, c, b));
  }
  if (cfg.coherence) {
    std::vector<std::vector<double>> per_pair;
    for (auto [a, b] : pairs) per_pair.push_back(coherence(comps[a], comps[b], x.fs, bands, cfg.welch).per_band);
    for (std::size_t b = 0; b < bands.size(); ++b)
      for (const auto& v : per_pair) row.push_back(v[b]);
  }
  if (cfg.sl) {
    for (const auto& band : bands) {
      const auto p = cfg.sl_params(band, x.fs);
      std::vector<SlNeighbors> nb;
      for (const auto& s : comps) nb.push_back(sl_neighbors(dsp::bandpass(s, band, x.fs, cfg.filter_order), p));
      for (auto [a, b] : pairs) row.push_back(synchronization_likelihood(nb[a], nb[b]));
    }
  }
  if (cfg.crossfreq) {
    std::vector<AmResult> am;
    for (const auto& s : comps) am.push_back(amplitude_modulation(s, x.fs, bands, cfg.welch, cfg.filter_order));
    for (auto [m, c] : am_pairs(bands))
      for (std::size_t k = 0; k < nc; ++k) row.push_back(*am[k].at(c, m));
  }
  return row;
}

/// One row per record; records are processed in parallel, rows keep input order.
inline FeatureTable extract_table(const std::vector<EpochSet>& records, const FeatureConfig& cfg,
                                  unsigned threads = 1) {
  if (records.empty()) throw EmptyInputError("no records to extract");
  const std::size_t nc = records.front().n_components;
  for (const auto& r : records)
    if (r.n_components != nc)
      throw SchemaError("record " + r.meta.subject_id + " has " + std::to_string(r.n_components) +
                        " components, expected " + std::to_string(nc));
  FeatureTable t;
  t.feature_names = feature_names(cfg, nc);
  t.values.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(t.feature_names.size()));
  for (const auto& r : records) t.rows.push_back(r.meta);
  validate_unique_ids(t.rows);
  parallel_for(records.size(), threads, [&](std::size_t i) {
    std::vector<double> row;
    try {
      row = extract_features(records[i], cfg);
    } catch (const Error& e) {
      // keep the error kind, add the record
      auto msg = "record " + records[i].meta.subject_id + ": " + e.what();
      switch (e.kind()) {
        case ErrorKind::config: throw ConfigError(msg);
        case ErrorKind::numeric: throw NumericError(msg);
        default: throw DataError(msg);
      }
    }
    for (std::size_t j = 0; j < row.size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  });
  return t;
}

}  // namespace eegbio
