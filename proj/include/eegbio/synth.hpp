#pragma once

// Seeded synthetic cohorts with known site and group structure.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "eegbio/datamodel.hpp"
#include "eegbio/dsp.hpp"
#include "eegbio/error.hpp"
#include "eegbio/features.hpp"
#include "eegbio/format.hpp"
#include "eegbio/log.hpp"
#include "eegbio/rng.hpp"

namespace eegbio {

struct CellSpec {
  std::string site;
  Group group = Group::HC;
  std::size_t count = 0;
  double age_mean = 30.0;
  double age_sd = 5.0;
  double female_fraction = 0.5;  // realized exactly as round(count * fraction)
};

struct SiteEffect {
  std::string site;
  double offset = 0.0;  // additive, times the feature's site loading
  double scale = 1.0;   // multiplies the noise term
};

struct InjectedEffect {
  std::size_t feature = 0;  // column index
  double d = 0.0;           // ACr minus HC, in noise-SD units
};

struct AgeEffect {
  std::size_t feature = 0;
  double slope = 0.0;  // feature units per year
};

struct CohortSpec {
  std::vector<CellSpec> cells;
  std::vector<SiteEffect> sites;
  std::size_t n_features = 120;
  std::vector<InjectedEffect> effects;
  std::vector<AgeEffect> age_effects;
  double noise_sd = 1.0;
  double age_reference = 30.0;
  /// Standardize the noise within each (site, group) cell so injected shifts
  /// are realized exactly rather than up to sampling error.
  bool exact_effects = true;
  /// Place two F and two M records of each group at the cohort's minimum and
  /// maximum age, so both groups span the full propensity range.
  bool anchor_support = true;
  /// Per-feature site loading drawn from [0.5, 1.5); off means every loading is 1.
  bool varied_loading = true;
  std::uint64_t seed = 1;

  void validate() const {
    if (cells.empty()) throw ParameterError("cohort spec has no cells");
    for (const auto& c : cells) {
      if (c.site.empty()) throw ParameterError("cohort cell without a site");
      if (!(c.age_sd > 0.0)) throw ParameterError("cell " + c.site + " needs age_sd > 0");
      if (!(c.age_mean > 0.0 && c.age_mean < 120.0)) throw ParameterError("cell " + c.site + " age_mean out of range");
      if (!(c.female_fraction >= 0.0 && c.female_fraction <= 1.0))
        throw ParameterError("cell " + c.site + " female_fraction must lie in [0, 1]");
    }
    for (const auto& s : sites)
      if (!(s.scale > 0.0) || !std::isfinite(s.offset)) throw ParameterError("site " + s.site + " effect invalid");
    if (n_features == 0) throw ParameterError("n_features must be >= 1");
    if (!(noise_sd > 0.0)) throw ParameterError("noise_sd must be > 0");
    for (const auto& e : effects)
      if (e.feature >= n_features || !std::isfinite(e.d)) throw ParameterError("injected effect out of range");
    for (const auto& a : age_effects)
      if (a.feature >= n_features || !std::isfinite(a.slope)) throw ParameterError("age effect out of range");
  }

  const SiteEffect* site_effect(const std::string& s) const {
    for (const auto& e : sites)
      if (e.site == s) return &e;
    return nullptr;
  }
};

/// Four sites shaped like the 2:1 pool (79 ACr / 158 HC) with its age and
/// sex moments, site confounds, and 5 informative features at |d| = 1.
inline CohortSpec default_cohort_spec(std::uint64_t seed = 1) {
  CohortSpec s;
  s.seed = seed;
  s.cells = {
      {"CHBMP", Group::HC, 38, 27.63, 6.67, 13.0 / 38.0},
      {"SRM", Group::HC, 31, 30.77, 5.21, 19.0 / 31.0},
      {"UdeA1", Group::ACr, 68, 35.81, 4.36, 49.0 / 68.0},
      {"UdeA1", Group::HC, 77, 30.45, 4.81, 47.0 / 77.0},
      {"UdeA2", Group::ACr, 11, 33.45, 3.64, 9.0 / 11.0},
      {"UdeA2", Group::HC, 12, 31.42, 7.15, 10.0 / 12.0},
  };
  s.sites = {{"CHBMP", 1.0, 1.2}, {"SRM", -0.8, 0.85}, {"UdeA1", 0.0, 1.0}, {"UdeA2", 0.6, 0.9}};
  s.n_features = 120;
  const double signs[] = {1.0, 1.0, -1.0, 1.0, -1.0};
  for (std::size_t k = 0; k < 5; ++k) s.effects.push_back({7 + 24 * k, signs[k]});
  s.age_effects = {{3, 0.05}, {50, 0.05}, {99, -0.05}};
  return s;
}

/// Two sites, n per site, one feature ~ N(0, 1) with `offset` added at site A.
inline CohortSpec two_site_offset_spec(std::size_t n_per_site = 200, double offset = 2.0, std::uint64_t seed = 7) {
  CohortSpec s;
  s.seed = seed;
  const std::size_t half = n_per_site / 2;
  s.cells = {{"A", Group::HC, n_per_site - half, 32.0, 5.0, 0.5},
             {"A", Group::ACr, half, 32.0, 5.0, 0.5},
             {"B", Group::HC, n_per_site - half, 32.0, 5.0, 0.5},
             {"B", Group::ACr, half, 32.0, 5.0, 0.5}};
  s.sites = {{"A", offset, 1.0}, {"B", 0.0, 1.0}};
  s.n_features = 1;
  s.exact_effects = false;
  s.anchor_support = false;
  s.varied_loading = false;
  return s;
}

/// Names for synthetic columns: evenly spaced picks from the full
/// 9-component grammar, so tables look like extractor output.
inline std::vector<std::string> synthetic_feature_names(std::size_t n) {
  const auto all = feature_names(FeatureConfig{}, 9);
  if (n > all.size()) throw ParameterError("at most " + std::to_string(all.size()) + " synthetic features");
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(all[k * all.size() / n]);
  return out;
}

inline std::vector<RecordMeta> generate_records(const CohortSpec& spec) {
  spec.validate();
  const Rng rng(spec.seed);
  std::vector<RecordMeta> out;
  std::map<std::pair<std::string, Group>, std::size_t> serial;
  for (std::size_t ci = 0; ci < spec.cells.size(); ++ci) {
    const auto& cell = spec.cells[ci];
    auto stream = rng.derive(ci);
    const auto n_f = static_cast<std::size_t>(std::lround(static_cast<double>(cell.count) * cell.female_fraction));
    std::vector<Sex> sexes(cell.count, Sex::M);
    std::fill(sexes.begin(), sexes.begin() + static_cast<std::ptrdiff_t>(n_f), Sex::F);
    stream.shuffle(std::span(sexes));
    const double lo = std::max(1.0, cell.age_mean - 3.0 * cell.age_sd);
    const double hi = std::min(119.0, cell.age_mean + 3.0 * cell.age_sd);
    for (std::size_t i = 0; i < cell.count; ++i) {
      RecordMeta r;
      r.site = cell.site;
      r.group = cell.group;
      char id[64];
      std::snprintf(id, sizeof id, "%s-%s-%03zu", cell.site.c_str(), std::string(to_string(cell.group)).c_str(),
                    ++serial[{cell.site, cell.group}]);
      r.subject_id = id;
      r.sex = sexes[i];
      r.age = std::round(std::clamp(stream.normal(cell.age_mean, cell.age_sd), lo, hi) * 100.0) / 100.0;
      out.push_back(std::move(r));
    }
  }
  if (spec.anchor_support && !out.empty()) {
    double amin = out.front().age, amax = out.front().age;
    for (const auto& r : out) amin = std::min(amin, r.age), amax = std::max(amax, r.age);
    for (Group g : {Group::HC, Group::ACr}) {
      for (Sex s : {Sex::F, Sex::M}) {
        std::vector<RecordMeta*> pick;
        for (auto& r : out)
          if (r.group == g && r.sex == s && pick.size() < 2) pick.push_back(&r);
        if (pick.size() < 2) {
          log::warn("anchor_support: fewer than 2 " + std::string(to_string(s)) + " records in group " +
                    std::string(to_string(g)) + "; anchors skipped");
          continue;
        }
        pick[0]->age = amin;
        pick[1]->age = amax;
      }
    }
  }
  validate_unique_ids(out);
  return out;
}

struct FeatureTruth {
  std::string feature;
  std::string role;  // informative, age, noise
  double d = 0.0;
  double age_slope = 0.0;
  double site_loading = 0.0;
};

struct GroundTruth {
  std::vector<FeatureTruth> features;
  std::vector<SiteEffect> sites;
};

inline std::string format_ground_truth(const GroundTruth& g) {
  std::string out = "feature,role,d,age_slope,site_loading\n";
  for (const auto& f : g.features)
    out += f.feature + "," + f.role + "," + fmt::shortest(f.d) + "," + fmt::shortest(f.age_slope) + "," +
           fmt::shortest(f.site_loading) + "\n";
  return out;
}

inline std::string format_site_truth(const GroundTruth& g) {
  std::string out = "site,offset,scale\n";
  for (const auto& s : g.sites) out += s.site + "," + fmt::shortest(s.offset) + "," + fmt::shortest(s.scale) + "\n";
  return out;
}

/// feature = noise_sd * scale_site * eps + d * noise_sd * [ACr]
///           + slope * (age - age_reference) + offset_site * loading_f
inline FeatureTable generate_feature_cohort(const CohortSpec& spec, GroundTruth* truth = nullptr) {
  FeatureTable t;
  t.rows = generate_records(spec);
  t.feature_names = synthetic_feature_names(spec.n_features);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  t.values.resize(n, static_cast<Eigen::Index>(spec.n_features));

  std::vector<double> shift(spec.n_features, 0.0), slope(spec.n_features, 0.0);
  for (const auto& e : spec.effects) shift[e.feature] = e.d;
  for (const auto& a : spec.age_effects) slope[a.feature] = a.slope;

  // (site, group) cells for exact standardization
  std::map<std::pair<std::string, Group>, std::vector<Eigen::Index>> cells;
  for (Eigen::Index i = 0; i < n; ++i) cells[{t.rows[static_cast<std::size_t>(i)].site, t.rows[static_cast<std::size_t>(i)].group}].push_back(i);

  const Rng rng(spec.seed);
  GroundTruth gt;
  gt.sites = spec.sites;
  for (std::size_t f = 0; f < spec.n_features; ++f) {
    auto stream = rng.derive(1000 + f);
    const double draw = stream.uniform();
    const double loading = spec.varied_loading ? 0.5 + draw : 1.0;
    Eigen::VectorXd eps(n);
    for (Eigen::Index i = 0; i < n; ++i) eps(i) = stream.normal();
    if (spec.exact_effects) {
      for (const auto& [key, idx] : cells) {
        if (idx.size() < 2) continue;
        double m = 0.0, ss = 0.0;
        for (auto i : idx) m += eps(i);
        m /= static_cast<double>(idx.size());
        for (auto i : idx) ss += (eps(i) - m) * (eps(i) - m);
        const double sd = std::sqrt(ss / static_cast<double>(idx.size() - 1));
        for (auto i : idx) eps(i) = sd > 0.0 ? (eps(i) - m) / sd : 0.0;
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& r = t.rows[static_cast<std::size_t>(i)];
      const SiteEffect* se = spec.site_effect(r.site);
      const double scale = se ? se->scale : 1.0;
      const double offset = se ? se->offset : 0.0;
      t.values(i, static_cast<Eigen::Index>(f)) =
          spec.noise_sd * scale * eps(i) + (r.group == Group::ACr ? shift[f] * spec.noise_sd : 0.0) +
          slope[f] * (r.age - spec.age_reference) + offset * loading;
    }
    const std::string role = shift[f] != 0.0 ? "informative" : (slope[f] != 0.0 ? "age" : "noise");
    gt.features.push_back({t.feature_names[f], role, shift[f], slope[f], loading});
  }
  if (truth) *truth = std::move(gt);
  return t;
}

// ---------------------------------------------------------------------------
// Epoch-level recipes

struct EpochRecipe {
  std::string name = "white-noise";  // sine, am-tone, filtered-noise, coupled-pair, white-noise
  double fs = 250.0;
  double epoch_seconds = 5.0;
  std::size_t n_epochs = 12;
  std::size_t n_components = 2;
  double freq = 10.0;     // sine
  double carrier = 35.0;  // am-tone
  double modulator = 4.0;
  double depth = 1.0;
  double band_lo = 8.5;  // filtered-noise
  double band_hi = 10.5;
  double rho = 1.0;  // coupled-pair
  std::size_t delay = 0;
  double noise_sd = 0.1;  // additive white noise for tone recipes

  static const std::vector<std::string>& known() {
    static const std::vector<std::string> k = {"sine", "am-tone", "filtered-noise", "coupled-pair", "white-noise"};
    return k;
  }

  void validate() const {
    if (std::find(known().begin(), known().end(), name) == known().end())
      throw ParameterError("unknown signal recipe '" + name + "'");
    if (!(fs > 0.0) || !(epoch_seconds > 0.0)) throw ParameterError("recipe fs and epoch_seconds must be > 0");
    if (n_epochs == 0 || n_components == 0) throw ParameterError("recipe needs epochs and components");
    if (!(rho >= -1.0 && rho <= 1.0)) throw ParameterError("coupled-pair rho must lie in [-1, 1]");
    if (!(noise_sd >= 0.0)) throw ParameterError("noise_sd must be >= 0");
  }
};

/// One record's epochs under `recipe`, drawn from `rng`.
inline EpochSet generate_epochs(const RecordMeta& meta, const EpochRecipe& recipe, Rng rng) {
  recipe.validate();
  EpochSet x;
  x.meta = meta;
  x.fs = recipe.fs;
  x.epoch_seconds = recipe.epoch_seconds;
  x.n_epochs = recipe.n_epochs;
  x.n_components = recipe.n_components;
  x.n_samples = static_cast<std::size_t>(std::lround(recipe.fs * recipe.epoch_seconds));
  x.data.assign(x.n_epochs * x.n_components * x.n_samples, 0.0);
  const std::size_t ns = x.n_samples;
  const double two_pi = 2.0 * std::numbers::pi;
  auto white = [&](std::size_t len) {
    std::vector<double> v(len);
    for (auto& s : v) s = rng.normal();
    return v;
  };
  for (std::size_t e = 0; e < x.n_epochs; ++e) {
    std::vector<double> shared;
    if (recipe.name == "coupled-pair") shared = white(ns + recipe.delay);
    for (std::size_t c = 0; c < x.n_components; ++c) {
      std::vector<double> s(ns, 0.0);
      if (recipe.name == "sine") {
        const double ph = two_pi * rng.uniform();
        for (std::size_t i = 0; i < ns; ++i) s[i] = std::sin(two_pi * recipe.freq * i / recipe.fs + ph);
      } else if (recipe.name == "am-tone") {
        const double pc = two_pi * rng.uniform(), pm = two_pi * rng.uniform();
        for (std::size_t i = 0; i < ns; ++i) {
          const double t = i / recipe.fs;
          s[i] = (1.0 + recipe.depth * std::cos(two_pi * recipe.modulator * t + pm)) *
                 std::sin(two_pi * recipe.carrier * t + pc);
        }
      } else if (recipe.name == "filtered-noise") {
        const auto w = white(ns);
        s = dsp::filtfilt(dsp::butter_bandpass(4, recipe.band_lo, recipe.band_hi, recipe.fs), w);
      } else if (recipe.name == "coupled-pair" && c < 2) {
        if (c == 0) {
          std::copy(shared.begin() + static_cast<std::ptrdiff_t>(recipe.delay), shared.end(), s.begin());
        } else {
          const auto w = white(ns);
          const double k = std::sqrt(std::max(0.0, 1.0 - recipe.rho * recipe.rho));
          for (std::size_t i = 0; i < ns; ++i) s[i] = recipe.rho * shared[i] + k * w[i];
        }
      } else {  // white-noise, and components beyond the coupled pair
        s = white(ns);
      }
      const bool tone = recipe.name == "sine" || recipe.name == "am-tone";
      if (tone && recipe.noise_sd > 0.0)
        for (auto& v : s) v += recipe.noise_sd * rng.normal();
      std::copy(s.begin(), s.end(), x.data.begin() + static_cast<std::ptrdiff_t>(x.offset(e, c)));
    }
  }
  validate(x);
  return x;
}

/// Epochs for every record of `spec`; record i draws from stream derive(i).
inline std::vector<EpochSet> generate_epoch_cohort(const CohortSpec& spec, const EpochRecipe& recipe) {
  recipe.validate();
  const auto records = generate_records(spec);
  const Rng rng(spec.seed ^ 0xE70C5ULL);
  std::vector<EpochSet> out;
  for (std::size_t i = 0; i < records.size(); ++i) out.push_back(generate_epochs(records[i], recipe, rng.derive(i)));
  return out;
}

// ---------------------------------------------------------------------------
// Spec files for `synth --spec`
//
//   base = default | empty        (must come first when present)
//   seed = 1
//   n_features = 120
//   noise_sd = 1
//   age_reference = 30
//   exact_effects = true
//   anchor_support = true
//   varied_loading = true
//   cell = UdeA1,ACr,68,35.81,4.36,0.72   site,group,count,age_mean,age_sd,female_fraction
//   site = UdeA1,0,1                       site,offset,scale
//   effect = 7,1.0                         column,d
//   age_effect = 3,0.05                    column,slope
//   recipe.name = sine                     any recipe.* key switches to epoch output
//
// List keys (cell, site, effect, age_effect) replace the base list on first use.

struct SynthSpec {
  CohortSpec cohort;
  std::optional<EpochRecipe> recipe;
};

inline SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec out;
  std::set<std::string> replaced;
  auto num = [](const std::string& key, const std::string& v) {
    const auto d = fmt::parse_double(v);
    if (!d) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return *d;
  };
  auto count = [](const std::string& key, const std::string& v) {
    const auto n = fmt::parse_int(v);
    if (!n || *n < 0) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(*n);
  };
  auto boolean = [](const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
  };
  auto fields = [](const std::string& key, const std::string& v, std::size_t n) {
    auto f = fmt::split(v, ',');
    for (auto& x : f) x = fmt::trim(x);
    if (f.size() != n) throw ConfigError(key + ": expected " + std::to_string(n) + " comma-separated fields");
    return f;
  };
  auto fresh = [&](const std::string& key, auto& list) {
    if (replaced.insert(key).second) list.clear();
  };
  std::size_t lineno = 0;
  for (const auto& raw : fmt::split(text, '\n')) {
    ++lineno;
    const auto line = fmt::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("spec line " + std::to_string(lineno) + ": expected key = value");
    const auto key = fmt::trim(line.substr(0, eq));
    const auto val = fmt::trim(line.substr(eq + 1));
    auto& c = out.cohort;
    if (key == "base") {
      if (lineno != 1 && !replaced.empty()) throw ConfigError("base must precede list keys");
      const auto seed = c.seed;
      if (val == "default") c = default_cohort_spec(seed);
      else if (val == "empty") c = CohortSpec{}, c.seed = seed;
      else throw ConfigError("base: expected default or empty");
    } else if (key == "seed") {
      const auto n = fmt::parse_int(val);
      if (!n || *n < 0) throw ConfigError("seed: expected a non-negative integer");
      c.seed = static_cast<std::uint64_t>(*n);
    } else if (key == "n_features") {
      c.n_features = count(key, val);
    } else if (key == "noise_sd") {
      c.noise_sd = num(key, val);
    } else if (key == "age_reference") {
      c.age_reference = num(key, val);
    } else if (key == "exact_effects") {
      c.exact_effects = boolean(key, val);
    } else if (key == "anchor_support") {
      c.anchor_support = boolean(key, val);
    } else if (key == "varied_loading") {
      c.varied_loading = boolean(key, val);
    } else if (key == "cell") {
      fresh(key, c.cells);
      const auto f = fields(key, val, 6);
      const auto g = parse_group(f[1]);
      if (!g) throw ConfigError("cell: unknown group '" + f[1] + "'");
      c.cells.push_back({f[0], *g, count(key, f[2]), num(key, f[3]), num(key, f[4]), num(key, f[5])});
    } else if (key == "site") {
      fresh(key, c.sites);
      const auto f = fields(key, val, 3);
      c.sites.push_back({f[0], num(key, f[1]), num(key, f[2])});
    } else if (key == "effect") {
      fresh(key, c.effects);
      const auto f = fields(key, val, 2);
      c.effects.push_back({count(key, f[0]), num(key, f[1])});
    } else if (key == "age_effect") {
      fresh(key, c.age_effects);
      const auto f = fields(key, val, 2);
      c.age_effects.push_back({count(key, f[0]), num(key, f[1])});
    } else if (key.rfind("recipe.", 0) == 0) {
      if (!out.recipe) out.recipe.emplace();
      auto& r = *out.recipe;
      const auto k = key.substr(7);
      if (k == "name") r.name = val;
      else if (k == "fs") r.fs = num(key, val);
      else if (k == "epoch_seconds") r.epoch_seconds = num(key, val);
      else if (k == "n_epochs") r.n_epochs = count(key, val);
      else if (k == "n_components") r.n_components = count(key, val);
      else if (k == "freq") r.freq = num(key, val);
      else if (k == "carrier") r.carrier = num(key, val);
      else if (k == "modulator") r.modulator = num(key, val);
      else if (k == "depth") r.depth = num(key, val);
      else if (k == "band_lo") r.band_lo = num(key, val);
      else if (k == "band_hi") r.band_hi = num(key, val);
      else if (k == "rho") r.rho = num(key, val);
      else if (k == "delay") r.delay = count(key, val);
      else if (k == "noise_sd") r.noise_sd = num(key, val);
      else throw ConfigError("unknown spec key '" + key + "'");
    } else {
      throw ConfigError("unknown spec key '" + key + "'");
    }
  }
  out.cohort.validate();
  if (out.recipe) out.recipe->validate();
  return out;
}

inline std::string format_synth_spec(const SynthSpec& s) {
  const auto& c = s.cohort;
  std::string out = "base = empty\nseed = " + std::to_string(c.seed) + "\nn_features = " + std::to_string(c.n_features) +
                    "\nnoise_sd = " + fmt::shortest(c.noise_sd) + "\nage_reference = " + fmt::shortest(c.age_reference) +
                    "\nexact_effects = " + (c.exact_effects ? "true" : "false") +
                    "\nanchor_support = " + (c.anchor_support ? "true" : "false") +
                    "\nvaried_loading = " + (c.varied_loading ? "true" : "false") + "\n";
  for (const auto& x : c.cells)
    out += "cell = " + x.site + "," + std::string(to_string(x.group)) + "," + std::to_string(x.count) + "," +
           fmt::shortest(x.age_mean) + "," + fmt::shortest(x.age_sd) + "," + fmt::shortest(x.female_fraction) + "\n";
  for (const auto& x : c.sites)
    out += "site = " + x.site + "," + fmt::shortest(x.offset) + "," + fmt::shortest(x.scale) + "\n";
  for (const auto& x : c.effects) out += "effect = " + std::to_string(x.feature) + "," + fmt::shortest(x.d) + "\n";
  for (const auto& x : c.age_effects)
    out += "age_effect = " + std::to_string(x.feature) + "," + fmt::shortest(x.slope) + "\n";
  if (s.recipe) {
    const auto& r = *s.recipe;
    out += "recipe.name = " + r.name + "\nrecipe.fs = " + fmt::shortest(r.fs) +
           "\nrecipe.epoch_seconds = " + fmt::shortest(r.epoch_seconds) + "\nrecipe.n_epochs = " +
           std::to_string(r.n_epochs) + "\nrecipe.n_components = " + std::to_string(r.n_components) +
           "\nrecipe.freq = " + fmt::shortest(r.freq) + "\nrecipe.carrier = " + fmt::shortest(r.carrier) +
           "\nrecipe.modulator = " + fmt::shortest(r.modulator) + "\nrecipe.depth = " + fmt::shortest(r.depth) +
           "\nrecipe.band_lo = " + fmt::shortest(r.band_lo) + "\nrecipe.band_hi = " + fmt::shortest(r.band_hi) +
           "\nrecipe.rho = " + fmt::shortest(r.rho) + "\nrecipe.delay = " + std::to_string(r.delay) +
           "\nrecipe.noise_sd = " + fmt::shortest(r.noise_sd) + "\n";
  }
  return out;
}

}  // namespace eegbio
