#pragma once

// Pipeline configuration: flat `section.key = value` text.
//
// Precedence (later wins): built-in defaults, config file, --set overrides,
// dedicated CLI flags (--seed, --threads, --out-dir).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eegbio/datamodel.hpp"
#include "eegbio/error.hpp"
#include "eegbio/evaluate.hpp"
#include "eegbio/features.hpp"
#include "eegbio/format.hpp"
#include "eegbio/io.hpp"
#include "eegbio/psm.hpp"

namespace eegbio {

struct PipelineConfig {
  // run
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out_dir = "out";

  // input: a feature table, a directory of epoch bundles, or (neither) the default synthetic cohort
  std::string features_path;
  std::string epochs_dir;
  bool allow_missing = false;

  // synthetic cohort
  std::size_t synth_n_features = 120;
  double synth_effect_d = 1.0;
  bool synth_exact_effects = true;
  bool synth_anchor_support = true;

  // extraction
  FeatureConfig features;

  // harmonization
  bool harmonize = true;
  bool preserve_group = false;
  bool empirical_bayes = true;

  // matching
  std::vector<int> ratios = {2, 5, 10};
  MatchStrategy strategy = MatchStrategy::trim;

  // selection and training
  double corr_threshold = 0.95;
  std::size_t top_k = 100;
  double select_threshold = 0.6;
  int select_eval_depth = 2;
  int max_depth = 8;
  int min_leaf = 2;

  // evaluation
  double test_fraction = 0.2;
  std::size_t cv_folds = 10;
  Group positive_class = Group::HC;
  std::vector<double> curve_sizes = default_curve_sizes();
};

namespace config_detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline double parse_num(const std::string& key, const std::string& v) {
  const auto d = fmt::parse_double(v);
  if (!d || !std::isfinite(*d)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  const auto i = fmt::parse_int(v);
  if (!i) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return *i;
}

inline std::string bool_str(bool b) { return b ? "true" : "false"; }

/// "delta:1.5-6,theta:6-8.5,..." or "standard".
inline BandScheme parse_bands(const std::string& key, const std::string& v) {
  if (v == "standard") return BandScheme::standard();
  std::vector<Band> bands;
  for (const auto& item : fmt::split(v, ',')) {
    const auto colon = item.find(':');
    const auto dash = item.find('-', colon == std::string::npos ? 0 : colon);
    if (colon == std::string::npos || dash == std::string::npos)
      throw ConfigError(key + ": band '" + item + "' is not name:lo-hi");
    bands.push_back({fmt::trim(item.substr(0, colon)), parse_num(key, item.substr(colon + 1, dash - colon - 1)),
                     parse_num(key, item.substr(dash + 1))});
  }
  try {
    return BandScheme(bands);
  } catch (const Error& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

inline std::string format_bands(const BandScheme& b) {
  if (b == BandScheme::standard()) return "standard";
  std::vector<std::string> parts;
  for (const auto& band : b) parts.push_back(band.name + ":" + fmt::shortest(band.lo) + "-" + fmt::shortest(band.hi));
  return fmt::join(parts, ",");
}

template <class T, class F>
std::vector<T> parse_list(const std::string& v, F&& one) {
  std::vector<T> out;
  for (const auto& s : fmt::split(v, ',')) out.push_back(one(fmt::trim(s)));
  return out;
}

inline std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : "auto"; }

struct Entry {
  std::string key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

inline const std::vector<Entry>& entries() {
  using C = PipelineConfig;
  auto sl_override = [](std::optional<int> FeatureConfig::*field) {
    return [field](C& c, const std::string& v) {
      c.features.*field = v == "auto" ? std::nullopt : std::optional<int>(static_cast<int>(parse_integer("sl", v)));
    };
  };
  static const std::vector<Entry> e = {
      {"run.seed", [](C& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_integer("run.seed", v)); },
       [](const C& c) { return std::to_string(c.seed); }},
      {"run.threads", [](C& c, const std::string& v) { c.threads = static_cast<unsigned>(parse_integer("run.threads", v)); },
       [](const C& c) { return std::to_string(c.threads); }},
      {"run.out_dir", [](C& c, const std::string& v) { c.out_dir = v; }, [](const C& c) { return c.out_dir; }},
      {"input.features", [](C& c, const std::string& v) { c.features_path = v; },
       [](const C& c) { return c.features_path; }},
      {"input.epochs_dir", [](C& c, const std::string& v) { c.epochs_dir = v; },
       [](const C& c) { return c.epochs_dir; }},
      {"input.allow_missing", [](C& c, const std::string& v) { c.allow_missing = parse_bool("input.allow_missing", v); },
       [](const C& c) { return bool_str(c.allow_missing); }},
      {"synth.n_features",
       [](C& c, const std::string& v) { c.synth_n_features = static_cast<std::size_t>(parse_integer("synth.n_features", v)); },
       [](const C& c) { return std::to_string(c.synth_n_features); }},
      {"synth.effect_d", [](C& c, const std::string& v) { c.synth_effect_d = parse_num("synth.effect_d", v); },
       [](const C& c) { return fmt::shortest(c.synth_effect_d); }},
      {"synth.exact_effects",
       [](C& c, const std::string& v) { c.synth_exact_effects = parse_bool("synth.exact_effects", v); },
       [](const C& c) { return bool_str(c.synth_exact_effects); }},
      {"synth.anchor_support",
       [](C& c, const std::string& v) { c.synth_anchor_support = parse_bool("synth.anchor_support", v); },
       [](const C& c) { return bool_str(c.synth_anchor_support); }},
      {"features.bands", [](C& c, const std::string& v) { c.features.bands = parse_bands("features.bands", v); },
       [](const C& c) { return format_bands(c.features.bands); }},
      {"features.filter_order",
       [](C& c, const std::string& v) { c.features.filter_order = static_cast<int>(parse_integer("features.filter_order", v)); },
       [](const C& c) { return std::to_string(c.features.filter_order); }},
      {"features.power", [](C& c, const std::string& v) { c.features.power = parse_bool("features.power", v); },
       [](const C& c) { return bool_str(c.features.power); }},
      {"features.entropy", [](C& c, const std::string& v) { c.features.entropy = parse_bool("features.entropy", v); },
       [](const C& c) { return bool_str(c.features.entropy); }},
      {"features.coherence", [](C& c, const std::string& v) { c.features.coherence = parse_bool("features.coherence", v); },
       [](const C& c) { return bool_str(c.features.coherence); }},
      {"features.sl", [](C& c, const std::string& v) { c.features.sl = parse_bool("features.sl", v); },
       [](const C& c) { return bool_str(c.features.sl); }},
      {"features.crossfreq", [](C& c, const std::string& v) { c.features.crossfreq = parse_bool("features.crossfreq", v); },
       [](const C& c) { return bool_str(c.features.crossfreq); }},
      {"welch.seg_seconds", [](C& c, const std::string& v) { c.features.welch.seg_seconds = parse_num("welch.seg_seconds", v); },
       [](const C& c) { return fmt::shortest(c.features.welch.seg_seconds); }},
      {"welch.overlap", [](C& c, const std::string& v) { c.features.welch.overlap = parse_num("welch.overlap", v); },
       [](const C& c) { return fmt::shortest(c.features.welch.overlap); }},
      {"sl.p_ref", [](C& c, const std::string& v) { c.features.sl_p_ref = parse_num("sl.p_ref", v); },
       [](const C& c) { return fmt::shortest(c.features.sl_p_ref); }},
      {"sl.m", sl_override(&FeatureConfig::sl_m), [](const C& c) { return opt_int(c.features.sl_m); }},
      {"sl.lag", sl_override(&FeatureConfig::sl_lag), [](const C& c) { return opt_int(c.features.sl_lag); }},
      {"sl.w1", sl_override(&FeatureConfig::sl_w1), [](const C& c) { return opt_int(c.features.sl_w1); }},
      {"sl.w2", sl_override(&FeatureConfig::sl_w2), [](const C& c) { return opt_int(c.features.sl_w2); }},
      {"harmonize.enabled", [](C& c, const std::string& v) { c.harmonize = parse_bool("harmonize.enabled", v); },
       [](const C& c) { return bool_str(c.harmonize); }},
      {"harmonize.preserve_group",
       [](C& c, const std::string& v) { c.preserve_group = parse_bool("harmonize.preserve_group", v); },
       [](const C& c) { return bool_str(c.preserve_group); }},
      {"harmonize.empirical_bayes",
       [](C& c, const std::string& v) { c.empirical_bayes = parse_bool("harmonize.empirical_bayes", v); },
       [](const C& c) { return bool_str(c.empirical_bayes); }},
      {"match.ratios",
       [](C& c, const std::string& v) {
         c.ratios = parse_list<int>(v, [](const std::string& s) { return static_cast<int>(parse_integer("match.ratios", s)); });
       },
       [](const C& c) {
         std::vector<std::string> s;
         for (int r : c.ratios) s.push_back(std::to_string(r));
         return fmt::join(s, ",");
       }},
      {"match.strategy",
       [](C& c, const std::string& v) {
         if (v == "trim") c.strategy = MatchStrategy::trim;
         else if (v == "nn") c.strategy = MatchStrategy::nearest_neighbor;
         else throw ConfigError("match.strategy: expected trim or nn, got '" + v + "'");
       },
       [](const C& c) { return std::string(c.strategy == MatchStrategy::trim ? "trim" : "nn"); }},
      {"select.corr_threshold", [](C& c, const std::string& v) { c.corr_threshold = parse_num("select.corr_threshold", v); },
       [](const C& c) { return fmt::shortest(c.corr_threshold); }},
      {"select.top_k", [](C& c, const std::string& v) { c.top_k = static_cast<std::size_t>(parse_integer("select.top_k", v)); },
       [](const C& c) { return std::to_string(c.top_k); }},
      {"select.threshold", [](C& c, const std::string& v) { c.select_threshold = parse_num("select.threshold", v); },
       [](const C& c) { return fmt::shortest(c.select_threshold); }},
      {"select.eval_depth",
       [](C& c, const std::string& v) { c.select_eval_depth = static_cast<int>(parse_integer("select.eval_depth", v)); },
       [](const C& c) { return std::to_string(c.select_eval_depth); }},
      {"tree.max_depth", [](C& c, const std::string& v) { c.max_depth = static_cast<int>(parse_integer("tree.max_depth", v)); },
       [](const C& c) { return std::to_string(c.max_depth); }},
      {"tree.min_leaf", [](C& c, const std::string& v) { c.min_leaf = static_cast<int>(parse_integer("tree.min_leaf", v)); },
       [](const C& c) { return std::to_string(c.min_leaf); }},
      {"evaluate.test_fraction",
       [](C& c, const std::string& v) { c.test_fraction = parse_num("evaluate.test_fraction", v); },
       [](const C& c) { return fmt::shortest(c.test_fraction); }},
      {"evaluate.cv_folds",
       [](C& c, const std::string& v) { c.cv_folds = static_cast<std::size_t>(parse_integer("evaluate.cv_folds", v)); },
       [](const C& c) { return std::to_string(c.cv_folds); }},
      {"evaluate.positive_class",
       [](C& c, const std::string& v) {
         const auto g = parse_group(v);
         if (!g) throw ConfigError("evaluate.positive_class: expected HC or ACr, got '" + v + "'");
         c.positive_class = *g;
       },
       [](const C& c) { return std::string(to_string(c.positive_class)); }},
      {"evaluate.curve_sizes",
       [](C& c, const std::string& v) {
         c.curve_sizes = parse_list<double>(v, [](const std::string& s) { return parse_num("evaluate.curve_sizes", s); });
       },
       [](const C& c) {
         std::vector<std::string> s;
         for (double d : c.curve_sizes) s.push_back(fmt::shortest(d));
         return fmt::join(s, ",");
       }},
  };
  return e;
}

inline const Entry* find(const std::string& key) {
  for (const auto& e : entries())
    if (e.key == key) return &e;
  return nullptr;
}

}  // namespace config_detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& e : config_detail::entries()) k.push_back(e.key);
  return k;
}

inline void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  const auto* e = config_detail::find(key);
  if (!e) throw ConfigError("unknown config key '" + key + "'");
  e->set(c, value);
}

/// Range checks across all fields; run before any stage.
inline void validate(const PipelineConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (c.threads < 1) fail("run.threads must be >= 1");
  if (c.out_dir.empty()) fail("run.out_dir must not be empty");
  if (!c.features_path.empty() && !c.epochs_dir.empty()) fail("set at most one of input.features and input.epochs_dir");
  if (c.synth_n_features < 5) fail("synth.n_features must be >= 5 (five informative features are injected)");
  if (c.synth_n_features > 1044) fail("synth.n_features must be <= 1044");
  if (c.features.filter_order < 1 || c.features.filter_order > 10) fail("features.filter_order must lie in [1, 10]");
  if (!(c.features.welch.seg_seconds > 0.0)) fail("welch.seg_seconds must be > 0");
  if (!(c.features.welch.overlap >= 0.0 && c.features.welch.overlap < 1.0)) fail("welch.overlap must lie in [0, 1)");
  if (!(c.features.sl_p_ref > 0.0 && c.features.sl_p_ref < 1.0)) fail("sl.p_ref must lie in (0, 1)");
  if (!(c.features.power || c.features.entropy || c.features.coherence || c.features.sl || c.features.crossfreq))
    fail("at least one feature family must be enabled");
  if (c.ratios.empty()) fail("match.ratios must list at least one ratio");
  for (int r : c.ratios)
    if (r < 1) fail("match.ratios entries must be positive integers");
  if (!(c.corr_threshold > 0.0 && c.corr_threshold <= 1.0)) fail("select.corr_threshold must lie in (0, 1]");
  if (c.top_k < 1) fail("select.top_k must be >= 1");
  if (!(c.select_threshold >= 0.0)) fail("select.threshold must be >= 0");
  if (c.select_eval_depth < 1) fail("select.eval_depth must be >= 1");
  if (c.max_depth < 1) fail("tree.max_depth must be >= 1");
  if (c.min_leaf < 1) fail("tree.min_leaf must be >= 1");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) fail("evaluate.test_fraction must lie in (0, 1)");
  if (c.cv_folds < 2) fail("evaluate.cv_folds must be >= 2");
  if (c.curve_sizes.empty()) fail("evaluate.curve_sizes must not be empty");
  for (std::size_t i = 0; i < c.curve_sizes.size(); ++i) {
    if (!(c.curve_sizes[i] > 0.0 && c.curve_sizes[i] <= 1.0)) fail("evaluate.curve_sizes must lie in (0, 1]");
    if (i > 0 && !(c.curve_sizes[i] > c.curve_sizes[i - 1])) fail("evaluate.curve_sizes must be ascending");
  }
}

/// Parses config text onto `base`. Blank lines and '#' comments are ignored;
/// a key may appear once.
inline PipelineConfig parse_config(const std::string& text, PipelineConfig base = {}) {
  std::map<std::string, std::size_t> seen;
  const auto l = io::lines(text);
  for (std::size_t i = 0; i < l.size(); ++i) {
    std::string line = l[i];
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = fmt::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(i + 1) + ": expected key = value");
    const std::string key = fmt::trim(line.substr(0, eq));
    const std::string value = fmt::trim(line.substr(eq + 1));
    if (!config_detail::find(key))
      throw ConfigError("config line " + std::to_string(i + 1) + ": unknown key '" + key + "'");
    if (auto [it, fresh] = seen.emplace(key, i + 1); !fresh)
      throw ConfigError("config key '" + key + "' repeated on lines " + std::to_string(it->second) + " and " +
                        std::to_string(i + 1));
    set_config_value(base, key, value);
  }
  return base;
}

inline PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {}) {
  return parse_config(io::read_text(path), std::move(base));
}

/// Every key in canonical order; parse_config(format_config(c)) == c.
/// `reproducible_only` leaves out the keys that cannot change results
/// (run.out_dir, run.threads); that form is what provenance hashes.
inline std::string format_config(const PipelineConfig& c, bool reproducible_only = false) {
  std::string out;
  for (const auto& e : config_detail::entries()) {
    if (reproducible_only && (e.key == "run.out_dir" || e.key == "run.threads")) continue;
    out += e.key + " = " + e.get(c) + "\n";
  }
  return out;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace eegbio
