#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eegbio/error.hpp"

namespace eegbio {

enum class Group { HC = 0, ACr = 1 };
enum class Sex { F = 0, M = 1 };

inline std::string_view to_string(Group g) { return g == Group::HC ? "HC" : "ACr"; }
inline std::string_view to_string(Sex s) { return s == Sex::F ? "F" : "M"; }

inline std::optional<Group> parse_group(std::string_view s) {
  if (s == "HC") return Group::HC;
  if (s == "ACr") return Group::ACr;
  return std::nullopt;
}

inline std::optional<Sex> parse_sex(std::string_view s) {
  if (s == "F") return Sex::F;
  if (s == "M") return Sex::M;
  return std::nullopt;
}

/// Class label used by the classifiers: ACr = 1, HC = 0.
inline int label_of(Group g) { return static_cast<int>(g); }

struct RecordMeta {
  std::string subject_id;
  std::string site;
  Group group = Group::HC;
  double age = 0.0;
  Sex sex = Sex::F;

  friend bool operator==(const RecordMeta&, const RecordMeta&) = default;
};

inline void validate(const RecordMeta& m) {
  if (m.subject_id.empty()) throw ValidationError("record has an empty subject_id");
  if (m.site.empty()) throw ValidationError("record " + m.subject_id + " has an empty site");
  if (!(m.age > 0.0 && m.age < 120.0))
    throw ValidationError("record " + m.subject_id + " has age outside (0, 120)");
}

inline void validate_unique_ids(std::span<const RecordMeta> rows) {
  std::set<std::string_view> seen;
  for (const auto& r : rows)
    if (!seen.insert(r.subject_id).second)
      throw IntegrityError("duplicate subject_id '" + r.subject_id + "'");
}

// ---------------------------------------------------------------------------
// Frequency bands

struct Band {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double f) const { return f >= lo && f < hi; }
  friend bool operator==(const Band&, const Band&) = default;
};

class BandScheme {
 public:
  BandScheme() = default;
  explicit BandScheme(std::vector<Band> bands) : bands_(std::move(bands)) {
    if (bands_.empty()) throw ParameterError("band scheme is empty");
    std::set<std::string> names;
    for (std::size_t i = 0; i < bands_.size(); ++i) {
      const auto& b = bands_[i];
      if (!(b.lo < b.hi) || b.lo < 0.0)
        throw ParameterError("band '" + b.name + "' needs 0 <= f_lo < f_hi");
      if (i > 0 && bands_[i - 1].lo > b.lo)
        throw ParameterError("bands must be sorted by f_lo");
      if (!names.insert(b.name).second) throw ParameterError("duplicate band '" + b.name + "'");
      static const std::regex token("[a-z0-9]+");
      if (!std::regex_match(b.name, token))
        throw ParameterError("band name '" + b.name + "' must be lowercase alphanumeric");
    }
  }

  /// delta 1.5-6, theta 6-8.5, alpha1 8.5-10.5, alpha2 10.5-12.5, beta1 12.5-18.5,
  /// beta2 18.5-21, beta3 21-30, gamma 30-45 Hz.
  static BandScheme standard() {
    return BandScheme({{"delta", 1.5, 6.0},
                       {"theta", 6.0, 8.5},
                       {"alpha1", 8.5, 10.5},
                       {"alpha2", 10.5, 12.5},
                       {"beta1", 12.5, 18.5},
                       {"beta2", 18.5, 21.0},
                       {"beta3", 21.0, 30.0},
                       {"gamma", 30.0, 45.0}});
  }

  std::size_t size() const { return bands_.size(); }
  const Band& operator[](std::size_t i) const { return bands_[i]; }
  auto begin() const { return bands_.begin(); }
  auto end() const { return bands_.end(); }
  const std::vector<Band>& bands() const { return bands_; }

  double lowest() const { return bands_.front().lo; }
  double highest() const {
    double h = 0.0;
    for (const auto& b : bands_) h = std::max(h, b.hi);
    return h;
  }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < bands_.size(); ++i)
      if (bands_[i].name == name) return i;
    return std::nullopt;
  }

  friend bool operator==(const BandScheme&, const BandScheme&) = default;

 private:
  std::vector<Band> bands_;
};

// ---------------------------------------------------------------------------
// Epochs

/// One component's samples, epoch by epoch.
using Series = std::vector<std::vector<double>>;

struct EpochSet {
  RecordMeta meta;
  double fs = 0.0;
  double epoch_seconds = 5.0;
  std::size_t n_epochs = 0;
  std::size_t n_components = 0;
  std::size_t n_samples = 0;
  /// epoch-major, component-middle, sample-minor
  std::vector<double> data;

  EpochSet() = default;
  EpochSet(RecordMeta m, double sampling_rate, std::size_t epochs, std::size_t components,
           std::size_t samples, double seconds = 5.0)
      : meta(std::move(m)),
        fs(sampling_rate),
        epoch_seconds(seconds),
        n_epochs(epochs),
        n_components(components),
        n_samples(samples),
        data(epochs * components * samples, 0.0) {}

  std::size_t offset(std::size_t e, std::size_t c) const {
    return (e * n_components + c) * n_samples;
  }
  std::span<double> samples(std::size_t e, std::size_t c) {
    return {data.data() + offset(e, c), n_samples};
  }
  std::span<const double> samples(std::size_t e, std::size_t c) const {
    return {data.data() + offset(e, c), n_samples};
  }

  Series component(std::size_t c) const {
    Series s(n_epochs);
    for (std::size_t e = 0; e < n_epochs; ++e) {
      auto v = samples(e, c);
      s[e].assign(v.begin(), v.end());
    }
    return s;
  }

  friend bool operator==(const EpochSet&, const EpochSet&) = default;
};

inline void validate(const EpochSet& x) {
  validate(x.meta);
  if (!(x.fs > 0.0) || !std::isfinite(x.fs)) throw ValidationError("fs must be positive");
  if (!(x.epoch_seconds > 0.0)) throw ValidationError("epoch_seconds must be positive");
  if (x.n_components < 1) throw ValidationError("need at least one component");
  if (x.n_epochs < 1) throw ValidationError("need at least one epoch");
  const auto expected = static_cast<std::size_t>(std::llround(x.fs * x.epoch_seconds));
  if (x.n_samples != expected)
    throw ValidationError("n_samples " + std::to_string(x.n_samples) + " != round(fs * " +
                          "epoch_seconds) = " + std::to_string(expected));
  if (x.data.size() != x.n_epochs * x.n_components * x.n_samples)
    throw ValidationError("data size does not match declared shape");
  for (std::size_t e = 0; e < x.n_epochs; ++e)
    for (std::size_t c = 0; c < x.n_components; ++c)
      for (double v : x.samples(e, c))
        if (!std::isfinite(v))
          throw ValidationError("non-finite sample in epoch " + std::to_string(e) +
                                ", component " + std::to_string(c));
}

inline std::string component_name(std::size_t c) { return "C" + std::to_string(c + 1); }

// ---------------------------------------------------------------------------
// Feature naming grammar
//
//   <metric>__<band>__<comp>                 metric in {power, entropy}
//   <metric>__<band>__<compA>-<compB>        metric in {coherence, sl}
//   crossfreq__<modband>-<carrierband>__<comp>

namespace names {

inline std::string power(const Band& b, std::size_t c) {
  return "power__" + b.name + "__" + component_name(c);
}
inline std::string entropy(const Band& b, std::size_t c) {
  return "entropy__" + b.name + "__" + component_name(c);
}
inline std::string coherence(const Band& b, std::size_t c1, std::size_t c2) {
  return "coherence__" + b.name + "__" + component_name(c1) + "-" + component_name(c2);
}
inline std::string sl(const Band& b, std::size_t c1, std::size_t c2) {
  return "sl__" + b.name + "__" + component_name(c1) + "-" + component_name(c2);
}
inline std::string crossfreq(const Band& modulator, const Band& carrier, std::size_t c) {
  return "crossfreq__" + modulator.name + "-" + carrier.name + "__" + component_name(c);
}

inline bool is_feature_name(const std::string& s) {
  static const std::regex grammar(
      "(?:(?:power|entropy)__[a-z0-9]+__C[0-9]+)"
      "|(?:(?:coherence|sl)__[a-z0-9]+__C[0-9]+-C[0-9]+)"
      "|(?:crossfreq__[a-z0-9]+-[a-z0-9]+__C[0-9]+)");
  return std::regex_match(s, grammar);
}

}  // namespace names

// ---------------------------------------------------------------------------
// Feature table

struct FeatureTable {
  std::vector<RecordMeta> rows;
  std::vector<std::string> feature_names;
  Eigen::MatrixXd values;  // rows x features
  /// Opaque extra columns (demographics beyond the mandatory five), carried verbatim.
  std::vector<std::string> extra_names;
  std::vector<std::vector<std::string>> extra_values;  // rows x extras
  /// (row, feature) cells that were imputed on load.
  std::vector<std::pair<std::size_t, std::size_t>> imputed;

  std::size_t n_records() const { return rows.size(); }
  std::size_t n_features() const { return feature_names.size(); }

  std::optional<std::size_t> feature_index(std::string_view name) const {
    for (std::size_t j = 0; j < feature_names.size(); ++j)
      if (feature_names[j] == name) return j;
    return std::nullopt;
  }

  std::vector<int> labels() const {
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = label_of(rows[i].group);
    return y;
  }

  /// Rows in the given order (indices into this table).
  FeatureTable select_rows(std::span<const std::size_t> idx) const {
    FeatureTable out;
    out.feature_names = feature_names;
    out.extra_names = extra_names;
    out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.rows.push_back(rows[idx[k]]);
      out.values.row(static_cast<Eigen::Index>(k)) = values.row(static_cast<Eigen::Index>(idx[k]));
      if (!extra_values.empty()) out.extra_values.push_back(extra_values[idx[k]]);
    }
    return out;
  }

  FeatureTable select_features(std::span<const std::size_t> idx) const {
    FeatureTable out;
    out.rows = rows;
    out.extra_names = extra_names;
    out.extra_values = extra_values;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.feature_names.push_back(feature_names[idx[k]]);
      out.values.col(static_cast<Eigen::Index>(k)) = values.col(static_cast<Eigen::Index>(idx[k]));
    }
    return out;
  }

  friend bool operator==(const FeatureTable& a, const FeatureTable& b) {
    return a.rows == b.rows && a.feature_names == b.feature_names && a.values == b.values &&
           a.extra_names == b.extra_names && a.extra_values == b.extra_values;
  }
};

inline void validate(const FeatureTable& t) {
  if (t.values.rows() != static_cast<Eigen::Index>(t.rows.size()) ||
      t.values.cols() != static_cast<Eigen::Index>(t.feature_names.size()))
    throw ValidationError("feature table shape mismatch");
  std::set<std::string_view> seen;
  for (const auto& n : t.feature_names) {
    if (!seen.insert(n).second) throw IntegrityError("duplicate feature name '" + n + "'");
    if (!names::is_feature_name(n))
      throw SchemaError("feature name '" + n + "' does not follow the naming grammar");
  }
  for (const auto& r : t.rows) validate(r);
  validate_unique_ids(t.rows);
  if (!t.values.allFinite()) throw ValidationError("feature table contains non-finite values");
}

// ---------------------------------------------------------------------------
// Cohort manifest

struct ManifestEntry {
  std::string site;
  Group group = Group::HC;
  std::size_t count = 0;
  double age_mean = 0.0;
  std::optional<double> age_sd;  // undefined for single-member groups
  std::size_t n_female = 0;
  std::size_t n_male = 0;
};

struct CohortManifest {
  std::vector<ManifestEntry> entries;  // sorted by (site, group)
  std::size_t total = 0;

  const ManifestEntry* find(std::string_view site, Group g) const {
    for (const auto& e : entries)
      if (e.site == site && e.group == g) return &e;
    return nullptr;
  }
  std::size_t count(Group g) const {
    std::size_t n = 0;
    for (const auto& e : entries)
      if (e.group == g) n += e.count;
    return n;
  }
};

inline CohortManifest manifest(std::span<const RecordMeta> rows) {
  if (rows.empty()) throw EmptyInputError("cannot build a manifest from an empty table");
  // ACr sorts before HC, matching the published table layout.
  auto key = [](const RecordMeta& r) { return std::pair{r.site, std::string(to_string(r.group))}; };
  std::map<std::pair<std::string, std::string>, std::vector<const RecordMeta*>> cells;
  for (const auto& r : rows) cells[key(r)].push_back(&r);

  CohortManifest m;
  for (const auto& [k, members] : cells) {
    ManifestEntry e;
    e.site = k.first;
    e.group = *parse_group(k.second);
    e.count = members.size();
    double sum = 0.0;
    for (const auto* r : members) {
      sum += r->age;
      (r->sex == Sex::F ? e.n_female : e.n_male)++;
    }
    e.age_mean = sum / static_cast<double>(e.count);
    if (e.count > 1) {
      double ss = 0.0;
      for (const auto* r : members) ss += (r->age - e.age_mean) * (r->age - e.age_mean);
      e.age_sd = std::sqrt(ss / static_cast<double>(e.count - 1));
    }
    m.total += e.count;
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline CohortManifest manifest(const FeatureTable& t) { return manifest(std::span(t.rows)); }

}  // namespace eegbio
