#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "eegbio/datamodel.hpp"
#include "eegbio/error.hpp"
#include "eegbio/format.hpp"
#include "eegbio/log.hpp"

namespace eegbio::io {

namespace fs = std::filesystem;

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

inline std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
    start = nl + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature table CSV:  subject_id,site,group,age,sex,<feature...>[,<extra...>]
// Columns whose names follow the feature grammar are numeric features; any
// other trailing column is carried as an opaque string.

struct LoadOptions {
  /// Impute empty / NA cells with the per-feature median instead of failing.
  bool allow_missing = false;
};

inline constexpr std::array<std::string_view, 5> kMandatoryColumns = {"subject_id", "site", "group",
                                                                      "age", "sex"};

inline bool is_missing_token(std::string_view s) {
  std::string t = fmt::trim(s);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  return t.empty() || t == "na" || t == "nan";
}

inline FeatureTable parse_feature_table(const std::string& text, const LoadOptions& opt = {}) {
  const auto all = lines(text);
  std::vector<std::string> body;
  for (std::size_t i = 1; i < all.size(); ++i)
    if (!all[i].empty()) body.push_back(all[i]);
  if (all.empty() || all[0].empty()) throw SchemaError("feature table has no header");

  const auto header = fmt::split(all[0], ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (!col.emplace(header[j], j).second)
      throw SchemaError("duplicate column '" + header[j] + "'");
  }
  for (auto name : kMandatoryColumns)
    if (!col.contains(std::string(name)))
      throw SchemaError("missing mandatory column '" + std::string(name) + "'");

  FeatureTable t;
  std::vector<std::size_t> feature_cols, extra_cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (std::find(kMandatoryColumns.begin(), kMandatoryColumns.end(), header[j]) !=
        kMandatoryColumns.end())
      continue;
    if (names::is_feature_name(header[j])) {
      feature_cols.push_back(j);
      t.feature_names.push_back(header[j]);
    } else {
      extra_cols.push_back(j);
      t.extra_names.push_back(header[j]);
    }
  }

  const auto n = static_cast<Eigen::Index>(body.size());
  const auto p = static_cast<Eigen::Index>(feature_cols.size());
  t.values.resize(n, p);
  std::vector<std::pair<std::size_t, std::size_t>> missing;

  for (std::size_t i = 0; i < body.size(); ++i) {
    const auto cells = fmt::split(body[i], ',');
    const std::string where = "row " + std::to_string(i + 2);
    if (cells.size() != header.size())
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    RecordMeta m;
    m.subject_id = cells[col["subject_id"]];
    m.site = cells[col["site"]];
    const auto g = parse_group(cells[col["group"]]);
    if (!g) throw ParseError(where + ", column 'group': expected HC or ACr");
    m.group = *g;
    const auto s = parse_sex(cells[col["sex"]]);
    if (!s) throw ParseError(where + ", column 'sex': expected F or M");
    m.sex = *s;
    const auto age = fmt::parse_double(cells[col["age"]]);
    if (!age) throw ParseError(where + ", column 'age': not a number");
    m.age = *age;
    validate(m);
    t.rows.push_back(std::move(m));

    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const auto& cell = cells[feature_cols[k]];
      const auto v = fmt::parse_double(cell);
      if (!v || !std::isfinite(*v)) {
        if (is_missing_token(cell)) {
          if (!opt.allow_missing)
            throw ParseError(where + ", column '" + t.feature_names[k] +
                             "': missing value (use --allow-missing to impute)");
          missing.emplace_back(i, k);
          t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = 0.0;
          continue;
        }
        throw ParseError(where + ", column '" + t.feature_names[k] + "': non-numeric cell '" +
                         cell + "'");
      }
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = *v;
    }
    if (!extra_cols.empty()) {
      std::vector<std::string> extras;
      for (auto j : extra_cols) extras.push_back(cells[j]);
      t.extra_values.push_back(std::move(extras));
    }
  }
  validate_unique_ids(t.rows);

  if (!missing.empty()) {
    std::vector<std::vector<char>> is_missing(feature_cols.size(),
                                              std::vector<char>(body.size(), 0));
    for (auto [i, k] : missing) is_missing[k][i] = 1;
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      std::vector<double> observed;
      for (std::size_t i = 0; i < body.size(); ++i)
        if (!is_missing[k][i])
          observed.push_back(t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
      if (observed.size() == body.size()) continue;
      if (observed.empty())
        throw ValidationError("feature '" + t.feature_names[k] + "' has no observed values");
      std::sort(observed.begin(), observed.end());
      const std::size_t h = observed.size() / 2;
      const double median =
          observed.size() % 2 ? observed[h] : 0.5 * (observed[h - 1] + observed[h]);
      for (std::size_t i = 0; i < body.size(); ++i)
        if (is_missing[k][i])
          t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = median;
    }
    t.imputed = std::move(missing);
    log::warn("imputed " + std::to_string(t.imputed.size()) + " missing feature cells");
  }
  return t;
}

inline FeatureTable load_feature_table(const fs::path& path, const LoadOptions& opt = {}) {
  if (!fs::exists(path)) throw DataError("feature table '" + path.string() + "' does not exist");
  return parse_feature_table(read_text(path), opt);
}

inline std::string format_feature_table(const FeatureTable& t) {
  std::string out = "subject_id,site,group,age,sex";
  for (const auto& n : t.feature_names) out += "," + n;
  for (const auto& n : t.extra_names) out += "," + n;
  out += '\n';
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    out += r.subject_id;
    out += ',';
    out += r.site;
    out += ',';
    out += to_string(r.group);
    out += ',';
    out += fmt::shortest(r.age);
    out += ',';
    out += to_string(r.sex);
    for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
      out += ',';
      out += fmt::shortest(t.values(static_cast<Eigen::Index>(i), j));
    }
    if (!t.extra_values.empty())
      for (const auto& v : t.extra_values[i]) out += "," + v;
    out += '\n';
  }
  return out;
}

inline void write_feature_table(const fs::path& path, const FeatureTable& t) {
  write_text(path, format_feature_table(t));
}

// ---------------------------------------------------------------------------
// Manifest CSV, one row per (site, group); SD blank when undefined.

inline std::string format_manifest(const CohortManifest& m) {
  std::string out = "site,group,count,age_mean,age_sd,sex_f,sex_m\n";
  for (const auto& e : m.entries) {
    out += e.site + "," + std::string(to_string(e.group)) + "," + std::to_string(e.count) + "," +
           fmt::fixed(e.age_mean, 2) + "," + fmt::fixed(e.age_sd, 2) + "," +
           std::to_string(e.n_female) + "," + std::to_string(e.n_male) + "\n";
  }
  out += "Total,," + std::to_string(m.total) + ",,,,\n";
  return out;
}

// ---------------------------------------------------------------------------
// Epoch bundle: `<name>.epochs` key=value manifest + `<name>.f32` payload of
// little-endian float32 in epoch-major, component-middle, sample-minor order.

inline fs::path payload_path(const fs::path& manifest_path) {
  fs::path p = manifest_path;
  p.replace_extension(".f32");
  return p;
}

inline void write_epochs(const fs::path& manifest_path, const EpochSet& x) {
  std::string m;
  m += "fs=" + fmt::shortest(x.fs) + "\n";
  m += "n_epochs=" + std::to_string(x.n_epochs) + "\n";
  m += "n_components=" + std::to_string(x.n_components) + "\n";
  m += "n_samples=" + std::to_string(x.n_samples) + "\n";
  m += "epoch_seconds=" + fmt::shortest(x.epoch_seconds) + "\n";
  m += "subject_id=" + x.meta.subject_id + "\n";
  m += "site=" + x.meta.site + "\n";
  m += "group=" + std::string(to_string(x.meta.group)) + "\n";
  m += "age=" + fmt::shortest(x.meta.age) + "\n";
  m += "sex=" + std::string(to_string(x.meta.sex)) + "\n";
  write_text(manifest_path, m);

  std::string bytes;
  bytes.reserve(x.data.size() * 4);
  for (double v : x.data) {
    const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((u >> (8 * b)) & 0xFF));
  }
  write_text(payload_path(manifest_path), bytes);
}

inline EpochSet load_epochs(const fs::path& manifest_path) {
  std::map<std::string, std::string> kv;
  for (const auto& line : lines(read_text(manifest_path))) {
    const std::string l = fmt::trim(line);
    if (l.empty() || l[0] == '#') continue;
    const auto eq = l.find('=');
    if (eq == std::string::npos) throw ParseError("manifest line without '=': " + l);
    kv[fmt::trim(l.substr(0, eq))] = fmt::trim(l.substr(eq + 1));
  }
  static const std::set<std::string> known = {"fs",  "n_epochs", "n_components", "n_samples",
                                              "subject_id", "site", "group", "age",
                                              "sex", "epoch_seconds"};
  for (const auto& [k, v] : kv)
    if (!known.contains(k)) throw SchemaError("unknown manifest key '" + k + "'");
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw SchemaError("manifest missing key '" + k + "'");
    return it->second;
  };
  auto need_count = [&](const std::string& k) {
    const auto v = fmt::parse_int(need(k));
    if (!v || *v < 0) throw ParseError("manifest key '" + k + "' is not a count");
    return static_cast<std::size_t>(*v);
  };

  EpochSet x;
  const auto fs_v = fmt::parse_double(need("fs"));
  if (!fs_v) throw ParseError("manifest key 'fs' is not a number");
  if (!(*fs_v > 0.0)) throw ValidationError("fs must be > 0");
  x.fs = *fs_v;
  x.n_epochs = need_count("n_epochs");
  x.n_components = need_count("n_components");
  x.n_samples = need_count("n_samples");
  if (kv.contains("epoch_seconds")) {
    const auto es = fmt::parse_double(kv["epoch_seconds"]);
    if (!es) throw ParseError("manifest key 'epoch_seconds' is not a number");
    x.epoch_seconds = *es;
  }
  x.meta.subject_id = need("subject_id");
  x.meta.site = need("site");
  const auto g = parse_group(need("group"));
  if (!g) throw ParseError("manifest group must be HC or ACr");
  x.meta.group = *g;
  const auto s = parse_sex(need("sex"));
  if (!s) throw ParseError("manifest sex must be F or M");
  x.meta.sex = *s;
  const auto age = fmt::parse_double(need("age"));
  if (!age) throw ParseError("manifest age is not a number");
  x.meta.age = *age;

  const std::string bytes = read_text(payload_path(manifest_path));
  const std::size_t expected = x.n_epochs * x.n_components * x.n_samples;
  if (bytes.size() != expected * 4)
    throw TruncationError("payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected * 4));
  x.data.resize(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b)
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    x.data[i] = static_cast<double>(std::bit_cast<float>(u));
  }
  validate(x);
  return x;
}

}  // namespace eegbio::io
