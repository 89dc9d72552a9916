#pragma once

// ComBat location/scale harmonization with parametric empirical-Bayes
// shrinkage of the per-site parameters (Johnson, Li & Rabinovic 2007;
// Fortin et al. 2018).
//
//   y_ij = alpha + X_ij beta + gamma_i + delta_i * eps_ij
//
// Site effects are fitted jointly with the preserved covariates and are
// constrained to a count-weighted zero mean, so alpha is the grand mean.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "eegbio/datamodel.hpp"
#include "eegbio/error.hpp"
#include "eegbio/format.hpp"
#include "eegbio/io.hpp"
#include "eegbio/log.hpp"

namespace eegbio {

struct CombatOptions {
  /// Preserved covariates, any of "age", "sex", "group".
  std::vector<std::string> covariates = {"age", "sex"};
  bool empirical_bayes = true;
  double tolerance = 1e-4;
  int max_iterations = 100;
};

struct HarmonizationModel {
  static constexpr int kVersion = 1;

  std::vector<std::string> sites;
  std::vector<std::size_t> site_counts;
  std::vector<std::string> covariates;
  double age_center = 0.0;
  bool empirical_bayes = true;

  std::vector<std::string> features;          // harmonized, in table order
  std::vector<std::string> dropped_features;  // constant in the fitting table; passed through

  Eigen::VectorXd alpha;  // grand mean per feature
  Eigen::MatrixXd beta;   // covariates x features
  Eigen::VectorXd sigma;  // pooled residual SD per feature

  // sites x features
  Eigen::MatrixXd gamma_hat, delta2_hat, gamma_star, delta2_star;

  // per-site hyperparameters: gamma ~ N(gamma_bar, tau2), delta^2 ~ InvGamma(lambda, theta)
  Eigen::VectorXd gamma_bar, tau2, lambda, theta;
  std::vector<int> iterations;  // EB iterations used per site

  std::optional<std::size_t> site_index(const std::string& s) const {
    for (std::size_t k = 0; k < sites.size(); ++k)
      if (sites[k] == s) return k;
    return std::nullopt;
  }
};

namespace combat_detail {

inline double covariate_value(const RecordMeta& r, const std::string& name, double age_center) {
  if (name == "age") return r.age - age_center;
  if (name == "sex") return r.sex == Sex::M ? 1.0 : 0.0;
  if (name == "group") return r.group == Group::ACr ? 1.0 : 0.0;
  throw ParameterError("unknown harmonization covariate '" + name + "'");
}

inline Eigen::MatrixXd covariate_matrix(std::span<const RecordMeta> rows,
                                        const std::vector<std::string>& covs, double age_center) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(covs.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < covs.size(); ++c)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          covariate_value(rows[i], covs[c], age_center);
  return x;
}

inline double sample_var(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace combat_detail

/// Fits ComBat on `table`. Features constant over the whole table are dropped
/// (with a warning) and passed through by apply_combat.
///
/// The per-site scale delta_hat^2 uses the same 1/n denominator as the pooled
/// variance, so already-harmonized data refits to delta_hat^2 == 1.
/// With fewer than two harmonized features the across-feature priors are
/// undefined and the EB step is skipped (gamma* = gamma_hat, delta* = delta_hat).
inline HarmonizationModel fit_combat(const FeatureTable& table, const CombatOptions& opt = {}) {
  using Eigen::Index;
  for (const auto& c : opt.covariates)
    if (c != "age" && c != "sex" && c != "group")
      throw ParameterError("unknown harmonization covariate '" + c + "'");
  if (table.n_records() == 0) throw EmptyInputError("cannot harmonize an empty table");

  std::map<std::string, std::size_t> counts;
  for (const auto& r : table.rows) ++counts[r.site];
  if (counts.size() < 2)
    throw DataError("harmonization needs at least 2 sites (found " + std::to_string(counts.size()) +
                    "); bypass harmonization for single-site data");
  for (const auto& [s, n] : counts)
    if (n < 3) throw DataError("site '" + s + "' has " + std::to_string(n) + " records; need >= 3");

  HarmonizationModel model;
  model.covariates = opt.covariates;
  model.empirical_bayes = opt.empirical_bayes;
  for (const auto& [s, n] : counts) {
    model.sites.push_back(s);
    model.site_counts.push_back(n);
  }
  const Index n = static_cast<Index>(table.n_records());
  const Index n_sites = static_cast<Index>(model.sites.size());

  double age_sum = 0.0;
  for (const auto& r : table.rows) age_sum += r.age;
  model.age_center = age_sum / static_cast<double>(n);

  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < table.n_features(); ++j) {
    const auto col = table.values.col(static_cast<Index>(j));
    if (col.maxCoeff() == col.minCoeff()) {
      model.dropped_features.push_back(table.feature_names[j]);
      log::warn("feature '" + table.feature_names[j] + "' is constant; excluded from harmonization");
    } else {
      keep.push_back(j);
      model.features.push_back(table.feature_names[j]);
    }
  }
  const Index p = static_cast<Index>(keep.size());
  Eigen::MatrixXd y(n, p);
  for (Index j = 0; j < p; ++j) y.col(j) = table.values.col(static_cast<Index>(keep[j]));

  std::vector<Index> site_of(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) site_of[i] = static_cast<Index>(*model.site_index(table.rows[i].site));

  const Eigen::MatrixXd cov = combat_detail::covariate_matrix(table.rows, opt.covariates, model.age_center);
  const Index q = cov.cols();
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, n_sites + q);
  for (Index i = 0; i < n; ++i) design(i, site_of[i]) = 1.0;
  design.rightCols(q) = cov;

  const auto qr = design.colPivHouseholderQr();
  if (qr.rank() < design.cols())
    throw NumericError("harmonization design is rank deficient (covariates confounded with site)");
  const Eigen::MatrixXd b_hat = qr.solve(y);

  Eigen::VectorXd weights(n_sites);
  for (Index k = 0; k < n_sites; ++k)
    weights(k) = static_cast<double>(model.site_counts[static_cast<std::size_t>(k)]) / static_cast<double>(n);
  model.alpha = b_hat.topRows(n_sites).transpose() * weights;
  model.beta = b_hat.bottomRows(q);
  const Eigen::MatrixXd resid = y - design * b_hat;
  model.sigma = (resid.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt().transpose();

  const Eigen::MatrixXd stand_mean = Eigen::MatrixXd::Ones(n, 1) * model.alpha.transpose() + cov * model.beta;
  Eigen::MatrixXd z = (y - stand_mean).array().rowwise() / model.sigma.transpose().array();

  model.gamma_hat = Eigen::MatrixXd::Zero(n_sites, p);
  model.delta2_hat = Eigen::MatrixXd::Zero(n_sites, p);
  for (Index i = 0; i < n; ++i) model.gamma_hat.row(site_of[i]) += z.row(i);
  for (Index k = 0; k < n_sites; ++k) model.gamma_hat.row(k) /= static_cast<double>(model.site_counts[k]);
  for (Index i = 0; i < n; ++i)
    model.delta2_hat.row(site_of[i]) += (z.row(i) - model.gamma_hat.row(site_of[i])).array().square().matrix();
  for (Index k = 0; k < n_sites; ++k) model.delta2_hat.row(k) /= static_cast<double>(model.site_counts[k]);
  if ((model.delta2_hat.array() <= 0.0).any())
    throw NumericError("a site has zero within-site variance for some feature");

  model.gamma_star = model.gamma_hat;
  model.delta2_star = model.delta2_hat;
  model.gamma_bar = model.gamma_hat.rowwise().mean();
  model.tau2 = Eigen::VectorXd::Zero(n_sites);
  model.lambda = Eigen::VectorXd::Constant(n_sites, std::numeric_limits<double>::quiet_NaN());
  model.theta = model.lambda;
  model.iterations.assign(static_cast<std::size_t>(n_sites), 0);

  if (!opt.empirical_bayes || p < 2) {
    if (opt.empirical_bayes) log::warn("fewer than 2 harmonized features; empirical Bayes skipped");
    model.empirical_bayes = false;
    return model;
  }

  // Rows of z grouped by site, for the EB sum of squares.
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(n_sites));
  for (Index i = 0; i < n; ++i) members[static_cast<std::size_t>(site_of[i])].push_back(i);

  for (Index k = 0; k < n_sites; ++k) {
    const Eigen::VectorXd gh = model.gamma_hat.row(k).transpose();
    const Eigen::VectorXd dh = model.delta2_hat.row(k).transpose();
    const double g_bar = gh.mean();
    const double t2 = combat_detail::sample_var(gh);
    const double m = dh.mean();
    const double s2 = combat_detail::sample_var(dh);
    model.gamma_bar(k) = g_bar;
    model.tau2(k) = t2;
    // Inverse-gamma prior by the method of moments. A vanishing spread of
    // delta_hat means a point-mass prior at its mean.
    const bool point_mass = !(s2 > 1e-14 * m * m);
    model.lambda(k) = point_mass ? std::numeric_limits<double>::infinity() : (2.0 * s2 + m * m) / s2;
    model.theta(k) = point_mass ? std::numeric_limits<double>::infinity() : (m * s2 + m * m * m) / s2;

    const double nk = static_cast<double>(model.site_counts[static_cast<std::size_t>(k)]);
    const auto& rows = members[static_cast<std::size_t>(k)];
    Eigen::VectorXd g_old = gh;
    Eigen::VectorXd d_old = dh;
    int it = 0;
    for (; it < opt.max_iterations;) {
      ++it;
      const Eigen::VectorXd g_new =
          ((t2 * nk) * gh.array() + d_old.array() * g_bar) / (t2 * nk + d_old.array());
      Eigen::VectorXd d_new(p);
      if (point_mass) {
        d_new.setConstant(m);
      } else {
        Eigen::VectorXd ss = Eigen::VectorXd::Zero(p);
        for (Index i : rows) ss += (z.row(i).transpose() - g_new).array().square().matrix();
        d_new = (0.5 * ss.array() + model.theta(k)) / (nk / 2.0 + model.lambda(k) - 1.0);
      }
      const double change = std::max((g_new - g_old).cwiseAbs().maxCoeff(),
                                     (d_new - d_old).cwiseAbs().maxCoeff());
      g_old = g_new;
      d_old = d_new;
      if (change < opt.tolerance) break;
    }
    model.iterations[static_cast<std::size_t>(k)] = it;
    model.gamma_star.row(k) = g_old.transpose();
    model.delta2_star.row(k) = d_old.transpose();
  }
  return model;
}

/// y* = sigma / delta* (z - gamma*) + alpha + X beta, with z the standardized value.
inline FeatureTable apply_combat(const HarmonizationModel& model, const FeatureTable& table) {
  using Eigen::Index;
  std::vector<Index> col_of;
  for (const auto& f : model.features) {
    const auto j = table.feature_index(f);
    if (!j) throw SchemaError("table lacks harmonized feature '" + f + "'");
    col_of.push_back(static_cast<Index>(*j));
  }
  for (const auto& f : model.dropped_features)
    if (!table.feature_index(f)) throw SchemaError("table lacks feature '" + f + "'");
  if (table.n_features() != model.features.size() + model.dropped_features.size())
    throw SchemaError("table feature set differs from the harmonization model");

  std::vector<Index> site_of;
  for (const auto& r : table.rows) {
    const auto k = model.site_index(r.site);
    if (!k) throw RosterError("site '" + r.site + "' is not in the harmonization model roster");
    site_of.push_back(static_cast<Index>(*k));
  }
  const Eigen::MatrixXd cov = combat_detail::covariate_matrix(table.rows, model.covariates, model.age_center);

  FeatureTable out = table;
  for (Index i = 0; i < static_cast<Index>(table.n_records()); ++i) {
    const Index k = site_of[static_cast<std::size_t>(i)];
    for (Index j = 0; j < static_cast<Index>(col_of.size()); ++j) {
      const double mean = model.alpha(j) + cov.row(i).dot(model.beta.col(j));
      const double z = (table.values(i, col_of[j]) - mean) / model.sigma(j);
      out.values(i, col_of[j]) =
          model.sigma(j) / std::sqrt(model.delta2_star(k, j)) * (z - model.gamma_star(k, j)) + mean;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Versioned CSV bundle

inline std::string format_combat_model(const HarmonizationModel& m) {
  using fmt::shortest;
  std::string out = "# eegbio-combat v" + std::to_string(HarmonizationModel::kVersion) + "\n";
  out += "[meta]\nkey,value\n";
  out += "covariates," + fmt::join(m.covariates, ";") + "\n";
  out += "age_center," + shortest(m.age_center) + "\n";
  out += "empirical_bayes," + std::string(m.empirical_bayes ? "1" : "0") + "\n";
  out += "[sites]\nsite,n,gamma_bar,tau2,lambda,theta,iterations\n";
  for (std::size_t k = 0; k < m.sites.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    out += m.sites[k] + "," + std::to_string(m.site_counts[k]) + "," + shortest(m.gamma_bar(ki)) + "," +
           shortest(m.tau2(ki)) + "," + shortest(m.lambda(ki)) + "," + shortest(m.theta(ki)) + "," +
           std::to_string(m.iterations[k]) + "\n";
  }
  out += "[features]\nfeature,alpha,sigma";
  for (const auto& c : m.covariates) out += ",beta_" + c;
  out += "\n";
  for (std::size_t j = 0; j < m.features.size(); ++j) {
    const auto ji = static_cast<Eigen::Index>(j);
    out += m.features[j] + "," + shortest(m.alpha(ji)) + "," + shortest(m.sigma(ji));
    for (Eigen::Index c = 0; c < m.beta.rows(); ++c) out += "," + shortest(m.beta(c, ji));
    out += "\n";
  }
  out += "[site_feature]\nsite,feature,gamma_hat,delta2_hat,gamma_star,delta2_star\n";
  for (std::size_t k = 0; k < m.sites.size(); ++k)
    for (std::size_t j = 0; j < m.features.size(); ++j) {
      const auto ki = static_cast<Eigen::Index>(k);
      const auto ji = static_cast<Eigen::Index>(j);
      out += m.sites[k] + "," + m.features[j] + "," + shortest(m.gamma_hat(ki, ji)) + "," +
             shortest(m.delta2_hat(ki, ji)) + "," + shortest(m.gamma_star(ki, ji)) + "," +
             shortest(m.delta2_star(ki, ji)) + "\n";
    }
  out += "[dropped]\nfeature\n";
  for (const auto& f : m.dropped_features) out += f + "\n";
  return out;
}

inline HarmonizationModel parse_combat_model(const std::string& text) {
  const auto all = io::lines(text);
  if (all.empty() || all[0] != "# eegbio-combat v" + std::to_string(HarmonizationModel::kVersion))
    throw SchemaError("not an eegbio ComBat model (or unsupported version)");
  std::map<std::string, std::vector<std::vector<std::string>>> sections;
  std::string current;
  bool header_pending = false;
  for (std::size_t i = 1; i < all.size(); ++i) {
    const auto& l = all[i];
    if (l.empty()) continue;
    if (l.front() == '[' && l.back() == ']') {
      current = l.substr(1, l.size() - 2);
      sections[current];
      header_pending = true;
      continue;
    }
    if (header_pending) {
      header_pending = false;
      continue;
    }
    sections[current].push_back(fmt::split(l, ','));
  }
  auto num = [](const std::string& s) {
    const auto v = fmt::parse_double(s);
    if (v) return *v;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    throw ParseError("ComBat model: bad number '" + s + "'");
  };
  for (auto name : {"meta", "sites", "features", "site_feature", "dropped"})
    if (!sections.contains(name)) throw SchemaError(std::string("ComBat model lacks [") + name + "]");

  HarmonizationModel m;
  for (const auto& row : sections["meta"]) {
    if (row.size() != 2) throw ParseError("ComBat model: bad meta row");
    if (row[0] == "covariates") m.covariates = row[1].empty() ? std::vector<std::string>{} : fmt::split(row[1], ';');
    else if (row[0] == "age_center") m.age_center = num(row[1]);
    else if (row[0] == "empirical_bayes") m.empirical_bayes = row[1] == "1";
  }
  const auto& srows = sections["sites"];
  const auto ns = static_cast<Eigen::Index>(srows.size());
  m.gamma_bar.resize(ns);
  m.tau2.resize(ns);
  m.lambda.resize(ns);
  m.theta.resize(ns);
  for (Eigen::Index k = 0; k < ns; ++k) {
    const auto& r = srows[static_cast<std::size_t>(k)];
    if (r.size() != 7) throw ParseError("ComBat model: bad site row");
    m.sites.push_back(r[0]);
    m.site_counts.push_back(static_cast<std::size_t>(num(r[1])));
    m.gamma_bar(k) = num(r[2]);
    m.tau2(k) = num(r[3]);
    m.lambda(k) = num(r[4]);
    m.theta(k) = num(r[5]);
    m.iterations.push_back(static_cast<int>(num(r[6])));
  }
  const auto& frows = sections["features"];
  const auto nf = static_cast<Eigen::Index>(frows.size());
  const auto nc = static_cast<Eigen::Index>(m.covariates.size());
  m.alpha.resize(nf);
  m.sigma.resize(nf);
  m.beta.resize(nc, nf);
  for (Eigen::Index j = 0; j < nf; ++j) {
    const auto& r = frows[static_cast<std::size_t>(j)];
    if (static_cast<Eigen::Index>(r.size()) != 3 + nc) throw ParseError("ComBat model: bad feature row");
    m.features.push_back(r[0]);
    m.alpha(j) = num(r[1]);
    m.sigma(j) = num(r[2]);
    for (Eigen::Index c = 0; c < nc; ++c) m.beta(c, j) = num(r[3 + static_cast<std::size_t>(c)]);
  }
  for (auto* mat : {&m.gamma_hat, &m.delta2_hat, &m.gamma_star, &m.delta2_star}) mat->resize(ns, nf);
  const auto& sf = sections["site_feature"];
  if (static_cast<Eigen::Index>(sf.size()) != ns * nf) throw ParseError("ComBat model: site_feature size");
  for (std::size_t t = 0; t < sf.size(); ++t) {
    const auto& r = sf[t];
    if (r.size() != 6) throw ParseError("ComBat model: bad site_feature row");
    const auto k = static_cast<Eigen::Index>(t) / nf;
    const auto j = static_cast<Eigen::Index>(t) % nf;
    if (r[0] != m.sites[static_cast<std::size_t>(k)] || r[1] != m.features[static_cast<std::size_t>(j)])
      throw ParseError("ComBat model: site_feature rows out of order");
    m.gamma_hat(k, j) = num(r[2]);
    m.delta2_hat(k, j) = num(r[3]);
    m.gamma_star(k, j) = num(r[4]);
    m.delta2_star(k, j) = num(r[5]);
  }
  for (const auto& r : sections["dropped"]) m.dropped_features.push_back(r.at(0));
  return m;
}

inline void save_combat_model(const std::filesystem::path& path, const HarmonizationModel& m) {
  io::write_text(path, format_combat_model(m));
}

inline HarmonizationModel load_combat_model(const std::filesystem::path& path) {
  return parse_combat_model(io::read_text(path));
}

// ---------------------------------------------------------------------------
// Site separation diagnostic

/// Per feature, the largest |SMD| between any two sites, with
/// SMD = (m_a - m_b) / sqrt((var_a + var_b) / 2) and n-1 variances.
/// `within` restricts the comparison to one group, so sites with different
/// group mixes are not flagged for a preserved group effect.
inline std::vector<double> site_smd(const FeatureTable& t, std::optional<Group> within = std::nullopt) {
  auto counted = [&](const RecordMeta& r) { return !within || r.group == *within; };
  std::vector<std::string> sites;
  for (const auto& r : t.rows)
    if (counted(r) && std::find(sites.begin(), sites.end(), r.site) == sites.end()) sites.push_back(r.site);
  if (sites.size() < 2) throw DataError("site SMD needs at least 2 sites");
  std::vector<double> out(t.n_features(), 0.0);
  for (std::size_t j = 0; j < t.n_features(); ++j) {
    std::vector<double> mean(sites.size(), 0.0), var(sites.size(), 0.0);
    for (std::size_t s = 0; s < sites.size(); ++s) {
      std::vector<double> v;
      for (std::size_t i = 0; i < t.n_records(); ++i)
        if (counted(t.rows[i]) && t.rows[i].site == sites[s]) v.push_back(t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      for (double x : v) mean[s] += x;
      mean[s] /= static_cast<double>(v.size());
      for (double x : v) var[s] += (x - mean[s]) * (x - mean[s]);
      var[s] = v.size() > 1 ? var[s] / static_cast<double>(v.size() - 1) : 0.0;
    }
    for (std::size_t a = 0; a < sites.size(); ++a)
      for (std::size_t b = a + 1; b < sites.size(); ++b) {
        const double pooled = std::sqrt((var[a] + var[b]) / 2.0);
        if (pooled > 0.0) out[j] = std::max(out[j], std::abs(mean[a] - mean[b]) / pooled);
      }
  }
  return out;
}

}  // namespace eegbio
