#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegbio/datamodel.hpp"
#include "eegbio/error.hpp"
#include "eegbio/log.hpp"

namespace eegbio {

// ---------------------------------------------------------------------------
// Propensity model: P(ACr | age, sex) by logistic regression on standardized
// covariates, fitted with Newton / IRLS.

struct PropensityModel {
  double intercept = 0.0;
  std::array<double, 2> coef{};  // standardized age, standardized sex
  std::array<double, 2> center{};
  std::array<double, 2> scale{1.0, 1.0};  // 0 marks a constant covariate (coefficient fixed at 0)
  int iterations = 0;
  double log_likelihood = 0.0;
  bool converged = false;
  std::vector<double> trace;  // log-likelihood per iteration

  std::array<double, 2> standardized(const RecordMeta& r) const {
    const std::array<double, 2> raw{r.age, r.sex == Sex::M ? 1.0 : 0.0};
    std::array<double, 2> z{};
    for (int k = 0; k < 2; ++k) z[k] = scale[k] > 0.0 ? (raw[k] - center[k]) / scale[k] : 0.0;
    return z;
  }

  double logit(const RecordMeta& r) const {
    const auto z = standardized(r);
    return intercept + coef[0] * z[0] + coef[1] * z[1];
  }

  double score(const RecordMeta& r) const { return 1.0 / (1.0 + std::exp(-logit(r))); }
};

struct IrlsOptions {
  double tolerance = 1e-8;  // on the log-likelihood change
  int max_iterations = 50;
  double ridge = 1e-6;
  double separation_bound = 15.0;  // |coef| in standardized units
};

namespace psm_detail {

inline double log1pexp(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

}  // namespace psm_detail

/// Bernoulli log-likelihood of `records` under the given standardized coefficients.
inline double propensity_log_likelihood(const PropensityModel& m, std::span<const RecordMeta> records) {
  double ll = 0.0;
  for (const auto& r : records) {
    const double t = m.logit(r);
    ll += (r.group == Group::ACr ? t : 0.0) - psm_detail::log1pexp(t);
  }
  return ll;
}

inline PropensityModel fit_propensity(std::span<const RecordMeta> records, const IrlsOptions& opt = {}) {
  std::size_t n_t = 0;
  for (const auto& r : records) n_t += r.group == Group::ACr;
  if (records.size() < 4) throw DataError("propensity model needs at least 4 records");
  if (n_t == 0 || n_t == records.size()) throw DataError("propensity model needs both groups present");

  PropensityModel m;
  const double n = static_cast<double>(records.size());
  for (int k = 0; k < 2; ++k) {
    double sum = 0.0, ss = 0.0;
    for (const auto& r : records) sum += k == 0 ? r.age : (r.sex == Sex::M ? 1.0 : 0.0);
    m.center[k] = sum / n;
    for (const auto& r : records) {
      const double v = (k == 0 ? r.age : (r.sex == Sex::M ? 1.0 : 0.0)) - m.center[k];
      ss += v * v;
    }
    m.scale[k] = std::sqrt(ss / (n - 1.0));
  }

  Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto z = m.standardized(records[i]);
    const auto ii = static_cast<Eigen::Index>(i);
    x(ii, 0) = 1.0;
    x(ii, 1) = z[0];
    x(ii, 2) = z[1];
    y(ii) = records[i].group == Group::ACr ? 1.0 : 0.0;
  }
  const double prevalence = static_cast<double>(n_t) / n;
  Eigen::Vector3d beta(std::log(prevalence / (1.0 - prevalence)), 0.0, 0.0);
  auto sync = [&] {
    m.intercept = beta(0);
    m.coef = {beta(1), beta(2)};
  };
  sync();
  double ll = propensity_log_likelihood(m, records);
  m.trace.push_back(ll);

  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Eigen::VectorXd eta = x * beta;
    const Eigen::VectorXd mu = (1.0 + (-eta.array()).exp()).inverse().matrix();
    const Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).matrix();
    Eigen::Matrix3d h = x.transpose() * w.asDiagonal() * x;
    h.diagonal().array() += opt.ridge;
    const Eigen::Vector3d g = x.transpose() * (y - mu);
    Eigen::Vector3d step = h.ldlt().solve(g);
    for (int k = 0; k < 2; ++k)
      if (m.scale[k] == 0.0) step(k + 1) = 0.0;

    // Step halving keeps the ascent monotone near separation.
    double t = 1.0;
    double ll_new = ll;
    Eigen::Vector3d cand = beta;
    for (int half = 0; half < 30; ++half) {
      cand = beta + t * step;
      m.intercept = cand(0);
      m.coef = {cand(1), cand(2)};
      ll_new = propensity_log_likelihood(m, records);
      if (ll_new >= ll - 1e-12) break;
      t *= 0.5;
    }
    beta = cand;
    sync();
    m.iterations = it;
    m.trace.push_back(ll_new);
    if (beta.tail<2>().cwiseAbs().maxCoeff() > opt.separation_bound)
      throw SeparationError("propensity coefficients diverge (|coef| > " +
                            std::to_string(opt.separation_bound) +
                            " standardized units): groups are perfectly separated; review the caliper / "
                            "covariates");
    const double change = std::abs(ll_new - ll);
    ll = ll_new;
    if (change < opt.tolerance) {
      m.converged = true;
      break;
    }
  }
  m.log_likelihood = ll;
  if (!m.converged) {
    std::string trace;
    for (double v : m.trace) trace += " " + std::to_string(v);
    throw ConvergenceError("propensity IRLS did not converge in " + std::to_string(opt.max_iterations) +
                           " iterations; log-likelihood trace:" + trace);
  }
  return m;
}

inline std::vector<double> propensity_scores(const PropensityModel& m, std::span<const RecordMeta> records) {
  std::vector<double> s;
  s.reserve(records.size());
  for (const auto& r : records) s.push_back(m.score(r));
  return s;
}

// ---------------------------------------------------------------------------
// Common support and ratio trimming. Indices refer to the input record order.

struct SupportResult {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> kept;
  std::vector<std::size_t> dropped;
};

/// Support = [max of group minima, min of group maxima]; records outside are dropped.
inline SupportResult common_support(std::span<const double> scores, std::span<const Group> groups) {
  if (scores.size() != groups.size()) throw ParameterError("scores and groups differ in length");
  std::array<double, 2> lo{INFINITY, INFINITY}, hi{-INFINITY, -INFINITY};
  std::array<std::size_t, 2> count{};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int g = label_of(groups[i]);
    lo[g] = std::min(lo[g], scores[i]);
    hi[g] = std::max(hi[g], scores[i]);
    ++count[g];
  }
  if (count[0] == 0 || count[1] == 0) throw DataError("common support needs both groups");
  SupportResult r;
  r.lo = std::max(lo[0], lo[1]);
  r.hi = std::min(hi[0], hi[1]);
  if (r.lo > r.hi) throw SupportError("the groups' propensity ranges do not overlap");
  for (std::size_t i = 0; i < scores.size(); ++i)
    (scores[i] >= r.lo && scores[i] <= r.hi ? r.kept : r.dropped).push_back(i);
  return r;
}

struct TrimResult {
  std::vector<std::size_t> kept_treated;  // by descending score
  std::vector<std::size_t> dropped_treated;
  std::vector<std::size_t> controls;
  double achieved_ratio = 0.0;
};

/// Keeps the floor(n_control / ratio) treated records with the highest scores
/// (ties by subject_id ascending); controls are untouched. `candidates` are the
/// indices remaining after common support.
inline TrimResult trim_to_ratio(std::span<const double> scores, std::span<const RecordMeta> records,
                                std::span<const std::size_t> candidates, int ratio) {
  if (ratio < 1) throw ParameterError("matching ratio must be a positive integer");
  TrimResult r;
  std::vector<std::size_t> treated;
  for (auto i : candidates) (records[i].group == Group::ACr ? treated : r.controls).push_back(i);
  const std::size_t n_keep = r.controls.size() / static_cast<std::size_t>(ratio);
  if (n_keep == 0)
    throw ParameterError("ratio " + std::to_string(ratio) + " exceeds the " + std::to_string(r.controls.size()) +
                         " available controls");
  std::sort(treated.begin(), treated.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return records[a].subject_id < records[b].subject_id;
  });
  if (treated.size() < n_keep)
    log::warn("only " + std::to_string(treated.size()) + " treated records for a target of " +
              std::to_string(n_keep) + "; keeping all");
  const std::size_t keep = std::min(n_keep, treated.size());
  r.kept_treated.assign(treated.begin(), treated.begin() + static_cast<std::ptrdiff_t>(keep));
  r.dropped_treated.assign(treated.begin() + static_cast<std::ptrdiff_t>(keep), treated.end());
  r.achieved_ratio = static_cast<double>(r.controls.size()) / static_cast<double>(keep);
  return r;
}

/// Greedy k:1 nearest-neighbour matching on the logit without replacement,
/// caliper `caliper_sd` * SD(logit). Treated records are visited by descending
/// score; a treated record with no control inside the caliper is dropped.
/// Returns (kept treated, matched controls).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> nearest_neighbor_match(
    const PropensityModel& model, std::span<const RecordMeta> records, std::span<const std::size_t> candidates,
    int ratio, double caliper_sd = 0.2) {
  if (ratio < 1) throw ParameterError("matching ratio must be a positive integer");
  std::vector<double> logit(records.size());
  double sum = 0.0, ss = 0.0;
  for (auto i : candidates) sum += logit[i] = model.logit(records[i]);
  const double mean = sum / static_cast<double>(candidates.size());
  for (auto i : candidates) ss += (logit[i] - mean) * (logit[i] - mean);
  const double caliper = caliper_sd * std::sqrt(ss / static_cast<double>(candidates.size() - 1));

  std::vector<std::size_t> treated, pool;
  for (auto i : candidates) (records[i].group == Group::ACr ? treated : pool).push_back(i);
  std::sort(treated.begin(), treated.end(), [&](std::size_t a, std::size_t b) {
    if (logit[a] != logit[b]) return logit[a] > logit[b];
    return records[a].subject_id < records[b].subject_id;
  });
  std::vector<char> used(records.size(), 0);
  std::vector<std::size_t> kept, matched;
  for (auto t : treated) {
    std::vector<std::size_t> picks;
    for (int k = 0; k < ratio; ++k) {
      std::optional<std::size_t> best;
      for (auto c : pool) {
        if (used[c]) continue;
        const double d = std::abs(logit[c] - logit[t]);
        if (d > caliper) continue;
        if (!best || d < std::abs(logit[*best] - logit[t]) ||
            (d == std::abs(logit[*best] - logit[t]) && records[c].subject_id < records[*best].subject_id))
          best = c;
      }
      if (!best) break;
      used[*best] = 1;
      picks.push_back(*best);
    }
    if (picks.empty()) continue;
    kept.push_back(t);
    matched.insert(matched.end(), picks.begin(), picks.end());
  }
  std::sort(matched.begin(), matched.end());
  return {kept, matched};
}

// ---------------------------------------------------------------------------
// Balance diagnostics

struct SmdValue {
  double value = 0.0;
  bool degenerate = false;  // zero variance in both groups
};

/// (mean_T - mean_C) / sqrt((var_T + var_C) / 2) with n-1 variances.
inline SmdValue standardized_mean_difference(std::span<const double> treated, std::span<const double> control) {
  if (treated.empty() || control.empty()) throw DataError("SMD needs both groups nonempty");
  auto moments = [](std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0};
  };
  const auto [mt, vt] = moments(treated);
  const auto [mc, vc] = moments(control);
  const double pooled = (vt + vc) / 2.0;
  if (!(pooled > 0.0)) return {0.0, true};
  return {(mt - mc) / std::sqrt(pooled), false};
}

struct BalanceRow {
  std::string covariate;
  SmdValue before;
  SmdValue after;
};

struct ScoreHistogram {
  static constexpr int kBins = 20;  // shared edges over [0, 1]
  std::array<std::size_t, kBins> treated{};
  std::array<std::size_t, kBins> control{};

  void add(double score, Group g) {
    const int b = std::clamp(static_cast<int>(score * kBins), 0, kBins - 1);
    ++(g == Group::ACr ? treated : control)[static_cast<std::size_t>(b)];
  }
};

struct BalanceReport {
  std::vector<BalanceRow> rows;  // age, sex
  ScoreHistogram before, after;
};

inline BalanceReport balance_report(std::span<const RecordMeta> records, std::span<const double> scores,
                                    std::span<const std::size_t> kept) {
  auto covariate = [](const RecordMeta& r, int k) { return k == 0 ? r.age : (r.sex == Sex::M ? 1.0 : 0.0); };
  auto split = [&](auto&& indices, int k) {
    std::pair<std::vector<double>, std::vector<double>> v;
    for (std::size_t i : indices) (records[i].group == Group::ACr ? v.first : v.second).push_back(covariate(records[i], k));
    return v;
  };
  std::vector<std::size_t> all(records.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  BalanceReport rep;
  for (int k = 0; k < 2; ++k) {
    const auto [tb, cb] = split(all, k);
    const auto [ta, ca] = split(kept, k);
    rep.rows.push_back({k == 0 ? "age" : "sex", standardized_mean_difference(tb, cb),
                        standardized_mean_difference(ta, ca)});
    if (rep.rows.back().before.degenerate || rep.rows.back().after.degenerate)
      log::warn("covariate '" + rep.rows.back().covariate + "' has zero variance in both groups; SMD set to 0");
  }
  for (std::size_t i = 0; i < records.size(); ++i) rep.before.add(scores[i], records[i].group);
  for (auto i : kept) rep.after.add(scores[i], records[i].group);
  return rep;
}

// ---------------------------------------------------------------------------
// Whole matching step

enum class MatchStrategy { trim, nearest_neighbor };

struct MatchResult {
  int ratio = 1;
  MatchStrategy strategy = MatchStrategy::trim;
  PropensityModel model;
  std::vector<double> scores;  // per input record
  double support_lo = 0.0, support_hi = 1.0;
  std::vector<std::string> kept_treated, kept_control, dropped_treated, dropped_control;
  std::vector<std::size_t> kept;  // input indices, ascending
  double achieved_ratio = 0.0;
  BalanceReport balance;
};

inline MatchResult match_cohort(std::span<const RecordMeta> records, int ratio,
                                MatchStrategy strategy = MatchStrategy::trim, const IrlsOptions& irls = {}) {
  MatchResult r;
  r.ratio = ratio;
  r.strategy = strategy;
  r.model = fit_propensity(records, irls);
  r.scores = propensity_scores(r.model, records);
  std::vector<Group> groups;
  for (const auto& rec : records) groups.push_back(rec.group);
  const auto support = common_support(r.scores, groups);
  r.support_lo = support.lo;
  r.support_hi = support.hi;

  std::vector<char> keep(records.size(), 0);
  if (strategy == MatchStrategy::trim) {
    const auto t = trim_to_ratio(r.scores, records, support.kept, ratio);
    for (auto i : t.kept_treated) keep[i] = 1;
    for (auto i : t.controls) keep[i] = 1;
  } else {
    const auto [treated, controls] = nearest_neighbor_match(r.model, records, support.kept, ratio);
    for (auto i : treated) keep[i] = 1;
    for (auto i : controls) keep[i] = 1;
  }
  std::size_t n_t = 0, n_c = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const bool treated = records[i].group == Group::ACr;
    if (keep[i]) {
      r.kept.push_back(i);
      (treated ? r.kept_treated : r.kept_control).push_back(records[i].subject_id);
      (treated ? n_t : n_c)++;
    } else {
      (treated ? r.dropped_treated : r.dropped_control).push_back(records[i].subject_id);
    }
  }
  if (n_t == 0) throw SupportError("matching kept no treated records");
  r.achieved_ratio = static_cast<double>(n_c) / static_cast<double>(n_t);
  r.balance = balance_report(records, r.scores, r.kept);
  return r;
}

}  // namespace eegbio
