#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "eegbio/datamodel.hpp"
#include "eegbio/error.hpp"
#include "eegbio/evaluate.hpp"
#include "eegbio/format.hpp"
#include "eegbio/log.hpp"
#include "eegbio/parallel.hpp"
#include "eegbio/tree.hpp"

namespace eegbio {

// ---------------------------------------------------------------------------
// Correlation pruning

struct PruneResult {
  std::vector<std::size_t> kept;  // column indices, ascending
  struct Drop {
    std::size_t feature;
    std::string reason;  // "constant" or "r=<value> with <name>"
  };
  std::vector<Drop> dropped;  // in drop order
};

/// Pearson correlation matrix of the columns of x (columns must be non-constant).
inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = x.rowwise() - x.colwise().mean();
  const Eigen::RowVectorXd norms = z.colwise().norm();
  z = z.array().rowwise() / norms.array();
  return z.transpose() * z;
}

/// Repeatedly takes the most correlated remaining pair with |r| > threshold
/// and drops the member with the larger mean |r| to the other remaining
/// features (a tie drops the later column). Constant columns go first.
inline PruneResult correlation_prune(const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                                     double threshold = 0.95) {
  if (x.cols() < 2) throw ParameterError("correlation pruning needs at least 2 features");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ParameterError("correlation threshold must lie in (0, 1]");
  if (x.rows() < 3) throw DataError("correlation pruning needs at least 3 records");
  PruneResult r;
  std::vector<std::size_t> live;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto col = x.col(j);
    if (col.maxCoeff() == col.minCoeff()) {
      log::warn("feature '" + names[static_cast<std::size_t>(j)] + "' is constant; dropped before pruning");
      r.dropped.push_back({static_cast<std::size_t>(j), "constant"});
    } else {
      live.push_back(static_cast<std::size_t>(j));
    }
  }
  Eigen::MatrixXd sub(x.rows(), static_cast<Eigen::Index>(live.size()));
  for (std::size_t k = 0; k < live.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(live[k]));
  const Eigen::MatrixXd a = correlation_matrix(sub).cwiseAbs();
  const auto p = static_cast<Eigen::Index>(live.size());

  std::vector<char> alive(live.size(), 1);
  Eigen::VectorXd row_sum = a.rowwise().sum() - a.diagonal();  // sum of |r| to the other live columns
  std::size_t n_alive = live.size();
  for (;;) {
    double best = threshold;
    Eigen::Index bi = -1, bj = -1;
    for (Eigen::Index i = 0; i < p; ++i) {
      if (!alive[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = i + 1; j < p; ++j)
        if (alive[static_cast<std::size_t>(j)] && a(i, j) > best) {
          best = a(i, j);
          bi = i;
          bj = j;
        }
    }
    if (bi < 0) break;
    // mean over the same n_alive - 1 partners, so comparing sums is comparing means
    const Eigen::Index drop = row_sum(bi) > row_sum(bj) ? bi : bj;
    const Eigen::Index keep = drop == bi ? bj : bi;
    alive[static_cast<std::size_t>(drop)] = 0;
    --n_alive;
    for (Eigen::Index k = 0; k < p; ++k)
      if (alive[static_cast<std::size_t>(k)]) row_sum(k) -= a(k, drop);
    r.dropped.push_back({live[static_cast<std::size_t>(drop)],
                         "r=" + fmt::fixed(best, 4) + " with " + names[live[static_cast<std::size_t>(keep)]]});
  }
  for (std::size_t k = 0; k < live.size(); ++k)
    if (alive[k]) r.kept.push_back(live[k]);
  if (n_alive == 0) throw DataError("correlation pruning removed every feature");
  return r;
}

inline FeatureTable correlation_prune(const FeatureTable& t, double threshold = 0.95,
                                      PruneResult* details = nullptr) {
  auto r = correlation_prune(t.values, t.feature_names, threshold);
  auto out = t.select_features(r.kept);
  if (details) *details = std::move(r);
  return out;
}

// ---------------------------------------------------------------------------
// Importance ranking

/// Feature indices by descending importance, ties by index.
inline std::vector<std::size_t> top_k_importance(const TreeModel& model, std::size_t k) {
  const auto& imp = model.importance();
  if (k > imp.size()) {
    log::warn("requested top " + std::to_string(k) + " of " + std::to_string(imp.size()) +
              " features; returning all");
    k = imp.size();
  }
  std::vector<std::size_t> order(imp.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
  order.resize(k);
  return order;
}

// ---------------------------------------------------------------------------
// Greedy threshold selection

struct SelectOptions {
  double threshold = 0.6;  // T
  int eval_depth = 2;
  int eval_min_leaf = 1;
  CvOptions cv;  // accuracy estimate A_f: k-fold CV mean
};

struct SelectionOutcome {
  double threshold = 0.0;
  std::vector<double> accuracy;     // A_f for every candidate feature
  std::vector<std::size_t> selected;  // candidate indices with A_f >= T, ascending
  std::vector<double> weights;      // per selected feature, A_f / sum(A_f over S)

  /// Selected features by descending weight (ties by index): the tie-break
  /// order for the final tree.
  std::vector<std::size_t> priority() const {
    std::vector<std::size_t> pos(selected.size());
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
    return pos;  // positions within `selected`
  }

  friend bool operator==(const SelectionOutcome&, const SelectionOutcome&) = default;
};

/// Scores each feature alone with a shallow tree under k-fold CV and keeps
/// those reaching accuracy T.
inline SelectionOutcome greedy_feature_select(const Eigen::MatrixXd& x, std::span<const int> labels,
                                              std::span<const std::string> ids, const SelectOptions& opt = {}) {
  if (!(opt.threshold >= 0.0)) throw ParameterError("selection threshold must be >= 0");
  if (x.cols() == 0) throw EmptyInputError("no candidate features to select from");
  SelectionOutcome out;
  out.threshold = opt.threshold;
  out.accuracy.assign(static_cast<std::size_t>(x.cols()), 0.0);
  TreeParams tp;
  tp.max_depth = opt.eval_depth;
  tp.min_leaf = opt.eval_min_leaf;
  CvOptions inner = opt.cv;
  inner.threads = 1;
  parallel_for(out.accuracy.size(), opt.cv.threads, [&](std::size_t f) {
    const Eigen::MatrixXd col = x.col(static_cast<Eigen::Index>(f));
    out.accuracy[f] = cross_validate(col, labels, ids, tp, inner).mean_validation;
  });
  double total = 0.0;
  for (std::size_t f = 0; f < out.accuracy.size(); ++f)
    if (out.accuracy[f] >= opt.threshold) {
      out.selected.push_back(f);
      total += out.accuracy[f];
    }
  if (out.selected.empty()) {
    const double best = *std::max_element(out.accuracy.begin(), out.accuracy.end());
    throw SelectionError("no feature reaches accuracy threshold " + fmt::shortest(opt.threshold) +
                         " (best single-feature accuracy " + fmt::fixed(best, 4) + ")");
  }
  for (auto f : out.selected) out.weights.push_back(total > 0.0 ? out.accuracy[f] / total : 1.0 / out.selected.size());
  return out;
}

/// Final tree on the selected columns; equal-gain ties go to the heavier feature.
inline TreeModel train_selected(const Eigen::MatrixXd& x, std::span<const int> labels, const SelectionOutcome& s,
                                TreeParams params, const std::vector<std::string>& names = {}) {
  Eigen::MatrixXd sub(x.rows(), static_cast<Eigen::Index>(s.selected.size()));
  std::vector<std::string> sub_names;
  for (std::size_t k = 0; k < s.selected.size(); ++k) {
    sub.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(s.selected[k]));
    if (!names.empty()) sub_names.push_back(names[s.selected[k]]);
  }
  params.feature_priority = s.priority();
  return train_tree(sub, labels, params, std::move(sub_names));
}

// ---------------------------------------------------------------------------
// Effect size

/// (mean_a - mean_b) / pooled SD.
inline double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("Cohen's d needs at least 2 values per group");
  auto moments = [](std::span<const double> v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, ss};
  };
  const auto [ma, ssa] = moments(a);
  const auto [mb, ssb] = moments(b);
  const double pooled = std::sqrt((ssa + ssb) / static_cast<double>(a.size() + b.size() - 2));
  if (!(pooled > 0.0)) throw UndefinedRatioError("pooled SD is zero; Cohen's d undefined");
  return (ma - mb) / pooled;
}

struct EffectSize {
  std::string feature;
  double d = 0.0;
};

/// One d per feature, ACr (a) against HC (b).
inline std::vector<EffectSize> effect_sizes(const FeatureTable& t) {
  std::vector<EffectSize> out;
  for (std::size_t j = 0; j < t.n_features(); ++j) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < t.n_records(); ++i)
      (t.rows[i].group == Group::ACr ? a : b).push_back(t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out.push_back({t.feature_names[j], cohens_d(a, b)});
  }
  return out;
}

}  // namespace eegbio
