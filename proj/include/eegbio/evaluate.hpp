#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegbio/error.hpp"
#include "eegbio/format.hpp"
#include "eegbio/log.hpp"
#include "eegbio/parallel.hpp"
#include "eegbio/rng.hpp"
#include "eegbio/tree.hpp"

namespace eegbio {

/// floor(x + 1/2); the epsilon keeps products like 0.2 * 7.5 from landing just below the half.
inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9)); }

namespace eval_detail {

/// Indices of each class (0, 1) in canonical order: by id, then position.
inline std::array<std::vector<std::size_t>, 2> by_class(std::span<const int> labels,
                                                        std::span<const std::string> ids) {
  std::array<std::vector<std::size_t>, 2> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw LabelError("labels must be 0 or 1");
    out[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  if (!ids.empty())
    for (auto& v : out)
      std::stable_sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  return out;
}

inline double accuracy(std::span<const int> pred, std::span<const int> truth) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == truth[i];
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

inline Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

template <class T>
std::vector<T> pick(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace eval_detail

// ---------------------------------------------------------------------------
// Splitting

struct SplitResult {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Per class, round-half-up(n_class * test_fraction) records go to the test
/// set, chosen by a seeded shuffle of the class in subject_id order.
inline SplitResult stratified_split(std::span<const int> labels, std::span<const std::string> ids,
                                    double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ParameterError("test fraction must lie in (0, 1)");
  if (!ids.empty() && ids.size() != labels.size()) throw ParameterError("ids and labels differ in length");
  auto classes = eval_detail::by_class(labels, ids);
  const Rng rng(seed);
  SplitResult r;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& members = classes[c];
    if (members.size() < 2)
      throw SplitError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                       " record(s); a stratified split needs at least 2");
    const std::size_t n_test = round_half_up(static_cast<double>(members.size()) * test_fraction);
    if (n_test == 0 || n_test >= members.size())
      throw SplitError("test fraction leaves class " + std::to_string(c) + " without train or test records");
    auto stream = rng.derive(c);
    stream.shuffle(std::span(members));
    r.test.insert(r.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    r.train.insert(r.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(r.train.begin(), r.train.end());
  std::sort(r.test.begin(), r.test.end());
  return r;
}

/// Fold number per record. Records are put in canonical (class, subject_id)
/// order, shuffled within class, then dealt round-robin; the dealer position
/// carries over from one class to the next so fold totals also stay within 1.
inline std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::span<const std::string> ids,
                                                 std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ParameterError("cross-validation needs k >= 2");
  if (labels.size() < k)
    throw ParameterError("cannot make " + std::to_string(k) + " folds from " + std::to_string(labels.size()) +
                         " records");
  auto classes = eval_detail::by_class(labels, ids);
  const Rng rng(seed);
  std::vector<std::size_t> fold(labels.size());
  std::size_t dealer = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    auto stream = rng.derive(100 + c);
    stream.shuffle(std::span(classes[c]));
    for (auto i : classes[c]) fold[i] = dealer++ % k;
  }
  return fold;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvOptions {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct CvResult {
  std::vector<double> validation;  // accuracy per fold
  std::vector<double> train;       // training accuracy per fold
  double mean_validation = 0.0;
  double mean_train = 0.0;
};

inline double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline CvResult cross_validate(const Eigen::MatrixXd& x, std::span<const int> labels,
                               std::span<const std::string> ids, const TreeParams& params,
                               const CvOptions& opt = {}) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ParameterError("rows and labels differ in length");
  const auto fold = stratified_folds(labels, ids, opt.k, opt.seed);
  CvResult r;
  r.validation.assign(opt.k, 0.0);
  r.train.assign(opt.k, 0.0);
  parallel_for(opt.k, opt.threads, [&](std::size_t f) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
    const auto y_tr = eval_detail::pick(labels, tr);
    const auto y_te = eval_detail::pick(labels, te);
    const auto xtr = eval_detail::rows_of(x, tr);
    const auto model = train_tree_quiet(xtr, y_tr, params);
    r.train[f] = eval_detail::accuracy(model.predict(xtr), y_tr);
    r.validation[f] = eval_detail::accuracy(model.predict(eval_detail::rows_of(x, te)), y_te);
  });
  r.mean_validation = mean_of(r.validation);
  r.mean_train = mean_of(r.train);
  return r;
}

// ---------------------------------------------------------------------------
// Learning curve

struct CurvePoint {
  double fraction = 0.0;
  std::size_t n = 0;
  double train_score = 0.0;
  double validation_score = 0.0;
};

inline std::vector<double> default_curve_sizes() {
  std::vector<double> s;
  for (int i = 1; i <= 10; ++i) s.push_back(i / 10.0);
  return s;
}

/// For each size s, a stratified subsample (round-half-up per class) of the
/// given records is cross-validated. Sizes yielding fewer than k records are
/// skipped with a warning.
inline std::vector<CurvePoint> learning_curve(const Eigen::MatrixXd& x, std::span<const int> labels,
                                              std::span<const std::string> ids, const TreeParams& params,
                                              std::span<const double> sizes, const CvOptions& opt = {}) {
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!(sizes[i] > 0.0 && sizes[i] <= 1.0)) throw ParameterError("learning-curve sizes must lie in (0, 1]");
    if (i > 0 && !(sizes[i] > sizes[i - 1])) throw ParameterError("learning-curve sizes must be ascending");
  }
  const auto classes = eval_detail::by_class(labels, ids);
  const Rng rng(opt.seed);
  std::vector<CurvePoint> out;
  for (std::size_t p = 0; p < sizes.size(); ++p) {
    std::vector<std::size_t> idx;
    for (std::size_t c = 0; c < 2; ++c) {
      auto members = classes[c];
      auto stream = rng.derive(1000 + 2 * p + c);
      stream.shuffle(std::span(members));
      const std::size_t take = std::min(members.size(), round_half_up(static_cast<double>(members.size()) * sizes[p]));
      idx.insert(idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(idx.begin(), idx.end());
    if (idx.size() < opt.k) {
      log::warn("learning-curve size " + fmt::shortest(sizes[p]) + " gives " + std::to_string(idx.size()) +
                " records (< k = " + std::to_string(opt.k) + "); skipped");
      continue;
    }
    const auto sub_ids = ids.empty() ? std::vector<std::string>{} : eval_detail::pick(ids, idx);
    const auto sub_y = eval_detail::pick(labels, idx);
    CvOptions o = opt;
    o.seed = rng.derive(2000 + p).next();
    const auto cv = cross_validate(eval_detail::rows_of(x, idx), sub_y, sub_ids, params, o);
    out.push_back({sizes[p], idx.size(), cv.mean_train, cv.mean_validation});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Confusion matrix and metrics

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  int positive = 0;

  std::size_t n() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels, int positive) {
  if (predictions.size() != labels.size()) throw ParameterError("predictions and labels differ in length");
  if (positive != 0 && positive != 1) throw LabelError("positive class must be 0 or 1");
  ConfusionMatrix c;
  c.positive = positive;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw LabelError("labels must be 0 or 1");
    if (predictions[i] != 0 && predictions[i] != 1)
      throw LabelError("prediction " + std::to_string(predictions[i]) + " is not a known class");
    const bool pp = predictions[i] == positive;
    const bool ap = labels[i] == positive;
    if (pp && ap) ++c.tp;
    else if (pp) ++c.fp;
    else if (ap) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct Metrics {
  double accuracy = 0.0;
  std::optional<double> precision, recall, f1, specificity;
};

inline Metrics metrics_from_confusion(const ConfusionMatrix& c) {
  if (c.n() == 0) throw EmptyInputError("confusion matrix is empty");
  auto ratio = [](std::size_t a, std::size_t b) -> std::optional<double> {
    if (b == 0) return std::nullopt;
    return static_cast<double>(a) / static_cast<double>(b);
  };
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.n());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  // 2TP / (2TP + FP + FN): the harmonic mean, defined whenever precision and recall are
  if (m.precision && m.recall) m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

/// Mann-Whitney form of the ROC area with average ranks for ties.
/// `positive[i]` marks the positive-class records.
inline double roc_auc(std::span<const double> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) throw ParameterError("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t)
      if (positive[order[t]]) rank_sum += avg;
    i = j;
  }
  for (int p : positive) n_pos += p != 0;
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedRatioError("AUC needs both classes present");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

}  // namespace eegbio
