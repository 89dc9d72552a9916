#pragma once

// Binary CART classifier: Gini impurity, exhaustive midpoint threshold search.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegbio/error.hpp"
#include "eegbio/format.hpp"
#include "eegbio/io.hpp"
#include "eegbio/log.hpp"

namespace eegbio {

struct TreeParams {
  int max_depth = 8;
  int min_leaf = 2;
  std::uint64_t seed = 0;
  /// Order in which features are scanned; on equal gain the earlier one wins.
  /// Empty means ascending feature index.
  std::vector<std::size_t> feature_priority;

  void validate() const {
    if (max_depth < 1) throw ParameterError("max_depth must be >= 1");
    if (min_leaf < 1) throw ParameterError("min_leaf must be >= 1");
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // x <= threshold
  int right = -1;
  std::array<std::size_t, 2> counts{};  // training rows per class

  bool is_leaf() const { return feature < 0; }
  std::size_t n() const { return counts[0] + counts[1]; }
};

class TreeModel {
 public:
  static constexpr int kVersion = 1;

  TreeModel() = default;
  TreeModel(std::vector<TreeNode> nodes, std::vector<double> importance, std::vector<std::string> names,
            TreeParams params)
      : nodes_(std::move(nodes)), importance_(std::move(importance)), names_(std::move(names)),
        params_(std::move(params)) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<double>& importance() const { return importance_; }
  const std::vector<std::string>& feature_names() const { return names_; }
  const TreeParams& params() const { return params_; }
  std::size_t n_features() const { return importance_.size(); }

  const TreeNode& leaf_for(std::span<const double> row) const {
    int i = 0;
    while (!nodes_[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes_[static_cast<std::size_t>(i)];
      i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)];
  }

  /// Majority class of the leaf (ties resolve to class 0).
  int predict(std::span<const double> row) const {
    const auto& leaf = leaf_for(row);
    return leaf.counts[1] > leaf.counts[0] ? 1 : 0;
  }

  /// Laplace-smoothed class-1 probability of the leaf, (n1 + 1) / (n + 2).
  double probability(std::span<const double> row) const {
    const auto& leaf = leaf_for(row);
    return (static_cast<double>(leaf.counts[1]) + 1.0) / (static_cast<double>(leaf.n()) + 2.0);
  }

  std::vector<int> predict(const Eigen::MatrixXd& x) const {
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
      out[static_cast<std::size_t>(i)] = predict(row);
    }
    return out;
  }

  std::vector<double> probability(const Eigen::MatrixXd& x) const {
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
      out[static_cast<std::size_t>(i)] = probability(row);
    }
    return out;
  }

  int depth() const {
    std::vector<int> d(nodes_.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.is_leaf()) continue;
      d[static_cast<std::size_t>(n.left)] = d[static_cast<std::size_t>(n.right)] = d[i] + 1;
      best = std::max(best, d[i] + 1);
    }
    return best;
  }

  bool operator==(const TreeModel& o) const {
    if (nodes_.size() != o.nodes_.size() || importance_ != o.importance_ || names_ != o.names_) return false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& a = nodes_[i];
      const auto& b = o.nodes_[i];
      if (a.feature != b.feature || a.threshold != b.threshold || a.left != b.left || a.right != b.right ||
          a.counts != b.counts)
        return false;
    }
    return true;
  }

 private:
  std::vector<TreeNode> nodes_;
  std::vector<double> importance_;
  std::vector<std::string> names_;
  TreeParams params_;
};

namespace tree_detail {

inline double gini(std::size_t n0, std::size_t n1) {
  const double n = static_cast<double>(n0 + n1);
  if (n == 0.0) return 0.0;
  const double p = static_cast<double>(n1) / n;
  return 2.0 * p * (1.0 - p);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = -1.0;  // decrease in n-weighted impurity
};

class Builder {
 public:
  Builder(const Eigen::MatrixXd& x, std::span<const int> y, const TreeParams& p)
      : x_(x), y_(y), p_(p), importance_(static_cast<std::size_t>(x.cols()), 0.0) {
    if (p_.feature_priority.empty()) {
      order_.resize(static_cast<std::size_t>(x.cols()));
      std::iota(order_.begin(), order_.end(), std::size_t{0});
    } else {
      order_ = p_.feature_priority;
    }
  }

  void grow(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    for (auto r : rows) ++nodes_[static_cast<std::size_t>(id)].counts[static_cast<std::size_t>(y_[r])];
    const auto counts = nodes_[static_cast<std::size_t>(id)].counts;
    if (depth >= p_.max_depth || counts[0] == 0 || counts[1] == 0 ||
        rows.size() < 2 * static_cast<std::size_t>(p_.min_leaf))
      return;
    const Split s = best_split(rows, counts);
    if (s.feature < 0) return;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (x_(static_cast<Eigen::Index>(r), s.feature) <= s.threshold ? left : right).push_back(r);
    importance_[static_cast<std::size_t>(s.feature)] += s.gain;
    nodes_[static_cast<std::size_t>(id)].feature = s.feature;
    nodes_[static_cast<std::size_t>(id)].threshold = s.threshold;
    rows.clear();
    rows.shrink_to_fit();
    nodes_[static_cast<std::size_t>(id)].left = static_cast<int>(nodes_.size());
    grow(left, depth + 1);
    nodes_[static_cast<std::size_t>(id)].right = static_cast<int>(nodes_.size());
    grow(right, depth + 1);
  }

  TreeModel finish(std::vector<std::string> names) {
    const double total = std::accumulate(importance_.begin(), importance_.end(), 0.0);
    if (total > 0.0)
      for (double& v : importance_) v /= total;
    return TreeModel(std::move(nodes_), std::move(importance_), std::move(names), p_);
  }

 private:
  Split best_split(const std::vector<std::size_t>& rows, std::array<std::size_t, 2> counts) const {
    const double parent = gini(counts[0], counts[1]) * static_cast<double>(rows.size());
    const auto min_leaf = static_cast<std::size_t>(p_.min_leaf);
    Split best;
    std::vector<std::pair<double, int>> v(rows.size());
    for (auto f : order_) {
      const auto fi = static_cast<Eigen::Index>(f);
      for (std::size_t k = 0; k < rows.size(); ++k) v[k] = {x_(static_cast<Eigen::Index>(rows[k]), fi), y_[rows[k]]};
      std::sort(v.begin(), v.end());
      std::array<std::size_t, 2> left{};
      for (std::size_t k = 0; k + 1 < v.size(); ++k) {
        ++left[static_cast<std::size_t>(v[k].second)];
        if (v[k].first == v[k + 1].first) continue;
        const std::size_t nl = k + 1;
        const std::size_t nr = v.size() - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double child = gini(left[0], left[1]) * static_cast<double>(nl) +
                             gini(counts[0] - left[0], counts[1] - left[1]) * static_cast<double>(nr);
        const double gain = std::max(parent - child, 0.0);
        // strict improvement beyond rounding noise; earlier feature / lower threshold keeps ties
        if (best.feature < 0 || gain > best.gain + 1e-12 * std::max(1.0, parent)) {
          best.gain = gain;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (v[k].first + v[k + 1].first);
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  std::span<const int> y_;
  const TreeParams& p_;
  std::vector<std::size_t> order_;
  std::vector<TreeNode> nodes_;
  std::vector<double> importance_;
};

}  // namespace tree_detail

/// Fits a CART tree on rows of `x` with labels in {0, 1}. Impure nodes split
/// on the best midpoint threshold even at zero gain (XOR-style structure);
/// importances are the normalized total impurity decrease per feature.
namespace tree_detail {

inline TreeModel fit(const Eigen::MatrixXd& x, std::span<const int> y, const TreeParams& params,
                     std::vector<std::string> feature_names, bool warn) {
  params.validate();
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ParameterError("rows and labels differ in length");
  if (x.rows() == 0) throw EmptyInputError("cannot train a tree on zero rows");
  if (!params.feature_priority.empty()) {
    std::vector<std::size_t> sorted = params.feature_priority;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j < sorted.size(); ++j)
      if (sorted[j] != j || sorted.size() != static_cast<std::size_t>(x.cols()))
        throw ParameterError("feature_priority must be a permutation of the feature indices");
  }
  std::array<std::size_t, 2> counts{};
  for (int v : y) {
    if (v != 0 && v != 1) throw LabelError("tree labels must be 0 or 1");
    ++counts[static_cast<std::size_t>(v)];
  }
  if (warn && (counts[0] == 0 || counts[1] == 0)) log::warn("single-class training data; the tree is one leaf");
  if (feature_names.empty())
    for (Eigen::Index j = 0; j < x.cols(); ++j) feature_names.push_back("f" + std::to_string(j));

  tree_detail::Builder b(x, y, params);
  std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  b.grow(rows, 0);
  return b.finish(std::move(feature_names));
}

}  // namespace tree_detail

inline TreeModel train_tree(const Eigen::MatrixXd& x, std::span<const int> y, const TreeParams& params = {},
                            std::vector<std::string> feature_names = {}) {
  return tree_detail::fit(x, y, params, std::move(feature_names), true);
}

/// As train_tree, without the single-class warning (resampled folds).
inline TreeModel train_tree_quiet(const Eigen::MatrixXd& x, std::span<const int> y, const TreeParams& params = {}) {
  return tree_detail::fit(x, y, params, {}, false);
}

// ---------------------------------------------------------------------------
// Text serialization: header lines, then one node per line
//   id,kind,feature,threshold,left,right,count0,count1

inline std::string format_tree(const TreeModel& m) {
  std::string out = "# eegbio-tree v" + std::to_string(TreeModel::kVersion) + "\n";
  out += "params,max_depth=" + std::to_string(m.params().max_depth) + ",min_leaf=" +
         std::to_string(m.params().min_leaf) + ",seed=" + std::to_string(m.params().seed) + "\n";
  out += "features," + fmt::join(m.feature_names(), ";") + "\n";
  std::vector<std::string> imp;
  for (double v : m.importance()) imp.push_back(fmt::shortest(v));
  out += "importance," + fmt::join(imp, ";") + "\n";
  out += "id,kind,feature,threshold,left,right,count0,count1\n";
  for (std::size_t i = 0; i < m.nodes().size(); ++i) {
    const auto& n = m.nodes()[i];
    out += std::to_string(i) + "," + (n.is_leaf() ? "leaf" : "split") + "," + std::to_string(n.feature) + "," +
           (n.is_leaf() ? std::string() : fmt::shortest(n.threshold)) + "," + std::to_string(n.left) + "," +
           std::to_string(n.right) + "," + std::to_string(n.counts[0]) + "," + std::to_string(n.counts[1]) + "\n";
  }
  return out;
}

inline TreeModel parse_tree(const std::string& text) {
  const auto l = io::lines(text);
  if (l.size() < 5 || l[0] != "# eegbio-tree v" + std::to_string(TreeModel::kVersion))
    throw SchemaError("not an eegbio tree model (or unsupported version)");
  TreeParams p;
  for (const auto& kv : fmt::split(l[1], ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const auto key = kv.substr(0, eq);
    const auto val = fmt::parse_int(kv.substr(eq + 1));
    if (!val) throw ParseError("tree params: bad value for " + key);
    if (key == "max_depth") p.max_depth = static_cast<int>(*val);
    else if (key == "min_leaf") p.min_leaf = static_cast<int>(*val);
    else if (key == "seed") p.seed = static_cast<std::uint64_t>(*val);
  }
  auto tail = [](const std::string& line, const std::string& key) {
    if (line.rfind(key + ",", 0) != 0) throw ParseError("tree model: expected '" + key + "' line");
    return line.substr(key.size() + 1);
  };
  const auto names_s = tail(l[2], "features");
  std::vector<std::string> names = names_s.empty() ? std::vector<std::string>{} : fmt::split(names_s, ';');
  std::vector<double> imp;
  const auto imp_s = tail(l[3], "importance");
  if (!imp_s.empty())
    for (const auto& s : fmt::split(imp_s, ';')) {
      const auto v = fmt::parse_double(s);
      if (!v) throw ParseError("tree model: bad importance");
      imp.push_back(*v);
    }
  std::vector<TreeNode> nodes;
  for (std::size_t i = 5; i < l.size(); ++i) {
    if (l[i].empty()) continue;
    const auto c = fmt::split(l[i], ',');
    if (c.size() != 8) throw ParseError("tree model: bad node line " + std::to_string(i + 1));
    TreeNode n;
    const auto feature = fmt::parse_int(c[2]);
    const auto left = fmt::parse_int(c[4]);
    const auto right = fmt::parse_int(c[5]);
    const auto c0 = fmt::parse_int(c[6]);
    const auto c1 = fmt::parse_int(c[7]);
    if (!feature || !left || !right || !c0 || !c1) throw ParseError("tree model: bad node line");
    n.feature = static_cast<int>(*feature);
    n.left = static_cast<int>(*left);
    n.right = static_cast<int>(*right);
    n.counts = {static_cast<std::size_t>(*c0), static_cast<std::size_t>(*c1)};
    if (c[1] == "split") {
      const auto t = fmt::parse_double(c[3]);
      if (!t) throw ParseError("tree model: bad threshold");
      n.threshold = *t;
    }
    nodes.push_back(n);
  }
  for (const auto& n : nodes)
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || static_cast<std::size_t>(n.left) >= nodes.size() ||
                         static_cast<std::size_t>(n.right) >= nodes.size() ||
                         static_cast<std::size_t>(n.feature) >= imp.size()))
      throw ParseError("tree model: dangling child or feature index");
  if (nodes.empty()) throw ParseError("tree model has no nodes");
  return TreeModel(std::move(nodes), std::move(imp), std::move(names), p);
}

}  // namespace eegbio
