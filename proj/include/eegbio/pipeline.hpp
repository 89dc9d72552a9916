#pragma once

// Pipeline stages. Each stage reads values, writes its files into a
// directory, and returns what the next stage needs; the CLI subcommands call
// the same functions on files, so a full run equals the stages run by hand.

#include <algorithm>
#include <map>
#include <numeric>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eegbio/classify.hpp"
#include "eegbio/config.hpp"
#include "eegbio/datamodel.hpp"
#include "eegbio/evaluate.hpp"
#include "eegbio/features.hpp"
#include "eegbio/harmonize.hpp"
#include "eegbio/io.hpp"
#include "eegbio/log.hpp"
#include "eegbio/psm.hpp"
#include "eegbio/report.hpp"
#include "eegbio/rng.hpp"
#include "eegbio/synth.hpp"
#include "eegbio/tree.hpp"

namespace eegbio {

inline constexpr const char* kVersion = "0.1.0";

namespace pipeline {

namespace fs = std::filesystem;

/// Stage failure: the stage name travels with the original error kind.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), stage + ": " + cause.what()), stage_(std::move(stage)), cause_(cause.what()) {}
  const std::string& stage() const { return stage_; }
  const std::string& cause() const { return cause_; }

 private:
  std::string stage_;
  std::string cause_;
};

template <class F>
auto run_stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const std::exception& e) {
    throw StageError(name, DataError(e.what()));
  }
}

/// Ordered key = value record of a run. Lines starting with "timestamp" are
/// the only non-reproducible content.
class Provenance {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& kv : items_)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    items_.emplace_back(key, value);
  }
  void set(const std::string& key, std::size_t v) { set(key, std::to_string(v)); }

  std::string format() const {
    std::string out;
    for (const auto& [k, v] : items_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

/// Stage-local seed: task index hashed into the master seed.
inline std::uint64_t stage_seed(std::uint64_t master, int ratio, int stage) {
  return Rng(master).derive(static_cast<std::uint64_t>(ratio) * 16 + static_cast<std::uint64_t>(stage)).next();
}

enum StageId { kSplit = 1, kSelect = 2, kCv = 3, kCurve = 4 };

inline std::vector<std::string> ids_of(const FeatureTable& t) {
  std::vector<std::string> ids;
  for (const auto& r : t.rows) ids.push_back(r.subject_id);
  return ids;
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Input

inline CohortSpec synthetic_spec(const PipelineConfig& cfg) {
  CohortSpec spec = default_cohort_spec(cfg.seed);
  spec.n_features = cfg.synth_n_features;
  spec.exact_effects = cfg.synth_exact_effects;
  spec.anchor_support = cfg.synth_anchor_support;
  // keep the informative columns spread over the table
  const double signs[] = {1.0, 1.0, -1.0, 1.0, -1.0};
  spec.effects.clear();
  for (std::size_t k = 0; k < 5; ++k)
    spec.effects.push_back({(7 + k * cfg.synth_n_features / 5) % cfg.synth_n_features, signs[k] * cfg.synth_effect_d});
  std::vector<AgeEffect> ages;
  for (const auto& a : spec.age_effects) {
    const std::size_t f = a.feature * cfg.synth_n_features / 120;
    bool clash = false;
    for (const auto& e : spec.effects) clash = clash || e.feature == f;
    if (!clash && f < cfg.synth_n_features) ages.push_back({f, a.slope});
  }
  spec.age_effects = ages;
  return spec;
}

inline std::vector<EpochSet> load_epoch_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("epochs directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".epochs") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptyInputError("no .epochs bundles in '" + dir.string() + "'");
  std::vector<EpochSet> out;
  for (const auto& f : files) out.push_back(io::load_epochs(f));
  return out;
}

struct InputResult {
  FeatureTable table;
  std::optional<GroundTruth> truth;
};

inline InputResult stage_input(const PipelineConfig& cfg, const fs::path& dir, Provenance& prov) {
  InputResult r;
  if (!cfg.features_path.empty()) {
    prov.set("input", "features:" + cfg.features_path);
    r.table = io::load_feature_table(cfg.features_path, {cfg.allow_missing});
  } else if (!cfg.epochs_dir.empty()) {
    prov.set("input", "epochs:" + cfg.epochs_dir);
    const auto records = load_epoch_dir(cfg.epochs_dir);
    r.table = run_stage("extract", [&] { return extract_table(records, cfg.features, cfg.threads); });
    io::write_text(dir / "feature_count.txt", describe(cfg.features, records.front().n_components));
  } else {
    prov.set("input", "synthetic");
    GroundTruth gt;
    r.table = generate_feature_cohort(synthetic_spec(cfg), &gt);
    io::write_text(dir / "truth_features.csv", format_ground_truth(gt));
    io::write_text(dir / "truth_sites.csv", format_site_truth(gt));
    r.truth = std::move(gt);
  }
  validate(r.table);
  io::write_feature_table(dir / "features.csv", r.table);
  io::write_text(dir / "manifest.csv", io::format_manifest(manifest(r.table)));
  prov.set("rows.input", r.table.n_records());
  prov.set("features.input", r.table.n_features());
  return r;
}

// ---------------------------------------------------------------------------
// Harmonization

inline CombatOptions combat_options(bool preserve_group, bool empirical_bayes) {
  CombatOptions o;
  if (preserve_group) o.covariates.push_back("group");
  o.empirical_bayes = empirical_bayes;
  return o;
}

/// Site SMD within HC when every site has HC records, else over all records.
inline std::vector<double> site_separation(const FeatureTable& t) {
  std::vector<std::string> sites, with_hc;
  for (const auto& r : t.rows) {
    if (std::find(sites.begin(), sites.end(), r.site) == sites.end()) sites.push_back(r.site);
    if (r.group == Group::HC && std::find(with_hc.begin(), with_hc.end(), r.site) == with_hc.end())
      with_hc.push_back(r.site);
  }
  return with_hc.size() == sites.size() ? site_smd(t, Group::HC) : site_smd(t);
}

inline std::string site_smd_csv(const FeatureTable& before, const std::optional<FeatureTable>& after) {
  const auto pre = site_separation(before);
  const auto post = after ? site_separation(*after) : std::vector<double>{};
  std::string out = "feature,site_smd_before,site_smd_after\n";
  for (std::size_t j = 0; j < pre.size(); ++j)
    out += before.feature_names[j] + "," + fmt::shortest(pre[j]) + "," + (after ? fmt::shortest(post[j]) : "") + "\n";
  return out;
}

inline std::string truth_recovery_csv(const GroundTruth& gt, const FeatureTable& raw, const FeatureTable& harmonized) {
  const auto d_raw = effect_sizes(raw);
  const auto d_h = effect_sizes(harmonized);
  std::string out = "feature,role,injected_d,d_raw,d_harmonized\n";
  for (std::size_t j = 0; j < gt.features.size(); ++j) {
    const auto& f = gt.features[j];
    if (f.role != "informative") continue;
    out += f.feature + "," + f.role + "," + fmt::shortest(f.d) + "," + fmt::shortest(d_raw[j].d) + "," +
           fmt::shortest(d_h[j].d) + "\n";
  }
  return out;
}

/// Fit-and-apply; writes the model bundle, the harmonized table and site SMDs.
inline FeatureTable stage_harmonize(const FeatureTable& t, bool preserve_group, bool empirical_bayes,
                                    const fs::path& dir) {
  const auto model = fit_combat(t, combat_options(preserve_group, empirical_bayes));
  save_combat_model(dir / "combat_model.txt", model);
  auto h = apply_combat(model, t);
  io::write_feature_table(dir / "harmonized.csv", h);
  io::write_text(dir / "site_smd.csv", site_smd_csv(t, h));
  return h;
}

// ---------------------------------------------------------------------------
// Matching

inline std::string match_summary_csv(const MatchResult& m) {
  return "ratio,strategy,kept_treated,kept_control,dropped_treated,dropped_control,support_lo,support_hi,"
         "achieved_ratio\n" +
         std::to_string(m.ratio) + "," + (m.strategy == MatchStrategy::trim ? "trim" : "nn") + "," +
         std::to_string(m.kept_treated.size()) + "," + std::to_string(m.kept_control.size()) + "," +
         std::to_string(m.dropped_treated.size()) + "," + std::to_string(m.dropped_control.size()) + "," +
         fmt::shortest(m.support_lo) + "," + fmt::shortest(m.support_hi) + "," + fmt::shortest(m.achieved_ratio) + "\n";
}

inline std::string propensity_csv(const MatchResult& m, const FeatureTable& t) {
  std::string out = "subject_id,group,score,kept\n";
  std::vector<char> kept(t.n_records(), 0);
  for (auto i : m.kept) kept[i] = 1;
  for (std::size_t i = 0; i < t.n_records(); ++i)
    out += t.rows[i].subject_id + "," + std::string(to_string(t.rows[i].group)) + "," + fmt::shortest(m.scores[i]) +
           "," + (kept[i] ? "true" : "false") + "\n";
  return out;
}

inline FeatureTable stage_match(const FeatureTable& t, int ratio, MatchStrategy strategy, const fs::path& dir,
                                MatchResult* result = nullptr) {
  const auto m = match_cohort(t.rows, ratio, strategy);
  auto out = t.select_rows(m.kept);
  io::write_feature_table(dir / "matched.csv", out);
  io::write_text(dir / "match_summary.csv", match_summary_csv(m));
  io::write_text(dir / "propensity.csv", propensity_csv(m, t));
  io::write_text(dir / "balance.csv", report::balance_csv(m.balance));
  io::write_text(dir / "score_histogram.csv", report::histogram_csv(m.balance));
  io::write_text(dir / "score_histogram.svg",
                 report::histogram_svg(m.balance, "Propensity scores, " + std::to_string(ratio) + ":1"));
  io::write_text(dir / "manifest.csv", io::format_manifest(manifest(out)));
  if (result) *result = m;
  return out;
}

// ---------------------------------------------------------------------------
// Split and selection

inline std::string split_csv(const FeatureTable& t, const SplitResult& s) {
  std::vector<std::string> set(t.n_records());
  for (auto i : s.train) set[i] = "train";
  for (auto i : s.test) set[i] = "test";
  std::string out = "subject_id,set\n";
  for (std::size_t i = 0; i < t.n_records(); ++i) out += t.rows[i].subject_id + "," + set[i] + "\n";
  return out;
}

inline SplitResult parse_split(const std::string& text, const FeatureTable& t) {
  const auto l = io::lines(text);
  if (l.empty() || l[0] != "subject_id,set") throw SchemaError("split file must start with 'subject_id,set'");
  std::map<std::string, std::string> set;
  for (std::size_t i = 1; i < l.size(); ++i) {
    if (l[i].empty()) continue;
    const auto c = fmt::split(l[i], ',');
    if (c.size() != 2 || (c[1] != "train" && c[1] != "test")) throw ParseError("split line " + std::to_string(i + 1));
    set[c[0]] = c[1];
  }
  SplitResult s;
  for (std::size_t i = 0; i < t.n_records(); ++i) {
    const auto it = set.find(t.rows[i].subject_id);
    if (it == set.end()) throw IntegrityError("record " + t.rows[i].subject_id + " missing from the split file");
    (it->second == "train" ? s.train : s.test).push_back(i);
  }
  return s;
}

struct Selection {
  std::vector<std::string> features;  // selected, candidate order
  std::vector<double> weights;
};

inline std::string selection_csv(const std::vector<std::string>& candidates, const SelectionOutcome& s) {
  std::string out = "feature,accuracy,selected,weight\n";
  std::vector<std::optional<double>> w(candidates.size());
  for (std::size_t k = 0; k < s.selected.size(); ++k) w[s.selected[k]] = s.weights[k];
  for (std::size_t j = 0; j < candidates.size(); ++j)
    out += candidates[j] + "," + fmt::shortest(s.accuracy[j]) + "," + (w[j] ? "true" : "false") + "," +
           (w[j] ? fmt::shortest(*w[j]) : "") + "\n";
  return out;
}

inline Selection parse_selection(const std::string& text) {
  const auto l = io::lines(text);
  if (l.empty() || l[0] != "feature,accuracy,selected,weight")
    throw SchemaError("selection file must start with 'feature,accuracy,selected,weight'");
  Selection s;
  for (std::size_t i = 1; i < l.size(); ++i) {
    if (l[i].empty()) continue;
    const auto c = fmt::split(l[i], ',');
    if (c.size() != 4) throw ParseError("selection line " + std::to_string(i + 1));
    if (c[2] != "true") continue;
    const auto w = fmt::parse_double(c[3]);
    if (!w) throw ParseError("selection line " + std::to_string(i + 1) + ": bad weight");
    s.features.push_back(c[0]);
    s.weights.push_back(*w);
  }
  if (s.features.empty()) throw SelectionError("selection file lists no selected feature");
  return s;
}

inline std::vector<std::size_t> columns_for(const FeatureTable& t, const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    const auto j = t.feature_index(n);
    if (!j) throw SchemaError("feature '" + n + "' is not in the table");
    idx.push_back(*j);
  }
  return idx;
}

struct SelectParams {
  double test_fraction = 0.2;
  double corr_threshold = 0.95;
  std::size_t top_k = 100;
  double threshold = 0.6;
  int eval_depth = 2;
  int max_depth = 8;
  int min_leaf = 2;
  std::size_t cv_folds = 10;
  std::uint64_t split_seed = 0;
  std::uint64_t select_seed = 0;
  unsigned threads = 1;
};

inline SelectParams select_params(const PipelineConfig& cfg, int ratio) {
  SelectParams p;
  p.test_fraction = cfg.test_fraction;
  p.corr_threshold = cfg.corr_threshold;
  p.top_k = cfg.top_k;
  p.threshold = cfg.select_threshold;
  p.eval_depth = cfg.select_eval_depth;
  p.max_depth = cfg.max_depth;
  p.min_leaf = cfg.min_leaf;
  p.cv_folds = cfg.cv_folds;
  p.split_seed = stage_seed(cfg.seed, ratio, kSplit);
  p.select_seed = stage_seed(cfg.seed, ratio, kSelect);
  p.threads = cfg.threads;
  return p;
}

struct SelectResult {
  SplitResult split;
  Selection selection;
};

/// Split, then on the training rows: correlation pruning, a preliminary
/// full tree, its top-k features, and greedy threshold selection among them.
inline SelectResult stage_select(const FeatureTable& t, const SelectParams& p, const fs::path& dir) {
  SelectResult r;
  const auto labels = t.labels();
  const auto ids = ids_of(t);
  r.split = stratified_split(labels, ids, p.test_fraction, p.split_seed);
  io::write_text(dir / "split.csv", split_csv(t, r.split));

  const auto train = t.select_rows(r.split.train);
  const auto y = train.labels();
  const auto train_ids = ids_of(train);
  PruneResult pr;
  const auto pruned = correlation_prune(train, p.corr_threshold, &pr);
  {
    std::string out = "feature,status,reason\n";
    std::vector<std::string> reason(t.n_features());
    for (const auto& d : pr.dropped) reason[d.feature] = d.reason;
    for (std::size_t j = 0; j < t.n_features(); ++j)
      out += t.feature_names[j] + "," + (reason[j].empty() ? "kept" : "dropped") + "," + reason[j] + "\n";
    io::write_text(dir / "pruning.csv", out);
  }
  TreeParams tp;
  tp.max_depth = p.max_depth;
  tp.min_leaf = p.min_leaf;
  tp.seed = p.select_seed;
  const auto prelim = train_tree(pruned.values, y, tp, pruned.feature_names);
  const auto top = top_k_importance(prelim, std::min(p.top_k, pruned.n_features()));
  {
    std::string out = "rank,feature,importance\n";
    for (std::size_t k = 0; k < top.size(); ++k)
      out += std::to_string(k + 1) + "," + pruned.feature_names[top[k]] + "," + fmt::shortest(prelim.importance()[top[k]]) + "\n";
    io::write_text(dir / "preliminary_importance.csv", out);
  }
  const auto candidates = pruned.select_features(top);
  SelectOptions so;
  so.threshold = p.threshold;
  so.eval_depth = p.eval_depth;
  so.cv = {p.cv_folds, p.select_seed, p.threads};
  const auto outcome = greedy_feature_select(candidates.values, y, train_ids, so);
  io::write_text(dir / "selection.csv", selection_csv(candidates.feature_names, outcome));
  for (std::size_t k = 0; k < outcome.selected.size(); ++k) {
    r.selection.features.push_back(candidates.feature_names[outcome.selected[k]]);
    r.selection.weights.push_back(outcome.weights[k]);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Training

inline TreeParams final_tree_params(int max_depth, int min_leaf, std::uint64_t seed) {
  TreeParams tp;
  tp.max_depth = max_depth;
  tp.min_leaf = min_leaf;
  tp.seed = seed;
  return tp;
}

/// Final tree on the training rows and selected features; heavier features win equal-gain ties.
inline TreeModel stage_train(const FeatureTable& t, const SplitResult& split, const Selection& sel, TreeParams tp,
                             const fs::path& dir) {
  const auto train = t.select_rows(split.train).select_features(columns_for(t, sel.features));
  SelectionOutcome s;
  s.selected.resize(sel.features.size());
  std::iota(s.selected.begin(), s.selected.end(), std::size_t{0});
  s.weights = sel.weights;
  tp.feature_priority = s.priority();
  const auto model = train_tree(train.values, train.labels(), tp, train.feature_names);
  io::write_text(dir / "tree.txt", format_tree(model));
  std::string out = "feature,importance\n";
  for (std::size_t j = 0; j < model.n_features(); ++j)
    out += model.feature_names()[j] + "," + fmt::shortest(model.importance()[j]) + "\n";
  io::write_text(dir / "importance.csv", out);
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalParams {
  Group positive = Group::HC;
  std::size_t cv_folds = 10;
  std::vector<double> curve_sizes = default_curve_sizes();
  std::uint64_t cv_seed = 0;
  std::uint64_t curve_seed = 0;
  unsigned threads = 1;
  std::string title = "";
};

inline EvalParams eval_params(const PipelineConfig& cfg, int ratio) {
  EvalParams p;
  p.positive = cfg.positive_class;
  p.cv_folds = cfg.cv_folds;
  p.curve_sizes = cfg.curve_sizes;
  p.cv_seed = stage_seed(cfg.seed, ratio, kCv);
  p.curve_seed = stage_seed(cfg.seed, ratio, kCurve);
  p.threads = cfg.threads;
  p.title = std::to_string(ratio) + ":1";
  return p;
}

struct EvalResult {
  ConfusionMatrix confusion;
  Metrics metrics;
  std::optional<double> auc;
  CvResult cv;
  std::vector<CurvePoint> curve;
  std::vector<EffectSize> effects;
};

inline std::string metrics_csv(const EvalResult& r) {
  const auto& m = r.metrics;
  return "n_test,accuracy,precision,recall,f1,specificity,auc,cv_mean\n" + std::to_string(r.confusion.n()) + "," +
         fmt::shortest(m.accuracy) + "," + (m.precision ? fmt::shortest(*m.precision) : "") + "," +
         (m.recall ? fmt::shortest(*m.recall) : "") + "," + (m.f1 ? fmt::shortest(*m.f1) : "") + "," +
         (m.specificity ? fmt::shortest(*m.specificity) : "") + "," + (r.auc ? fmt::shortest(*r.auc) : "") + "," +
         fmt::shortest(r.cv.mean_validation) + "\n";
}

inline EvalResult stage_evaluate(const FeatureTable& t, const SplitResult& split, const TreeModel& model,
                                 const EvalParams& p, const fs::path& dir) {
  EvalResult r;
  const auto cols = columns_for(t, model.feature_names());
  const auto train = t.select_rows(split.train).select_features(cols);
  const auto test = t.select_rows(split.test).select_features(cols);
  const int positive = label_of(p.positive);
  const std::string pos_name(to_string(p.positive));
  const std::string neg_name(to_string(p.positive == Group::HC ? Group::ACr : Group::HC));

  const auto y_test = test.labels();
  const auto pred = model.predict(test.values);
  const auto prob_acr = model.probability(test.values);
  std::vector<double> score;
  std::vector<int> is_pos;
  std::string preds = "subject_id,actual,predicted,score_" + pos_name + "\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    score.push_back(positive == 1 ? prob_acr[i] : 1.0 - prob_acr[i]);
    is_pos.push_back(y_test[i] == positive);
    preds += test.rows[i].subject_id + "," + std::string(to_string(test.rows[i].group)) + "," +
             std::string(to_string(pred[i] == 1 ? Group::ACr : Group::HC)) + "," + fmt::shortest(score.back()) + "\n";
  }
  io::write_text(dir / "predictions.csv", preds);
  r.confusion = confusion(pred, y_test, positive);
  r.metrics = metrics_from_confusion(r.confusion);
  try {
    r.auc = roc_auc(score, is_pos);
  } catch (const UndefinedRatioError&) {
    log::warn("test set has a single class; AUC undefined");
  }
  io::write_text(dir / "confusion.csv", report::confusion_csv(r.confusion, pos_name));
  io::write_text(dir / "confusion.svg",
                 report::confusion_svg(r.confusion, pos_name, neg_name, "Confusion matrix, " + p.title));

  TreeParams tp = model.params();
  tp.feature_priority.clear();
  const auto train_ids = ids_of(train);
  const auto y_train = train.labels();
  r.cv = cross_validate(train.values, y_train, train_ids, tp, {p.cv_folds, p.cv_seed, p.threads});
  {
    std::string out = "fold,train_accuracy,validation_accuracy\n";
    for (std::size_t f = 0; f < r.cv.validation.size(); ++f)
      out += std::to_string(f + 1) + "," + fmt::shortest(r.cv.train[f]) + "," + fmt::shortest(r.cv.validation[f]) + "\n";
    io::write_text(dir / "cv_folds.csv", out);
  }
  r.curve = learning_curve(train.values, y_train, train_ids, tp, p.curve_sizes, {p.cv_folds, p.curve_seed, p.threads});
  io::write_text(dir / "learning_curve.csv", report::learning_curve_csv(r.curve));
  io::write_text(dir / "learning_curve.svg", report::learning_curve_svg(r.curve, "Learning curve, " + p.title));

  r.effects = effect_sizes(t.select_features(cols));
  {
    std::vector<std::string> labels;
    std::vector<double> d;
    for (const auto& e : r.effects) labels.push_back(e.feature), d.push_back(e.d);
    io::write_text(dir / "effect_sizes.csv", report::bar_csv(labels, d, "feature", "cohens_d"));
    io::write_text(dir / "effect_sizes.svg", report::bar_svg("Effect sizes (ACr - HC), " + p.title, labels, d, "Cohen's d"));
  }
  io::write_text(dir / "metrics.csv", metrics_csv(r));
  return r;
}

// ---------------------------------------------------------------------------
// Whole run

struct RunSummary {
  int exit_code = 0;
  std::string failed_stage;
  std::string message;
  std::vector<std::pair<int, EvalResult>> results;
};

inline std::string summary_metrics_csv(const std::vector<std::pair<int, EvalResult>>& results) {
  std::string out = "metric";
  for (const auto& [ratio, r] : results) out += "," + std::to_string(ratio) + ":1";
  out += "\n";
  auto row = [&](const std::string& name, auto get) {
    out += name;
    for (const auto& [ratio, r] : results) {
      const std::optional<double> v = get(r);
      out += "," + (v ? fmt::fixed(*v, 4) : std::string());
    }
    out += "\n";
  };
  row("accuracy", [](const EvalResult& r) { return std::optional<double>(r.metrics.accuracy); });
  row("precision", [](const EvalResult& r) { return r.metrics.precision; });
  row("recall", [](const EvalResult& r) { return r.metrics.recall; });
  row("f1", [](const EvalResult& r) { return r.metrics.f1; });
  row("auc", [](const EvalResult& r) { return r.auc; });
  return out;
}

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// extract/input -> harmonize -> per ratio: match -> select -> train -> evaluate.
/// On failure a FAILED marker names the stage; files already written stay.
inline RunSummary run_pipeline(const PipelineConfig& cfg) {
  RunSummary s;
  const fs::path dir = cfg.out_dir;
  Provenance prov;
  auto finish = [&] {
    prov.set("timestamp", timestamp());
    io::write_text(dir / "provenance.txt", prov.format());
  };
  try {
    validate(cfg);
    fs::create_directories(dir);
    fs::remove(dir / "FAILED");
    const std::string canonical = format_config(cfg, true);
    io::write_text(dir / "config.txt", canonical);
    prov.set("version", kVersion);
    prov.set("seed", std::to_string(cfg.seed));
    prov.set("config_hash", hex(fnv1a(canonical)));
    for (const auto& line : io::lines(canonical)) {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) prov.set("config." + line.substr(0, eq), line.substr(eq + 3));
    }

    auto input = run_stage("input", [&] { return stage_input(cfg, dir, prov); });
    FeatureTable analysis = input.table;
    if (cfg.harmonize) {
      analysis = run_stage("harmonize", [&] {
        return stage_harmonize(input.table, cfg.preserve_group, cfg.empirical_bayes, dir / "harmonize");
      });
      if (input.truth)
        io::write_text(dir / "harmonize" / "truth_recovery.csv", truth_recovery_csv(*input.truth, input.table, analysis));
    } else {
      run_stage("harmonize", [&] {
        io::write_text(dir / "harmonize" / "site_smd.csv", site_smd_csv(input.table, std::nullopt));
        return 0;
      });
    }
    prov.set("harmonize", cfg.harmonize ? (cfg.preserve_group ? "combat+group" : "combat") : "disabled");
    prov.set("rows.harmonized", analysis.n_records());

    for (int ratio : cfg.ratios) {
      const std::string tag = "ratio_" + std::to_string(ratio);
      const fs::path rdir = dir / tag;
      const auto matched = run_stage("match[" + std::to_string(ratio) + "]",
                                     [&] { return stage_match(analysis, ratio, cfg.strategy, rdir); });
      prov.set(tag + ".rows.matched", matched.n_records());
      const auto sel = run_stage("select[" + std::to_string(ratio) + "]",
                                 [&] { return stage_select(matched, select_params(cfg, ratio), rdir); });
      prov.set(tag + ".rows.train", sel.split.train.size());
      prov.set(tag + ".rows.test", sel.split.test.size());
      prov.set(tag + ".features.selected", sel.selection.features.size());
      const auto model = run_stage("train[" + std::to_string(ratio) + "]", [&] {
        return stage_train(matched, sel.split, sel.selection,
                           final_tree_params(cfg.max_depth, cfg.min_leaf, stage_seed(cfg.seed, ratio, kSelect)), rdir);
      });
      auto ev = run_stage("evaluate[" + std::to_string(ratio) + "]",
                          [&] { return stage_evaluate(matched, sel.split, model, eval_params(cfg, ratio), rdir); });
      s.results.emplace_back(ratio, std::move(ev));
    }
    io::write_text(dir / "summary_metrics.csv", summary_metrics_csv(s.results));
    prov.set("status", "ok");
    finish();
  } catch (const Error& e) {
    s.exit_code = e.exit_code();
    s.message = e.what();
    if (const auto* se = dynamic_cast<const StageError*>(&e)) {
      s.failed_stage = se->stage();
      s.message = se->cause();
    } else {
      s.failed_stage = "config";
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!ec) {
      io::write_text(dir / "FAILED", "stage = " + s.failed_stage + "\nerror = " + s.message + "\n");
      prov.set("status", "failed");
      finish();
    }
  }
  return s;
}

}  // namespace pipeline
}  // namespace eegbio
