// eegbio command-line front end.
//
// Settings are resolved in this order, later wins:
//   built-in defaults < --config FILE < --set key=value (in order) < dedicated flags

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "eegbio/pipeline.hpp"

namespace fs = std::filesystem;
using namespace eegbio;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  std::string config;
  std::vector<std::string> sets;
};

PipelineConfig resolve(const Globals& g) {
  PipelineConfig c;
  if (!g.config.empty()) c = load_config(g.config);
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(c, fmt::trim(kv.substr(0, eq)), fmt::trim(kv.substr(eq + 1)));
  }
  if (g.seed) c.seed = *g.seed;
  if (g.threads) c.threads = *g.threads;
  if (g.out_dir) c.out_dir = *g.out_dir;
  return c;
}

// "m=4,lag=2,w1=10,w2=210" -> sl.* keys
void apply_sl_params(PipelineConfig& c, const std::string& spec) {
  for (const auto& item : fmt::split(spec, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--sl-params expects name=value items, got '" + item + "'");
    const auto k = fmt::trim(item.substr(0, eq));
    if (k != "m" && k != "lag" && k != "w1" && k != "w2" && k != "p_ref")
      throw ConfigError("--sl-params: unknown parameter '" + k + "'");
    set_config_value(c, "sl." + k, fmt::trim(item.substr(eq + 1)));
  }
}

void write_boxplots(const FeatureTable& t, const FeatureConfig& cfg, const fs::path& dir) {
  std::size_t nc = 0;
  while (t.feature_index(names::power(cfg.bands[0], nc))) ++nc;
  for (const auto& band : cfg.bands) {
    std::vector<report::BoxGroup> groups;
    for (std::size_t c = 0; c < nc; ++c) {
      const auto j = *t.feature_index(names::power(band, c));
      for (Group g : {Group::HC, Group::ACr}) {
        std::vector<double> v;
        for (std::size_t i = 0; i < t.n_records(); ++i)
          if (t.rows[i].group == g) v.push_back(t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        if (!v.empty()) groups.push_back({component_name(c) + " " + std::string(to_string(g)), v});
      }
    }
    io::write_text(dir / ("power_" + band.name + ".csv"), report::boxplot_csv(groups));
    io::write_text(dir / ("power_" + band.name + ".svg"),
                   report::boxplot_svg(groups, "Relative power, " + band.name, "relative power"));
  }
}

int fail(const Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  return e.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG biomarker pipeline: features, harmonization, matching, trees, evaluation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--config", g.config, "config file (key = value lines)");
  app.add_option("--set", g.sets, "override one config key, key=value");

  // extract
  auto* extract = app.add_subcommand("extract", "epoch bundles -> feature table");
  std::string epochs_dir, bands, sl_params;
  bool describe_only = false, boxplot = false;
  std::size_t describe_components = 9;
  extract->add_option("--epochs-dir", epochs_dir, "directory of .epochs bundles");
  extract->add_option("--bands", bands, "band scheme: standard or name:lo-hi,...");
  extract->add_option("--sl-params", sl_params, "SL overrides: m=,lag=,w1=,w2=,p_ref=");
  extract->add_flag("--describe", describe_only, "print the feature count breakdown and exit");
  extract->add_option("--components", describe_components, "component count for --describe");
  extract->add_flag("--boxplot", boxplot, "per-band relative power boxplots (CSV + SVG)");

  // harmonize
  auto* harmonize = app.add_subcommand("harmonize", "ComBat fit and/or apply");
  std::string h_input, h_model;
  bool h_fit = false, h_preserve = false, h_no_eb = false;
  harmonize->add_option("--input", h_input, "feature table CSV")->required();
  auto* fit_flag = harmonize->add_flag("--fit", h_fit, "fit on the input and apply it");
  harmonize->add_option("--apply", h_model, "apply a saved model")->excludes(fit_flag);
  harmonize->add_flag("--preserve-group", h_preserve, "keep group as a protected covariate");
  harmonize->add_flag("--no-empirical-bayes", h_no_eb, "plain per-site location/scale");

  // match
  auto* match = app.add_subcommand("match", "propensity-score matching at one ratio");
  std::string m_input, m_strategy;
  std::optional<int> m_ratio;
  match->add_option("--input", m_input, "feature table CSV")->required();
  match->add_option("--ratio", m_ratio, "controls per treated record");
  match->add_option("--strategy", m_strategy, "trim or nn");

  // select
  auto* select = app.add_subcommand("select", "split, prune and greedy feature selection");
  std::string s_input;
  int s_ratio = 2;
  select->add_option("--input", s_input, "matched table CSV")->required();
  select->add_option("--ratio", s_ratio, "ratio tag used for seed derivation");

  // train
  auto* train = app.add_subcommand("train", "final tree on the training split");
  std::string t_input, t_split, t_selection;
  int t_ratio = 2;
  train->add_option("--input", t_input, "matched table CSV")->required();
  train->add_option("--split", t_split, "split.csv")->required();
  train->add_option("--selection", t_selection, "selection.csv")->required();
  train->add_option("--ratio", t_ratio, "ratio tag used for seed derivation");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "held-out metrics, CV, learning curve, effect sizes");
  std::string e_input, e_split, e_model, e_positive;
  int e_ratio = 2;
  evaluate->add_option("--input", e_input, "matched table CSV")->required();
  evaluate->add_option("--split", e_split, "split.csv")->required();
  evaluate->add_option("--model", e_model, "tree.txt")->required();
  evaluate->add_option("--ratio", e_ratio, "ratio tag used for seed derivation");
  evaluate->add_option("--positive-class", e_positive, "HC or ACr");

  // synth
  auto* synth = app.add_subcommand("synth", "synthetic cohort with ground truth");
  std::string spec_path;
  bool print_spec = false;
  synth->add_option("--spec", spec_path, "cohort spec file");
  synth->add_flag("--print-default-spec", print_spec, "print the default spec and exit");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "extract/input -> harmonize -> match -> select -> train -> evaluate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    PipelineConfig cfg = resolve(g);
    if (extract->parsed()) {
      if (!bands.empty()) set_config_value(cfg, "features.bands", bands);
      if (!sl_params.empty()) apply_sl_params(cfg, sl_params);
      if (describe_only) {
        validate(cfg);
        std::cout << describe(cfg.features, describe_components);
        return 0;
      }
      if (epochs_dir.empty()) throw ConfigError("extract needs --epochs-dir");
      cfg.epochs_dir = epochs_dir;
      cfg.features_path.clear();
      validate(cfg);
      fs::create_directories(cfg.out_dir);
      pipeline::Provenance prov;
      const auto in = pipeline::stage_input(cfg, cfg.out_dir, prov);
      if (boxplot) write_boxplots(in.table, cfg.features, fs::path(cfg.out_dir) / "boxplots");
      return 0;
    }
    if (harmonize->parsed()) {
      validate(cfg);
      if (!h_fit && h_model.empty()) throw ConfigError("harmonize needs --fit or --apply MODEL");
      const auto table = io::load_feature_table(h_input, {cfg.allow_missing});
      fs::create_directories(cfg.out_dir);
      if (h_fit) {
        pipeline::stage_harmonize(table, h_preserve || cfg.preserve_group, cfg.empirical_bayes && !h_no_eb,
                                  cfg.out_dir);
      } else {
        const auto model = load_combat_model(h_model);
        const auto h = apply_combat(model, table);
        io::write_feature_table(fs::path(cfg.out_dir) / "harmonized.csv", h);
        io::write_text(fs::path(cfg.out_dir) / "site_smd.csv", pipeline::site_smd_csv(table, h));
      }
      return 0;
    }
    if (match->parsed()) {
      if (!m_strategy.empty()) set_config_value(cfg, "match.strategy", m_strategy);
      validate(cfg);
      const int ratio = m_ratio ? *m_ratio : cfg.ratios.front();
      if (ratio < 1) throw ParameterError("--ratio must be >= 1");
      const auto table = io::load_feature_table(m_input, {cfg.allow_missing});
      fs::create_directories(cfg.out_dir);
      pipeline::stage_match(table, ratio, cfg.strategy, cfg.out_dir);
      return 0;
    }
    if (select->parsed()) {
      validate(cfg);
      const auto table = io::load_feature_table(s_input);
      fs::create_directories(cfg.out_dir);
      pipeline::stage_select(table, pipeline::select_params(cfg, s_ratio), cfg.out_dir);
      return 0;
    }
    if (train->parsed()) {
      validate(cfg);
      const auto table = io::load_feature_table(t_input);
      const auto split = pipeline::parse_split(io::read_text(t_split), table);
      const auto sel = pipeline::parse_selection(io::read_text(t_selection));
      fs::create_directories(cfg.out_dir);
      pipeline::stage_train(table, split, sel,
                            pipeline::final_tree_params(cfg.max_depth, cfg.min_leaf,
                                                        pipeline::stage_seed(cfg.seed, t_ratio, pipeline::kSelect)),
                            cfg.out_dir);
      return 0;
    }
    if (evaluate->parsed()) {
      if (!e_positive.empty()) set_config_value(cfg, "evaluate.positive_class", e_positive);
      validate(cfg);
      const auto table = io::load_feature_table(e_input);
      const auto split = pipeline::parse_split(io::read_text(e_split), table);
      const auto model = parse_tree(io::read_text(e_model));
      fs::create_directories(cfg.out_dir);
      const auto r = pipeline::stage_evaluate(table, split, model, pipeline::eval_params(cfg, e_ratio), cfg.out_dir);
      std::cout << pipeline::metrics_csv(r);
      return 0;
    }
    if (synth->parsed()) {
      validate(cfg);
      if (print_spec) {
        std::cout << format_synth_spec({pipeline::synthetic_spec(cfg), std::nullopt});
        return 0;
      }
      fs::create_directories(cfg.out_dir);
      const fs::path dir = cfg.out_dir;
      if (spec_path.empty()) {
        pipeline::Provenance prov;
        cfg.features_path.clear();
        cfg.epochs_dir.clear();
        pipeline::stage_input(cfg, dir, prov);
        return 0;
      }
      const auto spec = parse_synth_spec(io::read_text(spec_path));
      if (spec.recipe) {
        const auto records = generate_epoch_cohort(spec.cohort, *spec.recipe);
        fs::create_directories(dir / "epochs");
        std::string truth = "subject_id,site,group,age,sex,recipe\n";
        for (const auto& x : records) {
          io::write_epochs(dir / "epochs" / (x.meta.subject_id + ".epochs"), x);
          truth += x.meta.subject_id + "," + x.meta.site + "," + std::string(to_string(x.meta.group)) + "," +
                   fmt::shortest(x.meta.age) + "," + std::string(to_string(x.meta.sex)) + "," + spec.recipe->name + "\n";
        }
        io::write_text(dir / "truth_records.csv", truth);
      } else {
        GroundTruth gt;
        const auto t = generate_feature_cohort(spec.cohort, &gt);
        io::write_feature_table(dir / "features.csv", t);
        io::write_text(dir / "manifest.csv", io::format_manifest(manifest(t)));
        io::write_text(dir / "truth_features.csv", format_ground_truth(gt));
        io::write_text(dir / "truth_sites.csv", format_site_truth(gt));
      }
      return 0;
    }
    if (pipe->parsed()) {
      const auto s = pipeline::run_pipeline(cfg);
      if (s.exit_code != 0) std::cerr << "error: stage " << s.failed_stage << ": " << s.message << "\n";
      else std::cout << io::read_text(fs::path(cfg.out_dir) / "summary_metrics.csv");
      return s.exit_code;
    }
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
