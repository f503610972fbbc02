// loadseg command-line front end. Every subcommand reads and writes the same
// CSV/JSON artifacts the full `run` pipeline produces.

#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "loadseg/classifier.hpp"
#include "loadseg/consensus.hpp"
#include "loadseg/error.hpp"
#include "loadseg/features.hpp"
#include "loadseg/ingest.hpp"
#include "loadseg/pipeline.hpp"
#include "loadseg/random.hpp"
#include "loadseg/refine.hpp"
#include "loadseg/synthetic.hpp"
#include "loadseg/text.hpp"
#include "loadseg/validity.hpp"

namespace fs = std::filesystem;
using namespace loadseg;

namespace {

std::istringstream open_text(const std::string& path) { return std::istringstream(read_file(path)); }

fs::path out_path(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return fs::path(dir) / name;
}

FeatureMatrix load_features(const std::string& path) {
  auto in = open_text(path);
  return feature_matrix_from_csv(in);
}

std::vector<int> load_labels(const std::string& path, const std::string& column, const std::vector<std::string>& ids) {
  auto in = open_text(path);
  const auto map = labels_from_csv(in, column);
  std::vector<int> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = map.find(id);
    if (it == map.end()) throw SchemaError("no label for household '" + id + "' in " + path);
    out.push_back(it->second);
  }
  return out;
}

MinMaxBounds load_bounds(const std::string& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  MinMaxBounds b;
  b.min = j.at("min").get<std::vector<double>>();
  b.max = j.at("max").get<std::vector<double>>();
  return b;
}

std::set<int> parse_int_set(const std::string& text) {
  std::set<int> out;
  for (const auto& f : split_delimited(text, ',')) {
    if (trim(f).empty()) continue;
    auto v = parse_integer(f);
    if (!v) throw ParameterError("'" + f + "' is not an integer");
    out.insert(static_cast<int>(*v));
  }
  return out;
}

void add_schema_options(CLI::App* app, ColumnSchema& schema, std::string& delimiter) {
  app->add_option("--id-column", schema.id_column, "Household id column")->capture_default_str();
  app->add_option("--timestamp-column", schema.timestamp_column, "Timestamp column")->capture_default_str();
  app->add_option("--value-column", schema.value_column, "Energy column (kWh per half hour)")->capture_default_str();
  app->add_option("--delimiter", delimiter, "Field delimiter")->capture_default_str();
  app->add_option("--filter-column", schema.filter_column, "Keep only rows where this column ...");
  app->add_option("--filter-value", schema.filter_value, "... equals this value (e.g. stdorToU=Std)");
}

char delimiter_char(const std::string& d) {
  if (d == "\\t" || d == "tab") return '\t';
  if (d.size() != 1) throw ParameterError("delimiter must be a single character");
  return d[0];
}

struct RunFlags {
  PipelineConfig config;
  std::string input_kind = "readings";
  std::string delimiter = ",";
  std::vector<std::string> algorithms{"kmeans", "kmedoids", "agglomerative", "dbscan"};
  std::string reference = "kmeans";
  std::string linkage = "ward";
  bool no_tsne = false;
  bool no_subset_renormalize = false;
  std::string replay;
};

void add_run_options(CLI::App* app, RunFlags& f) {
  auto& c = f.config;
  app->add_option("--input", c.input, "Readings or profile CSV");
  app->add_option("--input-kind", f.input_kind, "readings | profiles")->capture_default_str();
  add_schema_options(app, c.schema, f.delimiter);
  app->add_option("--days", c.date_filter, "weekday | weekend | FROM:TO | combinations");
  app->add_option("--output-dir", c.output_dir, "Parent of the run directory")->capture_default_str();
  app->add_option("--k-min", c.k_min)->capture_default_str();
  app->add_option("--k-max", c.k_max)->capture_default_str();
  app->add_option("--algorithms", f.algorithms, "Subset of kmeans kmedoids agglomerative dbscan")
      ->capture_default_str();
  app->add_option("--reference", f.reference, "Reference labeling for consensus")->capture_default_str();
  app->add_option("--linkage", f.linkage, "single | complete | average | ward")->capture_default_str();
  app->add_option("--kmeans-restarts", c.kmeans_restarts)->capture_default_str();
  app->add_option("--kmedoids-restarts", c.kmedoids_restarts)->capture_default_str();
  app->add_option("--min-pts", c.dbscan_min_pts, "DBSCAN min_pts")->capture_default_str();
  app->add_option("--max-noise", c.dbscan_max_noise, "DBSCAN noise cap during the eps sweep")->capture_default_str();
  app->add_option("--eps-grid", c.dbscan_grid, "Number of eps candidates")->capture_default_str();
  app->add_option("--instability-threshold", c.instability_threshold)->capture_default_str();
  app->add_option("--probability-threshold", c.probability_threshold)->capture_default_str();
  app->add_flag("--flagged-only", c.flagged_only, "Re-cluster flagged classes only");
  app->add_option("--refine-depth", c.refine_depth)->capture_default_str();
  app->add_option("--subset-k-max", c.subset_k_max)->capture_default_str();
  app->add_flag("--subset-dbscan", c.subset_dbscan, "Let DBSCAN vote on the subset k");
  app->add_flag("--no-subset-renormalize", f.no_subset_renormalize);
  app->add_option("--split-ratio", c.split_ratio)->capture_default_str();
  app->add_option("--rounds", c.gbdt.rounds)->capture_default_str();
  app->add_option("--learning-rate", c.gbdt.learning_rate)->capture_default_str();
  app->add_option("--max-depth", c.gbdt.max_depth)->capture_default_str();
  app->add_option("--min-leaf", c.gbdt.min_leaf_count)->capture_default_str();
  app->add_flag("--calibrate", c.calibrate, "Fit a softmax temperature on the held-out split");
  app->add_flag("--no-tsne", f.no_tsne);
  app->add_option("--perplexity", c.tsne_perplexity)->capture_default_str();
  app->add_option("--tsne-iterations", c.tsne_iterations)->capture_default_str();
  app->add_option("--explain-top", c.explain_top)->capture_default_str();
  app->add_option("--seed", c.seed)->capture_default_str();
  app->add_option("--replay", f.replay, "Re-run the config stored in a manifest.json");
}

PipelineConfig finish_config(RunFlags& f) {
  if (!f.replay.empty()) return config_from_json(read_file(f.replay));
  auto c = f.config;
  c.input_kind = parse_input_kind(f.input_kind);
  c.schema.delimiter = delimiter_char(f.delimiter);
  c.algorithms.clear();
  for (const auto& a : f.algorithms) c.algorithms.push_back(parse_algorithm(a));
  c.reference = parse_algorithm(f.reference);
  c.linkage = parse_linkage(f.linkage);
  c.tsne = !f.no_tsne;
  c.subset_renormalize = !f.no_subset_renormalize;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Household load-profile segmentation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values (sections per subcommand)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Half-hourly readings to average daily profiles");
  std::string ingest_in, ingest_out, ingest_days, ingest_delim = ",";
  ColumnSchema ingest_schema;
  ingest->add_option("--input", ingest_in)->required();
  ingest->add_option("--out", ingest_out, "Profile CSV")->required();
  ingest->add_option("--days", ingest_days, "weekday | weekend | FROM:TO | combinations");
  add_schema_options(ingest, ingest_schema, ingest_delim);

  // features
  auto* features = app.add_subcommand("features", "Feature extraction and min-max normalization");
  std::string feat_in, feat_dir;
  features->add_option("--profiles", feat_in)->required();
  features->add_option("--out-dir", feat_dir)->required();

  // cluster
  auto* cluster = app.add_subcommand("cluster", "One clustering run at a fixed k or eps");
  std::string cl_features, cl_out, cl_algo = "kmeans", cl_linkage = "ward";
  int cl_k = 0, cl_min_pts = 5, cl_restarts = 10;
  double cl_eps = 0.0;
  std::uint64_t cl_seed = 0;
  cluster->add_option("--features", cl_features, "Normalized feature CSV")->required();
  cluster->add_option("--out", cl_out, "Labeling CSV")->required();
  cluster->add_option("--algorithm", cl_algo)->capture_default_str();
  cluster->add_option("--k", cl_k);
  cluster->add_option("--eps", cl_eps, "DBSCAN radius");
  cluster->add_option("--min-pts", cl_min_pts)->capture_default_str();
  cluster->add_option("--restarts", cl_restarts)->capture_default_str();
  cluster->add_option("--linkage", cl_linkage)->capture_default_str();
  cluster->add_option("--seed", cl_seed)->capture_default_str();

  // validate
  auto* validate = app.add_subcommand("validate", "k sweep scored by silhouette, DBI and CHI");
  std::string va_features, va_dir, va_linkage = "ward";
  std::vector<std::string> va_algos{"kmeans", "kmedoids", "agglomerative", "dbscan"};
  SweepOptions va_opts;
  int va_min_pts = 5;
  validate->add_option("--features", va_features)->required();
  validate->add_option("--out-dir", va_dir)->required();
  validate->add_option("--algorithms", va_algos)->capture_default_str();
  validate->add_option("--k-min", va_opts.k_min)->capture_default_str();
  validate->add_option("--k-max", va_opts.k_max)->capture_default_str();
  validate->add_option("--linkage", va_linkage)->capture_default_str();
  validate->add_option("--min-pts", va_min_pts)->capture_default_str();
  validate->add_option("--seed", va_opts.seed)->capture_default_str();

  // consensus
  auto* consensus = app.add_subcommand("consensus", "Contingency tables and flagged clusters");
  std::string co_labelings, co_dir, co_ref = "kmeans", co_tsne_features;
  double co_threshold = kDefaultInstabilityThreshold;
  std::uint64_t co_seed = 0;
  consensus->add_option("--labelings", co_labelings)->required();
  consensus->add_option("--out-dir", co_dir)->required();
  consensus->add_option("--reference", co_ref)->capture_default_str();
  consensus->add_option("--threshold", co_threshold)->capture_default_str();
  consensus->add_option("--tsne-features", co_tsne_features, "Also embed these features with t-SNE");
  consensus->add_option("--seed", co_seed)->capture_default_str();

  // classify
  auto* classify = app.add_subcommand("classify", "Train the classifier on cluster labels");
  std::string cf_features, cf_labels, cf_column = "label", cf_bounds, cf_dir;
  double cf_ratio = 0.8;
  bool cf_calibrate = false;
  GbdtParams cf_params;
  std::uint64_t cf_seed = 0;
  classify->add_option("--features", cf_features, "Normalized feature CSV")->required();
  classify->add_option("--labels", cf_labels, "CSV with household_id and a label column")->required();
  classify->add_option("--label-column", cf_column)->capture_default_str();
  classify->add_option("--bounds", cf_bounds, "normalization.json to freeze into the model");
  classify->add_option("--out-dir", cf_dir)->required();
  classify->add_option("--split-ratio", cf_ratio)->capture_default_str();
  classify->add_option("--rounds", cf_params.rounds)->capture_default_str();
  classify->add_option("--learning-rate", cf_params.learning_rate)->capture_default_str();
  classify->add_option("--max-depth", cf_params.max_depth)->capture_default_str();
  classify->add_option("--min-leaf", cf_params.min_leaf_count)->capture_default_str();
  classify->add_flag("--calibrate", cf_calibrate);
  classify->add_option("--seed", cf_seed)->capture_default_str();

  // explain
  auto* explain = app.add_subcommand("explain", "TreeSHAP attributions and per-class rankings");
  std::string ex_model, ex_features, ex_dir;
  std::size_t ex_top = 10;
  explain->add_option("--model", ex_model)->required();
  explain->add_option("--features", ex_features, "Normalized feature CSV")->required();
  explain->add_option("--out-dir", ex_dir)->required();
  explain->add_option("--top", ex_top)->capture_default_str();

  // refine
  auto* refine_cmd = app.add_subcommand("refine", "Re-cluster low-confidence and flagged points");
  std::string rf_features, rf_model, rf_labels, rf_column = "label", rf_flagged, rf_consensus, rf_dir;
  RefineOptions rf_opts;
  bool rf_no_renorm = false;
  refine_cmd->add_option("--features", rf_features, "Normalized feature CSV")->required();
  refine_cmd->add_option("--model", rf_model)->required();
  refine_cmd->add_option("--labels", rf_labels)->required();
  refine_cmd->add_option("--label-column", rf_column)->capture_default_str();
  refine_cmd->add_option("--flagged", rf_flagged, "Comma-separated class ids");
  refine_cmd->add_option("--consensus", rf_consensus, "consensus.json supplying the flagged classes");
  refine_cmd->add_option("--threshold", rf_opts.threshold)->capture_default_str();
  refine_cmd->add_flag("--flagged-only", rf_opts.flagged_only);
  refine_cmd->add_option("--depth", rf_opts.depth)->capture_default_str();
  refine_cmd->add_option("--subset-k-max", rf_opts.subset.k_max)->capture_default_str();
  refine_cmd->add_flag("--subset-dbscan", rf_opts.subset.include_dbscan);
  refine_cmd->add_flag("--no-subset-renormalize", rf_no_renorm);
  refine_cmd->add_option("--seed", rf_opts.subset.seed)->capture_default_str();
  refine_cmd->add_option("--out-dir", rf_dir)->required();

  // run
  auto* run = app.add_subcommand("run", "Full pipeline into a run directory stamped by the config hash");
  RunFlags run_flags;
  add_run_options(run, run_flags);

  // assign
  auto* assign = app.add_subcommand("assign", "Classify new households with a trained model");
  std::string as_model, as_profiles, as_out;
  assign->add_option("--model", as_model)->required();
  assign->add_option("--profiles", as_profiles)->required();
  assign->add_option("--out", as_out, "Assignment CSV (stdout when omitted)");

  // synth
  auto* synth = app.add_subcommand("synth", "Write the synthetic mixture fixture or random profiles");
  std::string sy_dir;
  std::size_t sy_random = 0;
  std::uint64_t sy_seed = MixtureOptions{}.seed;
  synth->add_option("--out-dir", sy_dir)->required();
  synth->add_option("--random", sy_random, "Write this many random profiles instead of the fixture");
  synth->add_option("--seed", sy_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      ingest_schema.delimiter = delimiter_char(ingest_delim);
      auto in = open_text(ingest_in);
      const auto parsed = parse_readings(in, ingest_schema);
      const auto built = build_profiles(clean(parsed.readings), parse_date_filter(ingest_days));
      write_file(ingest_out, profiles_to_csv(built.profiles));
      std::cerr << built.profiles.size() << " profiles, " << built.dropped.size() << " households dropped, "
                << parsed.rejected << " rows rejected\n";
      return built.profiles.empty() ? 1 : 0;
    }
    if (features->parsed()) {
      auto in = open_text(feat_in);
      const auto fm = assemble_matrix(profiles_from_csv(in));
      const auto bounds = fit_min_max(fm.values);
      write_file(out_path(feat_dir, "features_raw.csv").string(), feature_matrix_to_csv(fm.ids, fm.values));
      write_file(out_path(feat_dir, "features.csv").string(),
                 feature_matrix_to_csv(fm.ids, apply_min_max(fm.values, bounds)));
      nlohmann::ordered_json j;
      j["features"] = feature_names();
      j["min"] = bounds.min;
      j["max"] = bounds.max;
      write_file(out_path(feat_dir, "normalization.json").string(), j.dump(2) + "\n");
      return 0;
    }
    if (cluster->parsed()) {
      const auto fm = load_features(cl_features);
      const auto algo = parse_algorithm(cl_algo);
      Labeling lab;
      switch (algo) {
        case Algorithm::kmeans: lab = kmeans(fm.values, cl_k, cl_seed, cl_restarts); break;
        case Algorithm::kmedoids: lab = kmedoids(fm.values, cl_k, cl_seed, cl_restarts); break;
        case Algorithm::agglomerative:
          lab = agglomerative(fm.values, cl_k, parse_linkage(cl_linkage)).labeling;
          break;
        case Algorithm::dbscan: lab = dbscan(fm.values, cl_eps, cl_min_pts); break;
      }
      write_file(cl_out, labelings_to_csv(fm.ids, {lab}));
      return 0;
    }
    if (validate->parsed()) {
      const auto fm = load_features(va_features);
      const Matrix dist = pairwise_distances(fm.values);
      va_opts.linkage = parse_linkage(va_linkage);
      va_opts.k_max = std::min(va_opts.k_max, static_cast<int>(fm.values.rows()) - 1);
      ValidityReport report;
      std::vector<Labeling> chosen;
      for (const auto& name : va_algos) {
        const auto algo = parse_algorithm(name);
        if (algo == Algorithm::dbscan) {
          DbscanSweepOptions o;
          o.min_pts = va_min_pts;
          auto r = dbscan_sweep(fm.values, dist, default_eps_grid(dist, va_min_pts), o);
          merge_reports(report, r.report);
          chosen.push_back(r.labeling);
        } else {
          auto r = sweep(fm.values, dist, algo, va_opts);
          merge_reports(report, r.report);
          chosen.push_back(r.labelings.at(r.report.chosen.at(algo).majority_k));
        }
      }
      write_file(out_path(va_dir, "validity.json").string(), report_to_json(report));
      write_file(out_path(va_dir, "validity_table.csv").string(), report_to_table_csv(report));
      write_file(out_path(va_dir, "validity_curves.csv").string(), report_to_curve_csv(report));
      write_file(out_path(va_dir, "labelings.csv").string(), labelings_to_csv(fm.ids, chosen));
      std::cout << report_to_table_csv(report);
      return 0;
    }
    if (consensus->parsed()) {
      std::vector<std::string> ids;
      auto in = open_text(co_labelings);
      const auto labelings = labelings_from_csv(in, ids);
      const auto cc = cross_compare(labelings, parse_algorithm(co_ref), co_threshold);
      for (const auto& t : cc.tables) {
        write_file(out_path(co_dir, "contingency_" + t.algo_a + "_" + t.algo_b + ".csv").string(),
                   contingency_to_csv(t));
      }
      write_file(out_path(co_dir, "consensus.json").string(), cross_comparison_to_json(cc));
      if (!co_tsne_features.empty()) {
        const auto fm = load_features(co_tsne_features);
        TsneOptions o;
        o.seed = co_seed;
        const auto emb = tsne_embed(fm.values, o);
        std::string csv = "household_id,x,y\n";
        for (std::size_t i = 0; i < fm.ids.size(); ++i) {
          csv += csv_field(fm.ids[i]) + "," + format_double(emb.embedding(i, 0)) + "," +
                 format_double(emb.embedding(i, 1)) + "\n";
        }
        write_file(out_path(co_dir, "tsne.csv").string(), csv);
      }
      std::cout << "flagged:";
      for (int f : cc.flagged) std::cout << ' ' << f;
      std::cout << '\n';
      return 0;
    }
    if (classify->parsed()) {
      const auto fm = load_features(cf_features);
      const auto labels = load_labels(cf_labels, cf_column, fm.ids);
      const auto split = split_train_test(fm.values, labels, cf_ratio, derive_seed(cf_seed, 4));
      cf_params.seed = derive_seed(cf_seed, 5);
      auto model = train(split.train, cf_params);
      model.feature_names = feature_names();
      if (!cf_bounds.empty()) model.normalization = load_bounds(cf_bounds);
      if (!split.test.labels.empty()) {
        const auto metrics = evaluate(model, split.test);
        write_file(out_path(cf_dir, "metrics.csv").string(), metrics_to_csv(metrics));
        std::cout << metrics_to_csv(metrics);
        if (cf_calibrate) fit_temperature(model, split.test);
      }
      write_file(out_path(cf_dir, "model.json").string(), model_to_json(model));
      return 0;
    }
    if (explain->parsed()) {
      const auto model = model_from_json(read_file(ex_model));
      const auto fm = load_features(ex_features);
      const auto attribution = shap_attribute(model, fm.values);
      write_file(out_path(ex_dir, "shap_values.csv").string(), attribution_to_csv(attribution, fm.ids, model));
      write_file(out_path(ex_dir, "shap_ranking.json").string(), ranking_to_json(attribution, model, ex_top));
      return 0;
    }
    if (refine_cmd->parsed()) {
      const auto fm = load_features(rf_features);
      const auto labels = load_labels(rf_labels, rf_column, fm.ids);
      const auto model = model_from_json(read_file(rf_model));
      std::set<int> flagged = parse_int_set(rf_flagged);
      if (!rf_consensus.empty()) {
        const auto j = nlohmann::json::parse(read_file(rf_consensus));
        for (int f : j.at("flagged")) flagged.insert(f);
      }
      rf_opts.subset.renormalize = !rf_no_renorm;
      const auto probs = predict_proba(model, fm.values);
      const auto predicted = predict(model, probs);
      const auto rr = refine(fm.values, fm.ids, labels, probs, predicted, flagged, rf_opts);
      write_file(out_path(rf_dir, "refinement.json").string(), refinement_to_json(rr));
      write_file(out_path(rf_dir, "assignments.csv").string(), assignments_to_csv(rr, fm.ids, probs));
      std::cout << rr.class_count_before << " -> " << rr.class_count_after << " classes, "
                << rr.subset_indices.size() << " points re-clustered\n";
      return 0;
    }
    if (run->parsed()) {
      const auto config = finish_config(run_flags);
      const auto manifest = run_pipeline(config);
      std::cout << (fs::path(manifest.run_dir) / "manifest.json").string() << '\n';
      if (!manifest.success) {
        std::cerr << "stage '" << manifest.failed_stage << "' failed: " << manifest.error << '\n';
        return 1;
      }
      const auto& s = manifest.summary;
      std::cerr << s.households << " households, reference k " << s.reference_k << ", " << s.flagged.size()
                << " flagged, " << s.final_class_count << " final classes\n";
      return 0;
    }
    if (assign->parsed()) {
      const auto result = assign_new(as_model, as_profiles);
      const auto csv = assignment_to_csv(result);
      if (as_out.empty()) {
        std::cout << csv;
      } else {
        write_file(as_out, csv);
      }
      return 0;
    }
    if (synth->parsed()) {
      fs::create_directories(sy_dir);
      if (sy_random > 0) {
        write_file(out_path(sy_dir, "profiles.csv").string(), profiles_to_csv(random_profiles(sy_random, sy_seed)));
        return 0;
      }
      MixtureOptions o;
      o.seed = sy_seed;
      const auto fx = mixture_fixture(o);
      write_file(out_path(sy_dir, "readings.csv").string(),
                 readings_csv(fx.profiles, o.days, o.day_noise_kwh, derive_seed(sy_seed, 1)));
      std::string truth = "household_id,cluster,subpopulation\n";
      for (std::size_t i = 0; i < fx.profiles.size(); ++i) {
        truth += fx.profiles[i].household_id + "," + std::to_string(fx.cluster[i]) + "," +
                 std::to_string(fx.subpopulation[i]) + "\n";
      }
      write_file(out_path(sy_dir, "truth.csv").string(), truth);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
