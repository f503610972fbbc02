#include "loadseg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "loadseg/consensus.hpp"
#include "loadseg/error.hpp"
#include "loadseg/random.hpp"
#include "loadseg/refine.hpp"
#include "loadseg/text.hpp"
#include "loadseg/validity.hpp"

namespace loadseg {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string to_string(InputKind kind) { return kind == InputKind::readings ? "readings" : "profiles"; }

InputKind parse_input_kind(std::string_view name) {
  name = trim(name);
  if (name == "readings") return InputKind::readings;
  if (name == "profiles") return InputKind::profiles;
  throw ParameterError("unknown input kind '" + std::string(name) + "'");
}

void validate_config(const PipelineConfig& c) {
  auto fail = [](const std::string& what) { throw ParameterError("config: " + what); };
  auto unit = [&](double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0)) fail(std::string(name) + " must lie in (0, 1]");
  };
  if (c.input.empty()) fail("input path is empty");
  if (c.output_dir.empty()) fail("output_dir is empty");
  if (c.k_min < 2) fail("k_min must be at least 2");
  if (c.k_max < c.k_min) fail("k_max must not be below k_min");
  if (c.algorithms.empty()) fail("no algorithms selected");
  if (std::find(c.algorithms.begin(), c.algorithms.end(), c.reference) == c.algorithms.end()) {
    fail("reference algorithm " + to_string(c.reference) + " is not among the selected algorithms");
  }
  if (c.reference == Algorithm::dbscan) fail("the reference labeling must come from a k-based algorithm");
  if (std::set<Algorithm>(c.algorithms.begin(), c.algorithms.end()).size() != c.algorithms.size()) {
    fail("algorithm listed twice");
  }
  unit(c.instability_threshold, "instability_threshold");
  unit(c.probability_threshold, "probability_threshold");
  unit(c.dbscan_max_noise, "dbscan_max_noise");
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) fail("split_ratio must lie in (0, 1)");
  if (c.kmeans_restarts < 1 || c.kmedoids_restarts < 1) fail("restarts must be positive");
  if (c.dbscan_min_pts < 1) fail("dbscan_min_pts must be positive");
  if (c.dbscan_grid < 1) fail("dbscan_grid must be positive");
  if (c.refine_depth < 0) fail("refine_depth must not be negative");
  if (c.subset_k_max < 2) fail("subset_k_max must be at least 2");
  if (c.gbdt.rounds < 0 || c.gbdt.max_depth < 1 || c.gbdt.min_leaf_count < 1) fail("invalid classifier parameters");
  if (!(c.gbdt.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (c.tsne && (!(c.tsne_perplexity > 0.0) || c.tsne_iterations < 1)) fail("invalid t-SNE parameters");
  if (c.schema.id_column.empty() || c.schema.timestamp_column.empty() || c.schema.value_column.empty()) {
    fail("schema column names must not be empty");
  }
  (void)parse_date_filter(c.date_filter);
}

namespace {

ojson config_json(const PipelineConfig& c, bool with_output) {
  ojson j;
  j["input"] = c.input;
  j["input_kind"] = to_string(c.input_kind);
  j["id_column"] = c.schema.id_column;
  j["timestamp_column"] = c.schema.timestamp_column;
  j["value_column"] = c.schema.value_column;
  j["delimiter"] = std::string(1, c.schema.delimiter);
  j["filter_column"] = c.schema.filter_column;
  j["filter_value"] = c.schema.filter_value;
  j["date_filter"] = c.date_filter;
  if (with_output) j["output_dir"] = c.output_dir;
  j["k_min"] = c.k_min;
  j["k_max"] = c.k_max;
  std::vector<std::string> algos;
  for (auto a : c.algorithms) algos.push_back(to_string(a));
  j["algorithms"] = algos;
  j["reference"] = to_string(c.reference);
  j["linkage"] = to_string(c.linkage);
  j["kmeans_restarts"] = c.kmeans_restarts;
  j["kmedoids_restarts"] = c.kmedoids_restarts;
  j["dbscan_min_pts"] = c.dbscan_min_pts;
  j["dbscan_max_noise"] = c.dbscan_max_noise;
  j["dbscan_grid"] = c.dbscan_grid;
  j["instability_threshold"] = c.instability_threshold;
  j["probability_threshold"] = c.probability_threshold;
  j["flagged_only"] = c.flagged_only;
  j["refine_depth"] = c.refine_depth;
  j["subset_k_max"] = c.subset_k_max;
  j["subset_dbscan"] = c.subset_dbscan;
  j["subset_renormalize"] = c.subset_renormalize;
  j["split_ratio"] = c.split_ratio;
  j["rounds"] = c.gbdt.rounds;
  j["learning_rate"] = c.gbdt.learning_rate;
  j["max_depth"] = c.gbdt.max_depth;
  j["min_leaf_count"] = c.gbdt.min_leaf_count;
  j["calibrate"] = c.calibrate;
  j["tsne"] = c.tsne;
  j["tsne_perplexity"] = c.tsne_perplexity;
  j["tsne_iterations"] = c.tsne_iterations;
  j["explain_top"] = c.explain_top;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

std::string config_to_json(const PipelineConfig& config) { return config_json(config, true).dump(2) + "\n"; }

PipelineConfig config_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("config is not valid JSON: ") + e.what());
  }
  if (j.contains("config") && j["config"].is_object()) j = j["config"];  // a manifest
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  PipelineConfig c;
  const std::map<std::string, std::function<void(const ojson&)>> setters{
      {"input", [&](const ojson& v) { c.input = v.get<std::string>(); }},
      {"input_kind", [&](const ojson& v) { c.input_kind = parse_input_kind(v.get<std::string>()); }},
      {"id_column", [&](const ojson& v) { c.schema.id_column = v.get<std::string>(); }},
      {"timestamp_column", [&](const ojson& v) { c.schema.timestamp_column = v.get<std::string>(); }},
      {"value_column", [&](const ojson& v) { c.schema.value_column = v.get<std::string>(); }},
      {"delimiter",
       [&](const ojson& v) {
         const auto s = v.get<std::string>();
         if (s.size() != 1) throw SchemaError("config: delimiter must be one character");
         c.schema.delimiter = s[0];
       }},
      {"filter_column", [&](const ojson& v) { c.schema.filter_column = v.get<std::string>(); }},
      {"filter_value", [&](const ojson& v) { c.schema.filter_value = v.get<std::string>(); }},
      {"date_filter", [&](const ojson& v) { c.date_filter = v.get<std::string>(); }},
      {"output_dir", [&](const ojson& v) { c.output_dir = v.get<std::string>(); }},
      {"k_min", [&](const ojson& v) { c.k_min = v.get<int>(); }},
      {"k_max", [&](const ojson& v) { c.k_max = v.get<int>(); }},
      {"algorithms",
       [&](const ojson& v) {
         c.algorithms.clear();
         for (const auto& a : v) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
       }},
      {"reference", [&](const ojson& v) { c.reference = parse_algorithm(v.get<std::string>()); }},
      {"linkage", [&](const ojson& v) { c.linkage = parse_linkage(v.get<std::string>()); }},
      {"kmeans_restarts", [&](const ojson& v) { c.kmeans_restarts = v.get<int>(); }},
      {"kmedoids_restarts", [&](const ojson& v) { c.kmedoids_restarts = v.get<int>(); }},
      {"dbscan_min_pts", [&](const ojson& v) { c.dbscan_min_pts = v.get<int>(); }},
      {"dbscan_max_noise", [&](const ojson& v) { c.dbscan_max_noise = v.get<double>(); }},
      {"dbscan_grid", [&](const ojson& v) { c.dbscan_grid = v.get<int>(); }},
      {"instability_threshold", [&](const ojson& v) { c.instability_threshold = v.get<double>(); }},
      {"probability_threshold", [&](const ojson& v) { c.probability_threshold = v.get<double>(); }},
      {"flagged_only", [&](const ojson& v) { c.flagged_only = v.get<bool>(); }},
      {"refine_depth", [&](const ojson& v) { c.refine_depth = v.get<int>(); }},
      {"subset_k_max", [&](const ojson& v) { c.subset_k_max = v.get<int>(); }},
      {"subset_dbscan", [&](const ojson& v) { c.subset_dbscan = v.get<bool>(); }},
      {"subset_renormalize", [&](const ojson& v) { c.subset_renormalize = v.get<bool>(); }},
      {"split_ratio", [&](const ojson& v) { c.split_ratio = v.get<double>(); }},
      {"rounds", [&](const ojson& v) { c.gbdt.rounds = v.get<int>(); }},
      {"learning_rate", [&](const ojson& v) { c.gbdt.learning_rate = v.get<double>(); }},
      {"max_depth", [&](const ojson& v) { c.gbdt.max_depth = v.get<int>(); }},
      {"min_leaf_count", [&](const ojson& v) { c.gbdt.min_leaf_count = v.get<int>(); }},
      {"calibrate", [&](const ojson& v) { c.calibrate = v.get<bool>(); }},
      {"tsne", [&](const ojson& v) { c.tsne = v.get<bool>(); }},
      {"tsne_perplexity", [&](const ojson& v) { c.tsne_perplexity = v.get<double>(); }},
      {"tsne_iterations", [&](const ojson& v) { c.tsne_iterations = v.get<int>(); }},
      {"explain_top", [&](const ojson& v) { c.explain_top = v.get<std::size_t>(); }},
      {"seed", [&](const ojson& v) { c.seed = v.get<std::uint64_t>(); }},
  };
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw SchemaError("config: unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const nlohmann::json::exception&) {
      throw SchemaError("config: key '" + key + "' has the wrong type");
    }
  }
  return c;
}

std::string config_hash(const PipelineConfig& config) { return hex64(fnv1a64(config_json(config, false).dump())); }

// ---- run ----------------------------------------------------------------------

namespace {

std::string probabilities_to_csv(const std::vector<std::string>& ids, const Matrix& probs,
                                 const std::vector<int>& classes) {
  std::string out = "household_id";
  for (int c : classes) out += ",p" + std::to_string(c);
  out += '\n';
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    out += csv_field(ids[r]);
    for (double v : probs.row(r)) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

std::string bounds_to_json(const MinMaxBounds& b) {
  ojson j;
  j["features"] = feature_names();
  j["min"] = b.min;
  j["max"] = b.max;
  return j.dump(2) + "\n";
}

class RunContext {
 public:
  explicit RunContext(RunManifest& m) : m_(m) {}

  void write(const std::string& name, const std::string& file, std::string_view contents) {
    write_file((fs::path(m_.run_dir) / file).string(), contents);
    m_.artifacts[name] = file;
  }

  template <typename F>
  bool stage(const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      m_.failed_stage = name;
      m_.error = e.what();
    }
    m_.timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!m_.failed_stage.empty()) return false;
    m_.completed_stages.push_back(name);
    return true;
  }

 private:
  RunManifest& m_;
};

void write_manifest(const RunManifest& m) {
  write_file((fs::path(m.run_dir) / "manifest.json").string(), manifest_to_json(m));
  ojson t = ojson::object();
  for (const auto& s : pipeline_stages()) {
    if (auto it = m.timings.find(s); it != m.timings.end()) t[s] = it->second;
  }
  write_file((fs::path(m.run_dir) / "timings.json").string(), t.dump(2) + "\n");
}

}  // namespace

RunManifest run_pipeline(const PipelineConfig& config) {
  validate_config(config);
  RunManifest m;
  m.config = config;
  m.run_id = config_hash(config);
  m.run_dir = (fs::path(config.output_dir) / ("run-" + m.run_id)).string();
  fs::create_directories(m.run_dir);
  // a rerun must not inherit artifacts of an earlier attempt
  for (const auto& entry : fs::directory_iterator(m.run_dir)) {
    if (entry.is_regular_file()) fs::remove(entry.path());
  }
  RunContext ctx(m);
  const std::uint64_t seed = config.seed;

  std::vector<LoadProfile> profiles;
  FeatureMatrix fm;
  Matrix x;
  MinMaxBounds bounds;
  Matrix dist;
  std::map<Algorithm, Labeling> chosen;
  Labeling reference;
  CrossComparison cc;
  GbdtModel model;
  Matrix probs;
  std::vector<int> predicted;

  bool ok = ctx.stage("ingest", [&] {
    const std::string text = read_file(config.input);
    m.input_hash = hex64(fnv1a64(text));
    std::istringstream in(text);
    ojson info;
    if (config.input_kind == InputKind::readings) {
      auto parsed = parse_readings(in, config.schema);
      auto cleaned = clean(parsed.readings);
      auto built = build_profiles(cleaned, parse_date_filter(config.date_filter));
      info["rows_parsed"] = parsed.readings.size();
      info["rows_rejected"] = parsed.rejected;
      info["rows_filtered"] = parsed.filtered;
      info["readings_kept"] = cleaned.size();
      info["dropped_households"] = built.dropped;
      m.summary.dropped_households = built.dropped.size();
      profiles = std::move(built.profiles);
    } else {
      profiles = profiles_from_csv(in);
    }
    info["households"] = profiles.size();
    m.summary.households = profiles.size();
    if (profiles.empty()) throw Error("input yields no household with a complete daily profile");
    ctx.write("profiles", "profiles.csv", profiles_to_csv(profiles));
    ctx.write("ingest_report", "ingest.json", info.dump(2) + "\n");
  });

  ok = ok && ctx.stage("features", [&] {
    fm = assemble_matrix(profiles);
    bounds = fit_min_max(fm.values);
    x = apply_min_max(fm.values, bounds);
    ctx.write("features_raw", "features_raw.csv", feature_matrix_to_csv(fm.ids, fm.values));
    ctx.write("features", "features.csv", feature_matrix_to_csv(fm.ids, x));
    ctx.write("normalization", "normalization.json", bounds_to_json(bounds));
  });

  ok = ok && ctx.stage("cluster", [&] {
    const int n = static_cast<int>(x.rows());
    if (n - 1 < config.k_min) {
      throw ParameterError("sweep needs k_min <= n - 1 but there are only " + std::to_string(n) + " households");
    }
    dist = pairwise_distances(x);
    SweepOptions so;
    so.k_min = config.k_min;
    so.k_max = std::min(config.k_max, n - 1);
    so.seed = derive_seed(seed, 1);
    so.kmeans_restarts = config.kmeans_restarts;
    so.kmedoids_restarts = config.kmedoids_restarts;
    so.linkage = config.linkage;
    ValidityReport report;
    std::vector<Labeling> out;
    for (auto alg : config.algorithms) {
      if (alg == Algorithm::dbscan) {
        DbscanSweepOptions dso;
        dso.min_pts = config.dbscan_min_pts;
        dso.max_noise_fraction = config.dbscan_max_noise;
        auto r = dbscan_sweep(x, dist, default_eps_grid(dist, config.dbscan_min_pts, config.dbscan_grid), dso);
        merge_reports(report, r.report);
        m.summary.chosen_k[to_string(alg)] = r.labeling.cluster_count();
        chosen[alg] = r.labeling;
      } else {
        auto r = sweep(x, dist, alg, so);
        merge_reports(report, r.report);
        const int k = r.report.chosen.at(alg).majority_k;
        m.summary.chosen_k[to_string(alg)] = k;
        chosen[alg] = r.labelings.at(k);
      }
      out.push_back(chosen[alg]);
    }
    reference = chosen.at(config.reference);
    m.summary.reference_k = reference.cluster_count();
    ctx.write("validity", "validity.json", report_to_json(report));
    ctx.write("validity_table", "validity_table.csv", report_to_table_csv(report));
    ctx.write("validity_curves", "validity_curves.csv", report_to_curve_csv(report));
    ctx.write("labelings", "labelings.csv", labelings_to_csv(fm.ids, out));
  });

  ok = ok && ctx.stage("consensus", [&] {
    std::vector<Labeling> all;
    all.push_back(reference);
    for (auto alg : config.algorithms) {
      if (alg != config.reference) all.push_back(chosen.at(alg));
    }
    if (all.size() >= 2) {
      cc = cross_compare(all, config.reference, config.instability_threshold);
      for (const auto& t : cc.tables) {
        ctx.write("contingency_" + t.algo_b, "contingency_" + t.algo_a + "_" + t.algo_b + ".csv",
                  contingency_to_csv(t));
      }
    } else {
      cc.reference = config.reference;
    }
    m.summary.flagged.assign(cc.flagged.begin(), cc.flagged.end());
    ctx.write("consensus", "consensus.json", cross_comparison_to_json(cc));
    if (config.tsne && static_cast<double>(x.rows()) > 3.0 * config.tsne_perplexity) {
      TsneOptions to;
      to.perplexity = config.tsne_perplexity;
      to.iterations = config.tsne_iterations;
      to.exaggeration_iterations = std::min(to.exaggeration_iterations, config.tsne_iterations / 4);
      to.seed = derive_seed(seed, 3);
      const auto emb = tsne_embed(x, to);
      std::string csv = "household_id,x,y,label\n";
      for (std::size_t i = 0; i < x.rows(); ++i) {
        csv += csv_field(fm.ids[i]) + "," + format_double(emb.embedding(i, 0)) + "," +
               format_double(emb.embedding(i, 1)) + "," + std::to_string(reference.labels[i]) + "\n";
      }
      ctx.write("tsne", "tsne.csv", csv);
    }
  });

  ok = ok && ctx.stage("classify", [&] {
    auto split = split_train_test(x, reference.labels, config.split_ratio, derive_seed(seed, 4));
    GbdtParams gp = config.gbdt;
    gp.seed = derive_seed(seed, 5);
    model = train(split.train, gp);
    model.feature_names = feature_names();
    model.normalization = bounds;
    if (!split.test.labels.empty()) {
      const auto metrics = evaluate(model, split.test);
      m.summary.macro_f1 = metrics.macro_f1;
      ctx.write("metrics", "metrics.csv", metrics_to_csv(metrics));
      if (config.calibrate) fit_temperature(model, split.test);
    }
    probs = predict_proba(model, x);
    predicted = predict(model, probs);
    ctx.write("model", "model.json", model_to_json(model));
    ctx.write("probabilities", "probabilities.csv", probabilities_to_csv(fm.ids, probs, model.classes));
  });

  ok = ok && ctx.stage("explain", [&] {
    const auto attribution = shap_attribute(model, x);
    ctx.write("shap_values", "shap_values.csv", attribution_to_csv(attribution, fm.ids, model));
    ctx.write("shap_ranking", "shap_ranking.json", ranking_to_json(attribution, model, config.explain_top));
  });

  ok = ok && ctx.stage("refine", [&] {
    RefineOptions ro;
    ro.threshold = config.probability_threshold;
    ro.flagged_only = config.flagged_only;
    ro.depth = config.refine_depth;
    ro.subset.k_max = config.subset_k_max;
    ro.subset.seed = derive_seed(seed, 6);
    ro.subset.kmeans_restarts = config.kmeans_restarts;
    ro.subset.linkage = config.linkage;
    ro.subset.include_dbscan = config.subset_dbscan;
    ro.subset.dbscan_min_pts = config.dbscan_min_pts;
    ro.subset.renormalize = config.subset_renormalize;
    ro.classifier = config.gbdt;
    ro.classifier.seed = derive_seed(seed, 7);
    const auto rr = refine(x, fm.ids, reference.labels, probs, predicted, cc.flagged, ro);
    m.summary.subset_size = rr.subset_indices.size();
    m.summary.subset_fraction = static_cast<double>(rr.subset_indices.size()) / static_cast<double>(x.rows());
    m.summary.subset_k = rr.subset_k;
    m.summary.final_class_count = rr.class_count_after;
    ctx.write("refinement", "refinement.json", refinement_to_json(rr));
    ctx.write("assignments", "assignments.csv", assignments_to_csv(rr, fm.ids, probs));
  });

  ok = ok && ctx.stage("report", [&] {
    for (const auto& [name, file] : m.artifacts) {
      if (!fs::exists(fs::path(m.run_dir) / file)) throw Error("artifact " + file + " is missing");
    }
  });
  m.success = ok;
  write_manifest(m);
  return m;
}

std::string manifest_to_json(const RunManifest& m) {
  ojson j;
  j["format"] = "loadseg-manifest";
  j["versions"] = {{"loadseg", kVersion}, {"model_format", 1}};
  j["run_id"] = m.run_id;
  j["status"] = m.success ? "complete" : "failed";
  j["failed_stage"] = m.failed_stage.empty() ? ojson(nullptr) : ojson(m.failed_stage);
  j["error"] = m.error.empty() ? ojson(nullptr) : ojson(m.error);
  j["input_hash"] = m.input_hash;
  j["config"] = config_json(m.config, true);
  j["completed_stages"] = m.completed_stages;
  ojson arts = ojson::object();
  for (const auto& [k, v] : m.artifacts) arts[k] = v;
  j["artifacts"] = arts;
  ojson s;
  s["households"] = m.summary.households;
  s["dropped_households"] = m.summary.dropped_households;
  ojson ks = ojson::object();
  for (const auto& [k, v] : m.summary.chosen_k) ks[k] = v;
  s["chosen_k"] = ks;
  s["reference_k"] = m.summary.reference_k;
  s["flagged_classes"] = m.summary.flagged;
  s["macro_f1"] = m.summary.macro_f1 ? ojson(*m.summary.macro_f1) : ojson(nullptr);
  s["subset_size"] = m.summary.subset_size;
  s["subset_fraction"] = m.summary.subset_fraction;
  s["subset_k"] = m.summary.subset_k;
  s["final_class_count"] = m.summary.final_class_count;
  j["summary"] = s;
  return j.dump(2) + "\n";
}

// ---- assignment ---------------------------------------------------------------

AssignmentResult assign_new(const GbdtModel& model, const std::vector<LoadProfile>& profiles) {
  if (!model.normalization) throw SchemaError("model carries no normalization bounds");
  if (model.feature_count != kFeatureCount) {
    throw DimensionError("model expects " + std::to_string(model.feature_count) + " features, profiles give " +
                         std::to_string(kFeatureCount));
  }
  AssignmentResult out;
  out.model_classes = model.classes;
  if (profiles.empty()) {
    out.probabilities = Matrix(0, model.class_count());
    return out;
  }
  const auto fm = assemble_matrix(profiles);
  const Matrix x = apply_min_max(fm.values, *model.normalization);
  out.ids = fm.ids;
  out.probabilities = predict_proba(model, x);
  out.classes = predict(model, out.probabilities);
  return out;
}

AssignmentResult assign_new(const std::string& model_path, const std::string& profiles_path) {
  const auto model = model_from_json(read_file(model_path));
  std::istringstream in(read_file(profiles_path));
  return assign_new(model, profiles_from_csv(in));
}

std::string assignment_to_csv(const AssignmentResult& r) {
  std::string out = "household_id,class,probability\n";
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    const auto row = r.probabilities.row(i);
    out += csv_field(r.ids[i]) + "," + std::to_string(r.classes[i]) + "," +
           format_double(*std::max_element(row.begin(), row.end())) + "\n";
  }
  return out;
}

// ---- readers --------------------------------------------------------------------

namespace {

std::size_t find_column(const std::vector<std::string>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  throw SchemaError("missing column '" + std::string(name) + "'");
}

}  // namespace

FeatureMatrix feature_matrix_from_csv(std::istream& source) {
  std::string line;
  if (!std::getline(source, line)) throw SchemaError("feature file has no header row");
  const auto header = split_delimited(line, ',');
  const auto& names = feature_names();
  if (header.empty() || trim(header[0]) != "household_id") throw SchemaError("expected column 'household_id' first");
  for (std::size_t f = 0; f < names.size(); ++f) {
    if (header.size() <= f + 1) throw SchemaError("missing column '" + names[f] + "'");
    if (trim(header[f + 1]) != names[f]) {
      throw SchemaError("unexpected column '" + header[f + 1] + "', expected '" + names[f] + "'");
    }
  }
  FeatureMatrix fm;
  fm.values = Matrix(0, kFeatureCount);
  std::vector<double> row(kFeatureCount);
  std::size_t line_no = 1;
  while (std::getline(source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_delimited(line, ',');
    if (fields.size() < kFeatureCount + 1) throw SchemaError("line " + std::to_string(line_no) + ": too few columns");
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      auto v = parse_double(fields[f + 1]);
      if (!v) throw SchemaError("line " + std::to_string(line_no) + ": column '" + names[f] + "' is not a number");
      row[f] = *v;
    }
    fm.ids.emplace_back(trim(fields[0]));
    fm.values.append_row(row);
  }
  return fm;
}

std::vector<Labeling> labelings_from_csv(std::istream& source, std::vector<std::string>& ids) {
  std::string line;
  if (!std::getline(source, line)) throw SchemaError("labeling file has no header row");
  const auto header = split_delimited(line, ',');
  const auto id_col = find_column(header, "household_id");
  const auto algo_col = find_column(header, "algorithm");
  const auto hash_col = find_column(header, "params_hash");
  const auto label_col = find_column(header, "label");
  std::vector<Labeling> out;
  std::vector<std::string> keys;
  std::vector<std::vector<std::string>> member_ids;
  std::size_t line_no = 1;
  while (std::getline(source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_delimited(line, ',');
    const std::size_t need = std::max({id_col, algo_col, hash_col, label_col}) + 1;
    if (f.size() < need) throw SchemaError("line " + std::to_string(line_no) + ": too few columns");
    const std::string key = std::string(trim(f[algo_col])) + "/" + std::string(trim(f[hash_col]));
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      Labeling l;
      l.algorithm = parse_algorithm(f[algo_col]);
      l.params["params_hash"] = std::string(trim(f[hash_col]));
      out.push_back(std::move(l));
      member_ids.emplace_back();
      it = keys.end() - 1;
    }
    const auto idx = static_cast<std::size_t>(it - keys.begin());
    auto v = parse_integer(f[label_col]);
    if (!v) throw SchemaError("line " + std::to_string(line_no) + ": label is not an integer");
    out[idx].labels.push_back(static_cast<int>(*v));
    member_ids[idx].emplace_back(trim(f[id_col]));
  }
  ids = member_ids.empty() ? std::vector<std::string>{} : member_ids.front();
  for (const auto& m : member_ids) {
    if (m != ids) throw SchemaError("labelings do not cover the same households in the same order");
  }
  return out;
}

std::map<std::string, int> labels_from_csv(std::istream& source, const std::string& column) {
  std::string line;
  if (!std::getline(source, line)) throw SchemaError("label file has no header row");
  const auto header = split_delimited(line, ',');
  const auto id_col = find_column(header, "household_id");
  const auto col = find_column(header, column);
  std::map<std::string, int> out;
  std::size_t line_no = 1;
  while (std::getline(source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_delimited(line, ',');
    if (f.size() <= std::max(id_col, col)) throw SchemaError("line " + std::to_string(line_no) + ": too few columns");
    auto v = parse_integer(f[col]);
    if (!v) throw SchemaError("line " + std::to_string(line_no) + ": column '" + column + "' is not an integer");
    if (!out.emplace(std::string(trim(f[id_col])), static_cast<int>(*v)).second) {
      throw SchemaError("line " + std::to_string(line_no) + ": duplicate household id");
    }
  }
  return out;
}

}  // namespace loadseg
