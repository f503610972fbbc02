#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loadseg/classifier.hpp"
#include "loadseg/cluster.hpp"
#include "loadseg/features.hpp"
#include "loadseg/ingest.hpp"

namespace loadseg {

inline constexpr const char* kVersion = "1.0.0";

enum class InputKind { readings, profiles };

std::string to_string(InputKind kind);
InputKind parse_input_kind(std::string_view name);

struct PipelineConfig {
  std::string input;
  InputKind input_kind = InputKind::readings;
  ColumnSchema schema;
  std::string date_filter;  // empty keeps every day
  std::string output_dir = "runs";

  int k_min = 2;
  int k_max = 30;
  std::vector<Algorithm> algorithms{Algorithm::kmeans, Algorithm::kmedoids, Algorithm::agglomerative,
                                    Algorithm::dbscan};
  Algorithm reference = Algorithm::kmeans;
  Linkage linkage = Linkage::ward;
  int kmeans_restarts = 10;
  int kmedoids_restarts = 4;
  int dbscan_min_pts = 5;
  double dbscan_max_noise = 0.2;
  int dbscan_grid = 20;

  double instability_threshold = 0.75;
  double probability_threshold = 0.8;
  bool flagged_only = false;
  int refine_depth = 1;
  int subset_k_max = 10;
  bool subset_dbscan = false;
  bool subset_renormalize = true;

  double split_ratio = 0.8;
  GbdtParams gbdt;
  bool calibrate = false;

  bool tsne = true;
  double tsne_perplexity = 30.0;
  int tsne_iterations = 1000;
  std::size_t explain_top = 10;

  std::uint64_t seed = 0;
};

/// Throws ParameterError naming the first invalid field.
void validate_config(const PipelineConfig& config);

std::string config_to_json(const PipelineConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const std::string& text);
/// 16 hex digits over every field except `output_dir`.
std::string config_hash(const PipelineConfig& config);

struct RunSummary {
  std::size_t households = 0;
  std::size_t dropped_households = 0;
  std::map<std::string, int> chosen_k;  // algorithm -> majority k (DBSCAN: cluster count)
  int reference_k = 0;
  std::vector<int> flagged;
  std::optional<double> macro_f1;
  std::size_t subset_size = 0;
  double subset_fraction = 0.0;
  int subset_k = 0;
  int final_class_count = 0;
};

struct RunManifest {
  PipelineConfig config;
  std::string run_id;
  std::string run_dir;
  std::string input_hash;
  bool success = false;
  std::string failed_stage;  // empty on success
  std::string error;
  std::vector<std::string> completed_stages;
  std::map<std::string, std::string> artifacts;  // name -> path relative to run_dir
  std::map<std::string, double> timings;          // seconds per stage, kept out of manifest.json
  RunSummary summary;
};

inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages{"ingest",  "features", "cluster", "consensus",
                                               "classify", "explain", "refine",  "report"};
  return stages;
}

/// Runs every stage in order inside output_dir/run-<config hash>. Stage
/// failures are recorded in the manifest rather than thrown; an invalid config
/// throws before anything is written. manifest.json carries no timings
/// (timings.json does), so identical runs produce identical bytes.
RunManifest run_pipeline(const PipelineConfig& config);

std::string manifest_to_json(const RunManifest& manifest);

struct AssignmentResult {
  std::vector<std::string> ids;
  std::vector<int> classes;
  Matrix probabilities;  // rows follow ids, columns follow model.classes
  std::vector<int> model_classes;
};

/// Features with the model's frozen bounds, then predict. The model is never modified.
AssignmentResult assign_new(const GbdtModel& model, const std::vector<LoadProfile>& profiles);
AssignmentResult assign_new(const std::string& model_path, const std::string& profiles_path);
/// household_id,class,probability
std::string assignment_to_csv(const AssignmentResult& result);

// ---- artifact readers -------------------------------------------------------

/// Reads the household_id + 61 feature CSV written by feature_matrix_to_csv.
FeatureMatrix feature_matrix_from_csv(std::istream& source);
/// Reads labelings_to_csv output back, one Labeling per (algorithm, params_hash)
/// in file order; rows must list the same households in the same order.
std::vector<Labeling> labelings_from_csv(std::istream& source, std::vector<std::string>& ids);
/// household_id -> integer value of `column` from any CSV with a household_id column.
std::map<std::string, int> labels_from_csv(std::istream& source, const std::string& column);

}  // namespace loadseg
