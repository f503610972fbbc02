#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadseg/cluster.hpp"
#include "loadseg/matrix.hpp"

namespace loadseg {

/// Mean silhouette; singleton clusters contribute 0. Labels must be >= 0.
double silhouette(const Matrix& points, std::span<const int> labels);
double silhouette_from_distances(const Matrix& distances, std::span<const int> labels);

/// Davies-Bouldin with S_i = mean distance to centroid. Coincident centroids
/// with nonzero scatter yield +infinity.
double davies_bouldin(const Matrix& points, std::span<const int> labels);

/// Calinski-Harabasz B/W * (N-K)/(K-1). Throws UndefinedIndexError when W = 0 or K >= N.
double calinski_harabasz(const Matrix& points, std::span<const int> labels);

struct IndexValues {
  std::optional<double> silhouette;
  std::optional<double> dbi;
  std::optional<double> chi;
};

/// All three indices over the non-noise rows; undefined ones are left empty.
/// `distances` may be null; when given it must be the full n x n matrix for `points`.
IndexValues score_labeling(const Matrix& points, const Matrix* distances, std::span<const int> labels);

struct ValidityEntry {
  Algorithm algorithm = Algorithm::kmeans;
  int k = 0;             // requested k (cluster count for DBSCAN)
  double param = 0.0;    // eps for DBSCAN, k otherwise
  int cluster_count = 0;
  double noise_fraction = 0.0;
  IndexValues values;
};

struct IndexChoice {
  std::optional<int> silhouette_k;
  std::optional<int> dbi_k;
  std::optional<int> chi_k;
  int majority_k = 0;
};

struct ValidityReport {
  std::vector<ValidityEntry> entries;
  std::map<Algorithm, IndexChoice> chosen;
};

/// Per-index optimum (max silhouette, min DBI, max CHI) and the majority
/// winner. Ties go to the smaller k; with no majority, the smallest voted k.
IndexChoice choose_k(std::span<const ValidityEntry> entries);

struct SweepOptions {
  int k_min = 2;
  int k_max = 30;
  std::uint64_t seed = 0;
  int kmeans_restarts = 10;
  int kmedoids_restarts = 4;
  Linkage linkage = Linkage::ward;
};

struct SweepResult {
  ValidityReport report;
  std::map<int, Labeling> labelings;  // by k
};

/// Runs one of kmeans / kmedoids / agglomerative over the k range. The upper
/// bound is clipped to n-1. Undefined indices become absent values.
SweepResult sweep(const Matrix& points, Algorithm algorithm, const SweepOptions& options);
SweepResult sweep(const Matrix& points, const Matrix& distances, Algorithm algorithm, const SweepOptions& options);

// ---- DBSCAN eps sweep ------------------------------------------------------

struct DbscanCandidate {
  double eps = 0.0;
  int clusters = 0;
  double noise_fraction = 0.0;
  IndexValues values;
  bool eligible = false;
};

struct DbscanSweepResult {
  Labeling labeling;
  double eps = 0.0;
  std::vector<DbscanCandidate> candidates;
  /// Entries keyed by cluster count (param = eps) and the per-index choice.
  ValidityReport report;
};

struct DbscanSweepOptions {
  int min_pts = 5;
  /// Labelings with more noise than this are only considered if nothing else qualifies.
  double max_noise_fraction = 0.2;
};

/// Scores each eps (noise excluded) and keeps the one two or more indices
/// agree on, else the best summed rank. Ties prefer fewer clusters, then larger eps.
DbscanSweepResult dbscan_sweep(const Matrix& points, const std::vector<double>& eps_grid,
                               const DbscanSweepOptions& options = {});
DbscanSweepResult dbscan_sweep(const Matrix& points, const Matrix& distances, const std::vector<double>& eps_grid,
                               const DbscanSweepOptions& options = {});

/// Adds `source` into `target`, keeping entries and choices of both.
void merge_reports(ValidityReport& target, const ValidityReport& source);

std::string report_to_json(const ValidityReport& report);
/// One row per algorithm: algorithm,silhouette,dbi,chi,majority
std::string report_to_table_csv(const ValidityReport& report);
/// algorithm,k,param,clusters,noise_fraction,silhouette,dbi,chi
std::string report_to_curve_csv(const ValidityReport& report);

}  // namespace loadseg
