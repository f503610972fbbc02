#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadseg/matrix.hpp"

namespace loadseg {

enum class Algorithm { kmeans, kmedoids, agglomerative, dbscan };
enum class Linkage { single, complete, average, ward };

std::string to_string(Algorithm a);
std::string to_string(Linkage l);
Algorithm parse_algorithm(std::string_view name);
Linkage parse_linkage(std::string_view name);

struct Labeling {
  Algorithm algorithm = Algorithm::kmeans;
  std::map<std::string, std::string> params;
  std::vector<int> labels;  // -1 marks DBSCAN noise
  std::optional<double> objective;

  /// Number of distinct non-noise labels.
  [[nodiscard]] int cluster_count() const;
  [[nodiscard]] double noise_fraction() const;
  /// Stable hash of algorithm + params, 16 hex digits.
  [[nodiscard]] std::string params_hash() const;
};

/// Renumber non-negative labels by order of first appearance; -1 stays -1.
std::vector<int> canonicalize_labels(std::span<const int> labels);

// ---- K-means ---------------------------------------------------------------

struct KMeansTrace {
  std::vector<int> labels;
  Matrix centers;
  std::vector<double> objective_per_iteration;  // J after each assignment step
  double objective = 0.0;
};

/// One Lloyd run from the given initial centers followed by single-point
/// (Hartigan) improvement moves. Exposed for property tests.
KMeansTrace lloyd(const Matrix& points, Matrix initial_centers, int max_iterations = 300);

/// k-means++ seeding driven by a seeded generator.
Matrix kmeans_plus_plus(const Matrix& points, int k, std::uint64_t seed);

Labeling kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts = 10);

/// Sum of squared distances of points to their cluster means.
double kmeans_objective(const Matrix& points, std::span<const int> labels);

// ---- K-medoids -------------------------------------------------------------

struct KMedoidsResult {
  Labeling labeling;
  std::vector<std::size_t> medoids;  // row indices, in label order
  std::vector<double> cost_trace;    // cost after BUILD and after each accepted swap
};

/// PAM BUILD + SWAP on Euclidean distances. `restarts` extra SWAP runs from
/// seeded random medoid sets are tried after the BUILD start; the cheapest wins.
KMedoidsResult kmedoids_detailed(const Matrix& points, int k, std::uint64_t seed, int restarts = 4);
KMedoidsResult kmedoids_from_distances(const Matrix& distances, std::size_t n, int k, std::uint64_t seed, int restarts);
Labeling kmedoids(const Matrix& points, int k, std::uint64_t seed, int restarts = 4);

/// Sum of distances from each point to its nearest medoid.
double kmedoids_cost(const Matrix& points, std::span<const std::size_t> medoids);

// ---- Agglomerative ---------------------------------------------------------

struct Merge {
  std::size_t cluster_a = 0;  // ids < n are leaves, n + i is the cluster formed by merge i
  std::size_t cluster_b = 0;
  double distance = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::size_t leaves = 0;
  std::vector<Merge> merges;  // non-decreasing distance
};

/// Ward heights follow the usual convention sqrt(2 * increase in within-cluster
/// sum of squares), so two singletons merge at their Euclidean distance.
Dendrogram build_dendrogram(const Matrix& points, Linkage linkage);
std::vector<int> cut_dendrogram(const Dendrogram& dendrogram, int k);

struct AgglomerativeResult {
  Labeling labeling;
  Dendrogram dendrogram;
};

AgglomerativeResult agglomerative(const Matrix& points, int k, Linkage linkage = Linkage::ward);

// ---- DBSCAN ----------------------------------------------------------------

Labeling dbscan(const Matrix& points, double eps, int min_pts = 5);
/// Same, on a precomputed n x n distance matrix.
Labeling dbscan_from_distances(const Matrix& distances, double eps, int min_pts);

/// `count` log-spaced values between the 1st and 99th percentile of each
/// point's distance to its min_pts-th nearest other point.
std::vector<double> default_eps_grid(const Matrix& distances, int min_pts = 5, int count = 20);

// ---- Persistence -----------------------------------------------------------

/// household_id,algorithm,params_hash,label
std::string labelings_to_csv(const std::vector<std::string>& ids, const std::vector<Labeling>& labelings);

}  // namespace loadseg
