#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "loadseg/classifier.hpp"
#include "loadseg/cluster.hpp"
#include "loadseg/matrix.hpp"
#include "loadseg/validity.hpp"

namespace loadseg {

inline constexpr double kDefaultProbabilityThreshold = 0.8;

/// Row indices (ascending) whose maximum probability is below `threshold`, or
/// whose predicted class is flagged. With `flagged_only` the probability gate
/// is ignored and only flagged-class members are returned.
std::vector<std::size_t> extract_low_confidence(const Matrix& probabilities, std::span<const int> predicted,
                                                double threshold, const std::set<int>& flagged,
                                                bool flagged_only = false);

struct SubsetOptions {
  int k_min = 2;
  int k_max = 10;
  std::uint64_t seed = 0;
  int kmeans_restarts = 10;
  Linkage linkage = Linkage::ward;
  bool include_dbscan = false;
  int dbscan_min_pts = 5;
  /// Min-max normalize the subset's columns again before clustering.
  bool renormalize = true;
};

struct SubsetClustering {
  bool skipped = false;
  std::string skip_reason;
  int k = 0;
  Labeling labeling;  // K-means at the chosen k, labels contiguous from 0
  ValidityReport report;
  std::map<int, int> votes;  // k -> number of index votes
};

/// K-means and agglomerative sweeps on the subset; every index of every
/// algorithm casts one vote and the most voted k wins (ties to the smaller k).
/// DBSCAN, when enabled, votes with its cluster count. Subsets with no more
/// rows than k_min are skipped.
SubsetClustering recluster_subset(const Matrix& subset, const SubsetOptions& options);

struct RefinementResult {
  std::set<int> flagged_classes;
  std::vector<std::size_t> subset_indices;
  std::vector<std::string> subset_ids;
  std::optional<ValidityReport> subset_report;
  int subset_k = 0;
  bool skipped = false;
  std::string skip_reason;
  std::vector<int> original_labels;
  std::vector<int> final_labels;
  std::vector<bool> refined;  // per point: member of the re-clustered subset
  int class_count_before = 0;
  int class_count_after = 0;
  int levels = 0;  // refinement levels actually applied
};

/// Removes flagged classes, renumbers the rest by ascending old id and appends
/// the subset clusters after them. An unflagged class left with no members
/// outside the subset is treated as flagged. Throws ParameterError on
/// inconsistent inputs (lengths, duplicate or out-of-range indices, flagged
/// members missing from the subset, non-contiguous subset labels).
RefinementResult merge(std::span<const int> original, const std::set<int>& flagged,
                       std::span<const std::size_t> subset_indices, std::span<const int> subset_labels);

struct RefineOptions {
  double threshold = kDefaultProbabilityThreshold;
  bool flagged_only = false;
  int depth = 1;
  SubsetOptions subset;
  /// Classifier used to re-gate levels after the first.
  GbdtParams classifier;
};

/// Full refinement: gate, re-cluster, merge. Deeper levels retrain the
/// classifier on the merged labels and reuse the probability gate with no
/// flagged classes.
RefinementResult refine(const Matrix& points, const std::vector<std::string>& ids, std::span<const int> labels,
                        const Matrix& probabilities, std::span<const int> predicted, const std::set<int>& flagged,
                        const RefineOptions& options);

std::string refinement_to_json(const RefinementResult& result);
/// household_id,final_class,probability,was_refined
std::string assignments_to_csv(const RefinementResult& result, const std::vector<std::string>& ids,
                               const Matrix& probabilities);

}  // namespace loadseg
