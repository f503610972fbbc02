#include "loadseg/refine.hpp"

#include <algorithm>
#include <map>

#include "json.hpp"
#include "loadseg/error.hpp"
#include "loadseg/ingest.hpp"
#include "loadseg/text.hpp"

namespace loadseg {

std::vector<std::size_t> extract_low_confidence(const Matrix& probabilities, std::span<const int> predicted,
                                                double threshold, const std::set<int>& flagged, bool flagged_only) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ParameterError("probability threshold must be in (0, 1]");
  if (predicted.size() != probabilities.rows()) throw DimensionError("prediction count does not match probability rows");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < probabilities.rows(); ++i) {
    const auto row = probabilities.row(i);
    const double best = row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
    if (flagged.count(predicted[i]) > 0 || (!flagged_only && best < threshold)) out.push_back(i);
  }
  return out;
}

SubsetClustering recluster_subset(const Matrix& subset, const SubsetOptions& options) {
  SubsetClustering out;
  out.labeling.algorithm = Algorithm::kmeans;
  const auto n = static_cast<int>(subset.rows());
  if (options.k_min < 2 || options.k_max < options.k_min) throw ParameterError("invalid subset k range");
  if (n <= options.k_min) {
    out.skipped = true;
    out.skip_reason = "subset has " + std::to_string(n) + " points, need more than " + std::to_string(options.k_min);
    return out;
  }
  const Matrix points = options.renormalize ? normalize_columns(subset) : subset;
  const Matrix dist = pairwise_distances(points);
  SweepOptions sw;
  sw.k_min = options.k_min;
  sw.k_max = options.k_max;
  sw.seed = options.seed;
  sw.kmeans_restarts = options.kmeans_restarts;
  sw.linkage = options.linkage;
  auto km = sweep(points, dist, Algorithm::kmeans, sw);
  auto ag = sweep(points, dist, Algorithm::agglomerative, sw);
  out.report = km.report;
  merge_reports(out.report, ag.report);
  for (const auto& [alg, choice] : out.report.chosen) {
    for (const auto& k : {choice.silhouette_k, choice.dbi_k, choice.chi_k}) {
      if (k) ++out.votes[*k];
    }
  }
  if (options.include_dbscan && n > options.dbscan_min_pts) {
    DbscanSweepOptions dopt;
    dopt.min_pts = options.dbscan_min_pts;
    try {
      auto db = dbscan_sweep(points, dist, default_eps_grid(dist, options.dbscan_min_pts), dopt);
      merge_reports(out.report, db.report);
      const int c = db.labeling.cluster_count();
      if (c >= options.k_min && c < n) ++out.votes[c];
    } catch (const SweepFailure&) {
      // no usable density labeling; K-means and agglomerative still vote
    }
  }
  int best_k = 0, best_votes = 0;
  for (const auto& [k, v] : out.votes) {
    if (v > best_votes) {
      best_k = k;
      best_votes = v;
    }
  }
  if (best_votes == 0) {
    out.skipped = true;
    out.skip_reason = "no validity index was defined on the subset";
    return out;
  }
  out.k = best_k;
  auto it = km.labelings.find(best_k);
  if (it == km.labelings.end()) {
    out.labeling = kmeans(points, best_k, options.seed, options.kmeans_restarts);
  } else {
    out.labeling = it->second;
  }
  out.labeling.labels = canonicalize_labels(out.labeling.labels);
  return out;
}

RefinementResult merge(std::span<const int> original, const std::set<int>& flagged,
                       std::span<const std::size_t> subset_indices, std::span<const int> subset_labels) {
  if (subset_indices.size() != subset_labels.size()) throw ParameterError("subset index and label counts differ");
  const std::size_t n = original.size();
  RefinementResult r;
  r.original_labels.assign(original.begin(), original.end());
  r.refined.assign(n, false);
  for (auto i : subset_indices) {
    if (i >= n) throw ParameterError("subset index " + std::to_string(i) + " out of range");
    if (r.refined[i]) throw ParameterError("duplicate subset index " + std::to_string(i));
    r.refined[i] = true;
  }
  int subset_clusters = 0;
  {
    std::set<int> seen(subset_labels.begin(), subset_labels.end());
    if (!seen.empty() && (*seen.begin() != 0 || *seen.rbegin() != static_cast<int>(seen.size()) - 1)) {
      throw ParameterError("subset labels must be contiguous from 0");
    }
    subset_clusters = static_cast<int>(seen.size());
  }
  std::set<int> classes(original.begin(), original.end());
  for (int f : flagged) {
    if (classes.count(f) == 0) throw ParameterError("flagged class " + std::to_string(f) + " does not exist");
  }
  r.class_count_before = static_cast<int>(classes.size());
  std::set<int> remaining;
  for (std::size_t i = 0; i < n; ++i) {
    if (flagged.count(original[i]) > 0 && !r.refined[i]) {
      throw ParameterError("member " + std::to_string(i) + " of a flagged class is missing from the subset");
    }
    if (!r.refined[i]) remaining.insert(original[i]);
  }
  r.flagged_classes = flagged;
  std::map<int, int> renumber;
  for (int c : classes) {
    if (flagged.count(c) > 0) continue;
    if (remaining.count(c) == 0) {
      r.flagged_classes.insert(c);
      continue;
    }
    const int next = static_cast<int>(renumber.size());
    renumber[c] = next;
  }
  const int offset = static_cast<int>(renumber.size());
  r.final_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!r.refined[i]) r.final_labels[i] = renumber.at(original[i]);
  }
  for (std::size_t s = 0; s < subset_indices.size(); ++s) r.final_labels[subset_indices[s]] = offset + subset_labels[s];
  r.subset_indices.assign(subset_indices.begin(), subset_indices.end());
  r.class_count_after = offset + subset_clusters;
  r.subset_k = subset_clusters;
  return r;
}

namespace {

RefinementResult refine_level(const Matrix& points, const std::vector<std::string>& ids, std::span<const int> labels,
                              const Matrix& probabilities, std::span<const int> predicted, const std::set<int>& flagged,
                              const RefineOptions& options) {
  auto subset = extract_low_confidence(probabilities, predicted, options.threshold, flagged, options.flagged_only);
  // Members of flagged classes by cluster label are re-clustered as well.
  {
    std::set<std::size_t> all(subset.begin(), subset.end());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (flagged.count(labels[i]) > 0) all.insert(i);
    }
    subset.assign(all.begin(), all.end());
  }
  SubsetClustering sc;
  if (!subset.empty()) sc = recluster_subset(points.select_rows(subset), options.subset);
  RefinementResult r;
  if (subset.empty() || sc.skipped) {
    r = merge(labels, {}, {}, {});
    r.skipped = true;
    r.skip_reason = subset.empty() ? "no points below the gate" : sc.skip_reason;
    r.subset_indices = subset;
  } else {
    r = merge(labels, flagged, subset, sc.labeling.labels);
    r.subset_report = sc.report;
    r.subset_k = sc.k;
  }
  for (auto i : r.subset_indices) r.subset_ids.push_back(ids.at(i));
  return r;
}

}  // namespace

RefinementResult refine(const Matrix& points, const std::vector<std::string>& ids, std::span<const int> labels,
                        const Matrix& probabilities, std::span<const int> predicted, const std::set<int>& flagged,
                        const RefineOptions& options) {
  if (options.depth < 1) throw ParameterError("refinement depth must be at least 1");
  if (points.rows() != labels.size() || ids.size() != labels.size()) throw DimensionError("refine: row counts differ");
  RefinementResult first = refine_level(points, ids, labels, probabilities, predicted, flagged, options);
  first.levels = first.skipped ? 0 : 1;
  RefinementResult current = first;
  for (int level = 2; level <= options.depth && !current.skipped; ++level) {
    Dataset d;
    d.features = points;
    d.labels = current.final_labels;
    const GbdtModel model = train(d, options.classifier);
    const Matrix probs = predict_proba(model, points);
    const auto pred = predict(model, probs);
    RefineOptions next = options;
    next.flagged_only = false;
    RefinementResult deeper = refine_level(points, ids, current.final_labels, probs, pred, {}, next);
    if (deeper.skipped) break;
    // Keep level-one bookkeeping; the outcome reflects the deepest level.
    for (std::size_t i = 0; i < deeper.refined.size(); ++i) current.refined[i] = current.refined[i] || deeper.refined[i];
    current.final_labels = deeper.final_labels;
    current.class_count_after = deeper.class_count_after;
    current.levels = level;
  }
  return current;
}

std::string refinement_to_json(const RefinementResult& result) {
  nlohmann::ordered_json j;
  j["skipped"] = result.skipped;
  if (result.skipped) j["skip_reason"] = result.skip_reason;
  j["levels"] = result.levels;
  j["flagged_classes"] = std::vector<int>(result.flagged_classes.begin(), result.flagged_classes.end());
  j["class_count_before"] = result.class_count_before;
  j["class_count_after"] = result.class_count_after;
  j["subset_size"] = result.subset_indices.size();
  j["subset_fraction"] = result.final_labels.empty()
                             ? 0.0
                             : static_cast<double>(result.subset_indices.size()) /
                                   static_cast<double>(result.final_labels.size());
  j["subset_k"] = result.subset_k;
  j["subset_ids"] = result.subset_ids;
  if (result.subset_report) j["subset_report"] = nlohmann::ordered_json::parse(report_to_json(*result.subset_report));
  return j.dump(2) + "\n";
}

std::string assignments_to_csv(const RefinementResult& result, const std::vector<std::string>& ids,
                               const Matrix& probabilities) {
  if (ids.size() != result.final_labels.size() || probabilities.rows() != ids.size()) {
    throw DimensionError("assignment row counts differ");
  }
  std::string out = "household_id,final_class,probability,was_refined\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = probabilities.row(i);
    const double p = row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
    out += csv_field(ids[i]) + "," + std::to_string(result.final_labels[i]) + "," + format_double(p) + "," +
           (result.refined[i] ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace loadseg
