#include "loadseg/validity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "json.hpp"
#include "loadseg/error.hpp"
#include "loadseg/text.hpp"

namespace loadseg {

namespace {

// Compact ids 0..K-1 in ascending label order; throws on noise labels.
std::vector<std::size_t> compact(std::span<const int> labels, std::size_t& k) {
  std::map<int, std::size_t> ids;
  for (int l : labels) {
    if (l < 0) throw ParameterError("validity index given a noise label; exclude noise rows first");
    ids.emplace(l, 0);
  }
  std::size_t next = 0;
  for (auto& [l, id] : ids) id = next++;
  k = ids.size();
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
  return out;
}

Matrix centroids(const Matrix& points, const std::vector<std::size_t>& lab, std::size_t k, std::vector<std::size_t>& sizes) {
  Matrix c(k, points.cols());
  sizes.assign(k, 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    ++sizes[lab[i]];
    auto row = c.row(lab[i]);
    auto x = points.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) row[j] += x[j];
  }
  for (std::size_t g = 0; g < k; ++g) {
    for (double& v : c.row(g)) v /= static_cast<double>(sizes[g]);
  }
  return c;
}

void check_rows(std::size_t rows, std::span<const int> labels) {
  if (rows != labels.size()) throw DimensionError("label count does not match row count");
}

}  // namespace

double silhouette_from_distances(const Matrix& d, std::span<const int> labels) {
  check_rows(d.rows(), labels);
  std::size_t k = 0;
  const auto lab = compact(labels, k);
  if (k < 2) throw UndefinedIndexError("silhouette needs at least two clusters");
  const std::size_t n = lab.size();
  std::vector<std::size_t> sizes(k, 0);
  for (auto l : lab) ++sizes[l];
  std::vector<double> sums(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = lab[i];
    if (sizes[own] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) sums[lab[j]] += d(i, j);
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < k; ++g) {
      if (g != own) b = std::min(b, sums[g] / static_cast<double>(sizes[g]));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

double silhouette(const Matrix& points, std::span<const int> labels) {
  check_rows(points.rows(), labels);
  return silhouette_from_distances(pairwise_distances(points), labels);
}

double davies_bouldin(const Matrix& points, std::span<const int> labels) {
  check_rows(points.rows(), labels);
  std::size_t k = 0;
  const auto lab = compact(labels, k);
  if (k < 2) throw UndefinedIndexError("Davies-Bouldin needs at least two clusters");
  std::vector<std::size_t> sizes;
  const Matrix c = centroids(points, lab, k, sizes);
  std::vector<double> scatter(k, 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) scatter[lab[i]] += euclidean_distance(points.row(i), c.row(lab[i]));
  for (std::size_t g = 0; g < k; ++g) scatter[g] /= static_cast<double>(sizes[g]);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const double dij = euclidean_distance(c.row(i), c.row(j));
      const double s = scatter[i] + scatter[j];
      const double r = dij > 0.0 ? s / dij : std::numeric_limits<double>::infinity();
      worst = std::max(worst, r);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

double calinski_harabasz(const Matrix& points, std::span<const int> labels) {
  check_rows(points.rows(), labels);
  std::size_t k = 0;
  const auto lab = compact(labels, k);
  const std::size_t n = lab.size();
  if (k < 2) throw UndefinedIndexError("Calinski-Harabasz needs at least two clusters");
  if (k >= n) throw UndefinedIndexError("Calinski-Harabasz needs fewer clusters than points");
  std::vector<std::size_t> sizes;
  const Matrix c = centroids(points, lab, k, sizes);
  std::vector<double> grand(points.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = points.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) grand[j] += x[j];
  }
  for (double& v : grand) v /= static_cast<double>(n);
  double between = 0.0;
  for (std::size_t g = 0; g < k; ++g) between += static_cast<double>(sizes[g]) * squared_distance(c.row(g), grand);
  double within = 0.0;
  for (std::size_t i = 0; i < n; ++i) within += squared_distance(points.row(i), c.row(lab[i]));
  if (!(within > 0.0)) throw UndefinedIndexError("Calinski-Harabasz undefined: zero within-cluster dispersion");
  return between / within * (static_cast<double>(n - k) / static_cast<double>(k - 1));
}

IndexValues score_labeling(const Matrix& points, const Matrix* distances, std::span<const int> labels) {
  check_rows(points.rows(), labels);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) keep.push_back(i);
  }
  std::vector<int> sub_labels;
  for (auto i : keep) sub_labels.push_back(labels[i]);
  IndexValues v;
  if (keep.size() < 2) return v;
  const bool all = keep.size() == labels.size();
  const Matrix sub = all ? Matrix() : points.select_rows(keep);
  const Matrix& p = all ? points : sub;
  try {
    if (distances) {
      if (all) {
        v.silhouette = silhouette_from_distances(*distances, sub_labels);
      } else {
        Matrix dsub(keep.size(), keep.size());
        for (std::size_t a = 0; a < keep.size(); ++a) {
          for (std::size_t b = 0; b < keep.size(); ++b) dsub(a, b) = (*distances)(keep[a], keep[b]);
        }
        v.silhouette = silhouette_from_distances(dsub, sub_labels);
      }
    } else {
      v.silhouette = silhouette(p, sub_labels);
    }
  } catch (const UndefinedIndexError&) {
  }
  try {
    v.dbi = davies_bouldin(p, sub_labels);
  } catch (const UndefinedIndexError&) {
  }
  try {
    v.chi = calinski_harabasz(p, sub_labels);
  } catch (const UndefinedIndexError&) {
  }
  return v;
}

IndexChoice choose_k(std::span<const ValidityEntry> entries) {
  IndexChoice choice;
  auto pick = [&](auto getter, bool maximize) -> std::optional<int> {
    std::optional<int> best_k;
    double best = 0.0;
    for (const auto& e : entries) {
      const std::optional<double> v = getter(e);
      if (!v || std::isnan(*v)) continue;
      const bool better = !best_k || (maximize ? *v > best : *v < best) || (*v == best && e.k < *best_k);
      if (better) {
        best = *v;
        best_k = e.k;
      }
    }
    return best_k;
  };
  choice.silhouette_k = pick([](const ValidityEntry& e) { return e.values.silhouette; }, true);
  choice.dbi_k = pick([](const ValidityEntry& e) { return e.values.dbi; }, false);
  choice.chi_k = pick([](const ValidityEntry& e) { return e.values.chi; }, true);
  std::map<int, int> votes;
  for (const auto& k : {choice.silhouette_k, choice.dbi_k, choice.chi_k}) {
    if (k) ++votes[*k];
  }
  if (votes.empty()) throw SweepFailure("no validity index is defined for any candidate");
  int best_k = votes.begin()->first;
  int best_votes = votes.begin()->second;
  for (const auto& [k, count] : votes) {
    if (count > best_votes) {
      best_votes = count;
      best_k = k;
    }
  }
  choice.majority_k = best_k;
  return choice;
}

SweepResult sweep(const Matrix& points, const Matrix& distances, Algorithm algorithm, const SweepOptions& options) {
  const int n = static_cast<int>(points.rows());
  const int k_max = std::min(options.k_max, n - 1);
  if (options.k_min < 2 || options.k_min > k_max) {
    throw ParameterError("sweep range [" + std::to_string(options.k_min) + ", " + std::to_string(options.k_max) +
                         "] infeasible for " + std::to_string(n) + " points");
  }
  SweepResult result;
  std::optional<Dendrogram> dendro;
  if (algorithm == Algorithm::agglomerative) dendro = build_dendrogram(points, options.linkage);
  std::vector<ValidityEntry> entries;
  for (int k = options.k_min; k <= k_max; ++k) {
    Labeling lab;
    switch (algorithm) {
      case Algorithm::kmeans:
        lab = kmeans(points, k, options.seed, options.kmeans_restarts);
        break;
      case Algorithm::kmedoids:
        lab = kmedoids_from_distances(distances, points.rows(), k, options.seed, options.kmedoids_restarts).labeling;
        break;
      case Algorithm::agglomerative:
        lab.algorithm = Algorithm::agglomerative;
        lab.params = {{"k", std::to_string(k)}, {"linkage", to_string(options.linkage)}};
        lab.labels = cut_dendrogram(*dendro, k);
        break;
      case Algorithm::dbscan:
        throw ParameterError("use dbscan_sweep for DBSCAN");
    }
    ValidityEntry e;
    e.algorithm = algorithm;
    e.k = k;
    e.param = k;
    e.cluster_count = lab.cluster_count();
    e.noise_fraction = lab.noise_fraction();
    e.values = score_labeling(points, &distances, lab.labels);
    entries.push_back(e);
    result.labelings.emplace(k, std::move(lab));
  }
  result.report.chosen[algorithm] = choose_k(entries);
  result.report.entries = std::move(entries);
  return result;
}

SweepResult sweep(const Matrix& points, Algorithm algorithm, const SweepOptions& options) {
  return sweep(points, pairwise_distances(points), algorithm, options);
}

void merge_reports(ValidityReport& target, const ValidityReport& source) {
  target.entries.insert(target.entries.end(), source.entries.begin(), source.entries.end());
  for (const auto& [a, c] : source.chosen) target.chosen[a] = c;
}

namespace {

nlohmann::ordered_json number_or_null(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  return *v;
}

nlohmann::ordered_json int_or_null(const std::optional<int>& v) {
  if (!v) return nullptr;
  return *v;
}

std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }
std::string opt_cell(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }

}  // namespace

std::string report_to_json(const ValidityReport& report) {
  nlohmann::ordered_json j;
  auto& entries = j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : report.entries) {
    nlohmann::ordered_json o;
    o["algorithm"] = to_string(e.algorithm);
    o["k"] = e.k;
    o["param"] = e.param;
    o["cluster_count"] = e.cluster_count;
    o["noise_fraction"] = e.noise_fraction;
    o["silhouette"] = number_or_null(e.values.silhouette);
    o["dbi"] = number_or_null(e.values.dbi);
    o["chi"] = number_or_null(e.values.chi);
    entries.push_back(std::move(o));
  }
  auto& chosen = j["chosen"] = nlohmann::ordered_json::object();
  for (const auto& [a, c] : report.chosen) {
    chosen[to_string(a)] = {{"silhouette", int_or_null(c.silhouette_k)},
                            {"dbi", int_or_null(c.dbi_k)},
                            {"chi", int_or_null(c.chi_k)},
                            {"majority", c.majority_k}};
  }
  return j.dump(2) + "\n";
}

std::string report_to_table_csv(const ValidityReport& report) {
  std::string out = "algorithm,silhouette,dbi,chi,majority\n";
  for (const auto& [a, c] : report.chosen) {
    out += to_string(a) + "," + opt_cell(c.silhouette_k) + "," + opt_cell(c.dbi_k) + "," + opt_cell(c.chi_k) + "," +
           std::to_string(c.majority_k) + "\n";
  }
  return out;
}

std::string report_to_curve_csv(const ValidityReport& report) {
  std::string out = "algorithm,k,param,clusters,noise_fraction,silhouette,dbi,chi\n";
  for (const auto& e : report.entries) {
    out += to_string(e.algorithm) + "," + std::to_string(e.k) + "," + format_double(e.param) + "," +
           std::to_string(e.cluster_count) + "," + format_double(e.noise_fraction) + "," + opt_cell(e.values.silhouette) +
           "," + opt_cell(e.values.dbi) + "," + opt_cell(e.values.chi) + "\n";
  }
  return out;
}

}  // namespace loadseg
