#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "loadseg/cluster.hpp"
#include "loadseg/error.hpp"
#include "loadseg/features.hpp"
#include "loadseg/text.hpp"
#include "loadseg/validity.hpp"

namespace loadseg {

Labeling dbscan_from_distances(const Matrix& d, double eps, int min_pts) {
  if (!(eps > 0.0)) throw ParameterError("eps must be positive");
  if (min_pts < 1) throw ParameterError("min_pts must be >= 1");
  const std::size_t n = d.rows();
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int count = 0;
    for (std::size_t j = 0; j < n; ++j) count += d(i, j) <= eps ? 1 : 0;
    core[i] = count >= min_pts;
  }
  // Clusters are connected components of the core graph; a border point joins
  // the cluster of its nearest core neighbour, which keeps the result order-free.
  std::vector<int> labels(n, -1);
  int next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (!core[s] || labels[s] >= 0) continue;
    std::deque<std::size_t> queue{s};
    labels[s] = next;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      for (std::size_t q = 0; q < n; ++q) {
        if (core[q] && labels[q] < 0 && d(p, q) <= eps) {
          labels[q] = next;
          queue.push_back(q);
        }
      }
    }
    ++next;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best = std::numeric_limits<double>::infinity();
    int label = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (core[j] && d(i, j) <= eps && d(i, j) < best) {
        best = d(i, j);
        label = labels[j];
      }
    }
    labels[i] = label;
  }
  Labeling out;
  out.algorithm = Algorithm::dbscan;
  out.params = {{"eps", format_double(eps)}, {"min_pts", std::to_string(min_pts)}};
  out.labels = canonicalize_labels(labels);
  return out;
}

Labeling dbscan(const Matrix& points, double eps, int min_pts) {
  return dbscan_from_distances(pairwise_distances(points), eps, min_pts);
}

std::vector<double> default_eps_grid(const Matrix& d, int min_pts, int count) {
  const std::size_t n = d.rows();
  if (n < 2) throw ParameterError("eps grid needs at least two points");
  if (min_pts < 1 || count < 1) throw ParameterError("eps grid: min_pts and count must be positive");
  std::vector<double> kdist;
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(d(i, j));
    }
    const std::size_t idx = std::min(static_cast<std::size_t>(min_pts), row.size()) - 1;
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(idx), row.end());
    kdist.push_back(row[idx]);
  }
  std::sort(kdist.begin(), kdist.end());
  double lo = interpolated_percentile(kdist, 0.01);
  double hi = interpolated_percentile(kdist, 0.99);
  if (!(hi > 0.0)) hi = std::max(kdist.back(), 1e-12);
  if (!(lo > 0.0)) lo = hi * 1e-3;
  std::vector<double> grid;
  if (count == 1) return {lo};
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    grid.push_back(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
  }
  return grid;
}

namespace {

// True when candidate a is preferred over b on an exact score tie.
bool tie_prefers(const DbscanCandidate& a, const DbscanCandidate& b) {
  if (a.clusters != b.clusters) return a.clusters < b.clusters;
  return a.eps > b.eps;
}

}  // namespace

DbscanSweepResult dbscan_sweep(const Matrix& points, const Matrix& distances, const std::vector<double>& eps_grid,
                               const DbscanSweepOptions& options) {
  if (eps_grid.empty()) throw ParameterError("empty eps grid");
  DbscanSweepResult result;
  std::vector<Labeling> labelings;
  for (double eps : eps_grid) {
    Labeling lab = dbscan_from_distances(distances, eps, options.min_pts);
    DbscanCandidate c;
    c.eps = eps;
    c.clusters = lab.cluster_count();
    c.noise_fraction = lab.noise_fraction();
    if (c.clusters >= 2) c.values = score_labeling(points, &distances, lab.labels);
    result.candidates.push_back(c);
    labelings.push_back(std::move(lab));
  }

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    const auto& c = result.candidates[i];
    if (c.clusters >= 2 && c.noise_fraction <= options.max_noise_fraction) pool.push_back(i);
  }
  if (pool.empty()) {
    for (std::size_t i = 0; i < result.candidates.size(); ++i) {
      if (result.candidates[i].clusters >= 2) pool.push_back(i);
    }
  }
  if (pool.empty()) throw SweepFailure("every eps produced fewer than two clusters");
  for (auto i : pool) result.candidates[i].eligible = true;

  // Per-index ordering of the pool, best first; undefined values sort last.
  using Getter = std::optional<double> (*)(const IndexValues&);
  const Getter getters[3] = {[](const IndexValues& v) { return v.silhouette; },
                             [](const IndexValues& v) { return v.dbi; },
                             [](const IndexValues& v) { return v.chi; }};
  const bool maximize[3] = {true, false, true};
  std::vector<double> rank_sum(result.candidates.size(), 0.0);
  std::optional<std::size_t> winners[3];
  for (int idx = 0; idx < 3; ++idx) {
    std::vector<std::size_t> order = pool;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto va = getters[idx](result.candidates[a].values);
      const auto vb = getters[idx](result.candidates[b].values);
      if (va.has_value() != vb.has_value()) return va.has_value();
      if (!va) return tie_prefers(result.candidates[a], result.candidates[b]);
      if (*va != *vb) return maximize[idx] ? *va > *vb : *va < *vb;
      return tie_prefers(result.candidates[a], result.candidates[b]);
    });
    for (std::size_t r = 0; r < order.size(); ++r) rank_sum[order[r]] += static_cast<double>(r + 1);
    if (getters[idx](result.candidates[order.front()].values)) winners[idx] = order.front();
  }

  auto best_by_rank = [&](const std::vector<std::size_t>& among) {
    std::size_t best = among.front();
    for (auto i : among) {
      if (rank_sum[i] < rank_sum[best] ||
          (rank_sum[i] == rank_sum[best] && tie_prefers(result.candidates[i], result.candidates[best]))) {
        best = i;
      }
    }
    return best;
  };

  // Majority on cluster count among the index winners, then best summed rank.
  std::optional<int> majority_clusters;
  for (int a = 0; a < 3 && !majority_clusters; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      if (winners[a] && winners[b] && result.candidates[*winners[a]].clusters == result.candidates[*winners[b]].clusters) {
        majority_clusters = result.candidates[*winners[a]].clusters;
        break;
      }
    }
  }
  std::size_t selected;
  if (majority_clusters) {
    std::vector<std::size_t> among;
    for (auto w : winners) {
      if (w && result.candidates[*w].clusters == *majority_clusters) among.push_back(*w);
    }
    selected = best_by_rank(among);
  } else {
    selected = best_by_rank(pool);
  }

  result.labeling = labelings[selected];
  result.eps = result.candidates[selected].eps;
  for (const auto& c : result.candidates) {
    ValidityEntry e;
    e.algorithm = Algorithm::dbscan;
    e.k = c.clusters;
    e.param = c.eps;
    e.cluster_count = c.clusters;
    e.noise_fraction = c.noise_fraction;
    e.values = c.values;
    result.report.entries.push_back(e);
  }
  IndexChoice choice;
  if (winners[0]) choice.silhouette_k = result.candidates[*winners[0]].clusters;
  if (winners[1]) choice.dbi_k = result.candidates[*winners[1]].clusters;
  if (winners[2]) choice.chi_k = result.candidates[*winners[2]].clusters;
  choice.majority_k = result.candidates[selected].clusters;
  result.report.chosen[Algorithm::dbscan] = choice;
  return result;
}

DbscanSweepResult dbscan_sweep(const Matrix& points, const std::vector<double>& eps_grid,
                               const DbscanSweepOptions& options) {
  return dbscan_sweep(points, pairwise_distances(points), eps_grid, options);
}

}  // namespace loadseg
