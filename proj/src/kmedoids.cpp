#include <algorithm>
#include <limits>
#include <numeric>

#include "loadseg/cluster.hpp"
#include "loadseg/error.hpp"
#include "loadseg/random.hpp"

namespace loadseg {

namespace {

struct Assignment {
  std::vector<std::size_t> nearest;  // position in medoid list
  std::vector<double> d_nearest;
  std::vector<double> d_second;
  double cost = 0.0;
};

Assignment assign(const Matrix& d, std::size_t n, const std::vector<std::size_t>& medoids) {
  Assignment a;
  a.nearest.assign(n, 0);
  a.d_nearest.assign(n, std::numeric_limits<double>::infinity());
  a.d_second.assign(n, std::numeric_limits<double>::infinity());
  for (std::size_t o = 0; o < n; ++o) {
    for (std::size_t m = 0; m < medoids.size(); ++m) {
      const double v = d(o, medoids[m]);
      if (v < a.d_nearest[o]) {
        a.d_second[o] = a.d_nearest[o];
        a.d_nearest[o] = v;
        a.nearest[o] = m;
      } else if (v < a.d_second[o]) {
        a.d_second[o] = v;
      }
    }
    a.cost += a.d_nearest[o];
  }
  return a;
}

std::vector<std::size_t> build(const Matrix& d, std::size_t n, std::size_t k) {
  std::vector<std::size_t> medoids;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<char> is_medoid(n, 0);
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = n;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      if (is_medoid[c]) continue;
      double gain = 0.0;
      if (step == 0) {
        for (std::size_t j = 0; j < n; ++j) gain -= d(j, c);
      } else {
        for (std::size_t j = 0; j < n; ++j) gain += std::max(0.0, nearest[j] - d(j, c));
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = 1;
    for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], d(j, best));
  }
  return medoids;
}

// Steepest-descent SWAP; every candidate (medoid, non-medoid) pair is scored
// per iteration in O(n^2) using nearest / second-nearest distances.
void swap_phase(const Matrix& d, std::size_t n, std::vector<std::size_t>& medoids, std::vector<double>* trace) {
  const std::size_t k = medoids.size();
  Assignment a = assign(d, n, medoids);
  if (trace) trace->push_back(a.cost);
  std::vector<char> is_medoid(n, 0);
  for (auto m : medoids) is_medoid[m] = 1;
  std::vector<double> removal(k), delta(k);
  for (int iter = 0; iter < 10000; ++iter) {
    std::fill(removal.begin(), removal.end(), 0.0);
    for (std::size_t o = 0; o < n; ++o) removal[a.nearest[o]] += a.d_second[o] - a.d_nearest[o];
    double best_delta = 0.0;
    std::size_t best_m = k, best_c = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (is_medoid[c]) continue;
      delta = removal;
      double shared = 0.0;
      for (std::size_t o = 0; o < n; ++o) {
        const double doc = d(o, c);
        if (doc < a.d_nearest[o]) {
          shared += doc - a.d_nearest[o];
          delta[a.nearest[o]] += a.d_nearest[o] - a.d_second[o];
        } else if (doc < a.d_second[o]) {
          delta[a.nearest[o]] += doc - a.d_second[o];
        }
      }
      for (std::size_t m = 0; m < k; ++m) {
        const double total = delta[m] + shared;
        if (total < best_delta) {
          best_delta = total;
          best_m = m;
          best_c = c;
        }
      }
    }
    if (best_m == k || best_delta >= -1e-12 * (1.0 + a.cost)) break;
    const std::size_t old = medoids[best_m];
    medoids[best_m] = best_c;
    Assignment next = assign(d, n, medoids);
    if (next.cost > a.cost) {  // rounding guard: never accept a worse configuration
      medoids[best_m] = old;
      break;
    }
    is_medoid[old] = 0;
    is_medoid[best_c] = 1;
    a = std::move(next);
    if (trace) trace->push_back(a.cost);
  }
}

}  // namespace

KMedoidsResult kmedoids_from_distances(const Matrix& distances, std::size_t n, int k, std::uint64_t seed, int restarts) {
  if (n == 0) throw ParameterError("clustering an empty matrix");
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw ParameterError("k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  if (restarts < 0) throw ParameterError("restarts must be >= 0");
  const auto kk = static_cast<std::size_t>(k);

  std::vector<double> trace;
  std::vector<std::size_t> best = build(distances, n, kk);
  swap_phase(distances, n, best, &trace);
  double best_cost = assign(distances, n, best).cost;

  Rng rng(seed);
  for (int r = 0; r < restarts && kk < n; ++r) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < kk; ++i) std::swap(pool[i], pool[i + uniform_index(rng, n - i)]);
    std::vector<std::size_t> medoids(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(kk));
    swap_phase(distances, n, medoids, nullptr);
    const double cost = assign(distances, n, medoids).cost;
    if (cost < best_cost) {
      best_cost = cost;
      best = medoids;
      trace.push_back(cost);
    }
  }

  const Assignment a = assign(distances, n, best);
  std::vector<int> raw(n);
  for (std::size_t o = 0; o < n; ++o) raw[o] = static_cast<int>(a.nearest[o]);
  KMedoidsResult result;
  result.labeling.labels = canonicalize_labels(raw);
  // Reorder medoids so medoids[label] is the representative of that label.
  std::vector<std::size_t> ordered(static_cast<std::size_t>(result.labeling.cluster_count()));
  for (std::size_t o = 0; o < n; ++o) {
    if (result.labeling.labels[o] >= 0) ordered[static_cast<std::size_t>(result.labeling.labels[o])] = best[a.nearest[o]];
  }
  result.medoids = ordered;
  result.cost_trace = std::move(trace);
  std::string medoid_list;
  for (std::size_t i = 0; i < ordered.size(); ++i) medoid_list += (i ? "," : "") + std::to_string(ordered[i]);
  result.labeling.algorithm = Algorithm::kmedoids;
  result.labeling.params = {{"k", std::to_string(k)},
                            {"seed", std::to_string(seed)},
                            {"restarts", std::to_string(restarts)},
                            {"medoids", medoid_list}};
  result.labeling.objective = a.cost;
  return result;
}

KMedoidsResult kmedoids_detailed(const Matrix& points, int k, std::uint64_t seed, int restarts) {
  if (points.empty()) throw ParameterError("clustering an empty matrix");
  return kmedoids_from_distances(pairwise_distances(points), points.rows(), k, seed, restarts);
}

Labeling kmedoids(const Matrix& points, int k, std::uint64_t seed, int restarts) {
  return kmedoids_detailed(points, k, seed, restarts).labeling;
}

double kmedoids_cost(const Matrix& points, std::span<const std::size_t> medoids) {
  double cost = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (auto m : medoids) best = std::min(best, euclidean_distance(points.row(i), points.row(m)));
    cost += best;
  }
  return cost;
}

}  // namespace loadseg
