#include <algorithm>
#include <cmath>
#include <limits>

#include "loadseg/cluster.hpp"
#include "loadseg/error.hpp"
#include "loadseg/random.hpp"

namespace loadseg {

namespace {

void check_k(const Matrix& points, int k) {
  if (points.empty()) throw ParameterError("clustering an empty matrix");
  if (k < 1 || static_cast<std::size_t>(k) > points.rows()) {
    throw ParameterError("k = " + std::to_string(k) + " outside [1, " + std::to_string(points.rows()) + "]");
  }
}

std::size_t nearest_center(std::span<const double> x, const Matrix& centers) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double d = squared_distance(x, centers.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Matrix cluster_means(const Matrix& points, const std::vector<int>& labels, std::size_t k, std::vector<std::size_t>& sizes) {
  Matrix centers(k, points.cols());
  sizes.assign(k, 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    ++sizes[c];
    auto row = centers.row(c);
    auto x = points.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += x[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] == 0) continue;
    for (double& v : centers.row(c)) v /= static_cast<double>(sizes[c]);
  }
  return centers;
}

}  // namespace

double kmeans_objective(const Matrix& points, std::span<const int> labels) {
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  std::vector<int> lab(labels.begin(), labels.end());
  std::vector<std::size_t> sizes;
  const Matrix centers = cluster_means(points, lab, static_cast<std::size_t>(k), sizes);
  double j = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    j += squared_distance(points.row(i), centers.row(static_cast<std::size_t>(labels[i])));
  }
  return j;
}

Matrix kmeans_plus_plus(const Matrix& points, int k, std::uint64_t seed) {
  check_k(points, k);
  Rng rng(seed);
  const std::size_t n = points.rows();
  Matrix centers(static_cast<std::size_t>(k), points.cols());
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = uniform_index(rng, n);
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
      if (total > 0.0) {
        double target = uniform01(rng) * total;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (chosen[i] || d2[i] <= 0.0) continue;
          pick = i;
          target -= d2[i];
          if (target < 0.0) break;
        }
      } else {
        std::vector<std::size_t> free;
        for (std::size_t i = 0; i < n; ++i) {
          if (!chosen[i]) free.push_back(i);
        }
        pick = free[uniform_index(rng, free.size())];
      }
    }
    chosen[pick] = 1;
    auto src = points.row(pick);
    std::copy(src.begin(), src.end(), centers.row(static_cast<std::size_t>(c)).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), src));
  }
  return centers;
}

KMeansTrace lloyd(const Matrix& points, Matrix centers, int max_iterations) {
  const std::size_t n = points.rows();
  const std::size_t k = centers.rows();
  KMeansTrace trace;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(nearest_center(points.row(i), centers));
  trace.objective_per_iteration.push_back(kmeans_objective(points, labels));

  std::vector<std::size_t> sizes;
  for (int iter = 0; iter < max_iterations; ++iter) {
    centers = cluster_means(points, labels, k, sizes);
    // Empty clusters take the point currently farthest from its own centroid.
    std::vector<char> used(n, 0);
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        const double d = squared_distance(points.row(i), centers.row(static_cast<std::size_t>(labels[i])));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n || far_d <= 0.0) continue;
      used[far] = 1;
      auto src = points.row(far);
      std::copy(src.begin(), src.end(), centers.row(c).begin());
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = static_cast<int>(nearest_center(points.row(i), centers));
      if (c != labels[i]) {
        labels[i] = c;
        changed = true;
      }
    }
    trace.objective_per_iteration.push_back(kmeans_objective(points, labels));
    if (!changed) break;
  }

  // Single-point transfers: move x from A to B when
  // |B|/(|B|+1)*|x-cB|^2 < |A|/(|A|-1)*|x-cA|^2.
  for (int pass = 0; pass < 1000; ++pass) {
    centers = cluster_means(points, labels, k, sizes);
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = static_cast<std::size_t>(labels[i]);
      if (sizes[a] <= 1) continue;
      auto x = points.row(i);
      const double na = static_cast<double>(sizes[a]);
      const double remove_gain = na / (na - 1.0) * squared_distance(x, centers.row(a));
      std::size_t best = a;
      double best_cost = remove_gain;
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double nb = static_cast<double>(sizes[b]);
        const double add_cost = nb / (nb + 1.0) * squared_distance(x, centers.row(b));
        if (add_cost < best_cost) {
          best_cost = add_cost;
          best = b;
        }
      }
      if (best == a || remove_gain - best_cost <= 1e-12 * (1.0 + remove_gain)) continue;
      auto ca = centers.row(a);
      auto cb = centers.row(best);
      const double nb = static_cast<double>(sizes[best]);
      for (std::size_t j = 0; j < x.size(); ++j) {
        ca[j] = (na * ca[j] - x[j]) / (na - 1.0);
        cb[j] = (nb * cb[j] + x[j]) / (nb + 1.0);
      }
      --sizes[a];
      ++sizes[best];
      labels[i] = static_cast<int>(best);
      moved = true;
    }
    if (!moved) break;
    trace.objective_per_iteration.push_back(kmeans_objective(points, labels));
  }

  trace.centers = cluster_means(points, labels, k, sizes);
  trace.objective = kmeans_objective(points, labels);
  trace.labels = std::move(labels);
  return trace;
}

Labeling kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts) {
  check_k(points, k);
  if (restarts < 1) throw ParameterError("restarts must be >= 1");
  KMeansTrace best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    Matrix init = kmeans_plus_plus(points, k, derive_seed(seed, static_cast<std::uint64_t>(r)));
    KMeansTrace t = lloyd(points, std::move(init));
    if (!have || t.objective < best.objective) {
      best = std::move(t);
      have = true;
    }
  }
  Labeling out;
  out.algorithm = Algorithm::kmeans;
  out.params = {{"k", std::to_string(k)}, {"seed", std::to_string(seed)}, {"restarts", std::to_string(restarts)}};
  out.labels = canonicalize_labels(best.labels);
  out.objective = best.objective;
  return out;
}

}  // namespace loadseg
