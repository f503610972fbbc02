#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "loadseg/cluster.hpp"
#include "loadseg/error.hpp"

namespace loadseg {

namespace {

class Condensed {
 public:
  explicit Condensed(std::size_t n) : n_(n), d_(n * (n - 1) / 2) {}
  double& at(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return d_[n_ * i - i * (i + 1) / 2 + (j - i - 1)];
  }

 private:
  std::size_t n_;
  std::vector<double> d_;
};

struct RawMerge {
  std::size_t rep_a, rep_b;  // any leaf of each side
  double height;
};

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

Dendrogram build_dendrogram(const Matrix& points, Linkage linkage) {
  const std::size_t n = points.rows();
  Dendrogram dendro;
  dendro.leaves = n;
  if (n < 2) return dendro;

  // Ward works on squared distances internally; heights are reported as their root.
  const bool ward = linkage == Linkage::ward;
  Condensed d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sq = squared_distance(points.row(i), points.row(j));
      d.at(i, j) = ward ? sq : std::sqrt(sq);
    }
  }

  std::vector<char> active(n, 1);
  std::vector<std::size_t> size(n, 1);
  std::vector<RawMerge> raw;
  raw.reserve(n - 1);
  std::vector<std::size_t> chain;
  chain.reserve(n);

  while (raw.size() < n - 1) {
    if (chain.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) {
          chain.push_back(i);
          break;
        }
      }
    }
    std::size_t a = 0, b = 0;
    double dab = 0.0;
    for (;;) {
      a = chain.back();
      const bool has_prev = chain.size() >= 2;
      const std::size_t prev = has_prev ? chain[chain.size() - 2] : n;
      b = prev;
      dab = has_prev ? d.at(a, prev) : std::numeric_limits<double>::infinity();
      for (std::size_t x = 0; x < n; ++x) {
        if (!active[x] || x == a) continue;
        const double v = d.at(a, x);
        if (v < dab) {
          dab = v;
          b = x;
        }
      }
      if (has_prev && b == prev) break;
      chain.push_back(b);
    }
    chain.pop_back();
    chain.pop_back();

    // Merge a into b (b keeps the slot).
    const double na = static_cast<double>(size[a]);
    const double nb = static_cast<double>(size[b]);
    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || x == a || x == b) continue;
      const double dax = d.at(a, x);
      const double dbx = d.at(b, x);
      double v = 0.0;
      switch (linkage) {
        case Linkage::single: v = std::min(dax, dbx); break;
        case Linkage::complete: v = std::max(dax, dbx); break;
        case Linkage::average: v = (na * dax + nb * dbx) / (na + nb); break;
        case Linkage::ward: {
          const double nx = static_cast<double>(size[x]);
          v = ((na + nx) * dax + (nb + nx) * dbx - nx * dab) / (na + nb + nx);
          v = std::max(v, 0.0);
          break;
        }
      }
      d.at(b, x) = v;
    }
    active[a] = 0;
    size[b] += size[a];
    raw.push_back({a, b, ward ? std::sqrt(std::max(dab, 0.0)) : dab});
  }

  // NN-chain emits merges out of height order; sort and rebuild cluster ids.
  std::stable_sort(raw.begin(), raw.end(), [](const RawMerge& x, const RawMerge& y) { return x.height < y.height; });
  std::vector<std::size_t> parent(n), node_id(n), node_size(n, 1);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::iota(node_id.begin(), node_id.end(), std::size_t{0});
  for (std::size_t m = 0; m < raw.size(); ++m) {
    const std::size_t ra = find_root(parent, raw[m].rep_a);
    const std::size_t rb = find_root(parent, raw[m].rep_b);
    Merge merge;
    merge.cluster_a = std::min(node_id[ra], node_id[rb]);
    merge.cluster_b = std::max(node_id[ra], node_id[rb]);
    merge.distance = raw[m].height;
    merge.size = node_size[ra] + node_size[rb];
    dendro.merges.push_back(merge);
    parent[ra] = rb;
    node_id[rb] = n + m;
    node_size[rb] = merge.size;
  }
  return dendro;
}

std::vector<int> cut_dendrogram(const Dendrogram& dendrogram, int k) {
  const std::size_t n = dendrogram.leaves;
  if (k < 1 || static_cast<std::size_t>(k) > n) throw ParameterError("cut: k out of range");
  // Map every node id to a leaf representative so merges can be replayed on leaves.
  std::vector<std::size_t> rep(n + dendrogram.merges.size());
  std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
  for (std::size_t m = 0; m < dendrogram.merges.size(); ++m) rep[n + m] = rep[dendrogram.merges[m].cluster_a];
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const std::size_t steps = n - static_cast<std::size_t>(k);
  for (std::size_t m = 0; m < steps; ++m) {
    const std::size_t ra = find_root(parent, rep[dendrogram.merges[m].cluster_a]);
    const std::size_t rb = find_root(parent, rep[dendrogram.merges[m].cluster_b]);
    parent[ra] = rb;
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(find_root(parent, i));
  return canonicalize_labels(labels);
}

AgglomerativeResult agglomerative(const Matrix& points, int k, Linkage linkage) {
  if (points.empty()) throw ParameterError("clustering an empty matrix");
  if (k < 2 || static_cast<std::size_t>(k) > points.rows()) {
    throw ParameterError("k = " + std::to_string(k) + " outside [2, " + std::to_string(points.rows()) + "]");
  }
  AgglomerativeResult result;
  result.dendrogram = build_dendrogram(points, linkage);
  result.labeling.algorithm = Algorithm::agglomerative;
  result.labeling.params = {{"k", std::to_string(k)}, {"linkage", to_string(linkage)}};
  result.labeling.labels = cut_dendrogram(result.dendrogram, k);
  return result;
}

}  // namespace loadseg
