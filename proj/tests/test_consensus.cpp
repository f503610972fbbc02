#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "loadseg/consensus.hpp"
#include "loadseg/error.hpp"
#include "test_util.hpp"

using namespace loadseg;

namespace {

using Table = std::vector<std::vector<long long>>;

// Published K-means-referenced contingency tables (rows: K-means clusters).
const Table kVsAgglomerative{{2442, 0, 0, 0, 0, 0, 0}, {0, 0, 485, 0, 0, 0, 0}, {0, 0, 0, 0, 417, 0, 0},
                             {0, 0, 0, 0, 0, 239, 0},  {111, 9, 6, 123, 0, 0, 0}, {0, 399, 0, 0, 0, 0, 0},
                             {0, 0, 0, 1, 0, 0, 206}};
const Table kVsKMedoids{{557, 223, 509, 660, 0, 242, 251}, {0, 0, 0, 0, 475, 10, 0}, {0, 0, 0, 0, 414, 3, 0},
                        {0, 0, 0, 0, 235, 4, 0},           {0, 0, 0, 0, 4, 245, 0},  {0, 0, 0, 0, 396, 3, 0},
                        {0, 0, 0, 0, 205, 2, 0}};
const Table kVsDbscan{{2442, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 485}, {0, 0, 416, 0, 0, 0, 1},
                      {0, 0, 0, 238, 0, 0, 1},  {192, 4, 0, 12, 7, 1, 33}, {0, 122, 0, 0, 274, 0, 3},
                      {0, 0, 0, 0, 0, 207, 0}};

ContingencyMatrix from_table(const Table& t) {
  ContingencyMatrix m;
  m.counts = t;
  for (size_t i = 0; i < t.size(); ++i) m.row_labels.push_back(static_cast<int>(i));
  for (size_t j = 0; j < t[0].size(); ++j) m.col_labels.push_back(static_cast<int>(j));
  return m;
}

// Labelings that realise a contingency table.
std::pair<std::vector<int>, std::vector<int>> expand(const Table& t) {
  std::vector<int> a, b;
  for (size_t i = 0; i < t.size(); ++i)
    for (size_t j = 0; j < t[i].size(); ++j)
      for (long long c = 0; c < t[i][j]; ++c) {
        a.push_back(static_cast<int>(i));
        b.push_back(static_cast<int>(j));
      }
  return {a, b};
}

long long brute_best_matching(const Table& t) {
  const size_t r = t.size(), c = t[0].size();
  std::vector<size_t> cols(std::max(r, c));
  std::iota(cols.begin(), cols.end(), 0);
  long long best = 0;
  do {
    long long s = 0;
    for (size_t i = 0; i < r; ++i)
      if (cols[i] < c) s += t[i][cols[i]];
    best = std::max(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace

TEST_CASE("contingency hand examples") {
  auto self = contingency(std::vector<int>{0, 0, 0, 1, 1}, std::vector<int>{0, 0, 0, 1, 1});
  CHECK(self.counts == Table{{3, 0}, {0, 2}});
  auto anti = contingency(std::vector<int>{0, 0, 1, 1}, std::vector<int>{1, 1, 0, 0});
  CHECK(anti.counts == Table{{0, 2}, {2, 0}});
  auto noisy = contingency(std::vector<int>{0, 0, 1, -1}, std::vector<int>{-1, 0, 0, 0});
  CHECK(noisy.counts == Table{{1}, {1}});
  CHECK(noisy.total() == 2);
  CHECK_THROWS_AS(contingency(std::vector<int>{0}, std::vector<int>{0, 1}), DimensionError);
  auto [a, b] = expand(kVsAgglomerative);
  CHECK(contingency(a, b).counts[0][0] == 2442);
}

TEST_CASE("contingency margins equal cluster sizes") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + static_cast<int>(rng() % 60);
    std::vector<int> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
    for (auto& v : a) v = static_cast<int>(rng() % 5);
    for (auto& v : b) v = static_cast<int>(rng() % 4);
    auto m = contingency(a, b);
    CHECK(m.total() == n);
    for (size_t r = 0; r < m.row_labels.size(); ++r)
      CHECK(m.row_sum(r) == std::count(a.begin(), a.end(), m.row_labels[r]));
    for (size_t c = 0; c < m.col_labels.size(); ++c)
      CHECK(m.col_sum(c) == std::count(b.begin(), b.end(), m.col_labels[c]));
  }
}

TEST_CASE("align recovers permutations") {
  std::vector<int> a{0, 0, 1, 1, 1, 2, 3, 3};
  const int perm[4] = {2, 3, 0, 1};
  std::vector<int> b;
  for (int l : a) b.push_back(perm[l]);
  auto rep = align(contingency(a, b));
  CHECK(rep.overall_agreement == 1.0);
  for (int l = 0; l < 4; ++l) CHECK(rep.alignment.at(l) == perm[l]);
  CHECK(rep.unstable.empty());
}

TEST_CASE("align: tie goes to the identity map") {
  auto rep = align(from_table({{5, 5}, {5, 5}}));
  CHECK(rep.overall_agreement == 0.5);
  CHECK(rep.alignment.at(0) == 0);
  CHECK(rep.alignment.at(1) == 1);
}

TEST_CASE("align matches exhaustive matching up to 6x6") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 300; ++t) {
    const size_t r = 1 + rng() % 6, c = 1 + rng() % 6;
    Table tb(r, std::vector<long long>(c));
    for (auto& row : tb)
      for (auto& v : row) v = static_cast<long long>(rng() % 4 == 0 ? rng() % 50 : rng() % 3);
    auto m = from_table(tb);
    const auto match = max_weight_assignment(tb);
    long long s = 0;
    std::vector<int> used;
    for (size_t i = 0; i < r; ++i)
      if (match[i] >= 0) {
        s += tb[i][static_cast<size_t>(match[i])];
        used.push_back(match[i]);
      }
    std::sort(used.begin(), used.end());
    CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
    CHECK(s == brute_best_matching(tb));
    auto rep = align(m);
    long long matched = 0;
    for (auto [la, lb] : rep.alignment) matched += tb[static_cast<size_t>(la)][static_cast<size_t>(lb)];
    CHECK(matched == brute_best_matching(tb));
  }
}

TEST_CASE("overall agreement is symmetric") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 200; ++t) {
    const int n = 5 + static_cast<int>(rng() % 80);
    std::vector<int> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
    for (auto& v : a) v = static_cast<int>(rng() % 6) - 1;
    for (auto& v : b) v = static_cast<int>(rng() % 4) - 1;
    const double ab = align(contingency(a, b)).overall_agreement;
    const double ba = align(contingency(b, a)).overall_agreement;
    CHECK(ab == doctest::Approx(ba).epsilon(1e-15));
  }
}

TEST_CASE("published tables: per-cluster agreement and flags") {
  auto ra = align(from_table(kVsAgglomerative));
  CHECK(ra.per_cluster_agreement.at(4) == doctest::Approx(123.0 / 249.0).epsilon(1e-12));
  CHECK(ra.per_cluster_agreement.at(4) == doctest::Approx(0.494).epsilon(1e-3));
  CHECK(ra.unstable == std::set<int>{4});
  CHECK(align(from_table(kVsAgglomerative), 0.5).unstable == std::set<int>{4});

  std::vector<Labeling> labelings(4);
  labelings[0].algorithm = Algorithm::kmeans;
  labelings[1].algorithm = Algorithm::agglomerative;
  labelings[2].algorithm = Algorithm::kmedoids;
  labelings[3].algorithm = Algorithm::dbscan;
  // Build three labelings with a shared K-means reference by realising each
  // table on its own copy of points, then concatenating with -1 elsewhere.
  size_t offset = 0;
  const Table* tables[3] = {&kVsAgglomerative, &kVsKMedoids, &kVsDbscan};
  for (int i = 0; i < 3; ++i) {
    auto [a, b] = expand(*tables[i]);
    labelings[0].labels.insert(labelings[0].labels.end(), a.begin(), a.end());
    for (int j = 1; j < 4; ++j) {
      auto& dst = labelings[static_cast<size_t>(j)].labels;
      if (j == i + 1) {
        dst.insert(dst.end(), b.begin(), b.end());
      } else {
        dst.insert(dst.end(), a.size(), -1);
      }
    }
    offset += a.size();
  }
  auto cmp = cross_compare(labelings, Algorithm::kmeans);
  REQUIRE(cmp.reports.size() == 3);
  CHECK(cmp.tables[0].counts == kVsAgglomerative);
  CHECK(cmp.tables[1].counts == kVsKMedoids);
  CHECK(cmp.tables[2].counts == kVsDbscan);
  CHECK(cmp.flagged == std::set<int>{4, 5});
  // At 0.5 cluster 5 is unstable only against K-medoids.
  CHECK(cross_compare(labelings, Algorithm::kmeans, 0.5).flagged == std::set<int>{4});
}

TEST_CASE("cross_compare majority rule") {
  std::vector<int> ref{0, 0, 0, 1, 1, 1, 2, 2, 2};
  std::vector<Labeling> ls(4);
  ls[0].algorithm = Algorithm::kmeans;
  ls[0].labels = ref;
  ls[1].algorithm = Algorithm::kmedoids;
  ls[1].labels = ref;
  ls[2].algorithm = Algorithm::agglomerative;
  ls[2].labels = {2, 2, 2, 0, 0, 0, 1, 1, 1};
  ls[3].algorithm = Algorithm::dbscan;
  ls[3].labels = {0, 1, 2, 0, 1, 2, 0, 1, 2};  // adversarial
  auto cmp = cross_compare(ls, Algorithm::kmeans);
  CHECK(cmp.reports[2].unstable.size() == 3);
  CHECK(cmp.flagged.empty());
  std::vector<Labeling> same{ls[0], ls[1], ls[2]};
  CHECK(cross_compare(same, Algorithm::kmeans).flagged.empty());
  CHECK_THROWS_AS(cross_compare({ls[0]}, Algorithm::kmeans), ParameterError);
}

TEST_CASE("a cluster whose points are all noise elsewhere has zero agreement") {
  auto rep = align(contingency(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 0, -1, -1}));
  CHECK(rep.per_cluster_agreement.at(1) == 0.0);
  CHECK(rep.unstable == std::set<int>{1});
}

TEST_CASE("t-SNE: shape, separation, KL trace, determinism") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 30; ++i) {
      std::vector<double> row(5);
      for (auto& v : row) v = g(rng) + (c ? 50.0 : 0.0);
      m.append_row(row);
    }
  TsneOptions o;
  o.perplexity = 10;
  o.seed = 3;
  auto r = tsne_embed(m, o);
  REQUIRE(r.embedding.rows() == 60);
  REQUIRE(r.embedding.cols() == 2);
  for (double v : r.embedding.data()) CHECK(std::isfinite(v));
  // linear separability: a perceptron on the 2-D output must converge
  std::vector<double> w{0, 0, 0};
  bool separated = false;
  for (int epoch = 0; epoch < 2000 && !separated; ++epoch) {
    separated = true;
    for (size_t i = 0; i < 60; ++i) {
      const double y = i < 30 ? -1 : 1;
      const double s = w[0] * r.embedding(i, 0) + w[1] * r.embedding(i, 1) + w[2];
      if (y * s <= 0) {
        separated = false;
        w[0] += y * r.embedding(i, 0);
        w[1] += y * r.embedding(i, 1);
        w[2] += y;
      }
    }
  }
  CHECK(separated);
  CHECK(r.kl_final <= r.kl_after_exaggeration);
  CHECK(tsne_embed(m, o).embedding == r.embedding);
  o.perplexity = 30;
  CHECK_THROWS_AS(tsne_embed(m, o), ParameterError);
}

TEST_CASE("serialization") {
  auto m = contingency(std::vector<int>{0, 1}, std::vector<int>{1, 0}, "kmeans", "dbscan");
  CHECK(contingency_to_csv(m) == "kmeans\\dbscan,0,1,total\n0,0,1,1\n1,1,0,1\n");
}
