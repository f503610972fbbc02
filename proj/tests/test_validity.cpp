#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "doctest.h"
#include "loadseg/error.hpp"
#include "loadseg/validity.hpp"
#include "test_util.hpp"

using namespace loadseg;

namespace {

std::vector<int> random_labels(std::mt19937_64& rng, int n, int k) {
  std::vector<int> l(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) l[static_cast<size_t>(i)] = i < k ? i : static_cast<int>(rng() % static_cast<unsigned>(k));
  std::shuffle(l.begin(), l.end(), rng);
  return l;
}

Matrix gaussian_blobs(std::mt19937_64& rng, int clusters, int per, int dim, double spacing) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m;
  for (int c = 0; c < clusters; ++c) {
    for (int i = 0; i < per; ++i) {
      std::vector<double> row(static_cast<size_t>(dim), 0.0);
      row[static_cast<size_t>(c % dim)] = spacing * (1 + c / dim);
      for (auto& v : row) v += g(rng);
      m.append_row(row);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("hand examples") {
  Matrix m = Matrix::from_rows({{0}, {2}, {10}, {12}});
  std::vector<int> lab{0, 0, 1, 1};
  CHECK(davies_bouldin(m, lab) == 0.2);
  // B = 2*5^2 + 2*5^2 = 100, W = 1+1+1+1 = 4, (N-K)/(K-1) = 2
  CHECK(calinski_harabasz(m, lab) == 50.0);

  Matrix s = Matrix::from_rows({{0}, {1}, {10}, {11}});
  // per point (b-a)/b: 0: (10.5-1)/10.5, 1: (9.5-1)/9.5, symmetric for the other pair
  const double expect = ((9.5 / 10.5) + (8.5 / 9.5)) / 2;
  CHECK(silhouette(s, lab) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(silhouette(s, lab) == doctest::Approx(0.89975).epsilon(1e-5));

  Matrix dup = Matrix::from_rows({{1, 1}, {1, 1}, {9, 9}, {9, 9}});
  CHECK(silhouette(dup, lab) == 1.0);
  CHECK(davies_bouldin(dup, lab) == 0.0);
  CHECK_THROWS_AS(calinski_harabasz(dup, lab), UndefinedIndexError);
}

TEST_CASE("singletons contribute zero silhouette") {
  Matrix m = Matrix::from_rows({{0}, {1}, {50}});
  std::vector<int> lab{0, 0, 1};
  // points 0,1: a=1, b=50 / 49
  const double expect = ((49.0 / 50.0) + (48.0 / 49.0) + 0.0) / 3;
  CHECK(silhouette(m, lab) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("degenerate inputs") {
  Matrix m = Matrix::from_rows({{0}, {1}, {2}});
  std::vector<int> one{0, 0, 0};
  CHECK_THROWS_AS(silhouette(m, one), UndefinedIndexError);
  CHECK_THROWS_AS(davies_bouldin(m, one), UndefinedIndexError);
  CHECK_THROWS_AS(calinski_harabasz(m, one), UndefinedIndexError);
  CHECK_THROWS_AS(calinski_harabasz(m, std::vector<int>{0, 1, 2}), UndefinedIndexError);
  CHECK_THROWS_AS(silhouette(m, std::vector<int>{0, -1, 1}), ParameterError);
  // coincident centroids with scatter
  Matrix c = Matrix::from_rows({{-1}, {1}, {-2}, {2}});
  CHECK(std::isinf(davies_bouldin(c, std::vector<int>{0, 0, 1, 1})));
}

TEST_CASE("indices match direct definitions on random labelings") {
  std::mt19937_64 rng(2024);
  int n_checked = 0;
  for (int t = 0; t < 600; ++t) {
    const int n = 3 + static_cast<int>(rng() % 28);
    const int d = 1 + static_cast<int>(rng() % 4);
    const int k = 2 + static_cast<int>(rng() % static_cast<unsigned>(std::min(5, n - 2)));
    auto pts = random_points(rng, n, d);
    auto lab = random_labels(rng, n, k);
    Matrix m = to_matrix(pts);
    CHECK(silhouette(m, lab) == doctest::Approx(oracle::silhouette(pts, lab)).epsilon(1e-9));
    CHECK(davies_bouldin(m, lab) == doctest::Approx(oracle::davies_bouldin(pts, lab)).epsilon(1e-9));
    CHECK(calinski_harabasz(m, lab) == doctest::Approx(oracle::calinski_harabasz(pts, lab)).epsilon(1e-9));
    ++n_checked;
  }
  CHECK(n_checked >= 500);
}

TEST_CASE("indices are invariant to row permutation and relabeling") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const int n = 6 + static_cast<int>(rng() % 20);
    auto pts = random_points(rng, n, 3);
    auto lab = random_labels(rng, n, 3);
    Matrix m = to_matrix(pts);
    std::vector<size_t> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> lab2;
    const int rename[3] = {7, 2, 4};
    for (auto p : perm) lab2.push_back(rename[lab[p]]);
    Matrix m2 = m.select_rows(perm);
    CHECK(silhouette(m2, lab2) == doctest::Approx(silhouette(m, lab)).epsilon(1e-12));
    CHECK(davies_bouldin(m2, lab2) == doctest::Approx(davies_bouldin(m, lab)).epsilon(1e-12));
    CHECK(calinski_harabasz(m2, lab2) == doctest::Approx(calinski_harabasz(m, lab)).epsilon(1e-12));
  }
}

TEST_CASE("duplicating every point") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const int n = 5 + static_cast<int>(rng() % 20);
    const int k = 2 + static_cast<int>(rng() % 3);
    auto pts = random_points(rng, n, 2);
    auto lab = random_labels(rng, n, k);
    Matrix m = to_matrix(pts);
    Matrix m2 = m;
    auto lab2 = lab;
    for (int i = 0; i < n; ++i) {
      m2.append_row(m.row(static_cast<size_t>(i)));
      lab2.push_back(lab[static_cast<size_t>(i)]);
    }
    CHECK(davies_bouldin(m2, lab2) == doctest::Approx(davies_bouldin(m, lab)).epsilon(1e-12));
    const double ratio = (2.0 * n - k) / (static_cast<double>(n) - k);
    CHECK(calinski_harabasz(m2, lab2) == doctest::Approx(calinski_harabasz(m, lab) * ratio).epsilon(1e-12));
    // With no singletons the silhouette is exactly duplication-invariant.
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int l : lab) ++counts[static_cast<size_t>(l)];
    if (*std::min_element(counts.begin(), counts.end()) > 1) {
      // a_i gains a zero-distance twin: mean intra distance scales by (m-1)/(2m-1)*2
      // so equality only holds in the limit; check the direct oracle instead.
      oracle::Points p2;
      for (size_t i = 0; i < m2.rows(); ++i) p2.emplace_back(m2.row(i).begin(), m2.row(i).end());
      CHECK(silhouette(m2, lab2) == doctest::Approx(oracle::silhouette(p2, lab2)).epsilon(1e-9));
    }
  }
}

TEST_CASE("score_labeling excludes noise and keeps undefined indices absent") {
  Matrix m = Matrix::from_rows({{0}, {2}, {10}, {12}, {100}});
  auto v = score_labeling(m, nullptr, std::vector<int>{0, 0, 1, 1, -1});
  REQUIRE(v.dbi);
  CHECK(*v.dbi == 0.2);
  CHECK(*v.chi == 50.0);
  auto dist = pairwise_distances(m);
  auto w = score_labeling(m, &dist, std::vector<int>{0, 0, 1, 1, -1});
  CHECK(*w.silhouette == doctest::Approx(*v.silhouette).epsilon(1e-15));
  Matrix dup = Matrix::from_rows({{1}, {1}, {9}, {9}});
  auto u = score_labeling(dup, nullptr, std::vector<int>{0, 0, 1, 1});
  CHECK(u.silhouette);
  CHECK(!u.chi);
  CHECK(!score_labeling(dup, nullptr, std::vector<int>{0, -1, -1, -1}).silhouette);
}

TEST_CASE("choose_k: per-index optimum, majority, ties to smaller k") {
  std::vector<ValidityEntry> e(3);
  for (int i = 0; i < 3; ++i) e[static_cast<size_t>(i)].k = 2 + i;
  e[0].values = {0.5, 0.9, 10.0};
  e[1].values = {0.7, 0.4, 50.0};
  e[2].values = {0.7, 0.6, 60.0};
  auto c = choose_k(e);
  CHECK(*c.silhouette_k == 3);
  CHECK(*c.dbi_k == 3);
  CHECK(*c.chi_k == 4);
  CHECK(c.majority_k == 3);
  e[1].values.dbi = 0.95;
  c = choose_k(e);
  CHECK(*c.dbi_k == 4);
  CHECK(c.majority_k == 4);
  e[0].values = {0.9, 0.1, std::nullopt};
  e[2].values.silhouette = 0.2;
  e[2].values.dbi = 0.8;
  c = choose_k(e);  // votes 2, 2, 4
  CHECK(c.majority_k == 2);
  std::vector<ValidityEntry> split(3);
  for (int i = 0; i < 3; ++i) split[static_cast<size_t>(i)].k = 5 + i;
  split[0].values = {0.9, 0.5, 1.0};
  split[1].values = {0.1, 0.1, 2.0};
  split[2].values = {0.1, 0.5, 9.0};
  CHECK(choose_k(split).majority_k == 5);  // no majority: smallest voted k
}

TEST_CASE("sweep recovers 3 separated Gaussians") {
  std::mt19937_64 rng(31);
  Matrix m = gaussian_blobs(rng, 3, 40, 4, 20.0);
  for (auto a : {Algorithm::kmeans, Algorithm::kmedoids, Algorithm::agglomerative}) {
    SweepOptions o;
    o.k_min = 2;
    o.k_max = 10;
    o.seed = 4;
    auto r = sweep(m, a, o);
    const auto& c = r.report.chosen.at(a);
    CHECK(*c.silhouette_k == 3);
    CHECK(*c.dbi_k == 3);
    CHECK(*c.chi_k == 3);
    CHECK(c.majority_k == 3);
    CHECK(r.report.entries.size() == 9);
    for (const auto& e : r.report.entries) {
      CHECK(*e.values.silhouette >= -1.0);
      CHECK(*e.values.silhouette <= 1.0);
      CHECK(*e.values.dbi >= 0.0);
      CHECK(*e.values.chi >= 0.0);
    }
  }
}

TEST_CASE("sweep over a singleton range and infeasible range") {
  std::mt19937_64 rng(1);
  Matrix m = gaussian_blobs(rng, 3, 10, 2, 10.0);
  SweepOptions o;
  o.k_min = 2;
  o.k_max = 2;
  auto r = sweep(m, Algorithm::kmeans, o);
  CHECK(r.report.chosen.at(Algorithm::kmeans).majority_k == 2);
  CHECK(*r.report.chosen.at(Algorithm::kmeans).chi_k == 2);
  o.k_min = 40;
  o.k_max = 50;
  CHECK_THROWS_AS(sweep(m, Algorithm::kmeans, o), ParameterError);
}

TEST_CASE("CH peaks at the true k on three separated pairs") {
  Matrix m = Matrix::from_rows({{0}, {0.1}, {10}, {10.1}, {20}, {20.1}});
  const double at3 = calinski_harabasz(m, std::vector<int>{0, 0, 1, 1, 2, 2});
  const double at2 = calinski_harabasz(m, std::vector<int>{0, 0, 0, 0, 1, 1});
  const double at5 = calinski_harabasz(m, std::vector<int>{0, 0, 1, 2, 3, 4});
  CHECK(at3 > at2);
  CHECK(at3 > at5);
}

TEST_CASE("report serialization") {
  ValidityReport rep;
  ValidityEntry e;
  e.k = 2;
  e.param = 2;
  e.values = {0.5, std::numeric_limits<double>::infinity(), std::nullopt};
  rep.entries.push_back(e);
  rep.chosen[Algorithm::kmeans] = choose_k(rep.entries);
  auto json = report_to_json(rep);
  CHECK(json.find("\"inf\"") != std::string::npos);
  CHECK(report_to_table_csv(rep) == "algorithm,silhouette,dbi,chi,majority\nkmeans,2,2,,2\n");
  CHECK(report_to_curve_csv(rep).find("kmeans,2,2,0,0,0.5,inf,") != std::string::npos);
}
