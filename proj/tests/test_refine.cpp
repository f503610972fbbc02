#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "loadseg/error.hpp"
#include "loadseg/refine.hpp"
#include "test_util.hpp"

using namespace loadseg;

namespace {

Matrix probs_from(const std::vector<std::vector<double>>& rows) { return Matrix::from_rows(rows); }

oracle::Points blob(std::mt19937_64& rng, std::vector<double> center, int n, double sigma) {
  std::normal_distribution<double> g(0.0, sigma);
  oracle::Points pts;
  for (int i = 0; i < n; ++i) {
    auto p = center;
    for (auto& v : p) v += g(rng);
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

TEST_CASE("extract_low_confidence: examples") {
  auto p = probs_from({{1.0, 0.0}, {0.0, 1.0}});
  CHECK(extract_low_confidence(p, std::vector<int>{0, 1}, 0.8, {}).empty());

  auto q = probs_from({{0.95, 0.05}, {0.79, 0.21}, {0.19, 0.81}});
  CHECK(extract_low_confidence(q, std::vector<int>{0, 0, 1}, 0.8, {}) == std::vector<std::size_t>{1});

  auto r = probs_from({{1.0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 1.0, 0}, {0, 0, 0, 0, 0, 1.0}, {0.5, 0.5, 0, 0, 0, 0}});
  CHECK(extract_low_confidence(r, std::vector<int>{0, 4, 5, 0}, 0.8, {4, 5}) == std::vector<std::size_t>{1, 2, 3});
  CHECK(extract_low_confidence(r, std::vector<int>{0, 4, 5, 0}, 0.8, {4, 5}, true) == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(extract_low_confidence(r, std::vector<int>{0, 4, 5, 0}, 0.0, {}), ParameterError);
  CHECK_THROWS_AS(extract_low_confidence(r, std::vector<int>{0, 4, 5, 0}, 1.5, {}), ParameterError);
}

TEST_CASE("extract_low_confidence matches a brute-force filter") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 50, c = 2 + rng() % 5;
    Matrix p(n, c);
    std::vector<int> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t k = 0; k < c; ++k) s += p(i, k) = u(rng);
      for (std::size_t k = 0; k < c; ++k) p(i, k) /= s;
      pred[i] = static_cast<int>(rng() % c);
    }
    std::set<int> flagged;
    if (rng() % 2) flagged.insert(static_cast<int>(rng() % c));
    const double t = 0.2 + 0.6 * u(rng);
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = 0;
      for (std::size_t k = 0; k < c; ++k) mx = std::max(mx, p(i, k));
      if (mx < t || flagged.count(pred[i])) expect.push_back(i);
    }
    CHECK(extract_low_confidence(p, pred, t, flagged) == expect);
  }
}

TEST_CASE("merge: renumbering trace and nine-class arithmetic") {
  // 3 classes, flagged {1}, subset re-clustered into 2.
  std::vector<int> orig{0, 1, 2, 1, 0, 2};
  std::vector<std::size_t> subset{1, 3};
  auto r = merge(orig, {1}, subset, std::vector<int>{0, 1});
  CHECK(r.final_labels == std::vector<int>{0, 2, 1, 3, 0, 1});
  CHECK(r.class_count_after == 4);

  // 7 classes, flagged {4,5}, subset into 4.
  std::vector<int> seven;
  for (int c = 0; c < 7; ++c)
    for (int i = 0; i < 5; ++i) seven.push_back(c);
  std::vector<std::size_t> sub;
  std::vector<int> sublab;
  for (std::size_t i = 0; i < seven.size(); ++i) {
    if (seven[i] == 4 || seven[i] == 5) {
      sub.push_back(i);
      sublab.push_back(static_cast<int>(sub.size() % 4));
    }
  }
  auto nine = merge(seven, {4, 5}, sub, sublab);
  CHECK(nine.class_count_after == 9);
  CHECK(std::set<int>(nine.final_labels.begin(), nine.final_labels.end()).size() == 9);

  auto same = merge(orig, {}, {}, {});
  CHECK(same.final_labels == orig);
  CHECK(same.class_count_after == 3);
}

TEST_CASE("merge: inconsistent inputs are rejected") {
  std::vector<int> orig{0, 1, 1};
  CHECK_THROWS_AS(merge(orig, {1}, std::vector<std::size_t>{1}, std::vector<int>{0}), ParameterError);  // member 2 missing
  CHECK_THROWS_AS(merge(orig, {1}, std::vector<std::size_t>{1, 1}, std::vector<int>{0, 0}), ParameterError);
  CHECK_THROWS_AS(merge(orig, {1}, std::vector<std::size_t>{1, 5}, std::vector<int>{0, 0}), ParameterError);
  CHECK_THROWS_AS(merge(orig, {1}, std::vector<std::size_t>{1, 2}, std::vector<int>{0, 2}), ParameterError);
  CHECK_THROWS_AS(merge(orig, {7}, std::vector<std::size_t>{}, std::vector<int>{}), ParameterError);
  CHECK_THROWS_AS(merge(orig, {}, std::vector<std::size_t>{1}, std::vector<int>{}), ParameterError);
}

TEST_CASE("merge properties on random instances") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 40), c = 1 + static_cast<int>(rng() % 6);
    std::vector<int> orig(static_cast<size_t>(n));
    for (auto& l : orig) l = static_cast<int>(rng() % static_cast<unsigned>(c));
    auto canon = canonicalize_labels(orig);
    std::set<int> present(canon.begin(), canon.end());
    std::set<int> flagged;
    for (int k : present)
      if (rng() % 3 == 0) flagged.insert(k);
    std::vector<std::size_t> sub;
    for (std::size_t i = 0; i < canon.size(); ++i)
      if (flagged.count(canon[i]) || rng() % 8 == 0) sub.push_back(i);
    const int new_k = sub.empty() ? 0 : 1 + static_cast<int>(rng() % std::min<std::size_t>(4, sub.size()));
    std::vector<int> sublab(sub.size());
    for (std::size_t s = 0; s < sub.size(); ++s) sublab[s] = static_cast<int>(s % static_cast<size_t>(new_k));
    auto r = merge(canon, flagged, sub, sublab);
    REQUIRE(r.final_labels.size() == canon.size());
    // Contiguous ids and the count identity.
    std::set<int> ids(r.final_labels.begin(), r.final_labels.end());
    CHECK(*ids.begin() == 0);
    CHECK(*ids.rbegin() == static_cast<int>(ids.size()) - 1);
    CHECK(r.class_count_after == static_cast<int>(ids.size()));
    CHECK(r.class_count_after == r.class_count_before - static_cast<int>(r.flagged_classes.size()) + new_k);
    // Untouched points keep their co-membership and relative order of ids.
    for (std::size_t i = 0; i < canon.size(); ++i) {
      for (std::size_t j = 0; j < canon.size(); ++j) {
        if (r.refined[i] || r.refined[j]) continue;
        CHECK((canon[i] == canon[j]) == (r.final_labels[i] == r.final_labels[j]));
        CHECK((canon[i] < canon[j]) == (r.final_labels[i] < r.final_labels[j]));
      }
    }
  }
}

TEST_CASE("recluster_subset: two sub-blobs give k = 2; tiny subsets") {
  std::mt19937_64 rng(11);
  auto pts = blob(rng, {0, 0, 0}, 30, 0.5);
  auto b = blob(rng, {6, 6, 0}, 30, 0.5);
  pts.insert(pts.end(), b.begin(), b.end());
  SubsetOptions opt;
  auto sc = recluster_subset(to_matrix(pts), opt);
  REQUIRE_FALSE(sc.skipped);
  CHECK(sc.k == 2);
  CHECK(sc.labeling.cluster_count() == 2);

  auto three = recluster_subset(to_matrix({{0.0, 0.0}, {0.1, 0.0}, {5.0, 5.0}}), opt);
  REQUIRE_FALSE(three.skipped);
  CHECK(three.k == 2);
  CHECK(three.labeling.labels == std::vector<int>{0, 0, 1});

  auto two = recluster_subset(to_matrix({{0.0}, {1.0}}), opt);
  CHECK(two.skipped);
}

TEST_CASE("refine: flagged mixed class is split and the rest untouched") {
  std::mt19937_64 rng(13);
  oracle::Points pts;
  std::vector<int> labels;
  const std::vector<std::vector<double>> centers{{0, 0}, {20, 0}, {0, 20}};
  for (int c = 0; c < 3; ++c) {
    auto b = blob(rng, centers[static_cast<size_t>(c)], 25, 0.5);
    pts.insert(pts.end(), b.begin(), b.end());
    labels.insert(labels.end(), 25, c);
  }
  // Class 1 really holds two sub-populations.
  auto extra = blob(rng, {26, 0}, 25, 0.5);
  pts.insert(pts.end(), extra.begin(), extra.end());
  labels.insert(labels.end(), 25, 1);
  const Matrix x = to_matrix(pts);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < labels.size(); ++i) ids.push_back("h" + std::to_string(i));
  Matrix probs(labels.size(), 3);
  for (std::size_t i = 0; i < labels.size(); ++i) probs(i, static_cast<size_t>(labels[i])) = 1.0;
  RefineOptions opt;
  auto r = refine(x, ids, labels, probs, labels, {1}, opt);
  REQUIRE_FALSE(r.skipped);
  CHECK(r.subset_indices.size() == 50);
  CHECK(r.subset_k == 2);
  CHECK(r.class_count_after == 4);
  for (std::size_t i = 0; i < 25; ++i) CHECK(r.final_labels[i] == 0);
  for (std::size_t i = 50; i < 75; ++i) CHECK(r.final_labels[i] == 1);
  CHECK(r.final_labels[25] != r.final_labels[75]);
  auto csv = assignments_to_csv(r, ids, probs);
  CHECK(csv.rfind("household_id,final_class,probability,was_refined\nh0,0,1,0\n", 0) == 0);
  CHECK(refinement_to_json(r).find("\"class_count_after\": 4") != std::string::npos);

  auto none = refine(x, ids, labels, probs, labels, {}, opt);
  CHECK(none.skipped);
  CHECK(none.final_labels == labels);
}
