#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "loadseg/features.hpp"

using namespace loadseg;

namespace {

std::array<double, 48> constant(double v) {
  std::array<double, 48> s{};
  s.fill(v);
  return s;
}

// Oracle: hour-of-day windows straight from the period definitions.
std::array<double, 6> peaks_by_hours(const std::array<double, 48>& s) {
  const double windows[6][2] = {{5, 10}, {10, 14}, {14, 17}, {17, 21}, {21, 24}, {0, 5}};
  std::array<double, 6> out{};
  for (int p = 0; p < 6; ++p) {
    double m = -1e300;
    for (int i = 0; i < 48; ++i) {
      const double start_hour = i * 0.5;
      if (start_hour >= windows[p][0] && start_hour < windows[p][1]) m = std::max(m, s[i]);
    }
    out[p] = m;
  }
  return out;
}

}  // namespace

TEST_CASE("periods partition the day") {
  std::multiset<size_t> seen;
  for (const auto& p : kPeriods)
    for (size_t i = p.first; i < p.last; ++i) seen.insert(i);
  CHECK(seen.size() == 48);
  for (size_t i = 0; i < 48; ++i) CHECK(seen.count(i) == 1);
}

TEST_CASE("peak features: constant and spike") {
  for (double v : peak_features(constant(0.4))) CHECK(v == 0.4);
  auto s = constant(0.1);
  s[14] = 5.0;
  auto p = peak_features(s);
  CHECK(p[0] == 5.0);
  for (int i = 1; i < 6; ++i) CHECK(p[i] == 0.1);
}

TEST_CASE("period boundaries 09:30 and 10:00") {
  auto s = constant(0.0);
  s[19] = 1.0;
  CHECK(peak_features(s)[0] == 1.0);
  CHECK(peak_features(s)[1] == 0.0);
  s = constant(0.0);
  s[20] = 1.0;
  CHECK(peak_features(s)[0] == 0.0);
  CHECK(peak_features(s)[1] == 1.0);
}

TEST_CASE("peak features match the hour-window oracle on random profiles") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 2000; ++t) {
    std::array<double, 48> s{};
    for (auto& v : s) v = std::uniform_real_distribution<double>(0, 4)(rng);
    CHECK(peak_features(s) == peaks_by_hours(s));
  }
}

TEST_CASE("stat features") {
  auto c = stat_features(constant(2.5));
  CHECK(c[0] == 2.5);
  CHECK(c[1] == 0.0);
  for (int i = 2; i < 7; ++i) CHECK(c[i] == 2.5);

  std::array<double, 48> ramp{};
  for (int i = 0; i < 48; ++i) ramp[i] = i + 1;
  auto r = stat_features(ramp);
  CHECK(r[0] == 24.5);
  CHECK(r[2] == 1.0);
  CHECK(r[3] == 48.0);
  // population std of 1..48 is sqrt((48^2-1)/12)
  CHECK(r[1] == doctest::Approx(std::sqrt((48.0 * 48.0 - 1.0) / 12.0)).epsilon(1e-14));
  // rank position 0.25*47 = 11.75 -> 12 + 0.75
  CHECK(r[4] == doctest::Approx(12.75).epsilon(1e-15));

  std::array<double, 48> alt{};
  for (int i = 0; i < 48; ++i) alt[i] = i % 2;
  CHECK(stat_features(alt)[5] == 0.5);
}

TEST_CASE("stat ordering invariant on random profiles") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 2000; ++t) {
    std::array<double, 48> s{};
    std::exponential_distribution<double> e(2.0);
    for (auto& v : s) v = e(rng);
    auto st = stat_features(s);
    CHECK(st[1] >= 0.0);
    CHECK(st[2] <= st[4]);
    CHECK(st[4] <= st[5]);
    CHECK(st[5] <= st[6]);
    CHECK(st[6] <= st[3]);
  }
}

TEST_CASE("assemble_matrix shape, order and determinism") {
  std::vector<LoadProfile> ps(3);
  ps[0].household_id = "C";
  ps[1].household_id = "A";
  ps[2].household_id = "B";
  for (size_t i = 0; i < 3; ++i) ps[i].slots = constant(static_cast<double>(i));
  auto m = assemble_matrix(ps);
  CHECK(m.values.rows() == 3);
  CHECK(m.values.cols() == 61);
  CHECK(m.ids == std::vector<std::string>{"A", "B", "C"});
  CHECK(m.values(0, 0) == 1.0);
  CHECK(assemble_matrix(ps).values == m.values);
  CHECK(assemble_matrix({}).values.rows() == 0);
  CHECK(feature_names().size() == 61);
  CHECK(feature_names()[kEveningPeakColumn] == "peak_evening");
  CHECK(feature_names()[60] == "stat_p75");
}
