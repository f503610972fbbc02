#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "loadseg/error.hpp"
#include "loadseg/ingest.hpp"

using namespace loadseg;

namespace {

MeterReading reading(const std::string& id, const std::string& ts, double v) {
  return {id, *parse_timestamp(ts), v};
}

std::vector<MeterReading> full_days(const std::string& id, int days, double value) {
  std::vector<MeterReading> out;
  for (int d = 1; d <= days; ++d) {
    for (int s = 0; s < 48; ++s) {
      Timestamp ts{{2013, 3, d}, s / 2, (s % 2) * 30, 0, 0};
      out.push_back({id, ts, value});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("timestamps in both accepted layouts") {
  auto a = parse_timestamp("2012-10-12 00:30:00.0000000");
  REQUIRE(a);
  CHECK(a->slot() == 1u);
  auto b = parse_timestamp("2013-01-01T23:30:00Z");
  REQUIRE(b);
  CHECK(b->slot() == 47u);
  auto c = parse_timestamp("2013-01-01 10:15");
  REQUIRE(c);
  CHECK_FALSE(c->slot().has_value());
  CHECK_FALSE(parse_timestamp("2013-02-30 10:00:00"));
  CHECK_FALSE(parse_timestamp("yesterday"));
  CHECK(Date{1970, 1, 1}.ordinal() == 0);
  CHECK(Date{2013, 3, 4}.weekday() == 0);  // a Monday
}

TEST_CASE("parse_readings: two valid rows") {
  std::istringstream in(
      "LCLid,stdorToU,DateTime,KWH/hh (per half hour)\n"
      "MAC1,Std,2012-10-12 00:30:00.0000000,0.25\n"
      "MAC1,Std,2012-10-12 01:00:00.0000000,0.5\n");
  auto r = parse_readings(in, ColumnSchema{});
  CHECK(r.readings.size() == 2);
  CHECK(r.rejected == 0);
  CHECK(r.readings[1].energy_kwh == 0.5);
}

TEST_CASE("parse_readings: header only gives an empty set") {
  std::istringstream in("LCLid,DateTime,KWH/hh (per half hour)\n");
  auto r = parse_readings(in, ColumnSchema{});
  CHECK(r.readings.empty());
  CHECK(r.rejected == 0);
  std::istringstream nothing("");
  CHECK(parse_readings(nothing, ColumnSchema{}).readings.empty());
}

TEST_CASE("parse_readings: non-numeric energy is a reject") {
  std::istringstream in("LCLid,DateTime,KWH/hh (per half hour)\nMAC1,2012-10-12 00:30:00,Null\n");
  auto r = parse_readings(in, ColumnSchema{});
  CHECK(r.readings.empty());
  CHECK(r.rejected == 1);
}

TEST_CASE("parse_readings: missing column is a schema error") {
  std::istringstream in("id,time\nA,2012-10-12 00:30:00\n");
  CHECK_THROWS_AS(parse_readings(in, ColumnSchema{}), SchemaError);
}

TEST_CASE("parse_readings: custom schema, delimiter and row filter") {
  ColumnSchema s;
  s.id_column = "house";
  s.timestamp_column = "ts";
  s.value_column = "kwh";
  s.delimiter = ';';
  s.filter_column = "tariff";
  s.filter_value = "Std";
  std::istringstream in("house;tariff;ts;kwh\nA;Std;2013-01-01 00:00:00;1\nB;ToU;2013-01-01 00:00:00;2\n\"C;x\";Std;2013-01-01T00:30;3\n");
  auto r = parse_readings(in, s);
  REQUIRE(r.readings.size() == 2);
  CHECK(r.filtered == 1);
  CHECK(r.readings[1].household_id == "C;x");
}

TEST_CASE("clean drops erroneous values") {
  std::vector<MeterReading> in{reading("A", "2013-01-01 00:00:00", 1.0),
                               reading("A", "2013-01-01 00:30:00", std::nan("")),
                               reading("A", "2013-01-01 01:00:00", 0.5)};
  auto out = clean(in);
  REQUIRE(out.size() == 2);
  CHECK(out[0].energy_kwh == 1.0);
  CHECK(out[1].energy_kwh == 0.5);
  CHECK(clean({reading("A", "2013-01-01 00:00:00", -0.2)}).empty());
  CHECK(clean({reading("A", "2013-01-01 00:10:00", 0.2)}).empty());
  CHECK(clean({reading("A", "2013-01-01 00:00:00", std::numeric_limits<double>::infinity())}).empty());
}

TEST_CASE("clean averages duplicates") {
  auto out = clean({reading("A", "2013-01-01 00:00:00", 1.0), reading("A", "2013-01-01 00:00:00", 3.0)});
  REQUIRE(out.size() == 1);
  CHECK(out[0].energy_kwh == 2.0);
}

TEST_CASE("clean is idempotent") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> slot(0, 95), house(0, 3), kind(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MeterReading> in;
    for (int i = 0; i < 60; ++i) {
      const int s = slot(rng);
      Timestamp ts{{2013, 1, 1 + s / 48}, (s % 48) / 2, (s % 2) * 30, 0, 0};
      double v = std::uniform_real_distribution<double>(0, 2)(rng);
      const int k = kind(rng);
      if (k == 0) v = -v;
      if (k == 1) v = std::nan("");
      if (k == 2) ts.minute = 17;
      in.push_back({"H" + std::to_string(house(rng)), ts, v});
    }
    auto once = clean(in);
    auto twice = clean(once);
    REQUIRE(once.size() == twice.size());
    for (size_t i = 0; i < once.size(); ++i) {
      CHECK(once[i].household_id == twice[i].household_id);
      CHECK(once[i].timestamp == twice[i].timestamp);
      CHECK(once[i].energy_kwh == twice[i].energy_kwh);
    }
  }
}

TEST_CASE("build_profiles: constant input") {
  auto p = build_profiles(full_days("A", 3, 0.7));
  REQUIRE(p.profiles.size() == 1);
  CHECK(p.profiles[0].day_count == 3);
  for (double v : p.profiles[0].slots) CHECK(v == 0.7);
}

TEST_CASE("build_profiles: mean over days") {
  auto r = full_days("A", 2, 0.0);
  r[0].energy_kwh = 1.0;
  r[48].energy_kwh = 3.0;
  auto p = build_profiles(r);
  CHECK(p.profiles[0].slots[0] == 2.0);
}

TEST_CASE("build_profiles: partial coverage is dropped and reported") {
  std::vector<MeterReading> r = full_days("A", 1, 1.0);
  for (int s = 12; s < 24; ++s) r.push_back({"B", Timestamp{{2013, 3, 1}, s / 2, (s % 2) * 30, 0, 0}, 1.0});
  auto p = build_profiles(r);
  REQUIRE(p.profiles.size() == 1);
  CHECK(p.profiles[0].household_id == "A");
  REQUIRE(p.dropped.size() == 1);
  CHECK(p.dropped[0] == "B");
}

TEST_CASE("build_profiles is order-insensitive") {
  std::mt19937_64 rng(11);
  std::vector<MeterReading> r;
  for (const char* id : {"X", "Y", "Z"}) {
    auto d = full_days(id, 5, 0.0);
    for (auto& m : d) m.energy_kwh = std::uniform_real_distribution<double>(0, 3)(rng);
    r.insert(r.end(), d.begin(), d.end());
  }
  const auto base = build_profiles(r);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(r.begin(), r.end(), rng);
    const auto other = build_profiles(r);
    REQUIRE(other.profiles.size() == base.profiles.size());
    for (size_t i = 0; i < base.profiles.size(); ++i) {
      CHECK(other.profiles[i].household_id == base.profiles[i].household_id);
      CHECK(other.profiles[i].slots == base.profiles[i].slots);
      CHECK(other.profiles[i].day_count == base.profiles[i].day_count);
    }
  }
}

TEST_CASE("date filter restricts days") {
  auto r = full_days("A", 7, 1.0);  // 2013-03-01 (Fri) .. 03-07
  for (auto& m : r) {
    if (m.timestamp.date.weekday() >= 5) m.energy_kwh = 5.0;
  }
  auto wk = build_profiles(r, parse_date_filter("weekday"));
  CHECK(wk.profiles[0].slots[10] == 1.0);
  CHECK(wk.profiles[0].day_count == 5);
  auto we = build_profiles(r, parse_date_filter("weekend"));
  CHECK(we.profiles[0].slots[10] == 5.0);
  auto range = build_profiles(r, parse_date_filter("2013-03-02:2013-03-03"));
  CHECK(range.profiles[0].day_count == 2);
  CHECK_THROWS_AS(parse_date_filter("fortnightly"), ParameterError);
}

TEST_CASE("normalize_columns") {
  Matrix m = Matrix::from_rows({{2, 5}, {4, 5}, {6, 5}});
  Matrix n = normalize_columns(m);
  CHECK(n(0, 0) == 0.0);
  CHECK(n(1, 0) == 0.5);
  CHECK(n(2, 0) == 1.0);
  for (size_t r = 0; r < 3; ++r) CHECK(n(r, 1) == 0.0);
}

TEST_CASE("normalize_columns property: min 0, max 1 or constant zero") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const size_t rows = 1 + rng() % 20, cols = 1 + rng() % 6;
    Matrix m(rows, cols);
    for (size_t c = 0; c < cols; ++c) {
      const bool constant = rng() % 4 == 0;
      const double base = std::uniform_real_distribution<double>(-50, 50)(rng);
      for (size_t r = 0; r < rows; ++r) m(r, c) = constant ? base : std::uniform_real_distribution<double>(-50, 50)(rng);
    }
    Matrix n = normalize_columns(m);
    for (size_t c = 0; c < cols; ++c) {
      double lo = n(0, c), hi = n(0, c);
      for (size_t r = 0; r < rows; ++r) {
        lo = std::min(lo, n(r, c));
        hi = std::max(hi, n(r, c));
      }
      CHECK(lo == 0.0);
      CHECK((hi == 1.0 || hi == 0.0));
    }
  }
}

TEST_CASE("frozen bounds are applied without refitting") {
  Matrix train = Matrix::from_rows({{0.0}, {10.0}});
  auto b = fit_min_max(train);
  Matrix fresh = Matrix::from_rows({{5.0}, {20.0}});
  auto out = apply_min_max(fresh, b);
  CHECK(out(0, 0) == 0.5);
  CHECK(out(1, 0) == 2.0);
  CHECK_THROWS_AS(apply_min_max(Matrix(1, 2), b), DimensionError);
}

TEST_CASE("profile CSV round trip and schema errors") {
  auto p = build_profiles(full_days("A", 1, 0.125)).profiles;
  std::istringstream in(profiles_to_csv(p));
  auto back = profiles_from_csv(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].slots == p[0].slots);
  std::istringstream bad("household_id,slot_00,slot_02\n");
  CHECK_THROWS_WITH_AS(profiles_from_csv(bad), doctest::Contains("slot_02"), SchemaError);
}
