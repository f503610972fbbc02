#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "loadseg/matrix.hpp"

namespace loadseg {

inline constexpr std::size_t kSlotCount = 48;

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  /// Days since 1970-01-01 (proleptic Gregorian).
  [[nodiscard]] long long ordinal() const noexcept;
  /// 0 = Monday ... 6 = Sunday.
  [[nodiscard]] int weekday() const noexcept;
  friend auto operator<=>(const Date&, const Date&) = default;
};

struct Timestamp {
  Date date;
  int hour = 0;
  int minute = 0;
  int second = 0;
  int microsecond = 0;

  /// Half-hour slot, or nullopt when the time is not on a :00 / :30 boundary.
  [[nodiscard]] std::optional<std::size_t> slot() const noexcept;
  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// Accepts `YYYY-MM-DD HH:MM[:SS[.fff]]` and ISO-8601 `YYYY-MM-DDTHH:MM[:SS[.fff]][Z]`.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::optional<Date> parse_date(std::string_view text);

struct MeterReading {
  std::string household_id;
  Timestamp timestamp;
  double energy_kwh = 0.0;
};

struct ColumnSchema {
  std::string id_column = "LCLid";
  std::string timestamp_column = "DateTime";
  std::string value_column = "KWH/hh (per half hour)";
  char delimiter = ',';
  /// Optional row filter: keep only rows whose `filter_column` equals `filter_value`.
  std::string filter_column;
  std::string filter_value;
};

struct ParseResult {
  std::vector<MeterReading> readings;
  std::size_t rejected = 0;
  std::size_t filtered = 0;
};

ParseResult parse_readings(std::istream& source, const ColumnSchema& schema);

/// Drops non-finite, negative and off-boundary readings; averages duplicate
/// (household, timestamp) pairs. Output is sorted by (household, timestamp).
std::vector<MeterReading> clean(const std::vector<MeterReading>& readings);

struct LoadProfile {
  std::string household_id;
  std::array<double, kSlotCount> slots{};
  int day_count = 0;
};

enum class DayKind { all, weekday, weekend };

struct DateFilter {
  std::optional<Date> from;  // inclusive
  std::optional<Date> to;    // inclusive
  DayKind days = DayKind::all;

  [[nodiscard]] bool accepts(const Date& d) const noexcept;
  [[nodiscard]] bool is_trivial() const noexcept { return !from && !to && days == DayKind::all; }
};

/// Parses `weekday`, `weekend`, `all`, `FROM:TO` (either side may be empty) or a
/// comma-joined combination such as `weekday,2013-01-01:2013-12-31`.
DateFilter parse_date_filter(std::string_view text);

struct ProfileBuildResult {
  std::vector<LoadProfile> profiles;  // sorted by household_id
  std::vector<std::string> dropped;   // households lacking full slot coverage
};

ProfileBuildResult build_profiles(const std::vector<MeterReading>& readings, const DateFilter& filter = {});

struct MinMaxBounds {
  std::vector<double> min;
  std::vector<double> max;
};

MinMaxBounds fit_min_max(const Matrix& matrix);
/// Applies frozen bounds; values outside the fitted range are not clipped.
Matrix apply_min_max(const Matrix& matrix, const MinMaxBounds& bounds);
/// fit + apply in one call. Constant columns become all zeros.
Matrix normalize_columns(const Matrix& matrix);

std::string profiles_to_csv(const std::vector<LoadProfile>& profiles);
std::string profiles_to_json(const std::vector<LoadProfile>& profiles);
/// Reads the 49-column profile CSV. Throws SchemaError naming the offending column.
std::vector<LoadProfile> profiles_from_csv(std::istream& source);

}  // namespace loadseg
