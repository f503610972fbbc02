#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "loadseg/ingest.hpp"
#include "loadseg/matrix.hpp"

namespace loadseg {

inline constexpr std::size_t kPeakCount = 6;
inline constexpr std::size_t kStatCount = 7;
inline constexpr std::size_t kFeatureCount = kSlotCount + kPeakCount + kStatCount;

struct Period {
  std::string_view name;
  std::size_t first;  // inclusive slot
  std::size_t last;   // exclusive slot
};

/// Peak periods in feature order. Times are local: 05:00-10:00, 10:00-14:00,
/// 14:00-17:00, 17:00-21:00, 21:00-24:00, 00:00-05:00.
inline constexpr std::array<Period, kPeakCount> kPeriods{{
    {"early_morning", 10, 20},
    {"morning", 20, 28},
    {"noon", 28, 34},
    {"evening", 34, 42},
    {"night", 42, 48},
    {"late_night", 0, 10},
}};

inline constexpr std::array<std::string_view, kStatCount> kStatNames{"mean", "std", "min", "max", "p25", "p50", "p75"};

/// Column index of a peak feature in the 61-wide row.
constexpr std::size_t peak_column(std::size_t period) { return kSlotCount + period; }
inline constexpr std::size_t kEveningPeakColumn = peak_column(3);

struct FeatureVector {
  std::string household_id;
  std::array<double, kSlotCount> slots{};
  std::array<double, kPeakCount> peaks{};
  std::array<double, kStatCount> stats{};

  [[nodiscard]] std::array<double, kFeatureCount> flatten() const;
};

std::array<double, kPeakCount> peak_features(const std::array<double, kSlotCount>& slots);
std::array<double, kStatCount> stat_features(const std::array<double, kSlotCount>& slots);
FeatureVector extract_features(const LoadProfile& profile);

/// Linear interpolation between order statistics of a sorted sample; q in [0,1].
double interpolated_percentile(const std::vector<double>& sorted, double q);

const std::vector<std::string>& feature_names();

struct FeatureMatrix {
  std::vector<std::string> ids;  // row index, ascending
  Matrix values;                 // ids.size() x 61, raw (not normalized)
};

/// Rows sorted by household_id; raw feature values.
FeatureMatrix assemble_matrix(std::vector<LoadProfile> profiles);

std::string feature_matrix_to_csv(const std::vector<std::string>& ids, const Matrix& values);

}  // namespace loadseg
