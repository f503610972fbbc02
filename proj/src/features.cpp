#include "loadseg/features.hpp"

#include <algorithm>
#include <cmath>

#include "loadseg/error.hpp"
#include "loadseg/text.hpp"

namespace loadseg {

std::array<double, kFeatureCount> FeatureVector::flatten() const {
  std::array<double, kFeatureCount> row{};
  std::copy(slots.begin(), slots.end(), row.begin());
  std::copy(peaks.begin(), peaks.end(), row.begin() + kSlotCount);
  std::copy(stats.begin(), stats.end(), row.begin() + kSlotCount + kPeakCount);
  return row;
}

std::array<double, kPeakCount> peak_features(const std::array<double, kSlotCount>& slots) {
  std::array<double, kPeakCount> peaks{};
  for (std::size_t p = 0; p < kPeakCount; ++p) {
    const auto& period = kPeriods[p];
    peaks[p] = *std::max_element(slots.begin() + static_cast<std::ptrdiff_t>(period.first),
                                 slots.begin() + static_cast<std::ptrdiff_t>(period.last));
  }
  return peaks;
}

double interpolated_percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ParameterError("percentile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::array<double, kStatCount> stat_features(const std::array<double, kSlotCount>& slots) {
  std::vector<double> sorted(slots.begin(), slots.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double n = static_cast<double>(kSlotCount);
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  return {mean,
          std::sqrt(ss / n),
          sorted.front(),
          sorted.back(),
          interpolated_percentile(sorted, 0.25),
          interpolated_percentile(sorted, 0.50),
          interpolated_percentile(sorted, 0.75)};
}

FeatureVector extract_features(const LoadProfile& profile) {
  FeatureVector fv;
  fv.household_id = profile.household_id;
  fv.slots = profile.slots;
  fv.peaks = peak_features(profile.slots);
  fv.stats = stat_features(profile.slots);
  return fv;
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (std::size_t s = 0; s < kSlotCount; ++s) n.push_back((s < 10 ? "slot_0" : "slot_") + std::to_string(s));
    for (const auto& p : kPeriods) n.push_back("peak_" + std::string(p.name));
    for (auto s : kStatNames) n.push_back("stat_" + std::string(s));
    return n;
  }();
  return names;
}

FeatureMatrix assemble_matrix(std::vector<LoadProfile> profiles) {
  std::stable_sort(profiles.begin(), profiles.end(),
                   [](const LoadProfile& a, const LoadProfile& b) { return a.household_id < b.household_id; });
  FeatureMatrix fm;
  fm.values = Matrix(profiles.size(), kFeatureCount);
  for (std::size_t r = 0; r < profiles.size(); ++r) {
    const auto row = extract_features(profiles[r]).flatten();
    std::copy(row.begin(), row.end(), fm.values.row(r).begin());
    fm.ids.push_back(profiles[r].household_id);
  }
  return fm;
}

std::string feature_matrix_to_csv(const std::vector<std::string>& ids, const Matrix& values) {
  std::string out = "household_id";
  for (const auto& n : feature_names()) out += "," + n;
  out += '\n';
  for (std::size_t r = 0; r < values.rows(); ++r) {
    out += csv_field(ids[r]);
    for (double v : values.row(r)) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

}  // namespace loadseg
