#include "loadseg/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "loadseg/error.hpp"
#include "loadseg/text.hpp"

namespace loadseg {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int table[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : table[m - 1];
}

// Reads exactly `width` digits starting at pos.
std::optional<int> digits(std::string_view s, std::size_t pos, std::size_t width) {
  if (pos + width > s.size()) return std::nullopt;
  int v = 0;
  for (std::size_t i = pos; i < pos + width; ++i) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

std::string slot_column(std::size_t i) {
  std::string name = "slot_";
  if (i < 10) name.push_back('0');
  name += std::to_string(i);
  return name;
}

}  // namespace

long long Date::ordinal() const noexcept {
  // Civil-from-days inverse (H. Hinnant's algorithm).
  const int y = year - (month <= 2 ? 1 : 0);
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned mp = static_cast<unsigned>(month + (month > 2 ? -3 : 9));
  const unsigned doy = (153 * mp + 2) / 5 + static_cast<unsigned>(day) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

int Date::weekday() const noexcept {
  // 1970-01-01 was a Thursday.
  const long long d = ordinal();
  return static_cast<int>(((d % 7) + 7 + 3) % 7);
}

std::optional<std::size_t> Timestamp::slot() const noexcept {
  if ((minute != 0 && minute != 30) || second != 0 || microsecond != 0) return std::nullopt;
  return static_cast<std::size_t>(hour * 2 + minute / 30);
}

std::optional<Date> parse_date(std::string_view text) {
  text = trim(text);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto y = digits(text, 0, 4), m = digits(text, 5, 2), d = digits(text, 8, 2);
  if (!y || !m || !d) return std::nullopt;
  if (*m < 1 || *m > 12 || *d < 1 || *d > days_in_month(*y, *m)) return std::nullopt;
  return Date{*y, *m, *d};
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.size() < 16) return std::nullopt;
  auto date = parse_date(text.substr(0, 10));
  if (!date || (text[10] != ' ' && text[10] != 'T') || text[13] != ':') return std::nullopt;
  auto h = digits(text, 11, 2), mi = digits(text, 14, 2);
  if (!h || !mi || *h > 23 || *mi > 59) return std::nullopt;
  Timestamp ts{*date, *h, *mi, 0, 0};
  std::size_t pos = 16;
  if (pos < text.size() && text[pos] == ':') {
    auto s = digits(text, pos + 1, 2);
    if (!s || *s > 59) return std::nullopt;
    ts.second = *s;
    pos += 3;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      int scale = 100000;
      std::size_t count = 0;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
        if (scale > 0) {
          ts.microsecond += (text[pos] - '0') * scale;
          scale /= 10;
        }
        ++pos;
        ++count;
      }
      if (count == 0) return std::nullopt;
    }
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) return std::nullopt;
  return ts;
}

ParseResult parse_readings(std::istream& source, const ColumnSchema& schema) {
  ParseResult result;
  std::string line;
  if (!std::getline(source, line)) return result;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_delimited(line, schema.delimiter);
  auto find_column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw SchemaError("missing required column '" + name + "'");
  };
  const std::size_t id_col = find_column(schema.id_column);
  const std::size_t ts_col = find_column(schema.timestamp_column);
  const std::size_t value_col = find_column(schema.value_column);
  std::optional<std::size_t> filter_col;
  if (!schema.filter_column.empty()) filter_col = find_column(schema.filter_column);
  std::size_t needed = std::max({id_col, ts_col, value_col});
  if (filter_col) needed = std::max(needed, *filter_col);

  while (std::getline(source, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_delimited(line, schema.delimiter);
    if (fields.size() <= needed) {
      ++result.rejected;
      continue;
    }
    if (filter_col && trim(fields[*filter_col]) != schema.filter_value) {
      ++result.filtered;
      continue;
    }
    const std::string_view id = trim(fields[id_col]);
    auto ts = parse_timestamp(fields[ts_col]);
    auto value = parse_double(fields[value_col]);
    if (id.empty() || !ts || !value) {
      ++result.rejected;
      continue;
    }
    result.readings.push_back(MeterReading{std::string(id), *ts, *value});
  }
  return result;
}

std::vector<MeterReading> clean(const std::vector<MeterReading>& readings) {
  std::vector<MeterReading> kept;
  kept.reserve(readings.size());
  for (const auto& r : readings) {
    if (!std::isfinite(r.energy_kwh) || r.energy_kwh < 0.0 || !r.timestamp.slot()) continue;
    kept.push_back(r);
  }
  std::sort(kept.begin(), kept.end(), [](const MeterReading& a, const MeterReading& b) {
    return std::tie(a.household_id, a.timestamp, a.energy_kwh) < std::tie(b.household_id, b.timestamp, b.energy_kwh);
  });
  std::vector<MeterReading> out;
  out.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size();) {
    std::size_t j = i;
    double mean = 0.0;
    while (j < kept.size() && kept[j].household_id == kept[i].household_id && kept[j].timestamp == kept[i].timestamp) {
      mean += (kept[j].energy_kwh - mean) / static_cast<double>(j - i + 1);
      ++j;
    }
    MeterReading merged = kept[i];
    merged.energy_kwh = mean;
    out.push_back(std::move(merged));
    i = j;
  }
  return out;
}

bool DateFilter::accepts(const Date& d) const noexcept {
  if (from && d < *from) return false;
  if (to && *to < d) return false;
  const bool weekend = d.weekday() >= 5;
  if (days == DayKind::weekday && weekend) return false;
  if (days == DayKind::weekend && !weekend) return false;
  return true;
}

DateFilter parse_date_filter(std::string_view text) {
  DateFilter filter;
  std::stringstream ss{std::string(text)};
  std::string part;
  while (std::getline(ss, part, ',')) {
    const std::string_view p = trim(part);
    if (p.empty() || p == "all") continue;
    if (p == "weekday" || p == "weekdays") {
      filter.days = DayKind::weekday;
    } else if (p == "weekend" || p == "weekends") {
      filter.days = DayKind::weekend;
    } else if (auto colon = p.find(':'); colon != std::string_view::npos) {
      const auto lo = trim(p.substr(0, colon));
      const auto hi = trim(p.substr(colon + 1));
      if (!lo.empty()) {
        filter.from = parse_date(lo);
        if (!filter.from) throw ParameterError("bad date in filter: " + std::string(lo));
      }
      if (!hi.empty()) {
        filter.to = parse_date(hi);
        if (!filter.to) throw ParameterError("bad date in filter: " + std::string(hi));
      }
    } else {
      throw ParameterError("unrecognised date filter term: " + std::string(p));
    }
  }
  return filter;
}

ProfileBuildResult build_profiles(const std::vector<MeterReading>& readings, const DateFilter& filter) {
  std::vector<const MeterReading*> order;
  order.reserve(readings.size());
  for (const auto& r : readings) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const MeterReading* a, const MeterReading* b) {
    return std::tie(a->household_id, a->timestamp, a->energy_kwh) <
           std::tie(b->household_id, b->timestamp, b->energy_kwh);
  });

  ProfileBuildResult result;
  for (std::size_t i = 0; i < order.size();) {
    const std::string& id = order[i]->household_id;
    std::array<double, kSlotCount> mean{};
    std::array<std::size_t, kSlotCount> count{};
    std::set<long long> days;
    std::size_t j = i;
    for (; j < order.size() && order[j]->household_id == id; ++j) {
      const auto& r = *order[j];
      const auto slot = r.timestamp.slot();
      if (!slot || !filter.accepts(r.timestamp.date)) continue;
      ++count[*slot];
      mean[*slot] += (r.energy_kwh - mean[*slot]) / static_cast<double>(count[*slot]);
      days.insert(r.timestamp.date.ordinal());
    }
    if (std::find(count.begin(), count.end(), 0u) != count.end()) {
      result.dropped.push_back(id);
    } else {
      LoadProfile p;
      p.household_id = id;
      p.slots = mean;
      p.day_count = static_cast<int>(days.size());
      result.profiles.push_back(std::move(p));
    }
    i = j;
  }
  return result;
}

MinMaxBounds fit_min_max(const Matrix& matrix) {
  MinMaxBounds b;
  b.min.assign(matrix.cols(), 0.0);
  b.max.assign(matrix.cols(), 0.0);
  if (matrix.empty()) return b;
  for (std::size_t c = 0; c < matrix.cols(); ++c) {
    double lo = matrix(0, c), hi = matrix(0, c);
    for (std::size_t r = 1; r < matrix.rows(); ++r) {
      lo = std::min(lo, matrix(r, c));
      hi = std::max(hi, matrix(r, c));
    }
    b.min[c] = lo;
    b.max[c] = hi;
  }
  return b;
}

Matrix apply_min_max(const Matrix& matrix, const MinMaxBounds& bounds) {
  if (bounds.min.size() != matrix.cols() || bounds.max.size() != matrix.cols()) {
    throw DimensionError("normalization bounds have " + std::to_string(bounds.min.size()) +
                         " columns, matrix has " + std::to_string(matrix.cols()));
  }
  Matrix out(matrix.rows(), matrix.cols());
  for (std::size_t c = 0; c < matrix.cols(); ++c) {
    const double range = bounds.max[c] - bounds.min[c];
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
      out(r, c) = range > 0.0 ? (matrix(r, c) - bounds.min[c]) / range : 0.0;
    }
  }
  return out;
}

Matrix normalize_columns(const Matrix& matrix) { return apply_min_max(matrix, fit_min_max(matrix)); }

std::string profiles_to_csv(const std::vector<LoadProfile>& profiles) {
  std::string out = "household_id";
  for (std::size_t s = 0; s < kSlotCount; ++s) out += "," + slot_column(s);
  out += '\n';
  for (const auto& p : profiles) {
    out += csv_field(p.household_id);
    for (double v : p.slots) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

std::string profiles_to_json(const std::vector<LoadProfile>& profiles) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& p : profiles) {
    nlohmann::ordered_json o;
    o["household_id"] = p.household_id;
    o["day_count"] = p.day_count;
    o["slots"] = p.slots;
    arr.push_back(std::move(o));
  }
  return arr.dump(1) + "\n";
}

std::vector<LoadProfile> profiles_from_csv(std::istream& source) {
  std::vector<LoadProfile> out;
  std::string line;
  if (!std::getline(source, line)) throw SchemaError("profile file has no header row");
  const auto header = split_delimited(line, ',');
  if (header.empty() || trim(header[0]) != "household_id") {
    throw SchemaError("expected column 'household_id' first, found '" + (header.empty() ? std::string() : header[0]) + "'");
  }
  for (std::size_t s = 0; s < kSlotCount; ++s) {
    if (header.size() <= s + 1) throw SchemaError("missing column '" + slot_column(s) + "'");
    if (trim(header[s + 1]) != slot_column(s)) {
      throw SchemaError("unexpected column '" + header[s + 1] + "', expected '" + slot_column(s) + "'");
    }
  }
  std::size_t line_no = 1;
  while (std::getline(source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_delimited(line, ',');
    if (fields.size() < kSlotCount + 1) throw SchemaError("line " + std::to_string(line_no) + ": too few columns");
    LoadProfile p;
    p.household_id = std::string(trim(fields[0]));
    p.day_count = 1;
    for (std::size_t s = 0; s < kSlotCount; ++s) {
      auto v = parse_double(fields[s + 1]);
      if (!v || !std::isfinite(*v)) {
        throw SchemaError("line " + std::to_string(line_no) + ": column '" + slot_column(s) + "' is not a finite number");
      }
      p.slots[s] = *v;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace loadseg
