#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "drcast/csv.hpp"
#include "drcast/series.hpp"
#include "drcast/stats.hpp"

namespace drcast {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultMaxKwh = 50.0;  // corrupt-reading cutoff, kWh/hour
inline constexpr int kMaxTemperatureGap = 3;    // hours bridged by interpolation

// ---------------------------------------------------------------------------
// Loading

// meter CSV: user_id,timestamp,consumption_kwh
// temperature CSV: station_id,timestamp,temp_c
// Per-user (per-station) rows must appear in increasing time order.
inline std::pair<RawReadingTable, TemperatureTable> load_readings(const std::string& meter_path,
                                                                  const std::string& temp_path) {
  RawReadingTable table;
  {
    const CsvFile file = read_csv(meter_path, {"user_id", "timestamp", "consumption_kwh"});
    for (const CsvRow& row : file.rows) {
      const std::string& user = row.fields[0];
      HourStamp t;
      try {
        t = parse_hour(row.fields[1]);
      } catch (const std::invalid_argument& e) {
        std::ostringstream msg;
        msg << meter_path << ":" << row.line << ": " << e.what();
        throw DataError(msg.str());
      }
      const double kwh = parse_csv_double(row.fields[2], meter_path, row.line);
      if (!(kwh >= 0.0)) {
        std::ostringstream msg;
        msg << meter_path << ":" << row.line << ": negative consumption " << row.fields[2];
        throw DataError(msg.str());
      }
      auto& rows = table.readings[user];
      if (!rows.empty()) {
        if (rows.back().t == t) {
          std::ostringstream msg;
          msg << meter_path << ":" << row.line << ": duplicate reading for user '" << user
              << "' at " << format_hour(t);
          throw DataError(msg.str());
        }
        if (rows.back().t > t) {
          std::ostringstream msg;
          msg << meter_path << ":" << row.line << ": timestamps for user '" << user
              << "' not increasing";
          throw DataError(msg.str());
        }
      }
      rows.push_back(MeterReading{t, kwh});
    }
  }

  TemperatureTable temps;
  {
    const CsvFile file = read_csv(temp_path, {"station_id", "timestamp", "temp_c"});
    for (const CsvRow& row : file.rows) {
      const std::string& station = row.fields[0];
      HourStamp t;
      try {
        t = parse_hour(row.fields[1]);
      } catch (const std::invalid_argument& e) {
        std::ostringstream msg;
        msg << temp_path << ":" << row.line << ": " << e.what();
        throw DataError(msg.str());
      }
      const double celsius = parse_csv_double(row.fields[2], temp_path, row.line);
      auto& rows = temps.stations[station];
      if (!rows.empty() && rows.back().t >= t) {
        std::ostringstream msg;
        msg << temp_path << ":" << row.line << ": timestamps for station '" << station
            << "' not strictly increasing";
        throw DataError(msg.str());
      }
      rows.push_back(TemperatureReading{t, celsius});
    }
  }
  return {std::move(table), std::move(temps)};
}

// user-metadata CSV: user_id,has_pv,has_automation,signup_date
inline std::map<std::string, UserMeta> load_user_metadata(const std::string& path) {
  const CsvFile file = read_csv(path, {"user_id", "has_pv", "has_automation", "signup_date"});
  std::map<std::string, UserMeta> meta;
  const auto parse_bool = [&](const std::string& text, std::size_t line) {
    if (text == "1" || text == "true") return true;
    if (text == "0" || text == "false") return false;
    std::ostringstream msg;
    msg << path << ":" << line << ": invalid boolean '" << text << "'";
    throw DataError(msg.str());
  };
  for (const CsvRow& row : file.rows) {
    if (meta.count(row.fields[0])) {
      std::ostringstream msg;
      msg << path << ":" << row.line << ": duplicate metadata for user '" << row.fields[0] << "'";
      throw DataError(msg.str());
    }
    UserMeta m;
    m.has_pv = parse_bool(row.fields[1], row.line);
    m.has_automation = parse_bool(row.fields[2], row.line);
    try {
      m.signup = parse_hour(row.fields[3]);
    } catch (const std::invalid_argument& e) {
      std::ostringstream msg;
      msg << path << ":" << row.line << ": " << e.what();
      throw DataError(msg.str());
    }
    meta[row.fields[0]] = m;
  }
  return meta;
}

// ---------------------------------------------------------------------------
// Filtering

// Drops PV users and users with any reading above max_kwh. Idempotent.
inline RawReadingTable filter_users(const RawReadingTable& table, double max_kwh = kDefaultMaxKwh) {
  if (!(max_kwh > 0.0)) throw std::invalid_argument("max_kwh must be positive");
  RawReadingTable out;
  out.meta = table.meta;
  for (const auto& [user, rows] : table.readings) {
    if (table.meta_for(user).has_pv) continue;
    const bool corrupt = std::any_of(rows.begin(), rows.end(),
                                     [&](const MeterReading& r) { return r.kwh > max_kwh; });
    if (corrupt) continue;
    out.readings[user] = rows;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Alignment and scaling

namespace detail {

// Merge all stations into one shared hourly temperature map (mean across
// stations when several report the same hour).
inline std::map<HourStamp, double> shared_temperatures(const TemperatureTable& temps) {
  std::map<HourStamp, std::pair<double, int>> acc;
  for (const auto& [station, rows] : temps.stations) {
    for (const TemperatureReading& r : rows) {
      auto& slot = acc[r.t];
      slot.first += r.celsius;
      slot.second += 1;
    }
  }
  std::map<HourStamp, double> out;
  for (const auto& [t, slot] : acc) out[t] = slot.first / slot.second;
  return out;
}

// Temperature at hour t: exact reading, or linear interpolation across a
// missing run of at most kMaxTemperatureGap hours.
inline std::optional<double> temperature_at(const std::map<HourStamp, double>& temps, HourStamp t) {
  const auto exact = temps.find(t);
  if (exact != temps.end()) return exact->second;
  const auto after = temps.upper_bound(t);
  if (after == temps.begin() || after == temps.end()) return std::nullopt;
  const auto before = std::prev(after);
  const HourStamp gap = after->first - before->first - 1;
  if (gap > kMaxTemperatureGap) return std::nullopt;
  const double frac =
      static_cast<double>(t - before->first) / static_cast<double>(after->first - before->first);
  return before->second + frac * (after->second - before->second);
}

inline ConsumptionSeries scale_segment(const std::string& user,
                                       const std::vector<MeterReading>& segment,
                                       const std::vector<double>& temps_c) {
  double lo = segment.front().kwh, hi = segment.front().kwh;
  for (const MeterReading& r : segment) {
    lo = std::min(lo, r.kwh);
    hi = std::max(hi, r.kwh);
  }
  if (!(hi > lo)) {
    throw DataError("degenerate consumption scale for user '" + user + "': min == max (" +
                    format_double(lo) + ")");
  }
  const double t_mean = mean(temps_c);
  double t_std = 0.0;
  for (const double c : temps_c) t_std += (c - t_mean) * (c - t_mean);
  t_std = std::sqrt(t_std / static_cast<double>(temps_c.size()));
  if (t_std <= 0.0) t_std = 1.0;  // constant temperature window

  ConsumptionSeries series;
  series.user_id = user;
  series.scaling = ScalingRecord{lo, hi, t_mean, t_std};
  series.samples.reserve(segment.size());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    series.samples.push_back(Sample{segment[i].t, (segment[i].kwh - lo) / (hi - lo),
                                    (temps_c[i] - t_mean) / t_std});
  }
  return series;
}

}  // namespace detail

// Aligns each user's readings with the shared temperature record, scales
// consumption to [0, 1] and temperature to z-scores. Hours whose temperature
// cannot be recovered (gap > kMaxTemperatureGap) and hours missing from the
// meter split the series; each maximal gap-free segment becomes its own
// ConsumptionSeries with its own scaling record.
inline std::vector<ConsumptionSeries> align_and_scale(const RawReadingTable& table,
                                                      const TemperatureTable& temps) {
  const std::map<HourStamp, double> shared = detail::shared_temperatures(temps);
  std::vector<ConsumptionSeries> out;
  for (const auto& [user, rows] : table.readings) {
    std::vector<MeterReading> segment;
    std::vector<double> segment_temps;
    std::size_t aligned = 0;
    const auto flush = [&]() {
      if (segment.size() >= 2) out.push_back(detail::scale_segment(user, segment, segment_temps));
      segment.clear();
      segment_temps.clear();
    };
    for (const MeterReading& r : rows) {
      const std::optional<double> temp = detail::temperature_at(shared, r.t);
      if (!temp) {
        flush();
        continue;
      }
      ++aligned;
      if (!segment.empty() && r.t != segment.back().t + 1) flush();
      segment.push_back(r);
      segment_temps.push_back(*temp);
    }
    flush();
    if (aligned == 0 && !rows.empty()) {
      throw DataError("no overlap between meter readings and temperatures for user '" + user +
                      "'");
    }
  }
  return out;
}

}  // namespace drcast
