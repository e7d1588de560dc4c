#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "drcast/time.hpp"

namespace drcast {

struct MeterReading {
  HourStamp t = 0;
  double kwh = 0.0;
};

struct UserMeta {
  bool has_pv = false;
  bool has_automation = false;
  HourStamp signup = std::numeric_limits<HourStamp>::max();
};

// Raw smart-meter readings keyed by user. Rows are strictly increasing in
// time per user; std::map keeps user iteration order deterministic.
struct RawReadingTable {
  std::map<std::string, std::vector<MeterReading>> readings;
  std::map<std::string, UserMeta> meta;

  std::size_t row_count() const {
    std::size_t n = 0;
    for (const auto& [id, rows] : readings) n += rows.size();
    return n;
  }

  const UserMeta& meta_for(const std::string& user) const {
    static const UserMeta kDefault{};
    const auto it = meta.find(user);
    return it == meta.end() ? kDefault : it->second;
  }
};

struct TemperatureReading {
  HourStamp t = 0;
  double celsius = 0.0;
};

struct TemperatureTable {
  std::map<std::string, std::vector<TemperatureReading>> stations;
};

struct ScalingRecord {
  double min_kwh = 0.0;
  double max_kwh = 0.0;
  double temp_mean = 0.0;
  double temp_std = 1.0;
};

struct Sample {
  HourStamp t = 0;
  double consumption = 0.0;  // min-max scaled into [0, 1]
  double temperature = 0.0;  // z-score
};

// Gap-free aligned hourly series for one user: consecutive samples are
// exactly one hour apart, consumption is in [0, 1], temperature standardized.
struct ConsumptionSeries {
  std::string user_id;
  std::vector<Sample> samples;
  ScalingRecord scaling;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  HourStamp start() const { return samples.front().t; }
  HourStamp end() const { return samples.back().t; }

  // Position of timestamp t; relies on the gap-free invariant.
  std::size_t index_of(HourStamp t) const {
    if (empty() || t < start() || t > end())
      throw std::out_of_range("timestamp outside series range");
    return static_cast<std::size_t>(t - start());
  }

  double invert_consumption(double scaled) const {
    return scaled * (scaling.max_kwh - scaling.min_kwh) + scaling.min_kwh;
  }

  double invert_temperature(double z) const {
    return z * scaling.temp_std + scaling.temp_mean;
  }
};

}  // namespace drcast
