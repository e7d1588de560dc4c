#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "drcast/data.hpp"

using namespace drcast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("drcast_data_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }

  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = path / name;
    std::ofstream out(p);
    out << text;
    return p.string();
  }
};

const char* kTempHeader = "station_id,timestamp,temp_c\n";

std::string hours_of_temps(int n, HourStamp start = 0, int skip = -1) {
  std::string text = kTempHeader;
  for (int i = 0; i < n; ++i) {
    if (i == skip) continue;
    text += "st1," + format_hour(start + i) + "," + format_double(10.0 + i) + "\n";
  }
  return text;
}

}  // namespace

TEST_CASE("load_readings parses well-formed files sorted per user") {
  TempDir dir;
  const auto meters = dir.write("m.csv",
                                "user_id,timestamp,consumption_kwh\n"
                                "u1,1970-01-01T00:00:00Z,1.5\n"
                                "u1,1970-01-01T01:00:00Z,2.5\n");
  const auto temps = dir.write("t.csv", hours_of_temps(2));
  const auto [table, temp_table] = load_readings(meters, temps);
  REQUIRE(table.readings.count("u1") == 1);
  REQUIRE(table.readings.at("u1").size() == 2);
  CHECK(table.readings.at("u1")[0].kwh == 1.5);
  CHECK(table.readings.at("u1")[1].t == 1);
  CHECK(temp_table.stations.at("st1").size() == 2);
}

TEST_CASE("load_readings rejects duplicates, negatives and disorder") {
  TempDir dir;
  const auto temps = dir.write("t.csv", hours_of_temps(2));

  const auto dup = dir.write("dup.csv",
                             "user_id,timestamp,consumption_kwh\n"
                             "u1,1970-01-01T00:00:00Z,1.0\n"
                             "u1,1970-01-01T00:00:00Z,2.0\n");
  CHECK_THROWS_WITH(load_readings(dup, temps), Catch::Matchers::ContainsSubstring("duplicate"));

  const auto neg = dir.write("neg.csv",
                             "user_id,timestamp,consumption_kwh\n"
                             "u1,1970-01-01T00:00:00Z,-1.0\n");
  CHECK_THROWS_AS(load_readings(neg, temps), DataError);

  const auto unsorted = dir.write("uns.csv",
                                  "user_id,timestamp,consumption_kwh\n"
                                  "u1,1970-01-01T05:00:00Z,1.0\n"
                                  "u1,1970-01-01T03:00:00Z,1.0\n");
  CHECK_THROWS_WITH(load_readings(unsorted, temps),
                    Catch::Matchers::ContainsSubstring("not increasing"));

  const auto bad_line = dir.write("bad.csv",
                                  "user_id,timestamp,consumption_kwh\n"
                                  "u1,1970-01-01T00:00:00Z,abc\n");
  CHECK_THROWS_WITH(load_readings(bad_line, temps), Catch::Matchers::ContainsSubstring(":2"));
}

TEST_CASE("user metadata parses flags and signup") {
  TempDir dir;
  const auto users = dir.write("u.csv",
                               "user_id,has_pv,has_automation,signup_date\n"
                               "u1,true,false,2013-01-01T00:00:00Z\n"
                               "u2,0,1,2013-02-01T00:00:00Z\n");
  const auto meta = load_user_metadata(users);
  CHECK(meta.at("u1").has_pv);
  CHECK_FALSE(meta.at("u1").has_automation);
  CHECK(meta.at("u2").has_automation);
  CHECK(meta.at("u2").signup == parse_hour("2013-02-01T00:00:00Z"));
}

TEST_CASE("filter_users removes PV users and corrupt meters") {
  RawReadingTable table;
  table.readings["pv_user"] = {{0, 1.0}, {1, 2.0}};
  table.readings["normal"] = {{0, 1.0}, {1, 2.0}};
  table.readings["corrupt"] = {{0, 1.0}, {1, 500.0}};
  table.meta["pv_user"].has_pv = true;

  SECTION("PV and corrupt users are dropped") {
    const RawReadingTable out = filter_users(table, 50.0);
    CHECK(out.readings.size() == 1);
    CHECK(out.readings.count("normal") == 1);
    CHECK(out.readings.at("normal").size() == 2);
  }
  SECTION("reading at ten times the threshold removes the whole user") {
    RawReadingTable t2;
    t2.readings["a"] = {{0, 1.0}};
    t2.readings["b"] = {{0, 500.0}};  // 10 x 50
    t2.readings["c"] = {{0, 2.0}};
    const RawReadingTable out = filter_users(t2, 50.0);
    CHECK(out.readings.size() == 2);
    CHECK(out.readings.count("b") == 0);
  }
  SECTION("no-op when nothing matches") {
    RawReadingTable t2;
    t2.readings["a"] = {{0, 1.0}};
    const RawReadingTable out = filter_users(t2, 50.0);
    CHECK(out.readings.at("a").size() == 1);
  }
  SECTION("idempotent") {
    const RawReadingTable once = filter_users(table, 50.0);
    const RawReadingTable twice = filter_users(once, 50.0);
    CHECK(once.readings.size() == twice.readings.size());
    for (const auto& [user, rows] : once.readings)
      CHECK(twice.readings.at(user).size() == rows.size());
  }
  SECTION("threshold must be positive") {
    CHECK_THROWS_AS(filter_users(table, 0.0), std::invalid_argument);
  }
}

TEST_CASE("align_and_scale maps consumption to [0,1] and standardizes temperature") {
  RawReadingTable table;
  TemperatureTable temps;
  table.readings["u1"] = {{0, 2.0}, {1, 4.0}};
  temps.stations["st1"] = {{0, 10.0}, {1, 20.0}};

  const auto series = align_and_scale(table, temps);
  REQUIRE(series.size() == 1);
  REQUIRE(series[0].samples.size() == 2);
  CHECK(series[0].samples[0].consumption == 0.0);
  CHECK(series[0].samples[1].consumption == 1.0);
  CHECK(series[0].scaling.min_kwh == 2.0);
  CHECK(series[0].scaling.max_kwh == 4.0);
  // temperatures 10,20: mean 15, population std 5
  CHECK(series[0].samples[0].temperature == Catch::Approx(-1.0));
  CHECK(series[0].samples[1].temperature == Catch::Approx(1.0));
}

TEST_CASE("constant temperature window gets unit std") {
  RawReadingTable table;
  TemperatureTable temps;
  table.readings["u1"] = {{0, 2.0}, {1, 4.0}};
  temps.stations["st1"] = {{0, 12.0}, {1, 12.0}};
  const auto series = align_and_scale(table, temps);
  REQUIRE(series.size() == 1);
  CHECK(series[0].samples[0].temperature == 0.0);
  CHECK(series[0].samples[1].temperature == 0.0);
  CHECK(series[0].scaling.temp_std == 1.0);
}

TEST_CASE("one missing temperature hour is linearly interpolated") {
  RawReadingTable table;
  TemperatureTable temps;
  std::vector<MeterReading> rows;
  for (int i = 0; i < 24; ++i) rows.push_back({i, static_cast<double>(i)});
  table.readings["u1"] = rows;
  for (int i = 0; i < 24; ++i) {
    if (i == 7) continue;  // drop one hour
    temps.stations["st1"].push_back({i, 10.0 + 2.0 * i});
  }
  const auto series = align_and_scale(table, temps);
  REQUIRE(series.size() == 1);
  REQUIRE(series[0].samples.size() == 24);
  // neighbours are 22 and 26, so hour 7 interpolates to 24, i.e. 10 + 2*7
  const double z7 = series[0].samples[7].temperature;
  const double expected = (24.0 - series[0].scaling.temp_mean) / series[0].scaling.temp_std;
  CHECK(z7 == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("temperature gaps beyond three hours split the series") {
  RawReadingTable table;
  TemperatureTable temps;
  std::vector<MeterReading> rows;
  for (int i = 0; i < 20; ++i) rows.push_back({i, static_cast<double>(i % 7)});
  table.readings["u1"] = rows;
  for (int i = 0; i < 20; ++i) {
    if (i >= 8 && i < 13) continue;  // five missing hours
    temps.stations["st1"].push_back({i, 15.0 + i});
  }
  const auto series = align_and_scale(table, temps);
  REQUIRE(series.size() == 2);
  CHECK(series[0].samples.size() == 8);
  CHECK(series[1].samples.size() == 7);
  for (const auto& s : series) {
    double lo = 1.0, hi = 0.0;
    for (const auto& sample : s.samples) {
      lo = std::min(lo, sample.consumption);
      hi = std::max(hi, sample.consumption);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
  }
}

TEST_CASE("scaling inverts back to kWh") {
  RawReadingTable table;
  TemperatureTable temps;
  std::vector<MeterReading> rows;
  for (int i = 0; i < 48; ++i) rows.push_back({i, 0.3 + 0.17 * ((i * 13) % 29)});
  table.readings["u1"] = rows;
  for (int i = 0; i < 48; ++i) temps.stations["st1"].push_back({i, 5.0 + 0.3 * i});
  const auto series = align_and_scale(table, temps);
  REQUIRE(series.size() == 1);
  for (std::size_t i = 0; i < series[0].samples.size(); ++i) {
    const double back = series[0].invert_consumption(series[0].samples[i].consumption);
    CHECK(back == Catch::Approx(rows[i].kwh).epsilon(1e-9));
  }
}

TEST_CASE("degenerate and empty-overlap inputs are errors") {
  TemperatureTable temps;
  temps.stations["st1"] = {{0, 10.0}, {1, 11.0}};

  RawReadingTable constant;
  constant.readings["u1"] = {{0, 3.0}, {1, 3.0}};
  CHECK_THROWS_WITH(align_and_scale(constant, temps),
                    Catch::Matchers::ContainsSubstring("degenerate"));

  RawReadingTable disjoint;
  disjoint.readings["u1"] = {{100, 1.0}, {101, 2.0}};
  CHECK_THROWS_WITH(align_and_scale(disjoint, temps),
                    Catch::Matchers::ContainsSubstring("no overlap"));
}

TEST_CASE("multiple stations merge into a shared record") {
  RawReadingTable table;
  table.readings["u1"] = {{0, 1.0}, {1, 5.0}};
  TemperatureTable temps;
  temps.stations["a"] = {{0, 10.0}, {1, 20.0}};
  temps.stations["b"] = {{0, 14.0}, {1, 24.0}};  // mean 12, 22
  const auto series = align_and_scale(table, temps);
  REQUIRE(series.size() == 1);
  // shared temps 12 and 22: mean 17, std 5
  CHECK(series[0].samples[0].temperature == Catch::Approx(-1.0));
}
