#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drcast/csv.hpp"
#include "drcast/forecast.hpp"
#include "drcast/regressor.hpp"
#include "drcast/series.hpp"

namespace drcast {

// Every knob a run depends on; serialized verbatim into each output's
// metadata so results are attributable and re-runnable.
struct RunConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> methods = {"ols", "ols+hmm"};
  int knn_k = 10;
  double svr_C = 1.0;
  double svr_epsilon = 0.01;
  double svr_gamma = 0.0;  // <= 0 means 1/d
  int tree_max_depth = 8;
  int tree_min_samples_leaf = 5;
  int cgmm_components = 2;
  double em_tol = 1e-6;
  int em_max_iter = 500;
  double max_kwh = 50.0;
  int adf_max_lags = 24;
  double train_fraction = 0.75;
  double cbar = 0.2;
  double treat_fraction = 0.05;
  double synth_signup_fraction = 2.0 / 3.0;
  int placebo_per_hour = 5;  // placebo draw size per hour when no treatments exist
  bool online_update = false;
  int jobs = 1;
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"seed", c.seed},
                     {"methods", c.methods},
                     {"knn_k", c.knn_k},
                     {"svr_C", c.svr_C},
                     {"svr_epsilon", c.svr_epsilon},
                     {"svr_gamma", c.svr_gamma},
                     {"tree_max_depth", c.tree_max_depth},
                     {"tree_min_samples_leaf", c.tree_min_samples_leaf},
                     {"cgmm_components", c.cgmm_components},
                     {"em_tol", c.em_tol},
                     {"em_max_iter", c.em_max_iter},
                     {"max_kwh", c.max_kwh},
                     {"adf_max_lags", c.adf_max_lags},
                     {"train_fraction", c.train_fraction},
                     {"cbar", c.cbar},
                     {"treat_fraction", c.treat_fraction},
                     {"synth_signup_fraction", c.synth_signup_fraction},
                     {"placebo_per_hour", c.placebo_per_hour},
                     {"online_update", c.online_update},
                     {"jobs", c.jobs}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  const RunConfig defaults;
  c.seed = j.value("seed", defaults.seed);
  c.methods = j.value("methods", defaults.methods);
  c.knn_k = j.value("knn_k", defaults.knn_k);
  c.svr_C = j.value("svr_C", defaults.svr_C);
  c.svr_epsilon = j.value("svr_epsilon", defaults.svr_epsilon);
  c.svr_gamma = j.value("svr_gamma", defaults.svr_gamma);
  c.tree_max_depth = j.value("tree_max_depth", defaults.tree_max_depth);
  c.tree_min_samples_leaf = j.value("tree_min_samples_leaf", defaults.tree_min_samples_leaf);
  c.cgmm_components = j.value("cgmm_components", defaults.cgmm_components);
  c.em_tol = j.value("em_tol", defaults.em_tol);
  c.em_max_iter = j.value("em_max_iter", defaults.em_max_iter);
  c.max_kwh = j.value("max_kwh", defaults.max_kwh);
  c.adf_max_lags = j.value("adf_max_lags", defaults.adf_max_lags);
  c.train_fraction = j.value("train_fraction", defaults.train_fraction);
  c.cbar = j.value("cbar", defaults.cbar);
  c.treat_fraction = j.value("treat_fraction", defaults.treat_fraction);
  c.synth_signup_fraction = j.value("synth_signup_fraction", defaults.synth_signup_fraction);
  c.placebo_per_hour = j.value("placebo_per_hour", defaults.placebo_per_hour);
  c.online_update = j.value("online_update", defaults.online_update);
  c.jobs = j.value("jobs", defaults.jobs);
}

inline HyperParams hyper_from_config(const RunConfig& c) {
  HyperParams hp;
  hp.knn_k = c.knn_k;
  hp.svr_C = c.svr_C;
  hp.svr_epsilon = c.svr_epsilon;
  hp.svr_gamma = c.svr_gamma;
  hp.tree_max_depth = c.tree_max_depth;
  hp.tree_min_samples_leaf = c.tree_min_samples_leaf;
  return hp;
}

inline ForecastConfig forecast_config(const RunConfig& c, std::uint64_t derived_seed) {
  ForecastConfig fc;
  fc.seed = derived_seed;
  fc.hyper = hyper_from_config(c);
  fc.cgmm_components = c.cgmm_components;
  fc.em_tol = c.em_tol;
  fc.em_max_iter = c.em_max_iter;
  fc.online_update = c.online_update;
  return fc;
}

// ---------------------------------------------------------------------------
// Series files: "# key=json" metadata lines, then timestamp,consumption,temperature.

inline void write_series_csv(const ConsumptionSeries& series, const std::string& path,
                             const nlohmann::json& config) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write '" + path + "'");
  out << "# config=" << config.dump() << "\n";
  const nlohmann::json scaling{{"min_kwh", series.scaling.min_kwh},
                               {"max_kwh", series.scaling.max_kwh},
                               {"temp_mean", series.scaling.temp_mean},
                               {"temp_std", series.scaling.temp_std}};
  out << "# user=" << series.user_id << "\n";
  out << "# scaling=" << scaling.dump() << "\n";
  out << "timestamp,consumption,temperature\n";
  for (const Sample& s : series.samples) {
    out << format_hour(s.t) << "," << format_double(s.consumption) << ","
        << format_double(s.temperature) << "\n";
  }
}

inline ConsumptionSeries read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  ConsumptionSeries series;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# user=", 0) == 0) series.user_id = line.substr(7);
      if (line.rfind("# scaling=", 0) == 0) {
        const nlohmann::json j = nlohmann::json::parse(line.substr(10));
        series.scaling.min_kwh = j.at("min_kwh").get<double>();
        series.scaling.max_kwh = j.at("max_kwh").get<double>();
        series.scaling.temp_mean = j.at("temp_mean").get<double>();
        series.scaling.temp_std = j.at("temp_std").get<double>();
      }
      continue;
    }
    if (!saw_header) {
      if (line != "timestamp,consumption,temperature")
        throw CsvError(path + ": unexpected series header '" + line + "'");
      saw_header = true;
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) throw CsvError(path + ": malformed series row");
    Sample s;
    s.t = parse_hour(fields[0]);
    s.consumption = parse_csv_double(fields[1], path, line_no);
    s.temperature = parse_csv_double(fields[2], path, line_no);
    series.samples.push_back(s);
  }
  if (!saw_header) throw CsvError(path + ": missing series header");
  return series;
}

// store.json written by `ingest`, consumed by the other commands.
struct StoreUser {
  std::string user_id;
  std::string file;  // relative path of the series CSV
  bool automation = false;
  HourStamp signup = std::numeric_limits<HourStamp>::max();
};

struct Store {
  RunConfig config;
  std::vector<StoreUser> users;
  std::filesystem::path root;
};

inline void save_store(const Store& store) {
  nlohmann::json users = nlohmann::json::array();
  for (const StoreUser& u : store.users) {
    users.push_back({{"user_id", u.user_id},
                     {"file", u.file},
                     {"automation", u.automation},
                     {"signup", u.signup == std::numeric_limits<HourStamp>::max()
                                    ? nlohmann::json(nullptr)
                                    : nlohmann::json(format_hour(u.signup))}});
  }
  const nlohmann::json j{{"config", store.config}, {"users", users}};
  std::ofstream out(store.root / "store.json");
  if (!out) throw CsvError("cannot write store.json under '" + store.root.string() + "'");
  out << j.dump(2) << "\n";
}

inline Store load_store(const std::filesystem::path& root) {
  std::ifstream in(root / "store.json");
  if (!in) throw CsvError("cannot open '" + (root / "store.json").string() + "'");
  nlohmann::json j;
  in >> j;
  Store store;
  store.root = root;
  store.config = j.at("config").get<RunConfig>();
  for (const auto& u : j.at("users")) {
    StoreUser user;
    user.user_id = u.at("user_id").get<std::string>();
    user.file = u.at("file").get<std::string>();
    user.automation = u.at("automation").get<bool>();
    if (!u.at("signup").is_null()) user.signup = parse_hour(u.at("signup").get<std::string>());
    store.users.push_back(user);
  }
  return store;
}

}  // namespace drcast
