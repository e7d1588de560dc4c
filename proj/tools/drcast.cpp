// drcast: latent-variable load forecasting and demand-response reduction
// estimation on hourly smart-meter data.
//
// Subcommands:
//   ingest     parse meter/temperature/metadata CSVs into a series store
//   forecast   run the forecasting methods and report MAPE distributions
//   synth      build semi-synthetic treatment data and score estimators
//   reduction  estimate per-hour reductions with placebo comparisons
//
// Exit codes: 0 success, 1 computation error, 2 usage or I/O error.

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drcast/adf.hpp"
#include "drcast/causal.hpp"
#include "drcast/data.hpp"
#include "drcast/forecast.hpp"
#include "drcast/store.hpp"
#include "drcast/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitComputation = 1;
constexpr int kExitUsage = 2;

const std::vector<std::string> kAllMethods = {"ols",     "knn",     "svr",     "dt",  "ols+hmm",
                                              "knn+hmm", "svr+hmm", "dt+hmm", "cgmm"};

std::vector<std::string> expand_methods(const std::vector<std::string>& methods) {
  std::vector<std::string> out;
  for (const std::string& m : methods) {
    if (m == "all") {
      out.insert(out.end(), kAllMethods.begin(), kAllMethods.end());
      continue;
    }
    if (std::find(kAllMethods.begin(), kAllMethods.end(), m) == kAllMethods.end())
      throw CLI::ValidationError("--methods", "unknown method '" + m + "'");
    out.push_back(m);
  }
  return out;
}

struct MethodTag {
  drcast::RegressorKind kind = drcast::RegressorKind::kOls;
  bool with_hmm = false;
  bool cgmm = false;
};

MethodTag parse_method(const std::string& name) {
  MethodTag tag;
  if (name == "cgmm") {
    tag.cgmm = true;
    return tag;
  }
  std::string base = name;
  if (base.size() > 4 && base.substr(base.size() - 4) == "+hmm") {
    tag.with_hmm = true;
    base = base.substr(0, base.size() - 4);
  }
  tag.kind = drcast::regressor_from_name(base);
  return tag;
}

// Fan user-level work over a small pool; exceptions surface after join.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw drcast::CsvError("cannot write '" + path.string() + "'");
  out << text;
}

std::string config_header(const drcast::RunConfig& config) {
  return "# config=" + json(config).dump() + "\n";
}

// Scan argv ahead of CLI11 so --config values become the flag defaults.
drcast::RunConfig preload_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in) throw drcast::CsvError(std::string("cannot open config '") + argv[i + 1] + "'");
      json j;
      in >> j;
      return j.get<drcast::RunConfig>();
    }
  }
  return {};
}

drcast::ForecastRun run_method(const std::string& method, const drcast::ConsumptionSeries& train,
                               const drcast::ConsumptionSeries& test,
                               const drcast::ForecastConfig& config) {
  const MethodTag tag = parse_method(method);
  if (tag.cgmm) return drcast::forecast_cgmm(train, test, config);
  if (tag.with_hmm) return drcast::forecast_hmm(train, test, tag.kind, config);
  return drcast::forecast_baseline(train, test, tag.kind, config);
}

void write_forecast_run(const fs::path& path, const drcast::ForecastRun& run,
                        const drcast::RunConfig& config) {
  std::string text = config_header(config);
  text += "# user=" + run.user_id + " method=" + run.method + "\n";
  text += "# params=" + run.params.dump() + "\n";
  text += "timestamp,y_true,y_pred,latent_label,method\n";
  for (std::size_t i = 0; i < run.timestamps.size(); ++i) {
    text += drcast::format_hour(run.timestamps[i]) + "," + drcast::format_double(run.y_true[i]) +
            "," + drcast::format_double(run.y_pred[i]) + ",";
    if (run.latent[i] >= 0) text += std::to_string(run.latent[i]);
    text += "," + run.method + "\n";
  }
  write_text(path, text);
}

json aggregates_json(const drcast::Aggregates& a) {
  return json{{"count", a.count}, {"mean", a.mean},   {"median", a.median}, {"p10", a.p10},
              {"p25", a.p25},     {"p75", a.p75},     {"p90", a.p90}};
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string meters, temps, users, out;
};

int cmd_ingest(const IngestArgs& args, drcast::RunConfig config) {
  auto [raw, temps] = drcast::load_readings(args.meters, args.temps);
  if (!args.users.empty()) raw.meta = drcast::load_user_metadata(args.users);

  std::vector<std::pair<std::string, std::string>> exclusions;
  const drcast::RawReadingTable kept = drcast::filter_users(raw, config.max_kwh);
  for (const auto& [user, rows] : raw.readings) {
    if (kept.readings.count(user)) continue;
    exclusions.emplace_back(user, raw.meta_for(user).has_pv ? "pv" : "corrupt_readings");
  }

  const fs::path root(args.out);
  fs::create_directories(root / "series");

  drcast::Store store;
  store.config = config;
  store.root = root;

  std::string adf_report =
      config_header(config) +
      "user_id,window,n,lags_used,test_statistic,critical_value_99,reject_unit_root_99\n";

  for (const auto& [user, rows] : kept.readings) {
    drcast::RawReadingTable single;
    single.readings[user] = rows;
    single.meta = kept.meta;
    std::vector<drcast::ConsumptionSeries> segments;
    try {
      segments = drcast::align_and_scale(single, temps);
    } catch (const drcast::DataError& e) {
      exclusions.emplace_back(user, std::string("alignment: ") + e.what());
      continue;
    }
    if (segments.empty()) {
      exclusions.emplace_back(user, "no usable gap-free segment");
      continue;
    }
    // Keep the longest gap-free segment per user.
    std::size_t best = 0;
    for (std::size_t i = 1; i < segments.size(); ++i)
      if (segments[i].size() > segments[best].size()) best = i;
    const drcast::ConsumptionSeries& series = segments[best];

    const drcast::UserMeta& meta = kept.meta_for(user);
    drcast::StoreUser entry;
    entry.user_id = user;
    entry.file = "series/" + user + ".csv";
    entry.automation = meta.has_automation;
    entry.signup = meta.signup;
    drcast::write_series_csv(series, (root / entry.file).string(), json(config));
    store.users.push_back(entry);

    // Stationarity check on the pretreatment window when one exists.
    std::vector<double> window;
    std::string window_name = "full";
    for (const drcast::Sample& s : series.samples) {
      if (s.t < meta.signup) window.push_back(s.consumption);
    }
    if (window.size() < series.size()) window_name = "pre_signup";
    if (static_cast<int>(window.size()) <= 2 * config.adf_max_lags + 8) {
      window.clear();
      window_name = "full";
      for (const drcast::Sample& s : series.samples) window.push_back(s.consumption);
    }
    try {
      const drcast::AdfResult adf = drcast::adf_test(window, config.adf_max_lags);
      adf_report += user + "," + window_name + "," + std::to_string(window.size()) + "," +
                    std::to_string(adf.lags_used) + "," +
                    drcast::format_double(adf.test_statistic) + "," +
                    drcast::format_double(adf.critical_value_99) + "," +
                    (adf.reject_unit_root_99 ? "true" : "false") + "\n";
    } catch (const std::invalid_argument& e) {
      adf_report += user + "," + window_name + "," + std::to_string(window.size()) +
                    ",,,," + std::string("error: ") + e.what() + "\n";
    }
  }

  drcast::save_store(store);
  write_text(root / "adf_report.csv", adf_report);
  std::string excl = config_header(config) + "user_id,reason\n";
  std::sort(exclusions.begin(), exclusions.end());
  for (const auto& [user, reason] : exclusions) excl += user + "," + reason + "\n";
  write_text(root / "exclusions.csv", excl);

  std::cout << "ingested " << store.users.size() << " users, excluded " << exclusions.size()
            << " -> " << root.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// forecast

struct ForecastArgs {
  std::string store, out;
};

int cmd_forecast(const ForecastArgs& args, drcast::RunConfig config) {
  const drcast::Store store = drcast::load_store(args.store);
  const std::vector<std::string> methods = expand_methods(config.methods);
  const fs::path root(args.out);
  fs::create_directories(root / "runs");

  struct UserResult {
    std::string user_id;
    std::map<std::string, drcast::ForecastRun> runs;
    std::string skipped;
  };
  std::vector<UserResult> results(store.users.size());

  parallel_for(store.users.size(), config.jobs, [&](std::size_t i) {
    const drcast::StoreUser& user = store.users[i];
    UserResult& result = results[i];
    result.user_id = user.user_id;
    const drcast::ConsumptionSeries series =
        drcast::read_series_csv((store.root / user.file).string());
    const std::size_t n_train =
        static_cast<std::size_t>(config.train_fraction * static_cast<double>(series.size()));
    if (n_train < 7 * 24 + drcast::kLagHours + 1 || n_train + 1 > series.size()) {
      result.skipped = "series too short for the configured train fraction";
      return;
    }
    drcast::ConsumptionSeries train = series;
    train.samples.assign(series.samples.begin(),
                         series.samples.begin() + static_cast<std::ptrdiff_t>(n_train));
    drcast::ConsumptionSeries test = series;
    test.samples.assign(series.samples.begin() + static_cast<std::ptrdiff_t>(n_train),
                        series.samples.end());
    for (const std::string& method : methods) {
      const std::uint64_t seed = drcast::derive_seed(config.seed, user.user_id + "/" + method);
      result.runs[method] = run_method(method, train, test, drcast::forecast_config(config, seed));
    }
  });

  // Ordered reduce: per-method MAPE distribution across users.
  std::map<std::string, std::vector<double>> by_method;
  std::string by_user = config_header(config) + "user_id,method,mape_percent,used,excluded\n";
  json skipped = json::array();
  for (const UserResult& result : results) {
    if (!result.skipped.empty()) {
      skipped.push_back({{"user_id", result.user_id}, {"reason", result.skipped}});
      continue;
    }
    for (const std::string& method : methods) {
      const drcast::ForecastRun& run = result.runs.at(method);
      write_forecast_run(root / "runs" / (result.user_id + "__" + method + ".csv"), run, config);
      by_user += result.user_id + "," + method + "," + drcast::format_double(run.score.percent) +
                 "," + std::to_string(run.score.used) + "," + std::to_string(run.score.excluded) +
                 "\n";
      by_method[method].push_back(run.score.percent);
    }
  }

  std::string table = config_header(config) +
                      "method,n_users,mean_mape,median_mape,p10,p25,p75,p90\n";
  std::vector<drcast::BoxSpec> boxes;
  for (const std::string& method : methods) {
    const auto it = by_method.find(method);
    if (it == by_method.end() || it->second.empty()) continue;
    const drcast::Aggregates a = drcast::aggregate(it->second);
    table += method + "," + std::to_string(a.count) + "," + drcast::format_double(a.mean) + "," +
             drcast::format_double(a.median) + "," + drcast::format_double(a.p10) + "," +
             drcast::format_double(a.p25) + "," + drcast::format_double(a.p75) + "," +
             drcast::format_double(a.p90) + "\n";
    boxes.push_back(
        drcast::BoxSpec{method, a.p10, a.p25, a.median, a.p75, a.p90, a.mean, "#6699cc"});
  }
  write_text(root / "mape_by_user.csv", by_user);
  write_text(root / "mape_table.csv", table);
  write_text(root / "mape_boxplot.svg",
             drcast::render_boxplot("Prediction accuracy by forecasting method", "MAPE [%]",
                                    boxes));
  write_text(root / "forecast_meta.json",
             json{{"config", config}, {"skipped", skipped}}.dump(2) + "\n");
  std::cout << "forecast results for " << results.size() - skipped.size() << " users -> "
            << root.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string store, out, signup;
};

int cmd_synth(const SynthArgs& args, drcast::RunConfig config) {
  const drcast::Store store = drcast::load_store(args.store);
  std::vector<std::string> methods = expand_methods(config.methods);
  // Eventwise-error evaluation uses the latent-augmented estimators.
  for (std::string& m : methods) {
    if (m != "cgmm" && m.find("+hmm") == std::string::npos) m += "+hmm";
  }
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());

  const fs::path root(args.out);
  fs::create_directories(root / "series");
  fs::create_directories(root / "truth");

  struct UserSynth {
    std::string user_id;
    std::string skipped;
    drcast::SemiSyntheticSet set;
    std::map<std::string, drcast::ErrorSummary> errors;
    drcast::StoreUser entry;
  };
  std::vector<UserSynth> results(store.users.size());

  parallel_for(store.users.size(), config.jobs, [&](std::size_t i) {
    const drcast::StoreUser& user = store.users[i];
    UserSynth& result = results[i];
    result.user_id = user.user_id;
    const drcast::ConsumptionSeries series =
        drcast::read_series_csv((store.root / user.file).string());
    drcast::HourStamp signup;
    if (!args.signup.empty()) {
      signup = drcast::parse_hour(args.signup);
    } else {
      const std::size_t at = static_cast<std::size_t>(config.synth_signup_fraction *
                                                      static_cast<double>(series.size()));
      if (at == 0 || at >= series.size()) {
        result.skipped = "synthetic signup fraction leaves no train/test split";
        return;
      }
      signup = series.samples[at].t;
    }
    if (signup <= series.start() + 7 * 24 || signup > series.end()) {
      result.skipped = "not enough pretreatment data before the synthetic signup";
      return;
    }
    result.set = drcast::make_semisynthetic(
        series, signup, config.treat_fraction, config.cbar,
        drcast::derive_seed(config.seed, user.user_id + "/synth"));

    drcast::ConsumptionSeries train = series;
    train.samples.assign(series.samples.begin(),
                         series.samples.begin() +
                             static_cast<std::ptrdiff_t>(series.index_of(signup)));

    for (const std::string& method : methods) {
      const MethodTag tag = parse_method(method);
      if (tag.cgmm) continue;  // mixture path not part of the eventwise comparison
      const std::uint64_t seed = drcast::derive_seed(config.seed, user.user_id + "/" + method);
      const drcast::CounterfactualModel model = drcast::fit_counterfactual_model(
          train, tag.kind, drcast::forecast_config(config, seed), tag.with_hmm);
      const drcast::CounterfactualEstimate estimate =
          drcast::estimate_counterfactuals(model, result.set.treated_series, result.set.treated);
      const std::vector<double> reduction =
          drcast::estimate_reduction(estimate.y0_hat, result.set.y1);
      result.errors[method] = drcast::eventwise_error(reduction, result.set);
    }

    result.entry.user_id = user.user_id;
    result.entry.file = "series/" + user.user_id + ".csv";
    result.entry.automation = user.automation;
    result.entry.signup = signup;
  });

  drcast::Store synth_store;
  synth_store.config = config;
  synth_store.root = root;

  json summary;
  summary["config"] = config;
  json per_method = json::object();
  std::map<std::string, std::vector<double>> pooled;
  json skipped = json::array();
  for (const UserSynth& result : results) {
    if (!result.skipped.empty()) {
      skipped.push_back({{"user_id", result.user_id}, {"reason", result.skipped}});
      continue;
    }
    drcast::write_series_csv(result.set.treated_series,
                             (root / result.entry.file).string(), json(config));
    synth_store.users.push_back(result.entry);

    std::string truth = config_header(config) + "index,timestamp,y0,y1,draw\n";
    for (std::size_t k = 0; k < result.set.treated.size(); ++k) {
      const std::size_t idx = result.set.treated[k];
      truth += std::to_string(idx) + "," +
               drcast::format_hour(result.set.treated_series.samples[idx].t) + "," +
               drcast::format_double(result.set.y0[k]) + "," +
               drcast::format_double(result.set.y1[k]) + "," +
               drcast::format_double(result.set.draw[k]) + "\n";
    }
    write_text(root / "truth" / (result.user_id + ".csv"), truth);

    for (const auto& [method, errors] : result.errors) {
      pooled[method].insert(pooled[method].end(), errors.errors.begin(), errors.errors.end());
    }
  }
  for (const auto& [method, errors] : pooled) {
    double bias = 0.0, variance = 0.0;
    if (!errors.empty()) bias = drcast::mean(errors);
    if (errors.size() >= 2) variance = drcast::sample_variance(errors);
    per_method[method] = {{"bias", bias}, {"variance", variance}, {"events", errors.size()}};
    write_text(root / ("errors_" + method + ".svg"),
               drcast::render_histogram("Pointwise prediction error of the treatment effect (" +
                                            method + ")",
                                        "error", errors, 20));
  }
  summary["methods"] = per_method;
  summary["skipped"] = skipped;
  drcast::save_store(synth_store);
  write_text(root / "error_summary.json", summary.dump(2) + "\n");
  std::cout << "semi-synthetic sets for " << synth_store.users.size() << " users -> "
            << root.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// reduction

struct ReductionArgs {
  std::string store, out, events, estimator = "ols+hmm";
  bool synthetic = false;
};

int cmd_reduction(const ReductionArgs& args, drcast::RunConfig config) {
  const drcast::Store store = drcast::load_store(args.store);
  const MethodTag estimator = parse_method(args.estimator);
  if (estimator.cgmm)
    throw CLI::ValidationError("--estimator", "the reduction analysis uses the regressor methods");

  // Events: either a user_id,timestamp CSV or the synthetic truth files.
  std::map<std::string, std::vector<drcast::HourStamp>> events;
  if (args.synthetic) {
    for (const drcast::StoreUser& user : store.users) {
      const fs::path truth = store.root / "truth" / (user.user_id + ".csv");
      if (!fs::exists(truth)) continue;
      const drcast::CsvFile file =
          drcast::read_csv(truth.string(), {"index", "timestamp", "y0", "y1", "draw"});
      for (const drcast::CsvRow& row : file.rows)
        events[user.user_id].push_back(drcast::parse_hour(row.fields[1]));
    }
  } else if (!args.events.empty()) {
    const drcast::CsvFile file = drcast::read_csv(args.events, {"user_id", "timestamp"});
    for (const drcast::CsvRow& row : file.rows)
      events[row.fields[0]].push_back(drcast::parse_hour(row.fields[1]));
  }

  const fs::path root(args.out);
  fs::create_directories(root);

  struct UserReduction {
    std::string user_id;
    std::string skipped;
    std::vector<drcast::ReductionPoint> points;
  };
  std::vector<UserReduction> results(store.users.size());

  parallel_for(store.users.size(), config.jobs, [&](std::size_t i) {
    const drcast::StoreUser& user = store.users[i];
    UserReduction& result = results[i];
    result.user_id = user.user_id;
    if (user.signup == std::numeric_limits<drcast::HourStamp>::max()) {
      result.skipped = "no signup date; user never entered the program";
      return;
    }
    const drcast::ConsumptionSeries series =
        drcast::read_series_csv((store.root / user.file).string());
    const auto user_events = events.count(user.user_id) ? events.at(user.user_id)
                                                        : std::vector<drcast::HourStamp>{};
    drcast::TreatmentLedger ledger =
        drcast::split_by_signup(series, user.signup, user_events);
    ledger.automation = user.automation;
    if (ledger.pretreatment.size() < 7 * 24 + drcast::kLagHours + 1) {
      result.skipped = "not enough pretreatment data to fit the estimator";
      return;
    }
    drcast::select_placebos(series, ledger,
                            drcast::derive_seed(config.seed, user.user_id + "/placebo"));
    if (ledger.treatment.empty() && !ledger.control.empty()) {
      // Placebo-only report: sample placebo_per_hour control hours per
      // eligible hour so the neutrality check still has data.
      std::mt19937_64 rng = drcast::make_rng(
          drcast::derive_seed(config.seed, user.user_id + "/placebo-only"));
      std::vector<std::vector<std::size_t>> pools(24);
      for (const std::size_t idx : ledger.control) {
        const int hour = drcast::hour_of_day(series.samples[idx].t);
        if (drcast::is_dual_hour(hour)) pools[static_cast<std::size_t>(hour)].push_back(idx);
      }
      ledger.placebo.clear();
      for (auto& pool : pools) {
        const std::size_t take =
            std::min(pool.size(), static_cast<std::size_t>(config.placebo_per_hour));
        for (std::size_t j = 0; j < take; ++j) {
          const std::size_t pick =
              j + static_cast<std::size_t>(drcast::uniform01(rng) *
                                           static_cast<double>(pool.size() - j));
          std::swap(pool[j], pool[pick]);
          ledger.placebo.push_back(pool[j]);
        }
      }
      std::sort(ledger.placebo.begin(), ledger.placebo.end());
    }

    std::vector<std::size_t> targets = ledger.treatment;
    targets.insert(targets.end(), ledger.placebo.begin(), ledger.placebo.end());
    std::sort(targets.begin(), targets.end());
    if (targets.empty()) {
      result.skipped = "no treatment or placebo hours";
      return;
    }

    drcast::ConsumptionSeries train = series;
    train.samples.assign(
        series.samples.begin(),
        series.samples.begin() + static_cast<std::ptrdiff_t>(ledger.pretreatment.size()));
    const std::uint64_t seed =
        drcast::derive_seed(config.seed, user.user_id + "/" + args.estimator);
    const drcast::CounterfactualModel model = drcast::fit_counterfactual_model(
        train, estimator.kind, drcast::forecast_config(config, seed), estimator.with_hmm);
    const drcast::CounterfactualEstimate estimate =
        drcast::estimate_counterfactuals(model, series, targets);

    const std::set<std::size_t> treated(ledger.treatment.begin(), ledger.treatment.end());
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const std::size_t idx = targets[k];
      drcast::ReductionPoint p;
      p.index = idx;
      p.t = series.samples[idx].t;
      p.hour = drcast::hour_of_day(p.t);
      p.latent = estimate.latent[k];
      p.automation = user.automation;
      p.placebo = !treated.count(idx);
      p.y_obs = series.samples[idx].consumption;
      p.y0_hat = estimate.y0_hat[k];
      p.reduction = p.y0_hat - p.y_obs;
      result.points.push_back(p);
    }
  });

  drcast::ReductionEstimate all;
  std::string csv = config_header(config) +
                    "user_id,timestamp,hour,latent,automation,placebo,y_obs,y_hat_cf,reduction\n";
  json skipped = json::array();
  for (const UserReduction& result : results) {
    if (!result.skipped.empty()) {
      skipped.push_back({{"user_id", result.user_id}, {"reason", result.skipped}});
      continue;
    }
    for (const drcast::ReductionPoint& p : result.points) {
      all.points.push_back(p);
      csv += result.user_id + "," + drcast::format_hour(p.t) + "," + std::to_string(p.hour) +
             "," + std::to_string(p.latent) + "," + std::to_string(p.automation ? 1 : 0) + "," +
             std::to_string(p.placebo ? 1 : 0) + "," + drcast::format_double(p.y_obs) + "," +
             drcast::format_double(p.y0_hat) + "," + drcast::format_double(p.reduction) + "\n";
    }
  }
  write_text(root / "reductions.csv", csv);

  drcast::ReductionEstimate treated_only, placebo_only;
  for (const drcast::ReductionPoint& p : all.points)
    (p.placebo ? placebo_only : treated_only).points.push_back(p);

  json summary;
  summary["config"] = config;
  summary["estimator"] = args.estimator;
  summary["skipped"] = skipped;
  const auto group_json = [](const std::map<std::string, drcast::Aggregates>& groups) {
    json out = json::object();
    for (const auto& [key, a] : groups) out[key] = aggregates_json(a);
    return out;
  };
  summary["overall"] = aggregates_json(treated_only.aggregates());
  summary["overall_placebo"] = aggregates_json(placebo_only.aggregates());
  summary["by_hour"] = group_json(drcast::conditional_summary(treated_only, {drcast::GroupDim::kHour}));
  summary["placebo_by_hour"] =
      group_json(drcast::conditional_summary(placebo_only, {drcast::GroupDim::kHour}));
  summary["by_latent_automation"] = group_json(drcast::conditional_summary(
      treated_only, {drcast::GroupDim::kAutomation, drcast::GroupDim::kLatent}));
  summary["placebo_by_latent_automation"] = group_json(drcast::conditional_summary(
      placebo_only, {drcast::GroupDim::kAutomation, drcast::GroupDim::kLatent}));
  write_text(root / "reduction_summary.json", summary.dump(2) + "\n");

  // Fig-4-style plots: treated (yellow) next to placebo (gray).
  const auto boxes_for = [&](const drcast::ReductionEstimate& est,
                             const std::vector<drcast::GroupDim>& dims, const std::string& fill) {
    std::vector<drcast::BoxSpec> boxes;
    for (const auto& [key, a] : drcast::conditional_summary(est, dims)) {
      if (a.count == 0) continue;
      boxes.push_back(drcast::BoxSpec{key, a.p10, a.p25, a.median, a.p75, a.p90, a.mean, fill});
    }
    return boxes;
  };
  std::vector<drcast::BoxSpec> hour_boxes =
      boxes_for(treated_only, {drcast::GroupDim::kHour}, "#e6c84c");
  const std::vector<drcast::BoxSpec> hour_placebo =
      boxes_for(placebo_only, {drcast::GroupDim::kHour}, "#a0a0a0");
  hour_boxes.insert(hour_boxes.end(), hour_placebo.begin(), hour_placebo.end());
  write_text(root / "reduction_by_hour.svg",
             drcast::render_boxplot("Estimated reduction by hour of day (placebo in gray)",
                                    "reduction", hour_boxes));
  std::vector<drcast::BoxSpec> latent_boxes = boxes_for(
      treated_only, {drcast::GroupDim::kAutomation, drcast::GroupDim::kLatent}, "#e6c84c");
  const std::vector<drcast::BoxSpec> latent_placebo = boxes_for(
      placebo_only, {drcast::GroupDim::kAutomation, drcast::GroupDim::kLatent}, "#a0a0a0");
  latent_boxes.insert(latent_boxes.end(), latent_placebo.begin(), latent_placebo.end());
  write_text(root / "reduction_by_latent_automation.svg",
             drcast::render_boxplot(
                 "Estimated reduction by automation and latent state (placebo in gray)",
                 "reduction", latent_boxes));

  std::cout << "reduction estimates for " << results.size() - skipped.size() << " users -> "
            << root.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  drcast::RunConfig config;
  try {
    config = preload_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App app{"latent-variable load forecasting and DR reduction estimation"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with RunConfig values");
  app.add_option("--seed", config.seed, "master seed for all randomness");
  app.add_option("--jobs", config.jobs, "worker threads for per-user fan-out");

  IngestArgs ingest;
  CLI::App* cmd_in = app.add_subcommand("ingest", "parse raw CSVs into a series store");
  cmd_in->add_option("--meters", ingest.meters, "meter readings CSV")->required();
  cmd_in->add_option("--temps", ingest.temps, "temperature CSV")->required();
  cmd_in->add_option("--users", ingest.users, "user metadata CSV");
  cmd_in->add_option("--out", ingest.out, "output store directory")->required();
  cmd_in->add_option("--max-kwh", config.max_kwh, "corrupt-reading threshold [kWh]");
  cmd_in->add_option("--adf-max-lags", config.adf_max_lags, "maximum ADF lag order");

  ForecastArgs forecast;
  CLI::App* cmd_fc = app.add_subcommand("forecast", "run forecasting methods on a store");
  cmd_fc->add_option("--store", forecast.store, "ingested store directory")->required();
  cmd_fc->add_option("--out", forecast.out, "output directory")->required();
  cmd_fc->add_option("--methods", config.methods, "comma-separated methods or 'all'")
      ->delimiter(',');
  cmd_fc->add_option("--train-fraction", config.train_fraction, "training split fraction");
  cmd_fc->add_option("--knn-k", config.knn_k, "k for KNN");
  cmd_fc->add_option("--svr-C", config.svr_C, "SVR regularization");
  cmd_fc->add_option("--svr-epsilon", config.svr_epsilon, "SVR tube width");
  cmd_fc->add_option("--svr-gamma", config.svr_gamma, "SVR kernel bandwidth (<=0: 1/d)");
  cmd_fc->add_option("--tree-max-depth", config.tree_max_depth, "decision tree depth cap");
  cmd_fc->add_option("--tree-min-samples-leaf", config.tree_min_samples_leaf,
                     "minimum samples per leaf");
  cmd_fc->add_option("--cgmm-components", config.cgmm_components, "mixture components K");
  cmd_fc->add_option("--em-tol", config.em_tol, "EM convergence tolerance");
  cmd_fc->add_option("--em-max-iter", config.em_max_iter, "EM iteration cap");
  cmd_fc->add_flag("--online-update", config.online_update,
                   "refit parameters after each test observation");

  SynthArgs synth;
  CLI::App* cmd_sy = app.add_subcommand("synth", "semi-synthetic treatment evaluation");
  cmd_sy->add_option("--store", synth.store, "ingested store directory")->required();
  cmd_sy->add_option("--out", synth.out, "output directory")->required();
  cmd_sy->add_option("--signup", synth.signup, "synthetic signup hour (ISO-8601)");
  cmd_sy->add_option("--signup-fraction", config.synth_signup_fraction,
                     "synthetic signup as a fraction of each series");
  cmd_sy->add_option("--cbar", config.cbar, "maximum injected reduction");
  cmd_sy->add_option("--treat-fraction", config.treat_fraction,
                     "treatment probability per eligible hour");
  cmd_sy->add_option("--methods", config.methods, "estimators to score ('all' expands)")
      ->delimiter(',');
  cmd_sy->add_option("--em-tol", config.em_tol, "EM convergence tolerance");
  cmd_sy->add_option("--em-max-iter", config.em_max_iter, "EM iteration cap");

  ReductionArgs reduction;
  CLI::App* cmd_re = app.add_subcommand("reduction", "estimate DR reductions");
  cmd_re->add_option("--store", reduction.store, "store directory (ingest or synth)")->required();
  cmd_re->add_option("--out", reduction.out, "output directory")->required();
  cmd_re->add_option("--events", reduction.events, "DR events CSV (user_id,timestamp)");
  cmd_re->add_flag("--synthetic", reduction.synthetic,
                   "read events from a synth store's truth files");
  cmd_re->add_option("--estimator", reduction.estimator, "counterfactual estimator method");
  cmd_re->add_option("--placebo-per-hour", config.placebo_per_hour,
                     "placebo draws per hour when no events exist");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*cmd_in) return cmd_ingest(ingest, config);
    if (*cmd_fc) return cmd_forecast(forecast, config);
    if (*cmd_sy) return cmd_synth(synth, config);
    if (*cmd_re) return cmd_reduction(reduction, config);
    return kExitUsage;
  } catch (const drcast::CsvError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const drcast::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitComputation;
  }
}
