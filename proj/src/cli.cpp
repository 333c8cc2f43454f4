#include "qjump/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qjump/estimate.hpp"
#include "qjump/filter.hpp"
#include "qjump/hmm.hpp"
#include "qjump/io.hpp"
#include "qjump/physics.hpp"
#include "qjump/rng.hpp"
#include "qjump/signal.hpp"
#include "qjump/simulate.hpp"
#include "qjump/version.hpp"

namespace qjump::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config plumbing

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
}

struct LoadedConfig {
  json cfg = json::object();
  std::optional<std::uint64_t> seed;
  std::optional<std::string> subcommand;
};

// Accepts either a plain config object or a previously written manifest, so
// any run can be reproduced directly from its manifest.
LoadedConfig load_config(const fs::path& path) {
  const json j = parse_json_file(path);
  if (!j.is_object()) throw ConfigError("config file " + path.string() + ": not a JSON object");
  LoadedConfig lc;
  if (j.contains("config") && j.contains("subcommand")) {
    lc.cfg = j.at("config");
    lc.subcommand = j.at("subcommand").get<std::string>();
    if (j.contains("seed")) lc.seed = j.at("seed").get<std::uint64_t>();
  } else {
    lc.cfg = j;
    if (lc.cfg.contains("seed")) {
      lc.seed = lc.cfg.at("seed").get<std::uint64_t>();
      lc.cfg.erase("seed");
    }
  }
  return lc;
}

double get_number(const json& cfg, const std::string& key, double fallback) {
  if (!cfg.contains(key)) return fallback;
  if (!cfg.at(key).is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return cfg.at(key).get<double>();
}

double require_number(const json& cfg, const std::string& key) {
  if (!cfg.contains(key)) throw ConfigError("config key '" + key + "' is required");
  if (!cfg.at(key).is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return cfg.at(key).get<double>();
}

long get_integer(const json& cfg, const std::string& key, long fallback) {
  if (!cfg.contains(key)) return fallback;
  if (!cfg.at(key).is_number_integer())
    throw ConfigError("config key '" + key + "' must be an integer");
  return cfg.at(key).get<long>();
}

bool get_bool(const json& cfg, const std::string& key, bool fallback) {
  if (!cfg.contains(key)) return fallback;
  if (!cfg.at(key).is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
  return cfg.at(key).get<bool>();
}

std::string get_string(const json& cfg, const std::string& key, const std::string& fallback) {
  if (!cfg.contains(key)) return fallback;
  if (!cfg.at(key).is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return cfg.at(key).get<std::string>();
}

std::vector<double> get_number_array(const json& cfg, const std::string& key,
                                     const std::vector<double>& fallback) {
  if (!cfg.contains(key)) return fallback;
  if (!cfg.at(key).is_array()) throw ConfigError("config key '" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : cfg.at(key)) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void write_manifest(const fs::path& out_dir, const std::string& subcommand,
                    std::uint64_t seed, const json& resolved) {
  json m;
  m["format"] = "qjump-manifest v1";
  m["subcommand"] = subcommand;
  m["version"] = qjump::version;
  m["rng"] = rng::algorithm;
  m["file_formats"] = {{"clicks", "v1"}, {"trajectory", "v1"}, {"hmm", "v1"}, {"csv", "v1"}};
  m["seed"] = seed;
  m["config"] = resolved;
  io::atomic_write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

void write_json(const fs::path& path, const json& j) {
  io::atomic_write_text(path, j.dump(2) + "\n");
}

std::string indexed_name(const std::string& stem, std::size_t i, const std::string& ext) {
  std::ostringstream name;
  name << stem << "_";
  const std::string digits = std::to_string(i);
  for (std::size_t k = digits.size(); k < 3; ++k) name << '0';
  name << digits << ext;
  return name.str();
}

// Deterministic work distribution: results are keyed by index, so the output
// never depends on scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  for (std::size_t w = 0; w < n_threads; ++w) {
    workers.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> log_grid(double lo, double hi, long points) {
  if (!(lo > 0.0) || !(hi > lo)) throw ConfigError("scan grid needs 0 < min < max");
  if (points < 2) throw ConfigError("scan grid needs at least 2 points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(points - 1);
  for (long i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * static_cast<double>(i));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<double> linear_grid(double lo, double hi, long points) {
  if (!(hi > lo)) throw ConfigError("scan grid needs min < max");
  if (points < 2) throw ConfigError("scan grid needs at least 2 points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (long i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = lo + step * static_cast<double>(i);
  grid.back() = hi;
  return grid;
}

// ---------------------------------------------------------------------------
// transmission

physics::CavityParams cavity_from_config(const json& cfg, json& resolved) {
  physics::CavityParams p{};
  const double g0 = get_number(cfg, "g0_mhz", 13.1);
  const double kappa = get_number(cfg, "kappa_mhz", 0.4);
  const double gamma = get_number(cfg, "gamma_mhz", 2.6);
  const double waist = get_number(cfg, "waist_um", 23.0);
  resolved["g0_mhz"] = g0;
  resolved["kappa_mhz"] = kappa;
  resolved["gamma_mhz"] = gamma;
  resolved["waist_um"] = waist;
  p.g0 = physics::mhz_to_angular(g0);
  p.kappa = physics::mhz_to_angular(kappa);
  p.gamma = physics::mhz_to_angular(gamma);
  p.waist = waist * 1e-6;
  p.validate();
  return p;
}

int cmd_transmission(const json& cfg, std::uint64_t seed, const fs::path& out_dir, int jobs) {
  json resolved;
  const auto p = cavity_from_config(cfg, resolved);
  const std::string mode = get_string(cfg, "mode", "detuning_scan");
  resolved["mode"] = mode;

  if (mode == "detuning_scan") {
    const double d_min = get_number(cfg, "delta_min_mhz", 20.0);
    const double d_max = get_number(cfg, "delta_max_mhz", 60.0);
    const long d_points = get_integer(cfg, "delta_points", 401);
    const auto g_effs = get_number_array(cfg, "g_eff_mhz", {8.0, 9.0, 10.0});
    if (g_effs.empty()) throw ConfigError("config key 'g_eff_mhz' must not be empty");
    resolved["delta_min_mhz"] = d_min;
    resolved["delta_max_mhz"] = d_max;
    resolved["delta_points"] = d_points;
    resolved["g_eff_mhz"] = g_effs;
    const auto deltas = linear_grid(d_min, d_max, d_points);

    std::vector<std::string> files(g_effs.size());
    parallel_for(g_effs.size(), jobs, [&](std::size_t k) {
      std::ostringstream csv;
      csv << "# g_eff_mhz = " << io::format_double(g_effs[k]) << "\n";
      csv << "delta_mhz,transmission\n";
      for (double d : deltas) {
        const physics::DetuningPoint dp{physics::mhz_to_angular(d),
                                        physics::mhz_to_angular(g_effs[k])};
        csv << io::format_double(d) << ","
            << io::format_double(physics::transmission_one_atom(p, dp)) << "\n";
      }
      files[k] = csv.str();
    });
    for (std::size_t k = 0; k < g_effs.size(); ++k)
      io::atomic_write_text(out_dir / indexed_name("transmission", k, ".csv"), files[k]);
  } else if (mode == "offset_grid") {
    const double d_min = get_number(cfg, "delta_min_mhz", 20.0);
    const double d_max = get_number(cfg, "delta_max_mhz", 60.0);
    const long d_points = get_integer(cfg, "delta_points", 81);
    const double dy_min = get_number(cfg, "dy_min_um", 0.0);
    const double dy_max = get_number(cfg, "dy_max_um", 46.0);
    const long dy_points = get_integer(cfg, "dy_points", 93);
    const double g_center = get_number(cfg, "g_center_mhz", get_number(cfg, "g0_mhz", 13.1));
    resolved["delta_min_mhz"] = d_min;
    resolved["delta_max_mhz"] = d_max;
    resolved["delta_points"] = d_points;
    resolved["dy_min_um"] = dy_min;
    resolved["dy_max_um"] = dy_max;
    resolved["dy_points"] = dy_points;
    resolved["g_center_mhz"] = g_center;
    const auto deltas = linear_grid(d_min, d_max, d_points);
    const auto dys = linear_grid(dy_min, dy_max, dy_points);
    const double gc = physics::mhz_to_angular(g_center);

    std::vector<std::string> rows(deltas.size());
    parallel_for(deltas.size(), jobs, [&](std::size_t i) {
      std::ostringstream block;
      for (double dy : dys) {
        const double g = physics::coupling_at_offset(p, gc, dy * 1e-6);
        const double dt12 =
            physics::level_difference(p, {physics::mhz_to_angular(deltas[i]), g});
        block << io::format_double(deltas[i]) << "," << io::format_double(dy) << ","
              << io::format_double(dt12) << "\n";
      }
      rows[i] = block.str();
    });
    std::ostringstream grid_csv;
    grid_csv << "delta_mhz,dy_um,dt12\n";
    for (const auto& r : rows) grid_csv << r;
    io::atomic_write_text(out_dir / "level_difference.csv", grid_csv.str());

    std::ostringstream ridge;
    ridge << "delta_mhz,dy_um\n";
    for (double d : deltas)
      ridge << io::format_double(d) << ","
            << io::format_double(physics::optimal_offset(p, gc, physics::mhz_to_angular(d)) * 1e6)
            << "\n";
    io::atomic_write_text(out_dir / "optimal_ridge.csv", ridge.str());
  } else {
    throw ConfigError("config key 'mode' must be 'detuning_scan' or 'offset_grid'");
  }
  write_manifest(out_dir, "transmission", seed, resolved);
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

simulate::JumpProcessSpec spec_from_config(const json& cfg, json& resolved) {
  const std::string model = get_string(cfg, "model", "one_atom");
  const double duration_ms = get_number(cfg, "duration_ms", 1000.0);
  resolved["model"] = model;
  resolved["duration_ms"] = duration_ms;
  if (duration_ms <= 0.0) throw ConfigError("config key 'duration_ms' must be positive");

  simulate::JumpProcessSpec spec;
  if (model == "one_atom") {
    const double r10 = get_number(cfg, "r10", 40.0);
    const double r01 = get_number(cfg, "r01", 18.0);
    const auto flux = get_number_array(cfg, "flux_per_ms", {27.0, 3.0});
    if (flux.size() != 2) throw ConfigError("one_atom model needs 2 entries in 'flux_per_ms'");
    resolved["r10"] = r10;
    resolved["r01"] = r01;
    resolved["flux_per_ms"] = flux;
    spec = simulate::make_one_atom_spec(r10, r01, flux[0] * 1e3, flux[1] * 1e3,
                                        duration_ms * 1e-3);
  } else if (model == "two_atom") {
    const double r10 = require_number(cfg, "r10");
    const double r21 = require_number(cfg, "r21");
    const double r_rep = require_number(cfg, "r_rep");
    const auto flux = get_number_array(cfg, "flux_per_ms", {});
    if (flux.size() != 3) throw ConfigError("two_atom model needs 3 entries in 'flux_per_ms'");
    resolved["r10"] = r10;
    resolved["r21"] = r21;
    resolved["r_rep"] = r_rep;
    resolved["flux_per_ms"] = flux;
    spec = simulate::make_two_atom_spec(r10, r21, r_rep, flux[0] * 1e3, flux[1] * 1e3,
                                        flux[2] * 1e3, duration_ms * 1e-3);
  } else {
    throw ConfigError("config key 'model' must be 'one_atom' or 'two_atom'");
  }

  if (cfg.contains("split")) {
    const json& sp = cfg.at("split");
    const long alpha = get_integer(sp, "alpha", 1);
    const auto site_flux = get_number_array(sp, "site_flux_per_ms", {});
    const double hop = require_number(sp, "hop_rate");
    if (site_flux.empty()) throw ConfigError("split needs 'site_flux_per_ms'");
    std::vector<double> site_flux_s(site_flux.size());
    for (std::size_t i = 0; i < site_flux.size(); ++i) site_flux_s[i] = site_flux[i] * 1e3;
    spec = simulate::split_state(spec, static_cast<int>(alpha), site_flux_s, hop);
    resolved["split"] = {{"alpha", alpha},
                         {"site_flux_per_ms", site_flux},
                         {"hop_rate", hop}};
  }
  return spec;
}

int cmd_simulate(const json& cfg, std::uint64_t seed, const fs::path& out_dir, int jobs) {
  json resolved;
  const auto spec = spec_from_config(cfg, resolved);
  const long reps = get_integer(cfg, "repetitions", 13);
  const bool write_traj = get_bool(cfg, "write_trajectories", true);
  resolved["repetitions"] = reps;
  resolved["write_trajectories"] = write_traj;
  if (reps < 1) throw ConfigError("config key 'repetitions' must be >= 1");
  spec.validate();
  for (const auto& w : spec.warnings) std::cerr << "warning: " << w << "\n";

  parallel_for(static_cast<std::size_t>(reps), jobs, [&](std::size_t i) {
    const auto traj = simulate::sample_trajectory(
        spec, rng::substream(seed, 2 * static_cast<std::uint64_t>(i)));
    const auto clicks =
        simulate::emit_clicks(traj, spec.flux,
                              rng::substream(seed, 2 * static_cast<std::uint64_t>(i) + 1));
    io::save_clicks(clicks, out_dir / indexed_name("clicks", i, ".txt"));
    if (write_traj) io::save_trajectory(traj, out_dir / indexed_name("trajectory", i, ".txt"));
  });
  write_manifest(out_dir, "simulate", seed, resolved);
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

struct FilterSettings {
  estimate::RateSet rates;
  std::vector<double> flux_per_ms;
  filter::PredictMode mode = filter::PredictMode::exact;
  Eigen::Index initial_state = -1;  // -1: highest state
};

FilterSettings filter_from_config(const json& cfg, json& resolved) {
  if (!cfg.contains("filter"))
    throw ConfigError("this analysis needs a 'filter' config section");
  const json& f = cfg.at("filter");
  FilterSettings fset;
  const std::string model = get_string(f, "model", "one_atom");
  json rf;
  rf["model"] = model;
  if (model == "one_atom") {
    fset.rates.kind = estimate::RateSet::Kind::one_atom;
    fset.rates.r10 = require_number(f, "r10");
    fset.rates.r01 = require_number(f, "r01");
    rf["r10"] = fset.rates.r10;
    rf["r01"] = fset.rates.r01;
  } else if (model == "two_atom") {
    fset.rates.kind = estimate::RateSet::Kind::two_atom;
    fset.rates.r10 = require_number(f, "r10");
    fset.rates.r21 = require_number(f, "r21");
    fset.rates.r_rep = require_number(f, "r_rep");
    rf["r10"] = fset.rates.r10;
    rf["r21"] = fset.rates.r21;
    rf["r_rep"] = fset.rates.r_rep;
  } else {
    throw ConfigError("filter model must be 'one_atom' or 'two_atom'");
  }
  fset.flux_per_ms = get_number_array(f, "flux_per_ms", {});
  if (fset.flux_per_ms.size() != static_cast<std::size_t>(fset.rates.n_states()))
    throw ConfigError("filter 'flux_per_ms' needs one entry per state");
  rf["flux_per_ms"] = fset.flux_per_ms;
  const std::string mode = get_string(f, "predict_mode", "exact");
  if (mode == "exact")
    fset.mode = filter::PredictMode::exact;
  else if (mode == "linear")
    fset.mode = filter::PredictMode::linear;
  else
    throw ConfigError("filter predict_mode must be 'exact' or 'linear'");
  rf["predict_mode"] = mode;
  const long init = get_integer(f, "initial_state", fset.rates.n_states() - 1);
  if (init < 0 || init >= fset.rates.n_states())
    throw ConfigError("filter 'initial_state' out of range");
  fset.initial_state = static_cast<Eigen::Index>(init);
  rf["initial_state"] = init;
  resolved["filter"] = rf;
  return fset;
}

filter::FilterConfig build_filter_config(const FilterSettings& fset, double bin_width_s) {
  filter::FilterConfig cfg;
  cfg.rates = fset.rates.rate_matrix();
  for (double flux : fset.flux_per_ms)
    cfg.emissions.push_back(filter::EmissionModel::poisson(flux * 1e3 * bin_width_s, bin_width_s));
  cfg.initial = Eigen::VectorXd::Zero(fset.rates.n_states());
  cfg.initial(fset.initial_state) = 1.0;
  cfg.predict_mode = fset.mode;
  return cfg;
}

std::vector<std::string> filter_comments(const FilterSettings& fset,
                                         const filter::FilterResult& result) {
  std::vector<std::string> comments;
  std::ostringstream rates;
  rates << "rates_per_s row-major:";
  const auto rm = fset.rates.rate_matrix();
  for (Eigen::Index i = 0; i < rm.rows(); ++i)
    for (Eigen::Index j = 0; j < rm.cols(); ++j) rates << " " << io::format_double(rm(i, j));
  comments.push_back(rates.str());
  comments.push_back(std::string("predict_mode: ") +
                     (fset.mode == filter::PredictMode::exact ? "exact" : "linear"));
  std::ostringstream flagged;
  flagged << "flagged_bins:";
  for (std::size_t b : result.flagged_bins) flagged << " " << b;
  comments.push_back(flagged.str());
  return comments;
}

int cmd_analyze(const json& cfg, std::uint64_t seed, const fs::path& out_dir, int jobs) {
  json resolved;
  if (!cfg.contains("inputs") || !cfg.at("inputs").is_array() || cfg.at("inputs").empty())
    throw ConfigError("config key 'inputs' must be a non-empty array of click files");
  std::vector<std::string> inputs;
  for (const auto& v : cfg.at("inputs")) {
    if (!v.is_string()) throw ConfigError("config key 'inputs' must hold paths");
    inputs.push_back(v.get<std::string>());
  }
  resolved["inputs"] = inputs;
  const double bin_width_ms = get_number(cfg, "bin_width_ms", 1.0);
  if (bin_width_ms <= 0.0) throw ConfigError("config key 'bin_width_ms' must be positive");
  resolved["bin_width_ms"] = bin_width_ms;
  const double bin_width_s = bin_width_ms * 1e-3;

  const bool do_hist = get_bool(cfg, "hist", false);
  const bool do_g2 = get_bool(cfg, "g2", false);
  const bool do_filter = get_bool(cfg, "filter_traces", false);
  const bool do_entropy = get_bool(cfg, "entropy_scan", false);
  const bool do_fit = get_bool(cfg, "fit_rates", false);
  resolved["hist"] = do_hist;
  resolved["g2"] = do_g2;
  resolved["filter_traces"] = do_filter;
  resolved["entropy_scan"] = do_entropy;
  resolved["fit_rates"] = do_fit;
  if (!(do_hist || do_g2 || do_filter || do_entropy || do_fit))
    throw ConfigError("analyze: enable at least one of hist/g2/filter/entropy-scan/fit-rates");

  const double g2_max_lag_ms = get_number(cfg, "g2_max_lag_ms", 200.0);
  if (do_g2) resolved["g2_max_lag_ms"] = g2_max_lag_ms;

  std::optional<FilterSettings> fset;
  if (do_filter || do_entropy || do_fit || (do_hist && cfg.contains("filter")))
    fset = filter_from_config(cfg, resolved);

  json entropy_cfg;
  double scan_min_ms = 0.01, scan_max_ms = 20.0;
  long scan_points = 25;
  if (do_entropy) {
    const json e = cfg.contains("entropy") ? cfg.at("entropy") : json::object();
    scan_min_ms = get_number(e, "min_ms", scan_min_ms);
    scan_max_ms = get_number(e, "max_ms", scan_max_ms);
    scan_points = get_integer(e, "points", scan_points);
    resolved["entropy"] = {{"min_ms", scan_min_ms}, {"max_ms", scan_max_ms}, {"points", scan_points}};
  }

  estimate::RateSet fit_guess;
  double fit_tol = 1e-3;
  long fit_max_iter = 50;
  if (do_fit) {
    if (!fset || fset->rates.kind != estimate::RateSet::Kind::two_atom)
      throw ConfigError("fit_rates needs a two_atom 'filter' section");
    const json fr = cfg.contains("fit") ? cfg.at("fit") : json::object();
    fit_guess.kind = estimate::RateSet::Kind::two_atom;
    fit_guess.r10 = get_number(fr, "r10", fset->rates.r10);
    fit_guess.r21 = get_number(fr, "r21", fset->rates.r21);
    fit_guess.r_rep = get_number(fr, "r_rep", fset->rates.r_rep);
    fit_tol = get_number(fr, "tol", fit_tol);
    fit_max_iter = get_integer(fr, "max_iter", fit_max_iter);
    resolved["fit"] = {{"r10", fit_guess.r10},
                       {"r21", fit_guess.r21},
                       {"r_rep", fit_guess.r_rep},
                       {"tol", fit_tol},
                       {"max_iter", fit_max_iter}};
  }

  // Config fully validated; now read inputs and run the chain.
  std::vector<simulate::ClickRecord> records(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    records[i] = io::load_clicks(inputs[i]);
  });
  std::vector<signal::BinnedTrace> traces(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    traces[i] = signal::bin_clicks(records[i], bin_width_s);

  std::optional<signal::ExpFitResult> g2_fit;
  if (do_g2) {
    const auto curve = signal::g2(traces, g2_max_lag_ms * 1e-3);
    io::save_correlation_csv(curve, out_dir / "g2.csv");
    const auto fit = signal::fit_exponential_decay(curve);
    g2_fit = fit;
    json jf;
    jf["amplitude"] = fit.amplitude;
    jf["rate_per_s"] = fit.rate;
    jf["offset"] = fit.offset;
    jf["residual_norm"] = fit.residual_norm;
    jf["iterations"] = fit.iterations;
    jf["converged"] = fit.converged;
    jf["degenerate"] = fit.degenerate;
    write_json(out_dir / "g2_fit.json", jf);
  }

  if (do_hist) {
    const auto hist = signal::histogram(traces);
    io::save_histogram_csv(hist, out_dir / "histogram.csv");
    if (fset) {
      std::vector<signal::CountHistogram> components;
      for (double flux : fset->flux_per_ms)
        components.push_back(signal::poisson_histogram(flux * 1e3 * bin_width_s, bin_width_s));
      const auto ls = estimate::fit_mixture(hist, components);
      const auto ml = estimate::fit_mixture_ml(hist, components);
      json jm;
      jm["weights"] = std::vector<double>(ls.weights.data(), ls.weights.data() + ls.weights.size());
      jm["weights_ml"] = std::vector<double>(ml.weights.data(), ml.weights.data() + ml.weights.size());
      jm["residual"] = ls.residual;
      jm["identifiable"] = ls.identifiable;
      if (g2_fit && g2_fit->rate > 0.0 && ls.weights.size() == 2) {
        const auto rs = estimate::decompose_rates(g2_fit->rate, ls);
        jm["decomposed"] = {{"total_per_s", g2_fit->rate}, {"r10", rs.r10}, {"r01", rs.r01}};
      }
      write_json(out_dir / "mixture.json", jm);
    }
  }

  if (do_filter) {
    const auto fcfg = build_filter_config(*fset, bin_width_s);
    std::vector<filter::FilterResult> results(traces.size());
    parallel_for(traces.size(), jobs, [&](std::size_t i) {
      results[i] = filter::run_filter(traces[i], fcfg);
    });
    for (std::size_t i = 0; i < results.size(); ++i)
      io::save_probability_csv(results[i].trace, filter_comments(*fset, results[i]),
                               out_dir / indexed_name("filter", i, ".csv"));
  }

  if (do_entropy) {
    const auto widths_ms = log_grid(scan_min_ms, scan_max_ms, scan_points);
    std::vector<double> entropy(widths_ms.size());
    parallel_for(widths_ms.size(), jobs, [&](std::size_t k) {
      const double w_s = widths_ms[k] * 1e-3;
      const auto fcfg = build_filter_config(*fset, w_s);
      double total = 0.0;
      std::size_t bins = 0;
      for (const auto& record : records) {
        const auto trace = signal::bin_clicks(record, w_s);
        const auto res = filter::run_filter(trace, fcfg);
        const auto ent = filter::entropy_trace(res.trace);
        total += ent.mean * static_cast<double>(ent.series.size());
        bins += ent.series.size();
      }
      entropy[k] = bins > 0 ? total / static_cast<double>(bins) : 0.0;
    });
    std::ostringstream csv;
    csv << "bin_ms,entropy\n";
    for (std::size_t k = 0; k < widths_ms.size(); ++k)
      csv << io::format_double(widths_ms[k]) << "," << io::format_double(entropy[k]) << "\n";
    io::atomic_write_text(out_dir / "entropy_scan.csv", csv.str());
  }

  if (do_fit) {
    std::vector<filter::EmissionModel> emissions;
    for (double flux : fset->flux_per_ms)
      emissions.push_back(filter::EmissionModel::poisson(flux * 1e3 * bin_width_s, bin_width_s));
    const auto fit = estimate::iterative_rate_fit(traces, emissions, fit_guess, fit_tol,
                                                  static_cast<int>(fit_max_iter));
    json jf;
    jf["r10"] = fit.rates.r10;
    jf["r21"] = fit.rates.r21;
    jf["r_rep"] = fit.rates.r_rep;
    jf["iterations"] = fit.iterations;
    jf["converged"] = fit.converged;
    jf["oscillating"] = fit.oscillating;
    json hist_j = json::array();
    for (const auto& it : fit.history)
      hist_j.push_back({{"r10", it.rates.r10},
                        {"r21", it.rates.r21},
                        {"r_rep", it.rates.r_rep},
                        {"residual", it.residual},
                        {"rel_change", it.rel_change}});
    jf["history"] = hist_j;
    write_json(out_dir / "rate_fit.json", jf);
  }

  write_manifest(out_dir, "analyze", seed, resolved);
  return 0;
}

// ---------------------------------------------------------------------------
// hmm

int cmd_hmm(const json& cfg, std::uint64_t seed, const fs::path& out_dir, int jobs) {
  json resolved;
  if (!cfg.contains("inputs") || !cfg.at("inputs").is_array() || cfg.at("inputs").empty())
    throw ConfigError("config key 'inputs' must be a non-empty array of click files");
  std::vector<std::string> inputs;
  for (const auto& v : cfg.at("inputs")) {
    if (!v.is_string()) throw ConfigError("config key 'inputs' must hold paths");
    inputs.push_back(v.get<std::string>());
  }
  resolved["inputs"] = inputs;
  const double bin_width_ms = get_number(cfg, "bin_width_ms", 1.0);
  if (bin_width_ms <= 0.0) throw ConfigError("config key 'bin_width_ms' must be positive");
  resolved["bin_width_ms"] = bin_width_ms;

  std::vector<int> orders;
  if (cfg.contains("orders")) {
    if (!cfg.at("orders").is_array()) throw ConfigError("config key 'orders' must be an array");
    for (const auto& v : cfg.at("orders")) {
      if (!v.is_number_integer() || v.get<long>() < 1)
        throw ConfigError("config key 'orders' must hold integers >= 1");
      orders.push_back(static_cast<int>(v.get<long>()));
    }
  } else {
    orders = {1, 2, 3};
  }
  if (orders.empty()) throw ConfigError("config key 'orders' must not be empty");
  resolved["orders"] = orders;

  const std::string crit_name = get_string(cfg, "criterion", "bic");
  hmm::Criterion criterion;
  if (crit_name == "bic")
    criterion = hmm::Criterion::bic;
  else if (crit_name == "aic")
    criterion = hmm::Criterion::aic;
  else
    throw ConfigError("config key 'criterion' must be 'aic' or 'bic'");
  resolved["criterion"] = crit_name;
  const long restarts = get_integer(cfg, "restarts", 5);
  const double tol = get_number(cfg, "tol", 1e-6);
  const long max_iter = get_integer(cfg, "max_iter", 500);
  const bool write_marginals = get_bool(cfg, "write_marginals", true);
  if (restarts < 1) throw ConfigError("config key 'restarts' must be >= 1");
  if (max_iter < 1) throw ConfigError("config key 'max_iter' must be >= 1");
  resolved["restarts"] = restarts;
  resolved["tol"] = tol;
  resolved["max_iter"] = max_iter;
  resolved["write_marginals"] = write_marginals;

  std::vector<signal::BinnedTrace> traces(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    traces[i] = signal::bin_clicks(io::load_clicks(inputs[i]), bin_width_ms * 1e-3);
  });

  const auto scores = hmm::compare_orders(traces, orders, criterion, seed,
                                          static_cast<int>(restarts), tol,
                                          static_cast<int>(max_iter));
  json js = json::array();
  for (const auto& s : scores) {
    js.push_back({{"n_states", s.n_states},
                  {"n_params", s.n_params},
                  {"log_likelihood", s.log_likelihood},
                  {"score", s.score},
                  {"converged", s.fit.converged},
                  {"iterations", s.fit.iterations},
                  {"starved_states", s.fit.starved_states}});
  }
  json jout;
  jout["criterion"] = crit_name;
  jout["ranked"] = js;
  write_json(out_dir / "orders.json", jout);

  const auto& best = scores.front().fit.model;
  io::save_hmm(best, out_dir / "model.txt");

  const auto gen = hmm::rates_from_transitions(best);
  json jr;
  jr["valid"] = gen.valid;
  std::vector<double> flat;
  for (Eigen::Index i = 0; i < gen.rates.rows(); ++i)
    for (Eigen::Index j = 0; j < gen.rates.cols(); ++j) flat.push_back(gen.rates(i, j));
  jr["rates_per_s_row_major"] = flat;
  jr["n_states"] = best.n_states();
  write_json(out_dir / "rates.json", jr);

  if (write_marginals) {
    std::vector<filter::ProbabilityTrace> marginals(traces.size());
    parallel_for(traces.size(), jobs, [&](std::size_t i) {
      marginals[i] = hmm::posterior_marginals(best, traces[i]);
    });
    for (std::size_t i = 0; i < marginals.size(); ++i)
      io::save_probability_csv(marginals[i], {"smoothed posterior marginals"},
                               out_dir / indexed_name("marginals", i, ".csv"));
  }
  write_manifest(out_dir, "hmm", seed, resolved);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("qjump");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"quantum-jump telegraph simulation and inference toolkit"};
  app.set_version_flag("--version", std::string(qjump::version));
  app.require_subcommand(1);

  struct CommonOpts {
    std::string config_path;
    std::string out_dir = "qjump-out";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int jobs = 1;
  };
  std::map<std::string, CommonOpts> opts;
  struct Toggles {
    bool hist = false, g2 = false, filter = false, entropy = false, fit = false;
  } toggles;

  auto add_common = [&](CLI::App* sub, const std::string& name) {
    auto& o = opts[name];
    sub->add_option("--config", o.config_path, "JSON config file (or a previous manifest)");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--seed", o.seed, "64-bit RNG seed")->each([&o](const std::string&) {
      o.seed_given = true;
    });
    sub->add_option("--jobs", o.jobs, "max concurrent workers")->check(CLI::PositiveNumber);
  };

  auto* t_sub = app.add_subcommand(
      "transmission", "cavity transmission curves and level-difference grids (units: MHz, um)");
  add_common(t_sub, "transmission");
  auto* s_sub = app.add_subcommand(
      "simulate", "sample telegraph trajectories and detector clicks (units: 1/s, per-ms flux, ms)");
  add_common(s_sub, "simulate");
  auto* a_sub = app.add_subcommand("analyze",
                                   "histograms, g2, Bayes filtering, entropy scan, rate fits");
  add_common(a_sub, "analyze");
  a_sub->add_flag("--hist", toggles.hist, "pooled count histogram (+ mixture fit)");
  a_sub->add_flag("--g2", toggles.g2, "correlation curve and exponential fit");
  a_sub->add_flag("--filter", toggles.filter, "Bayes-filter every input trace");
  a_sub->add_flag("--entropy-scan", toggles.entropy, "mean entropy over a bin-width scan");
  a_sub->add_flag("--fit-rates", toggles.fit, "iterative self-consistent two-atom rate fit");
  auto* h_sub = app.add_subcommand("hmm", "Poisson-HMM order scan, EM fit, smoothed marginals");
  add_common(h_sub, "hmm");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string sub_name = app.get_subcommands().front()->get_name();
  auto& o = opts[sub_name];
  try {
    LoadedConfig lc;
    if (!o.config_path.empty()) lc = load_config(o.config_path);
    if (lc.subcommand && *lc.subcommand != sub_name)
      throw ConfigError("config manifest was written by subcommand '" + *lc.subcommand + "'");
    std::uint64_t seed = 1;
    if (lc.seed) seed = *lc.seed;
    if (o.seed_given) seed = o.seed;

    if (sub_name == "analyze") {
      if (toggles.hist) lc.cfg["hist"] = true;
      if (toggles.g2) lc.cfg["g2"] = true;
      if (toggles.filter) lc.cfg["filter_traces"] = true;
      if (toggles.entropy) lc.cfg["entropy_scan"] = true;
      if (toggles.fit) lc.cfg["fit_rates"] = true;
    }

    const fs::path out_dir(o.out_dir);
    fs::create_directories(out_dir);
    if (sub_name == "transmission") return cmd_transmission(lc.cfg, seed, out_dir, o.jobs);
    if (sub_name == "simulate") return cmd_simulate(lc.cfg, seed, out_dir, o.jobs);
    if (sub_name == "analyze") return cmd_analyze(lc.cfg, seed, out_dir, o.jobs);
    if (sub_name == "hmm") return cmd_hmm(lc.cfg, seed, out_dir, o.jobs);
    std::cerr << "error: unknown subcommand " << sub_name << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qjump::cli
