#pragma once

// Sweep orchestration behind the admctl command-line tool: strict JSON
// configs, a worker pool over independent grid points, caches, CSV outputs
// and a run manifest.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "adm/dynamics.hpp"
#include "adm/eigvec.hpp"
#include "adm/io.hpp"
#include "adm/liouvillian.hpp"
#include "adm/rmtstats.hpp"
#include "adm/spectra.hpp"

namespace adm::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kVersionTag = "admctl 1.0.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Experiment { Spectrum, GapScaling, PrMap, SpacingStats, Dynamics, CriticalLine };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::Spectrum: return "spectrum";
    case Experiment::GapScaling: return "gap-scaling";
    case Experiment::PrMap: return "pr-map";
    case Experiment::SpacingStats: return "spacing-stats";
    case Experiment::Dynamics: return "dynamics";
    case Experiment::CriticalLine: return "critical-line";
  }
  return "?";
}

inline Experiment experiment_from_string(const std::string& s) {
  for (auto e : {Experiment::Spectrum, Experiment::GapScaling, Experiment::PrMap, Experiment::SpacingStats,
                 Experiment::Dynamics, Experiment::CriticalLine})
    if (s == to_string(e)) return e;
  throw ConfigError("unknown experiment '" + s + "'");
}

struct Tolerances {
  double residual = 1e-8;
  double zero = kZeroTolerance;
  double trace = 1e-6;
  double condition = kOverlapConditionLimit;
  double critical_residual = 1e-10;
};

struct SyntheticSeries {
  double g2 = 0.0;
  std::vector<std::pair<double, double>> points;  // (N, gap)
};

struct GapScalingSpec {
  double g1 = 1.25;
  std::vector<double> g2;
  std::vector<int> n_atoms;
  std::vector<SyntheticSeries> synthetic;
  bool convergence_check = false;
  bool merge_sectors = false;  // gap of the merged even and odd blocks
};

struct SpacingSpec {
  int bins = 40;
  double s_max = 4.0;
  int angle_bins = 16;
  bool exclude_zero = true;
  NeighborMethod neighbor = NeighborMethod::Accelerated;
  int ginibre_dim = 0;
  int ginibre_samples = 0;
  int poisson_levels = 0;
};

struct DynamicsSpec {
  std::vector<DynamicsPoint> points;
  std::vector<int> levels;
  int ensemble = 20;
  bool mixed_ensemble = false;
  EvolveStrategy strategy = EvolveStrategy::Doubling;
};

struct SweepConfig {
  Experiment kind = Experiment::Spectrum;
  ModelParams model;
  std::vector<std::pair<double, double>> points;  // (g1, g2)
  Sector sector = Sector::Even;
  Tolerances tol;
  std::size_t budget_bytes = MemoryBudget{}.bytes;
  int jobs = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 0;
  fs::path out = "out";
  std::optional<fs::path> cache;
  GapScalingSpec gap;
  SpacingSpec spacing;
  DynamicsSpec dynamics;
  std::vector<double> critical_g1;
  json source;  // normalized config, hashed into the manifest

  MemoryBudget budget() const { return MemoryBudget{budget_bytes}; }
  SpectrumOptions spectrum_options() const { return {budget(), tol.residual, true}; }
};

// --- strict JSON helpers ---------------------------------------------------------

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

inline double number(const json& j, const std::string& where, double lo, double hi) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!(v >= lo && v <= hi))
    throw ConfigError(where + ": value " + io::fmt_double(v) + " outside [" + io::fmt_double(lo) + ", " +
                      io::fmt_double(hi) + "]");
  return v;
}

inline int integer(const json& j, const std::string& where, long lo, long hi) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  const long v = j.get<long>();
  if (v < lo || v > hi)
    throw ConfigError(where + ": value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  return static_cast<int>(v);
}

inline bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + ": expected true or false");
  return j.get<bool>();
}

inline std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  return j.get<std::string>();
}

template <class F>
auto list(const json& j, const std::string& where, F&& item) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array");
  std::vector<decltype(item(j[0], where))> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(item(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline constexpr double kCouplingMax = 100.0;

inline std::vector<double> couplings(const json& j, const std::string& where) {
  return list(j, where, [](const json& x, const std::string& w) { return number(x, w, -kCouplingMax, kCouplingMax); });
}

inline std::vector<std::pair<double, double>> parse_points(const json& root) {
  const bool has_points = root.contains("points"), has_grid = root.contains("grid");
  if (has_points && has_grid) throw ConfigError("give either 'points' or 'grid', not both");
  if (!has_points && !has_grid) throw ConfigError("missing 'points' or 'grid'");
  std::vector<std::pair<double, double>> out;
  if (has_points) {
    out = list(root["points"], "points", [](const json& p, const std::string& w) {
      if (!p.is_array() || p.size() != 2) throw ConfigError(w + ": expected [g1, g2]");
      return std::pair{number(p[0], w + "[0]", -kCouplingMax, kCouplingMax),
                       number(p[1], w + "[1]", -kCouplingMax, kCouplingMax)};
    });
    return out;
  }
  const json& g = root["grid"];
  check_keys(g, "grid", {"g1", "g2"});
  if (!g.contains("g1") || !g.contains("g2")) throw ConfigError("grid: needs 'g1' and 'g2' lists");
  for (double a : couplings(g["g1"], "grid.g1"))
    for (double b : couplings(g["g2"], "grid.g2")) out.emplace_back(a, b);
  return out;
}

inline ModelParams parse_model(const json& j) {
  check_keys(j, "model", {"omega", "omega0", "kappa", "n_atoms", "n_max", "g1", "g2", "drive_amp", "drive_T"});
  ModelParams p;
  if (j.contains("omega")) p.omega = number(j["omega"], "model.omega", 0, 1e6);
  if (j.contains("omega0")) p.omega0 = number(j["omega0"], "model.omega0", 0, 1e6);
  if (j.contains("kappa")) p.kappa = number(j["kappa"], "model.kappa", 0, 1e6);
  if (j.contains("n_atoms")) p.n_atoms = integer(j["n_atoms"], "model.n_atoms", 1, 64);
  if (j.contains("n_max")) p.n_max = integer(j["n_max"], "model.n_max", 1, 400);
  if (j.contains("g1")) p.g1 = number(j["g1"], "model.g1", -kCouplingMax, kCouplingMax);
  if (j.contains("g2")) p.g2 = number(j["g2"], "model.g2", -kCouplingMax, kCouplingMax);
  if (j.contains("drive_amp")) p.drive_amp = number(j["drive_amp"], "model.drive_amp", 0, kCouplingMax);
  if (j.contains("drive_T")) p.drive_T = number(j["drive_T"], "model.drive_T", 1e-12, 1e12);
  return p;
}

inline Tolerances parse_tolerances(const json& j) {
  check_keys(j, "tolerances", {"residual", "zero", "trace", "condition", "critical_residual"});
  Tolerances t;
  if (j.contains("residual")) t.residual = number(j["residual"], "tolerances.residual", 0, 1);
  if (j.contains("zero")) t.zero = number(j["zero"], "tolerances.zero", 0, 1);
  if (j.contains("trace")) t.trace = number(j["trace"], "tolerances.trace", 0, 1);
  if (j.contains("condition")) t.condition = number(j["condition"], "tolerances.condition", 1, 1e300);
  if (j.contains("critical_residual"))
    t.critical_residual = number(j["critical_residual"], "tolerances.critical_residual", 0, 1);
  return t;
}

inline GapScalingSpec parse_gap(const json& j) {
  check_keys(j, "gap_scaling", {"g1", "g2", "n_atoms", "synthetic", "convergence_check", "merge_sectors"});
  GapScalingSpec g;
  if (j.contains("g1")) g.g1 = number(j["g1"], "gap_scaling.g1", -kCouplingMax, kCouplingMax);
  if (j.contains("convergence_check")) g.convergence_check = boolean(j["convergence_check"], "gap_scaling.convergence_check");
  if (j.contains("merge_sectors")) g.merge_sectors = boolean(j["merge_sectors"], "gap_scaling.merge_sectors");
  if (j.contains("synthetic")) {
    g.synthetic = list(j["synthetic"], "gap_scaling.synthetic", [](const json& s, const std::string& w) {
      check_keys(s, w, {"g2", "points"});
      if (!s.contains("g2") || !s.contains("points")) throw ConfigError(w + ": needs 'g2' and 'points'");
      SyntheticSeries out;
      out.g2 = number(s["g2"], w + ".g2", -kCouplingMax, kCouplingMax);
      out.points = list(s["points"], w + ".points", [](const json& p, const std::string& pw) {
        if (!p.is_array() || p.size() != 2) throw ConfigError(pw + ": expected [N, gap]");
        return std::pair{number(p[0], pw + "[0]", 1, 1e9), number(p[1], pw + "[1]", 1e-300, 1e300)};
      });
      if (out.points.size() < 3) throw ConfigError(w + ".points: need at least 3 points");
      return out;
    });
    if (j.contains("g2") || j.contains("n_atoms"))
      throw ConfigError("gap_scaling: 'synthetic' excludes 'g2' and 'n_atoms'");
    return g;
  }
  if (!j.contains("g2") || !j.contains("n_atoms")) throw ConfigError("gap_scaling: needs 'g2' and 'n_atoms'");
  g.g2 = couplings(j["g2"], "gap_scaling.g2");
  g.n_atoms = list(j["n_atoms"], "gap_scaling.n_atoms", [](const json& x, const std::string& w) { return integer(x, w, 1, 64); });
  if (g.n_atoms.size() < 3) throw ConfigError("gap_scaling.n_atoms: need at least 3 sizes");
  return g;
}

inline SpacingSpec parse_spacing(const json& j) {
  check_keys(j, "spacing", {"bins", "s_max", "angle_bins", "exclude_zero", "neighbor", "ginibre", "poisson_levels"});
  SpacingSpec s;
  if (j.contains("bins")) s.bins = integer(j["bins"], "spacing.bins", 1, 100000);
  if (j.contains("s_max")) s.s_max = number(j["s_max"], "spacing.s_max", 1e-6, 1e3);
  if (j.contains("angle_bins")) s.angle_bins = integer(j["angle_bins"], "spacing.angle_bins", 2, 10000);
  if (j.contains("exclude_zero")) s.exclude_zero = boolean(j["exclude_zero"], "spacing.exclude_zero");
  if (j.contains("neighbor")) {
    const auto m = text(j["neighbor"], "spacing.neighbor");
    if (m == "brute") s.neighbor = NeighborMethod::Brute;
    else if (m == "accelerated") s.neighbor = NeighborMethod::Accelerated;
    else throw ConfigError("spacing.neighbor: expected 'brute' or 'accelerated'");
  }
  if (j.contains("ginibre")) {
    check_keys(j["ginibre"], "spacing.ginibre", {"dim", "samples"});
    if (!j["ginibre"].contains("dim") || !j["ginibre"].contains("samples"))
      throw ConfigError("spacing.ginibre: needs 'dim' and 'samples'");
    s.ginibre_dim = integer(j["ginibre"]["dim"], "spacing.ginibre.dim", 16, 8192);
    s.ginibre_samples = integer(j["ginibre"]["samples"], "spacing.ginibre.samples", 1, 100000);
  }
  if (j.contains("poisson_levels")) s.poisson_levels = integer(j["poisson_levels"], "spacing.poisson_levels", 16, 10000000);
  return s;
}

inline DynamicsSpec parse_dynamics(const json& j) {
  check_keys(j, "dynamics", {"g2", "omega_d", "kappa", "levels", "ensemble", "mixed_ensemble", "strategy"});
  DynamicsSpec d;
  for (const char* k : {"g2", "omega_d", "kappa", "levels"})
    if (!j.contains(k)) throw ConfigError(std::string("dynamics: missing '") + k + "'");
  const auto g2 = couplings(j["g2"], "dynamics.g2");
  const auto wd = list(j["omega_d"], "dynamics.omega_d", [](const json& x, const std::string& w) { return number(x, w, 1e-9, 1e9); });
  const auto ka = list(j["kappa"], "dynamics.kappa", [](const json& x, const std::string& w) { return number(x, w, 0, 1e6); });
  for (double a : g2)
    for (double b : wd)
      for (double c : ka) d.points.push_back({a, b, c});
  d.levels = list(j["levels"], "dynamics.levels", [](const json& x, const std::string& w) { return integer(x, w, 0, 40); });
  if (j.contains("ensemble")) d.ensemble = integer(j["ensemble"], "dynamics.ensemble", 1, 1000000);
  if (j.contains("mixed_ensemble")) d.mixed_ensemble = boolean(j["mixed_ensemble"], "dynamics.mixed_ensemble");
  if (j.contains("strategy")) {
    const auto s = text(j["strategy"], "dynamics.strategy");
    if (s == "stepwise") d.strategy = EvolveStrategy::Stepwise;
    else if (s == "doubling") d.strategy = EvolveStrategy::Doubling;
    else throw ConfigError("dynamics.strategy: expected 'stepwise' or 'doubling'");
  }
  return d;
}

inline std::vector<double> parse_critical(const json& j) {
  check_keys(j, "critical_line", {"g1", "g1_min", "g1_max", "count"});
  if (j.contains("g1")) {
    if (j.contains("g1_min") || j.contains("g1_max") || j.contains("count"))
      throw ConfigError("critical_line: give either 'g1' or a 'g1_min'/'g1_max'/'count' range");
    return couplings(j["g1"], "critical_line.g1");
  }
  for (const char* k : {"g1_min", "g1_max", "count"})
    if (!j.contains(k)) throw ConfigError(std::string("critical_line: missing '") + k + "'");
  const double a = number(j["g1_min"], "critical_line.g1_min", 0, kCouplingMax);
  const double b = number(j["g1_max"], "critical_line.g1_max", a, kCouplingMax);
  const int n = integer(j["count"], "critical_line.count", 1, 10000000);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return out;
}

}  // namespace detail

/// Parses and validates a config for `kind`; unknown keys are rejected.
inline SweepConfig parse_config(const json& root, Experiment kind) {
  detail::check_keys(root, "config",
                     {"experiment", "model", "points", "grid", "sector", "tolerances", "memory_budget_bytes", "jobs",
                      "seed", "out", "cache", "gap_scaling", "spacing", "dynamics", "critical_line"});
  SweepConfig c;
  c.kind = kind;
  if (root.contains("experiment") && experiment_from_string(detail::text(root["experiment"], "experiment")) != kind)
    throw ConfigError(std::string("config is for experiment '") + root["experiment"].get<std::string>() +
                      "', not '" + to_string(kind) + "'");
  const std::map<std::string, Experiment> blocks = {{"gap_scaling", Experiment::GapScaling},
                                                    {"spacing", Experiment::SpacingStats},
                                                    {"dynamics", Experiment::Dynamics},
                                                    {"critical_line", Experiment::CriticalLine}};
  for (const auto& [key, owner] : blocks)
    if (root.contains(key) && owner != kind)
      throw ConfigError("'" + key + "' block is not valid for experiment '" + to_string(kind) + "'");

  if (root.contains("model")) c.model = detail::parse_model(root["model"]);
  if (root.contains("sector")) {
    try {
      c.sector = sector_from_string(detail::text(root["sector"], "sector"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (root.contains("tolerances")) c.tol = detail::parse_tolerances(root["tolerances"]);
  if (root.contains("memory_budget_bytes"))
    c.budget_bytes = static_cast<std::size_t>(detail::number(root["memory_budget_bytes"], "memory_budget_bytes", 1, 1e15));
  if (root.contains("jobs")) c.jobs = detail::integer(root["jobs"], "jobs", 1, 1024);
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned() && !(root["seed"].is_number_integer() && root["seed"].get<long>() >= 0))
      throw ConfigError("seed: expected a nonnegative integer");
    c.seed = root["seed"].get<std::uint64_t>();
  }
  if (root.contains("out")) c.out = detail::text(root["out"], "out");
  if (root.contains("cache")) c.cache = fs::path(detail::text(root["cache"], "cache"));

  switch (kind) {
    case Experiment::Spectrum:
    case Experiment::PrMap:
      c.points = detail::parse_points(root);
      break;
    case Experiment::SpacingStats:
      if (root.contains("points") || root.contains("grid")) c.points = detail::parse_points(root);
      if (root.contains("spacing")) c.spacing = detail::parse_spacing(root["spacing"]);
      if (c.points.empty() && c.spacing.ginibre_samples == 0 && c.spacing.poisson_levels == 0)
        throw ConfigError("spacing-stats: nothing to do (no points and no reference ensembles)");
      break;
    case Experiment::GapScaling:
      if (!root.contains("gap_scaling")) throw ConfigError("gap-scaling: missing 'gap_scaling' block");
      c.gap = detail::parse_gap(root["gap_scaling"]);
      break;
    case Experiment::Dynamics:
      if (!root.contains("dynamics")) throw ConfigError("dynamics: missing 'dynamics' block");
      c.dynamics = detail::parse_dynamics(root["dynamics"]);
      break;
    case Experiment::CriticalLine:
      if (!root.contains("critical_line")) throw ConfigError("critical-line: missing 'critical_line' block");
      c.critical_g1 = detail::parse_critical(root["critical_line"]);
      break;
  }
  if (kind != Experiment::Spectrum && kind != Experiment::PrMap && kind != Experiment::SpacingStats &&
      (root.contains("points") || root.contains("grid")))
    throw ConfigError(std::string("'points'/'grid' are not valid for experiment '") + to_string(kind) + "'");
  try {
    c.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.source = root;
  return c;
}

inline SweepConfig load_config(const fs::path& path, Experiment kind) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, kind);
}

// --- worker pool and manifest ----------------------------------------------------

struct TaskRecord {
  std::string label;
  bool ok = false;
  std::string error;
  double wall_seconds = 0.0;
};

/// Runs fn(i) for i in [0, n) on `jobs` workers. Exceptions are captured per
/// task; results are reported in index order.
inline std::vector<TaskRecord> run_tasks(std::size_t n, int jobs, const std::function<std::string(std::size_t)>& label,
                                         const std::function<void(std::size_t)>& fn) {
  std::vector<TaskRecord> rec(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      rec[i].label = label(i);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        fn(i);
        rec[i].ok = true;
      } catch (const std::exception& e) {
        rec[i].error = e.what();
      }
      rec[i].wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    worker();
    return rec;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(worker);
  pool.clear();
  return rec;
}

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<TaskRecord> tasks;
  std::vector<fs::path> outputs;

  bool all_ok() const {
    return std::all_of(tasks.begin(), tasks.end(), [](const TaskRecord& t) { return t.ok; });
  }

  /// Missing or empty declared outputs are recorded as failed tasks.
  void verify_outputs() {
    for (const auto& p : outputs) {
      std::error_code ec;
      if (!fs::exists(p, ec) || fs::file_size(p, ec) == 0)
        tasks.push_back({"output " + p.filename().string(), false, "missing or empty output file", 0.0});
    }
  }

  void write(const fs::path& path) const {
    json j;
    j["command"] = command;
    j["version"] = kVersionTag;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["status"] = all_ok() ? "ok" : "partial";
    j["tasks"] = json::array();
    for (const auto& t : tasks)
      j["tasks"].push_back({{"label", t.label}, {"status", t.ok ? "ok" : "failed"}, {"error", t.error},
                            {"wall_seconds", t.wall_seconds}});
    j["outputs"] = json::array();
    for (const auto& p : outputs) j["outputs"].push_back(p.filename().string());
    std::ofstream os(path, std::ios::trunc);
    os << j.dump(2) << '\n';
  }
};

inline std::string config_hash(const SweepConfig& c) { return io::hex64(fnv1a64(c.source.dump())); }

// --- shared computations -------------------------------------------------------------

inline ModelParams at_point(const ModelParams& base, double g1, double g2) {
  ModelParams p = base;
  p.g1 = g1;
  p.g2 = g2;
  return p;
}

/// Generator block for a point, through the generator cache when enabled.
inline SuperOperator generator_block(const SweepConfig& c, const ModelParams& p) {
  if (c.cache) {
    const auto path = io::cache_path(*c.cache, "liou", p, c.sector);
    if (fs::exists(path)) return io::load_generator(path, p);
  }
  const BasisMap basis(p);
  SuperOperator l = select_sector(build_liouvillian(p, {}, {}, c.budget()), basis, c.sector);
  if (c.cache) io::save_generator(io::cache_path(*c.cache, "liou", p, c.sector), l);
  return l;
}

/// Spectrum for a point, through the spectrum cache when enabled.
inline Spectrum point_spectrum(const SweepConfig& c, const ModelParams& p, VectorMode mode) {
  const char* kind = mode == VectorMode::None ? "spec" : mode == VectorMode::Right ? "specr" : "specb";
  if (c.cache) {
    const auto path = io::cache_path(*c.cache, kind, p, c.sector);
    if (fs::exists(path)) return io::load_spectrum(path, p);
  }
  Spectrum s = eigendecompose(generator_block(c, p), mode, c.spectrum_options());
  if (c.cache) io::save_spectrum(io::cache_path(*c.cache, kind, p, c.sector), s);
  return s;
}

inline std::string point_label(std::size_t i, double g1, double g2) {
  return "point " + std::to_string(i) + " (g1=" + io::fmt_double(g1) + ", g2=" + io::fmt_double(g2) + ")";
}

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// --- commands --------------------------------------------------------------------------

inline RunManifest cmd_spectrum(const SweepConfig& c) {
  RunManifest m;
  std::vector<std::optional<Spectrum>> specs(c.points.size());
  m.tasks = run_tasks(
      c.points.size(), c.jobs, [&](std::size_t i) { return point_label(i, c.points[i].first, c.points[i].second); },
      [&](std::size_t i) {
        specs[i] = point_spectrum(c, at_point(c.model, c.points[i].first, c.points[i].second), VectorMode::None);
      });
  io::CsvWriter summary(c.out / "spectrum_summary.csv",
                        {"point_id", "g1", "g2", "sector", "dim", "gap", "zero_modes", "max_re", "conjugate_mismatch"});
  m.outputs.push_back(summary.path());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!specs[i]) continue;
    const auto& s = *specs[i];
    const auto path = c.out / ("spectrum_" + std::to_string(i) + ".csv");
    io::CsvWriter w(path, {"re", "im"});
    double max_re = -std::numeric_limits<double>::infinity();
    for (const auto& v : s.eigenvalues) {
      w.row(v.real(), v.imag());
      max_re = std::max(max_re, v.real());
    }
    m.outputs.push_back(path);
    double gap = nan();
    try {
      gap = liouvillian_gap(s, c.tol.zero);
    } catch (const NumericalError&) {
    }
    summary.row(i, c.points[i].first, c.points[i].second, to_string(c.sector), s.dim(), gap,
                count_zero_modes(s.eigenvalues, c.tol.zero), max_re, conjugate_pair_mismatch(s.eigenvalues));
  }
  return m;
}

/// Gap at a point, optionally over the merged even and odd blocks.
inline double point_gap(const SweepConfig& c, const ModelParams& p, bool merge, std::size_t* dim = nullptr) {
  if (!merge) {
    const auto s = point_spectrum(c, p, VectorMode::None);
    if (dim) *dim = s.dim();
    return liouvillian_gap(s, c.tol.zero);
  }
  SweepConfig e = c, o = c;
  e.sector = Sector::Even;
  o.sector = Sector::Odd;
  const auto s = merge_spectra(point_spectrum(e, p, VectorMode::None), point_spectrum(o, p, VectorMode::None));
  if (dim) *dim = s.dim();
  return liouvillian_gap(s, c.tol.zero);
}

struct GapRow {
  double g2 = 0;
  int n_atoms = 0;
  std::size_t n_l = 0, sector_dim = 0;
  double gap = 0, gap_check = std::numeric_limits<double>::quiet_NaN();
};

inline RunManifest cmd_gap_scaling(const SweepConfig& c) {
  RunManifest m;
  std::vector<GapRow> rows;
  const auto& g = c.gap;
  if (g.synthetic.empty()) {
    for (double g2 : g.g2)
      for (int n : g.n_atoms) rows.push_back({g2, n});
    m.tasks = run_tasks(
        rows.size(), c.jobs,
        [&](std::size_t i) {
          return "g2=" + io::fmt_double(rows[i].g2) + " N=" + std::to_string(rows[i].n_atoms);
        },
        [&](std::size_t i) {
          ModelParams p = at_point(c.model, g.g1, rows[i].g2);
          p.n_atoms = rows[i].n_atoms;
          rows[i].n_l = p.liouville_dim();
          rows[i].gap = point_gap(c, p, g.merge_sectors, &rows[i].sector_dim);
          if (g.convergence_check) {
            ModelParams q = p;
            q.n_max += 4;
            rows[i].gap_check = point_gap(c, q, g.merge_sectors);
          }
        });
  } else {
    for (const auto& s : g.synthetic)
      for (const auto& [n, gap] : s.points) {
        GapRow r;
        r.g2 = s.g2;
        r.n_atoms = static_cast<int>(n);
        r.gap = gap;
        ModelParams p = c.model;
        p.n_atoms = r.n_atoms;
        r.n_l = p.liouville_dim();
        rows.push_back(r);
        m.tasks.push_back({"synthetic g2=" + io::fmt_double(s.g2) + " N=" + io::fmt_double(n), true, "", 0.0});
      }
  }
  io::CsvWriter raw(c.out / "gap_rows.csv",
                    {"g1", "g2", "n_atoms", "n_max", "N_L", "sector_dim", "gap", "gap_nmax_plus4"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!m.tasks[i].ok) continue;
    raw.row(g.g1, rows[i].g2, rows[i].n_atoms, c.model.n_max, rows[i].n_l, rows[i].sector_dim, rows[i].gap,
            rows[i].gap_check);
  }
  io::CsvWriter fits(c.out / "gap_fits.csv", {"g1", "g2", "abscissa", "slope", "intercept", "r_squared", "points"});
  std::vector<double> series;
  for (const auto& r : rows)
    if (std::find(series.begin(), series.end(), r.g2) == series.end()) series.push_back(r.g2);
  for (double g2 : series) {
    std::vector<std::pair<double, double>> by_n, by_nl;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].g2 != g2 || !m.tasks[i].ok) continue;
      by_n.emplace_back(rows[i].n_atoms, rows[i].gap);
      by_nl.emplace_back(static_cast<double>(rows[i].n_l), rows[i].gap);
    }
    if (by_n.size() < 3) {
      m.tasks.push_back({"fit g2=" + io::fmt_double(g2), false, "fewer than 3 successful sizes", 0.0});
      continue;
    }
    const auto fn = fit_gap_scaling(by_n), fl = fit_gap_scaling(by_nl);
    fits.row(g.g1, g2, "N", fn.slope, fn.intercept, fn.r_squared, by_n.size());
    fits.row(g.g1, g2, "N_L", fl.slope, fl.intercept, fl.r_squared, by_nl.size());
  }
  m.outputs = {raw.path(), fits.path()};
  return m;
}

inline RunManifest cmd_pr_map(const SweepConfig& c) {
  RunManifest m;
  std::vector<PRPoint> pts(c.points.size());
  m.tasks = run_tasks(
      c.points.size(), c.jobs, [&](std::size_t i) { return point_label(i, c.points[i].first, c.points[i].second); },
      [&](std::size_t i) {
        const auto [g1, g2] = c.points[i];
        const ModelParams p = at_point(c.model, g1, g2);
        Spectrum s = point_spectrum(c, p, VectorMode::Both);
        auto pair = biorthogonalize(std::move(*s.left), std::move(*s.right), s.eigenvalues, c.tol.condition);
        const auto rep = pr_report(pair);
        pts[i] = {g1, g2, rep.avg_left, rep.avg_right, rep.avg_biorth, rep.sector_dim, rep.defect, true, ""};
      });
  io::CsvWriter w(c.out / "pr_map.csv", {"g1", "g2", "pr_left", "pr_right", "pr_biorth", "sector_dim", "defect_norm"});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!m.tasks[i].ok) continue;
    const auto& p = pts[i];
    w.row(p.g1, p.g2, p.pr_left, p.pr_right, p.pr_biorth, p.sector_dim, p.defect_norm);
  }
  m.outputs.push_back(w.path());
  return m;
}

struct SpacingResult {
  std::string source;
  double g1 = nan(), g2 = nan();
  std::size_t levels = 0, duplicates = 0;
  double mean_r = 0, mean_cos = 0, ks_poisson = 0, ks_ginue = 0, chi2 = 0, p_value = 0;
  std::vector<HistogramRow> histogram;
  std::vector<cplx> ratios;
};

inline SpacingResult spacing_analysis(std::vector<cplx> values, const SpacingSpec& s, double zero_tol) {
  if (s.exclude_zero) values = exclude_zero_cluster(values, zero_tol);
  SpacingResult r;
  const auto u = unfold(values, s.neighbor);
  const auto z = spacing_ratios(values, s.neighbor);
  const auto a = angle_uniformity(z.z, s.angle_bins);
  r.levels = u.unfolded.size();
  r.duplicates = u.duplicates_removed;
  r.mean_r = z.mean_r;
  r.mean_cos = z.mean_cos;
  r.ks_poisson = ks_distance(u.unfolded, cdf_poisson2d);
  r.ks_ginue = ks_distance(u.unfolded, cdf_ginue);
  r.chi2 = a.chi2;
  r.p_value = a.p_value;
  r.histogram = spacing_histogram(u.unfolded, s.bins, s.s_max);
  r.ratios = z.z;
  return r;
}

inline RunManifest cmd_spacing(const SweepConfig& c) {
  RunManifest m;
  const auto& sp = c.spacing;
  std::vector<SpacingResult> res(c.points.size());
  m.tasks = run_tasks(
      c.points.size(), c.jobs, [&](std::size_t i) { return point_label(i, c.points[i].first, c.points[i].second); },
      [&](std::size_t i) {
        const auto [g1, g2] = c.points[i];
        const auto s = point_spectrum(c, at_point(c.model, g1, g2), VectorMode::None);
        res[i] = spacing_analysis(s.eigenvalues, sp, c.tol.zero);
        res[i].source = "model";
        res[i].g1 = g1;
        res[i].g2 = g2;
      });
  // Reference ensembles, seeded from the run seed.
  if (sp.ginibre_samples > 0) {
    SpacingResult agg;
    agg.source = "ginibre";
    TaskRecord t{"ginibre reference", false, "", 0.0};
    try {
      std::vector<double> unf;
      std::vector<cplx> z;
      double sum_r = 0, sum_c = 0;
      for (int k = 0; k < sp.ginibre_samples; ++k) {
        const auto e = sample_ginibre(sp.ginibre_dim, c.seed + static_cast<std::uint64_t>(k));
        const auto r = spacing_ratios(e, sp.neighbor);
        const auto u = unfold(e, sp.neighbor);
        sum_r += r.mean_r;
        sum_c += r.mean_cos;
        z.insert(z.end(), r.z.begin(), r.z.end());
        unf.insert(unf.end(), u.unfolded.begin(), u.unfolded.end());
      }
      agg.levels = unf.size();
      agg.mean_r = sum_r / sp.ginibre_samples;
      agg.mean_cos = sum_c / sp.ginibre_samples;
      agg.ks_poisson = ks_distance(unf, cdf_poisson2d);
      agg.ks_ginue = ks_distance(unf, cdf_ginue);
      const auto a = angle_uniformity(z, sp.angle_bins);
      agg.chi2 = a.chi2;
      agg.p_value = a.p_value;
      agg.histogram = spacing_histogram(unf, sp.bins, sp.s_max);
      res.push_back(agg);
      t.ok = true;
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    m.tasks.push_back(t);
  }
  if (sp.poisson_levels > 0) {
    TaskRecord t{"poisson2d reference", false, "", 0.0};
    try {
      std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<cplx> pts(static_cast<std::size_t>(sp.poisson_levels));
      for (auto& z : pts) {
        const double re = u(rng);
        const double im = u(rng);
        z = cplx(re, im);
      }
      SpacingSpec s2 = sp;
      s2.exclude_zero = false;
      auto r = spacing_analysis(pts, s2, c.tol.zero);
      r.source = "poisson2d";
      res.push_back(r);
      t.ok = true;
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    m.tasks.push_back(t);
  }

  io::CsvWriter w(c.out / "spacing_stats.csv",
                  {"row_id", "source", "g1", "g2", "levels", "duplicates", "mean_r", "mean_cos", "ks_poisson2d",
                   "ks_ginue", "angle_chi2", "angle_p_value"});
  m.outputs.push_back(w.path());
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (i < c.points.size() && !m.tasks[i].ok) continue;
    const auto& r = res[i];
    w.row(i, r.source, r.g1, r.g2, r.levels, r.duplicates, r.mean_r, r.mean_cos, r.ks_poisson, r.ks_ginue, r.chi2,
          r.p_value);
    const auto hp = c.out / ("histogram_" + std::to_string(i) + ".csv");
    io::CsvWriter h(hp, {"bin_left", "bin_right", "empirical_density", "poisson2d", "ginue"});
    for (const auto& row : r.histogram) h.row(row.bin_left, row.bin_right, row.empirical_density, row.poisson2d, row.ginue);
    m.outputs.push_back(hp);
    if (!r.ratios.empty()) {
      const auto zp = c.out / ("ratios_" + std::to_string(i) + ".csv");
      io::CsvWriter zw(zp, {"re", "im"});
      for (const auto& z : r.ratios) zw.row(z.real(), z.imag());
      m.outputs.push_back(zp);
    }
  }
  return m;
}

inline RunManifest cmd_dynamics(const SweepConfig& c) {
  RunManifest m;
  const auto& d = c.dynamics;
  std::vector<std::vector<ObservableRow>> rows(d.points.size());
  const InitialEnsemble ens = initial_ensemble(c.model, d.ensemble);
  m.tasks = run_tasks(
      d.points.size(), c.jobs,
      [&](std::size_t i) {
        return "config " + std::to_string(i) + " (g2=" + io::fmt_double(d.points[i].g2) +
               ", omega_d=" + io::fmt_double(d.points[i].omega_d) + ", kappa=" + io::fmt_double(d.points[i].kappa) + ")";
      },
      [&](std::size_t i) {
        DynamicsConfig dc;
        dc.base = c.model;
        dc.points = {d.points[i]};
        dc.record_levels = d.levels;
        dc.ensemble_size = d.ensemble;
        dc.mixed_ensemble = d.mixed_ensemble;
        dc.sector = c.sector;
        dc.strategy = d.strategy;
        dc.budget = c.budget();
        auto r = run_dynamics_experiment(dc);
        if (!r.errors.front().empty()) throw NumericalError(r.errors.front());
        for (auto& row : r.rows) row.config_id = i;
        rows[i] = std::move(r.rows);
      });
  io::CsvWriter w(c.out / "dynamics.csv", {"config_id", "g1", "g2", "kappa", "omega_d", "level", "t", "N_av", "S_spin",
                                           "S_boson", "S_total", "I"});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& r : rows[i])
      w.row(r.config_id, r.g1, r.g2, r.kappa, r.omega_d, r.level, r.t, r.n_av, r.s_spin, r.s_boson, r.s_total, r.mutual);
  io::CsvWriter e(c.out / "initial_ensemble.csv",
                  {"count", "mean_energy", "mean_energy_per_atom", "mean_energy_above_ground",
                   "mean_energy_above_ground_per_atom", "boundary_tie"});
  e.row(ens.states.size(), ens.mean_energy, ens.mean_energy_per_atom, ens.mean_energy_above_ground,
        ens.mean_energy_above_ground_per_atom, ens.boundary_tie ? 1 : 0);
  if (ens.boundary_tie)
    m.tasks.push_back({"initial ensemble", true, "warning: degenerate level at the ensemble boundary, tie broken by basis index", 0.0});
  m.outputs = {w.path(), e.path()};
  return m;
}

inline RunManifest cmd_critical_line(const SweepConfig& c) {
  RunManifest m;
  io::CsvWriter iso(c.out / "critical_point.csv", {"omega", "omega0", "kappa", "g_star_isotropic"});
  io::CsvWriter w(c.out / "critical_line.csv", {"g1", "g2", "residual", "note"});
  TaskRecord t{"isotropic critical coupling", false, "", 0.0};
  try {
    iso.row(c.model.omega, c.model.omega0, c.model.kappa, critical_coupling_isotropic(c.model));
    t.ok = true;
  } catch (const std::exception& e) {
    t.error = e.what();
  }
  m.tasks.push_back(t);
  for (double g1 : c.critical_g1) {
    TaskRecord r{"g1=" + io::fmt_double(g1), true, "", 0.0};
    try {
      const auto roots = critical_g2_given_g1(c.model, g1);
      if (roots.g2.empty()) w.row(g1, nan(), nan(), roots.note);
      for (std::size_t k = 0; k < roots.g2.size(); ++k) {
        if (std::abs(roots.residual[k]) > c.tol.critical_residual) {
          r.ok = false;
          r.error = "residual " + io::fmt_double(roots.residual[k]) + " exceeds tolerance";
        }
        w.row(g1, roots.g2[k], roots.residual[k], "");
      }
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    m.tasks.push_back(r);
  }
  m.outputs = {iso.path(), w.path()};
  return m;
}

/// Runs one experiment, writes the manifest and returns the exit code
/// (0 success, 2 partial failure).
inline int run(const SweepConfig& c) {
  fs::create_directories(c.out);
  if (c.cache) fs::create_directories(*c.cache);
  RunManifest m;
  switch (c.kind) {
    case Experiment::Spectrum: m = cmd_spectrum(c); break;
    case Experiment::GapScaling: m = cmd_gap_scaling(c); break;
    case Experiment::PrMap: m = cmd_pr_map(c); break;
    case Experiment::SpacingStats: m = cmd_spacing(c); break;
    case Experiment::Dynamics: m = cmd_dynamics(c); break;
    case Experiment::CriticalLine: m = cmd_critical_line(c); break;
  }
  m.command = to_string(c.kind);
  m.config_hash = config_hash(c);
  m.seed = c.seed;
  m.verify_outputs();
  m.write(c.out / "manifest.json");
  return m.all_ok() ? 0 : 2;
}

}  // namespace adm::cli
