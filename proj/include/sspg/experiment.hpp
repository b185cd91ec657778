#pragma once

// Experiment orchestration: JSON configs, the five experiment kinds, CSV/SVG
// artifacts and a manifest that hashes every file it lists.

#include "sspg/analysis.hpp"
#include "sspg/baseline.hpp"
#include "sspg/cfp.hpp"
#include "sspg/engine.hpp"
#include "sspg/sr.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sspg {

inline constexpr int kConfigFormatVersion = 1;

enum class ExperimentKind {
  AtomsScaling,
  IterationsComparison,
  RateSweep,
  CfpLinear,
  RecurrenceCheck
};

NLOHMANN_JSON_SERIALIZE_ENUM(ExperimentKind,
                             {{ExperimentKind::AtomsScaling, "AtomsScaling"},
                              {ExperimentKind::IterationsComparison,
                               "IterationsComparison"},
                              {ExperimentKind::RateSweep, "RateSweep"},
                              {ExperimentKind::CfpLinear, "CfpLinear"},
                              {ExperimentKind::RecurrenceCheck,
                               "RecurrenceCheck"}})

/// Raised for configs that fail validation (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ProblemConfig {
  // Scaling experiments sweep n over [n_start, n_stop] with m = m_ratio * n.
  std::size_t n_start = 5;
  std::size_t n_stop = 125;
  std::size_t n_step = 5;
  std::size_t m_ratio = 4;
  // Single-instance experiments.
  std::size_t n = 10;
  std::size_t m = 40;
  double alpha = 0.5;
  double lambda = 5.0;
  std::uint64_t instance_seed = 1000;
  /// "zero" or "gaussian" (standard normal, seeded by start_seed and n).
  std::string start = "gaussian";
  std::uint64_t start_seed = 99;

  std::vector<std::size_t> n_values() const {
    std::vector<std::size_t> out;
    if (n_step == 0) return out;
    for (std::size_t v = n_start; v <= n_stop; v += n_step) out.push_back(v);
    return out;
  }
};

struct ScheduleConfig {
  std::string kind = "polynomial";  // or "constant"
  double mu0 = 1.0;
  double gamma = 1.0;
  /// "absolute", or "clamp" to measure mu0 in units of 1/(2 L_f).
  std::string mu0_units = "absolute";
  bool clamp = true;  // clamp at 1/(2 L_f)
  std::vector<double> gammas = {0.5, 0.75};  // RateSweep

  StepsizeSchedule resolve(double lipschitz, double gamma_value) const {
    const double unit = mu0_units == "clamp" ? 1.0 / (2.0 * lipschitz) : 1.0;
    StepsizeSchedule s = kind == "constant"
                             ? StepsizeSchedule::constant(mu0 * unit)
                             : StepsizeSchedule::polynomial(mu0 * unit, gamma_value);
    return clamp ? s.clamped_for(lipschitz) : s;
  }
};

struct RunConfig {
  double epsilon = 1e-6;         // stopping distance to x*
  double reference_tol = 1e-8;   // gradient-mapping tolerance for x*
  double accuracy = 1e-3;        // IterationsComparison target
  std::size_t rounds = 10;
  std::size_t iterations_per_round = 0;  // 0: one pass (m iterations)
  std::size_t horizon = 10000;
  std::size_t fit_k_min = 100;
  std::size_t fit_k_max = 10000;
  double tail_fraction = 0.2;
  double slack = 5.0;
  std::size_t sspg_cap = 50000000;
  std::size_t pg_cap = 100000;
  std::size_t trend_n_min = 50;
  /// Allowance on the log-log slope of SSPG time in n for the linear-growth
  /// trend check.
  double trend_slope_tolerance = 0.1;
  bool record_wall_time = false;  // wall times in trace CSVs
};

struct CfpConfig {
  double angle = std::numbers::pi / 3.0;  // two-line instance
  std::string instance;                   // JSON instance path, overrides angle
  std::size_t kappa_samples = 2000;
  double kappa_radius = 0.0;  // 0: ten times the initial distance
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::RateSweep;
  ProblemConfig problem;
  ScheduleConfig schedule;
  RunConfig run;
  CfpConfig cfp;
  std::uint64_t seed_base = 1;
  std::size_t replicas = 100;
  unsigned threads = 1;
  std::string output_dir = "out";
  bool plot = false;

  void validate() const;
};

// ---------------------------------------------------------------------------
// JSON round trip

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  try {
    reject_unknown(j, allowed, where);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {
      {"format_version", kConfigFormatVersion},
      {"experiment", c.experiment},
      {"output_dir", c.output_dir},
      {"threads", c.threads},
      {"plot", c.plot},
      {"seeds", {{"base", c.seed_base}, {"replicas", c.replicas}}},
      {"problem",
       {{"n_start", c.problem.n_start},
        {"n_stop", c.problem.n_stop},
        {"n_step", c.problem.n_step},
        {"m_ratio", c.problem.m_ratio},
        {"n", c.problem.n},
        {"m", c.problem.m},
        {"alpha", c.problem.alpha},
        {"lambda", c.problem.lambda},
        {"instance_seed", c.problem.instance_seed},
        {"start", c.problem.start},
        {"start_seed", c.problem.start_seed}}},
      {"schedule",
       {{"kind", c.schedule.kind},
        {"mu0", c.schedule.mu0},
        {"gamma", c.schedule.gamma},
        {"mu0_units", c.schedule.mu0_units},
        {"clamp", c.schedule.clamp},
        {"gammas", c.schedule.gammas}}},
      {"run",
       {{"epsilon", c.run.epsilon},
        {"reference_tol", c.run.reference_tol},
        {"accuracy", c.run.accuracy},
        {"rounds", c.run.rounds},
        {"iterations_per_round", c.run.iterations_per_round},
        {"horizon", c.run.horizon},
        {"fit_k_min", c.run.fit_k_min},
        {"fit_k_max", c.run.fit_k_max},
        {"tail_fraction", c.run.tail_fraction},
        {"slack", c.run.slack},
        {"sspg_cap", c.run.sspg_cap},
        {"pg_cap", c.run.pg_cap},
        {"trend_n_min", c.run.trend_n_min},
        {"trend_slope_tolerance", c.run.trend_slope_tolerance},
        {"record_wall_time", c.run.record_wall_time}}},
      {"cfp",
       {{"angle", c.cfp.angle},
        {"instance", c.cfp.instance},
        {"kappa_samples", c.cfp.kappa_samples},
        {"kappa_radius", c.cfp.kappa_radius}}},
  };
}

/// Parses and validates a config; unknown keys are rejected at every level.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read_opt;
  detail::reject_unknown_keys(j,
                              {"format_version", "experiment", "output_dir",
                               "threads", "plot", "seeds", "problem",
                               "schedule", "run", "cfp"},
                              "config");
  if (!j.contains("format_version") ||
      !j.at("format_version").is_number_integer() ||
      j.at("format_version").get<int>() != kConfigFormatVersion)
    throw ConfigError("config: format_version must be " +
                      std::to_string(kConfigFormatVersion));
  if (!j.contains("experiment") || !j.at("experiment").is_string())
    throw ConfigError("config: 'experiment' is required");

  ExperimentConfig c;
  const auto name = j.at("experiment").get<std::string>();
  const nlohmann::json kind_json = name;
  c.experiment = kind_json.get<ExperimentKind>();
  if (nlohmann::json(c.experiment).get<std::string>() != name)
    throw ConfigError("config: unknown experiment '" + name + "'");

  read_opt(j, "output_dir", c.output_dir);
  read_opt(j, "threads", c.threads);
  read_opt(j, "plot", c.plot);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    detail::reject_unknown_keys(s, {"base", "replicas"}, "seeds");
    read_opt(s, "base", c.seed_base);
    read_opt(s, "replicas", c.replicas);
  }
  if (j.contains("problem")) {
    const auto& p = j.at("problem");
    detail::reject_unknown_keys(
        p,
        {"n_start", "n_stop", "n_step", "m_ratio", "n", "m", "alpha", "lambda",
         "instance_seed", "start", "start_seed"},
        "problem");
    read_opt(p, "n_start", c.problem.n_start);
    read_opt(p, "n_stop", c.problem.n_stop);
    read_opt(p, "n_step", c.problem.n_step);
    read_opt(p, "m_ratio", c.problem.m_ratio);
    read_opt(p, "n", c.problem.n);
    read_opt(p, "m", c.problem.m);
    read_opt(p, "alpha", c.problem.alpha);
    read_opt(p, "lambda", c.problem.lambda);
    read_opt(p, "instance_seed", c.problem.instance_seed);
    read_opt(p, "start", c.problem.start);
    read_opt(p, "start_seed", c.problem.start_seed);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    detail::reject_unknown_keys(
        s, {"kind", "mu0", "gamma", "mu0_units", "clamp", "gammas"}, "schedule");
    read_opt(s, "kind", c.schedule.kind);
    read_opt(s, "mu0", c.schedule.mu0);
    read_opt(s, "gamma", c.schedule.gamma);
    read_opt(s, "mu0_units", c.schedule.mu0_units);
    read_opt(s, "clamp", c.schedule.clamp);
    read_opt(s, "gammas", c.schedule.gammas);
  }
  if (j.contains("run")) {
    const auto& r = j.at("run");
    detail::reject_unknown_keys(
        r,
        {"epsilon", "reference_tol", "accuracy", "rounds",
         "iterations_per_round", "horizon", "fit_k_min", "fit_k_max",
         "tail_fraction", "slack", "sspg_cap", "pg_cap", "trend_n_min",
         "trend_slope_tolerance", "record_wall_time"},
        "run");
    read_opt(r, "epsilon", c.run.epsilon);
    read_opt(r, "reference_tol", c.run.reference_tol);
    read_opt(r, "accuracy", c.run.accuracy);
    read_opt(r, "rounds", c.run.rounds);
    read_opt(r, "iterations_per_round", c.run.iterations_per_round);
    read_opt(r, "horizon", c.run.horizon);
    read_opt(r, "fit_k_min", c.run.fit_k_min);
    read_opt(r, "fit_k_max", c.run.fit_k_max);
    read_opt(r, "tail_fraction", c.run.tail_fraction);
    read_opt(r, "slack", c.run.slack);
    read_opt(r, "sspg_cap", c.run.sspg_cap);
    read_opt(r, "pg_cap", c.run.pg_cap);
    read_opt(r, "trend_n_min", c.run.trend_n_min);
    read_opt(r, "trend_slope_tolerance", c.run.trend_slope_tolerance);
    read_opt(r, "record_wall_time", c.run.record_wall_time);
  }
  if (j.contains("cfp")) {
    const auto& f = j.at("cfp");
    detail::reject_unknown_keys(
        f, {"angle", "instance", "kappa_samples", "kappa_radius"}, "cfp");
    read_opt(f, "angle", c.cfp.angle);
    read_opt(f, "instance", c.cfp.instance);
    read_opt(f, "kappa_samples", c.cfp.kappa_samples);
    read_opt(f, "kappa_radius", c.cfp.kappa_radius);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

/// SSPG_SEED, when set, replaces the base seed.
inline void apply_environment(ExperimentConfig& c) {
  if (const char* env = std::getenv("SSPG_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw ConfigError("SSPG_SEED must be an unsigned integer");
    c.seed_base = v;
  }
}

inline void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  if (!(problem.alpha > 0.0)) fail("problem.alpha must be positive");
  if (!(problem.lambda >= 0.0)) fail("problem.lambda must be >= 0");
  if (problem.m_ratio < 1) fail("problem.m_ratio must be >= 1");
  if (problem.n < 1 || problem.m < 1) fail("problem.n and problem.m must be >= 1");
  if (problem.start != "zero" && problem.start != "gaussian")
    fail("problem.start must be 'zero' or 'gaussian'");
  if (schedule.kind != "constant" && schedule.kind != "polynomial")
    fail("schedule.kind must be 'constant' or 'polynomial'");
  if (schedule.mu0_units != "absolute" && schedule.mu0_units != "clamp")
    fail("schedule.mu0_units must be 'absolute' or 'clamp'");
  if (!(schedule.mu0 > 0.0)) fail("schedule.mu0 must be positive");
  auto check_gamma = [&](double g) {
    if (!(g > 0.0 && g <= 1.0)) fail("schedule gamma values must lie in (0, 1]");
  };
  check_gamma(schedule.gamma);
  for (double g : schedule.gammas) check_gamma(g);
  if (!(run.epsilon > 0.0) || !(run.reference_tol > 0.0) || !(run.accuracy > 0.0))
    fail("run tolerances must be positive");
  if (run.rounds < 1) fail("run.rounds must be >= 1");
  if (run.horizon < 1) fail("run.horizon must be >= 1");
  if (!(run.fit_k_min > 0 && run.fit_k_min < run.fit_k_max))
    fail("run.fit_k_min < run.fit_k_max required");
  if (experiment == ExperimentKind::RateSweep && run.fit_k_max > run.horizon)
    fail("run.fit_k_max exceeds run.horizon");
  if (!(run.tail_fraction > 0.0 && run.tail_fraction <= 0.5))
    fail("run.tail_fraction must lie in (0, 0.5]");
  if (!(run.slack >= 0.0)) fail("run.slack must be >= 0");
  if (run.sspg_cap < 1 || run.pg_cap < 1) fail("run caps must be >= 1");
  if (replicas < 2 &&
      (experiment == ExperimentKind::RateSweep ||
       experiment == ExperimentKind::CfpLinear ||
       experiment == ExperimentKind::RecurrenceCheck))
    fail("seeds.replicas must be >= 2");
  if (threads < 1) fail("threads must be >= 1");
  if (cfp.kappa_samples < 100) fail("cfp.kappa_samples must be >= 100");
  if (!(cfp.kappa_radius >= 0.0)) fail("cfp.kappa_radius must be >= 0");
  if (output_dir.empty()) fail("output_dir must not be empty");
}

// ---------------------------------------------------------------------------
// Manifest

inline std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (is.read(buf, sizeof buf) || is.gcount() > 0)
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(is.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

struct ArtifactEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
  bool deterministic = true;
};

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Manifest {
  std::string output_dir;
  nlohmann::json config;
  std::vector<ArtifactEntry> artifacts;
  std::vector<std::string> unconverged;
  std::vector<Verdict> verdicts;
  std::size_t runs = 0;
  nlohmann::json results = nlohmann::json::object();

  bool all_pass() const {
    for (const auto& v : verdicts)
      if (!v.pass) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : artifacts)
      arts.push_back({{"path", a.path},
                      {"sha256", a.sha256},
                      {"bytes", a.bytes},
                      {"deterministic", a.deterministic}});
    nlohmann::json verd = nlohmann::json::array();
    for (const auto& v : verdicts)
      verd.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
    return {{"format_version", kConfigFormatVersion},
            {"config", config},
            {"runs", runs},
            {"artifacts", arts},
            {"unconverged", unconverged},
            {"verdicts", verd},
            {"results", results},
            {"all_pass", all_pass()}};
  }
};

/// Re-hashes every listed artifact; returns the paths that are missing or
/// whose hash changed.
inline std::vector<std::string> verify_manifest(const std::string& output_dir) {
  namespace fs = std::filesystem;
  std::ifstream is(fs::path(output_dir) / "manifest.json");
  if (!is) throw std::runtime_error("no manifest.json in '" + output_dir + "'");
  const auto j = nlohmann::json::parse(is);
  std::vector<std::string> bad;
  for (const auto& a : j.at("artifacts")) {
    const auto rel = a.at("path").get<std::string>();
    const auto full = (fs::path(output_dir) / rel).string();
    if (!fs::exists(full) || sha256_file(full) != a.at("sha256").get<std::string>())
      bad.push_back(rel);
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Experiments

namespace detail {

class ArtifactWriter {
 public:
  explicit ArtifactWriter(Manifest& manifest) : manifest_(manifest) {
    std::filesystem::create_directories(manifest.output_dir);
  }

  std::string path_of(const std::string& name) const {
    return (std::filesystem::path(manifest_.output_dir) / name).string();
  }

  void text(const std::string& name, const std::string& content,
            bool deterministic = true) {
    auto os = open_for_write(path_of(name));
    os << content;
    finish_write(os, path_of(name));
    add(name, deterministic);
  }

  void trace(const std::string& name, const Trace& t, bool wall_time) {
    emit_trace_csv(t, path_of(name), wall_time);
    add(name, !wall_time);
  }

  void mean_trace(const std::string& name, const MeanTrace& t) {
    emit_trace_csv(t, path_of(name));
    add(name, true);
  }

 private:
  void add(const std::string& name, bool deterministic) {
    const auto full = path_of(name);
    manifest_.artifacts.push_back({name, sha256_file(full),
                                   std::filesystem::file_size(full),
                                   deterministic});
  }
  Manifest& manifest_;
};

inline Vector start_point(const ProblemConfig& p, std::size_t n) {
  if (p.start == "zero") return Vector::Zero(static_cast<Eigen::Index>(n));
  Rng rng = Rng(p.start_seed).split(n);
  Vector x(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
  return x;
}

inline double wall_time(const Trace& t) {
  return t.records.empty() ? 0.0 : t.records.back().wall_time_s.value_or(0.0);
}

/// Wall time and iteration at which ||x^k - x*|| first drops to `accuracy`.
inline std::optional<std::pair<std::size_t, double>> first_reach(
    const Trace& t, double accuracy) {
  for (const auto& r : t.records)
    if (r.sq_dist_to_opt && std::sqrt(*r.sq_dist_to_opt) <= accuracy)
      return std::make_pair(r.k, r.wall_time_s.value_or(0.0));
  return std::nullopt;
}

inline std::string csv_row(std::initializer_list<std::string> cells) {
  std::string out;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  return out + '\n';
}

inline std::string num(double v) { return format_double(v); }
inline std::string num(std::size_t v) { return std::to_string(v); }

inline PlotSeries series_from(const MeanTrace& t, const std::string& label,
                              bool skip_zero_k) {
  PlotSeries s{label, {}, {}};
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (skip_zero_k && t.k[i] == 0) continue;
    s.x.push_back(static_cast<double>(t.k[i]));
    s.y.push_back(t.mean[i]);
  }
  return s;
}

inline PlotSeries series_from(const Trace& t, const std::string& label) {
  PlotSeries s{label, {}, {}};
  for (const auto& r : t.records)
    if (r.sq_dist_to_opt) {
      s.x.push_back(static_cast<double>(r.k));
      s.y.push_back(std::sqrt(*r.sq_dist_to_opt));
    }
  return s;
}

inline void run_atoms_scaling(const ExperimentConfig& c, Manifest& m,
                              ArtifactWriter& out) {
  std::string times = "n,m,t_pg_s,t_sspg_s,iters_pg,iters_sspg\n";
  std::string iters =
      "n,m,iters_pg,iters_sspg,pg_converged,sspg_converged,reference_residual\n";
  std::vector<double> ns, t_pg, t_sspg;
  bool all_converged = true;
  for (std::size_t n : c.problem.n_values()) {
    const std::size_t rows = c.problem.m_ratio * n;
    const SRProblem p = generate_sr_instance(n, rows, c.problem.alpha,
                                             c.problem.lambda,
                                             c.problem.instance_seed + n);
    const ReferenceSolution ref = reference_solution(p, c.run.reference_tol);
    const Vector x0 = start_point(c.problem, n);

    PGConfig cfg = PGConfig::defaults_for(p);
    cfg.outer_tol = c.run.epsilon;
    cfg.outer_cap = c.run.pg_cap;
    PGRunOptions pg_opts;
    pg_opts.x0 = x0;
    pg_opts.record_objective = false;
    const PGTrace pg = run_pg(p, cfg, ref.x, pg_opts);

    const SRConstants k = sr_constants(p);
    const StepsizeSchedule sched =
        c.schedule.resolve(k.theory.lipschitz, c.schedule.gamma);
    RunOptions ro;
    ro.x0 = x0;
    ro.record_objective = false;
    const Trace ss = run_sspg(
        SRSmooth(p), SRProx(p), sched, c.seed_base + n,
        StoppingRule::dist_to_reference(c.run.epsilon, c.run.sspg_cap), ref.x,
        ro);
    m.runs += 2;
    if (!pg.trace.converged) m.unconverged.push_back("pg n=" + std::to_string(n));
    if (!ss.converged) m.unconverged.push_back("sspg n=" + std::to_string(n));
    all_converged &= pg.trace.converged && ss.converged;

    ns.push_back(static_cast<double>(n));
    t_pg.push_back(wall_time(pg.trace));
    t_sspg.push_back(wall_time(ss));
    times += csv_row({num(n), num(rows), num(t_pg.back()), num(t_sspg.back()),
                      num(pg.trace.iterations), num(ss.iterations)});
    iters += csv_row({num(n), num(rows), num(pg.trace.iterations),
                      num(ss.iterations), pg.trace.converged ? "1" : "0",
                      ss.converged ? "1" : "0", num(ref.residual)});
  }
  out.text("atoms_scaling.csv", times, false);
  out.text("atoms_scaling_iterations.csv", iters, true);
  if (c.plot && !ns.empty()) {
    out.text("atoms_scaling.svg",
             render_svg({{"prox (PG)", ns, t_pg}, {"SSPG", ns, t_sspg}},
                        "time to reach x* vs atoms n", false, false),
             false);
  }

  m.verdicts.push_back({"all runs reach x*", all_converged,
                        std::to_string(m.unconverged.size()) + " unconverged"});
  std::vector<double> lx, ls, lp;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] < static_cast<double>(c.run.trend_n_min)) continue;
    if (!(t_sspg[i] > 0.0) || !(t_pg[i] > 0.0)) continue;
    lx.push_back(std::log(ns[i]));
    ls.push_back(std::log(t_sspg[i]));
    lp.push_back(std::log(t_pg[i]));
  }
  if (lx.size() >= 2) {
    const LinearFit fs = least_squares_line(lx, ls);
    const LinearFit fp = least_squares_line(lx, lp);
    m.results["sspg_time_loglog_slope"] = fs.slope;
    m.results["pg_time_loglog_slope"] = fp.slope;
    m.verdicts.push_back({"SSPG time grows at most linearly in n",
                          fs.slope <= 1.0 + c.run.trend_slope_tolerance,
                          "log-log slope " + num(fs.slope)});
    m.verdicts.push_back({"PG time grows faster than SSPG time",
                          fp.slope > fs.slope,
                          "PG slope " + num(fp.slope) + " vs SSPG slope " +
                              num(fs.slope)});
  }
}

inline void run_iterations_comparison(const ExperimentConfig& c, Manifest& m,
                                      ArtifactWriter& out) {
  std::string summary =
      "n,m,sspg_iterations,pg_iterations,k_sspg_accuracy,k_pg_accuracy,"
      "sspg_best_dist,sspg_final_dist,pg_final_dist\n";
  std::string timing = "n,m,t_sspg_total_s,t_pg_total_s,t_sspg_accuracy_s,t_pg_accuracy_s\n";
  const auto ns = c.problem.n_values();
  for (std::size_t n : ns) {
    const std::size_t rows = c.problem.m_ratio * n;
    const SRProblem p = generate_sr_instance(n, rows, c.problem.alpha,
                                             c.problem.lambda,
                                             c.problem.instance_seed + n);
    const ReferenceSolution ref = reference_solution(p, c.run.reference_tol);
    const Vector x0 = start_point(c.problem, n);
    const std::size_t per_round =
        c.run.iterations_per_round ? c.run.iterations_per_round : rows;

    const SRConstants k = sr_constants(p);
    RunOptions ro;
    ro.x0 = x0;
    ro.record_objective = false;
    const Trace ss = run_sspg(SRSmooth(p), SRProx(p),
                              c.schedule.resolve(k.theory.lipschitz, c.schedule.gamma),
                              c.seed_base + n,
                              StoppingRule::max_iter(c.run.rounds * per_round),
                              ref.x, ro);
    PGConfig cfg = PGConfig::defaults_for(p);
    cfg.outer_tol = c.run.epsilon;
    cfg.outer_cap = c.run.pg_cap;
    PGRunOptions po;
    po.x0 = x0;
    po.record_objective = false;
    const PGTrace pg = run_pg(p, cfg, ref.x, po);
    m.runs += 2;
    if (!pg.trace.converged) m.unconverged.push_back("pg n=" + std::to_string(n));

    const std::string suffix = "_n" + std::to_string(n) + ".csv";
    out.trace("progress_sspg" + suffix, ss, c.run.record_wall_time);
    out.trace("progress_pg" + suffix, pg.trace, c.run.record_wall_time);
    if (c.plot) {
      out.text("progress_n" + std::to_string(n) + ".svg",
               render_svg({series_from(pg.trace, "prox (PG)"),
                           series_from(ss, "SSPG")},
                          "||x^k - x*|| vs iteration, n=" + std::to_string(n),
                          false, true));
    }

    double best = kInf;
    for (const auto& r : ss.records) best = std::min(best, std::sqrt(*r.sq_dist_to_opt));
    const auto s_hit = first_reach(ss, c.run.accuracy);
    const auto p_hit = first_reach(pg.trace, c.run.accuracy);
    auto k_or_empty = [](const auto& hit) {
      return hit ? std::to_string(hit->first) : std::string();
    };
    auto t_or_empty = [](const auto& hit) {
      return hit ? num(hit->second) : std::string();
    };
    summary += csv_row({num(n), num(rows), num(ss.iterations),
                        num(pg.trace.iterations), k_or_empty(s_hit),
                        k_or_empty(p_hit), num(best),
                        num(std::sqrt(*ss.records.back().sq_dist_to_opt)),
                        num(std::sqrt(*pg.trace.records.back().sq_dist_to_opt))});
    timing += csv_row({num(n), num(rows), num(wall_time(ss)),
                       num(wall_time(pg.trace)), t_or_empty(s_hit),
                       t_or_empty(p_hit)});

    if (n == ns.back()) {
      const bool pass = s_hit && p_hit && s_hit->second < p_hit->second;
      std::string detail = "largest n=" + std::to_string(n) + ": SSPG ";
      detail += s_hit ? "reached " + num(c.run.accuracy) + " at t=" + num(s_hit->second)
                      : "best distance " + num(best) + " never reached " +
                            num(c.run.accuracy);
      detail += p_hit ? "; PG reached it at t=" + num(p_hit->second)
                      : "; PG never reached it";
      m.verdicts.push_back({"SSPG rounds reach accuracy faster than PG", pass, detail});
    }
  }
  out.text("iterations_summary.csv", summary, true);
  out.text("iterations_timing.csv", timing, false);
}

inline void run_rate_sweep(const ExperimentConfig& c, Manifest& m,
                           ArtifactWriter& out) {
  const SRProblem p = generate_sr_instance(c.problem.n, c.problem.m,
                                           c.problem.alpha, c.problem.lambda,
                                           c.problem.instance_seed);
  const ReferenceSolution ref = reference_solution(p, c.run.reference_tol);
  const SRConstants k = sr_constants(p);
  MonteCarloOptions mc;
  mc.x0 = start_point(c.problem, c.problem.n);
  mc.threads = c.threads;

  std::string rates = "gamma,mu0,slope,intercept,r_squared,k_min,k_max,pass\n";
  std::vector<PlotSeries> plots;
  for (double gamma : c.schedule.gammas) {
    const StepsizeSchedule sched = c.schedule.resolve(k.theory.lipschitz, gamma);
    const MeanTrace mean =
        run_monte_carlo(SRSmooth(p), SRProx(p), sched, c.seed_base, c.replicas,
                        c.run.horizon, ref.x, mc);
    m.runs += c.replicas;
    const RateReport r =
        fit_rate_exponent(mean, c.run.fit_k_min, c.run.fit_k_max, gamma);
    out.mean_trace("rate_gamma_" + num(gamma) + ".csv", mean);
    plots.push_back(series_from(mean, "gamma=" + num(gamma), true));
    rates += csv_row({num(gamma), num(sched.mu0), num(r.slope), num(r.intercept),
                      num(r.r_squared), num(r.k_min), num(r.k_max),
                      r.pass ? "1" : "0"});
    m.verdicts.push_back({"rate exponent gamma=" + num(gamma), r.pass,
                          "slope " + num(r.slope) + ", R^2 " + num(r.r_squared)});
  }
  out.text("rates.csv", rates, true);
  if (c.plot)
    out.text("rates.svg", render_svg(plots, "E||x^k - x*||^2", true, true));
}

inline void run_recurrence_check(const ExperimentConfig& c, Manifest& m,
                                 ArtifactWriter& out) {
  const SRProblem p = generate_sr_instance(c.problem.n, c.problem.m,
                                           c.problem.alpha, c.problem.lambda,
                                           c.problem.instance_seed);
  const ReferenceSolution ref = reference_solution(p, c.run.reference_tol);
  const SigmaEstimate sig = zero_mean_subgradient_sigma(p, ref.x, 1e-6);
  TheoryConstants theory = sr_constants(p).theory;
  theory.sigma = sig.sigma;
  const StepsizeSchedule sched = c.schedule.resolve(theory.lipschitz, c.schedule.gamma);
  MonteCarloOptions mc;
  mc.x0 = start_point(c.problem, c.problem.n);
  mc.threads = c.threads;
  const MeanTrace mean = run_monte_carlo(SRSmooth(p), SRProx(p), sched,
                                         c.seed_base, c.replicas,
                                         c.run.horizon, ref.x, mc);
  m.runs += c.replicas;
  const RecurrenceReport rec = check_recurrence(mean, theory, sched, c.run.slack);
  const auto bound = recurrence_bound_curve(sched, theory, mean.mean[0], c.run.horizon);
  std::size_t curve_violations = 0;
  for (std::size_t i = 0; i < mean.size(); ++i)
    if (mean.mean[i] > bound[i] + c.run.slack * mean.stderr_[i]) ++curve_violations;

  const Plateau tail = plateau(mean, c.run.tail_fraction);
  const bool constant = sched.kind == StepsizeKind::Constant;
  const double mu = stepsize(sched, 1);
  const double plateau_bound =
      mu / theory.strong_convexity * sig.sigma * 1.1 + c.run.slack * tail.stderr_;

  out.mean_trace("recurrence_mean.csv", mean);
  out.text("recurrence.csv",
           "checked,violations,sigma_hat,certificate,plateau,plateau_bound,"
           "bound_curve_violations\n" +
               csv_row({num(rec.checked), num(rec.violations.size()),
                        num(sig.sigma), num(sig.certificate), num(tail.level),
                        constant ? num(plateau_bound) : std::string(),
                        num(curve_violations)}));
  if (c.plot) {
    PlotSeries b{"recurrence bound", {}, {}};
    for (std::size_t i = 1; i < bound.size(); ++i) {
      b.x.push_back(static_cast<double>(i));
      b.y.push_back(bound[i]);
    }
    out.text("recurrence.svg",
             render_svg({series_from(mean, "E||x^k - x*||^2", true), b},
                        "mean-square error vs recurrence bound", true, true));
  }
  m.results["sigma_hat"] = sig.sigma;
  m.results["certificate"] = sig.certificate;
  m.results["plateau"] = tail.level;
  m.verdicts.push_back({"zero-mean representation found", sig.certificate <= 1e-6,
                        "certificate " + num(sig.certificate)});
  m.verdicts.push_back({"recurrence holds", rec.ok(),
                        num(rec.violations.size()) + " of " + num(rec.checked) +
                            " transitions violate"});
  m.verdicts.push_back({"trace below bound curve", curve_violations == 0,
                        num(curve_violations) + " points above"});
  if (constant)
    m.verdicts.push_back({"plateau below (mu/sigma_f) Sigma", tail.level <= plateau_bound,
                          "plateau " + num(tail.level) + " vs " + num(plateau_bound)});
}

inline void run_cfp_linear(const ExperimentConfig& c, Manifest& m,
                           ArtifactWriter& out) {
  CFPProblem p;
  if (!c.cfp.instance.empty()) {
    std::ifstream is(c.cfp.instance);
    if (!is) throw ConfigError("cannot open CFP instance '" + c.cfp.instance + "'");
    p = cfp_from_json(nlohmann::json::parse(is));
  } else {
    p = two_line_instance(c.cfp.angle);
  }
  const auto n = static_cast<std::size_t>(p.dimension());
  const Vector x0 = start_point(c.problem, n);
  const double d0 = cfp_distance(p, x0).distance;
  const double radius = c.cfp.kappa_radius > 0.0 ? c.cfp.kappa_radius : 10.0 * d0;
  const double kappa = estimate_kappa(p, c.cfp.kappa_samples, radius, c.seed_base);

  const auto seeds = seed_range(c.seed_base, c.replicas);
  const MeanTrace mean = monte_carlo(
      ZeroSmooth(n, p.sets.size()), IndicatorProx(p),
      StepsizeSchedule::constant(1.0), std::span<const std::uint64_t>(seeds),
      c.run.horizon, x0,
      [&p](const Vector& x) {
        const double d = cfp_distance(p, x).distance;
        return d * d;
      },
      c.threads);
  m.runs += c.replicas;

  std::size_t above = 0;
  for (std::size_t i = 0; i < mean.size(); ++i)
    if (mean.mean[i] > cfp_linear_bound(mean.k[i], kappa, d0 * d0) * (1.0 + 1e-12))
      ++above;  // averaging R copies of d0^2 may round up by an ulp
  const LinearFit fit = fit_geometric_rate(mean, 0, c.run.horizon);

  out.mean_trace("cfp_mean.csv", mean);
  out.text("cfp.csv",
           "kappa_hat,d0_sq,contraction,r_squared,points_above_bound\n" +
               csv_row({num(kappa), num(d0 * d0), num(std::exp(fit.slope)),
                        num(fit.r_squared), num(above)}));
  if (c.plot) {
    PlotSeries b{"(1 - kappa/8)^k d0^2", {}, {}};
    for (std::size_t k = 0; k <= c.run.horizon; ++k) {
      b.x.push_back(static_cast<double>(k));
      b.y.push_back(cfp_linear_bound(k, kappa, d0 * d0));
    }
    out.text("cfp.svg", render_svg({series_from(mean, "E dist^2", false), b},
                                    "randomized alternating projections",
                                    false, true));
  }
  m.results["kappa_hat"] = kappa;
  m.results["contraction"] = std::exp(fit.slope);
  m.verdicts.push_back({"linear envelope holds", above == 0,
                        num(above) + " points above (1 - kappa/8)^k d0^2"});
  m.verdicts.push_back({"geometric fit", fit.r_squared >= 0.95,
                        "R^2 " + num(fit.r_squared)});
}

}  // namespace detail

/// Runs the configured experiment, writes its artifacts and manifest.json
/// into the output directory, and returns the manifest.
inline Manifest run_experiment(const ExperimentConfig& config) {
  config.validate();
  Manifest m;
  m.output_dir = config.output_dir;
  m.config = config_to_json(config);
  detail::ArtifactWriter out(m);
  switch (config.experiment) {
    case ExperimentKind::AtomsScaling:
      detail::run_atoms_scaling(config, m, out);
      break;
    case ExperimentKind::IterationsComparison:
      detail::run_iterations_comparison(config, m, out);
      break;
    case ExperimentKind::RateSweep:
      detail::run_rate_sweep(config, m, out);
      break;
    case ExperimentKind::RecurrenceCheck:
      detail::run_recurrence_check(config, m, out);
      break;
    case ExperimentKind::CfpLinear:
      detail::run_cfp_linear(config, m, out);
      break;
  }
  const auto path = out.path_of("manifest.json");
  auto os = detail::open_for_write(path);
  os << m.to_json().dump(2) << '\n';
  detail::finish_write(os, path);
  return m;
}

}  // namespace sspg
