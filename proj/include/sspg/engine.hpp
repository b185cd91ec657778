#pragma once

// Stochastic splitting proximal gradient iteration
//
//   y^k     = x^k - mu_k grad f(x^k; xi_k)
//   x^{k+1} = prox_{h, mu_k}(y^k; xi_k)
//
// with single-run traces, seed-replicated Monte-Carlo means and an empirical
// check of the mean-square recurrence
//
//   E||x^{k+1} - x*||^2 <= (1 - sigma_f mu_k) E||x^k - x*||^2 + mu_k^2 Sigma.

#include "sspg/core.hpp"
#include "sspg/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sspg {

struct SolverState {
  Vector x;
  std::size_t k = 0;  // completed iterations
  Rng rng;
  std::optional<SampleIndex> last_sample;
};

inline SolverState make_state(Vector x0, std::uint64_t seed) {
  return SolverState{std::move(x0), 0, Rng(seed), std::nullopt};
}

/// One SSPG iteration with stepsize mu. Draws exactly one sample.
template <SmoothOracle S, ProxOracle P>
SolverState sspg_step(const S& smooth, const P& prox, SolverState state,
                      double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("sspg_step: mu <= 0");
  const SampleIndex xi{state.rng.below(smooth.components())};
  Vector y = state.x - mu * smooth.grad(state.x, xi);
  state.x = prox.prox(y, xi, mu);
  if (!state.x.allFinite()) {
    throw std::runtime_error("sspg_step: non-finite iterate at k=" +
                             std::to_string(state.k + 1) + " with mu=" +
                             std::to_string(mu) +
                             " (stepsize too large for this problem?)");
  }
  ++state.k;
  state.last_sample = xi;
  return state;
}

// ---------------------------------------------------------------------------
// Traces

struct TraceRecord {
  std::size_t k = 0;
  std::optional<double> sq_dist_to_opt;
  std::optional<double> objective;
  std::optional<double> dist_to_feasible;
  std::optional<double> wall_time_s;

  bool operator==(const TraceRecord&) const = default;
};

struct Trace {
  std::vector<TraceRecord> records;
  std::uint64_t seed = 0;
  std::string schedule;
  bool converged = false;
  std::size_t iterations = 0;
  Vector final_x;

  bool operator==(const Trace& o) const {
    return records == o.records && seed == o.seed && schedule == o.schedule &&
           converged == o.converged && iterations == o.iterations &&
           final_x.size() == o.final_x.size() && final_x == o.final_x;
  }
};

/// Every iteration up to 1e5 is kept; beyond that only powers of two.
inline bool keep_record(std::size_t k) {
  constexpr std::size_t kDenseLimit = 100000;
  return k <= kDenseLimit || (k & (k - 1)) == 0;
}

enum class StopKind { MaxIter, DistToReference, GradientMapNorm };

struct StoppingRule {
  StopKind kind = StopKind::MaxIter;
  double threshold = 0.0;
  std::size_t cap = 1000;

  static StoppingRule max_iter(std::size_t cap) {
    return {StopKind::MaxIter, 0.0, cap};
  }
  static StoppingRule dist_to_reference(double eps, std::size_t cap) {
    return {StopKind::DistToReference, eps, cap};
  }
  static StoppingRule gradient_map(double eps, std::size_t cap) {
    return {StopKind::GradientMapNorm, eps, cap};
  }

  void validate() const {
    if (cap < 1) throw std::invalid_argument("stopping rule: cap must be >= 1");
    if (kind != StopKind::MaxIter && !(threshold > 0.0))
      throw std::invalid_argument("stopping rule: threshold must be positive");
  }
};

struct RunOptions {
  std::optional<Vector> x0;  // zero vector when absent
  bool record_objective = true;
  bool record_wall_time = true;
  /// Extra per-record metric, stored as dist_to_feasible.
  std::function<double(const Vector&)> feasibility;
  /// Window (iterations) of the sampled gradient-mapping average used by
  /// StopKind::GradientMapNorm; 0 means one pass over the components.
  std::size_t gradient_map_window = 0;
};

template <SmoothOracle S>
std::size_t oracle_dimension(const S& smooth, const RunOptions& opts,
                             const std::optional<Vector>& reference) {
  if (opts.x0) return static_cast<std::size_t>(opts.x0->size());
  if (reference) return static_cast<std::size_t>(reference->size());
  if constexpr (requires { smooth.dimension(); }) {
    return smooth.dimension();
  } else {
    throw std::invalid_argument("run_sspg: cannot infer problem dimension");
  }
}

/// Runs SSPG from x0 until the stopping rule fires or the cap is reached.
///
/// DistToReference stops once ||x^k - x*|| <= eps. GradientMapNorm stops once
/// the running mean of ||x^{k+1} - x^k|| / mu_k over the last window
/// iterations drops below eps (a sampled proximal-gradient mapping).
/// Reaching the cap leaves `converged == false`; MaxIter runs always report
/// converged. The reported wall time excludes instrumentation.
template <SmoothOracle S, ProxOracle P>
Trace run_sspg(const S& smooth, const P& prox,
               const StepsizeSchedule& schedule, std::uint64_t seed,
               const StoppingRule& stop,
               const std::optional<Vector>& reference = std::nullopt,
               const RunOptions& opts = {}) {
  schedule.validate();
  stop.validate();
  if (smooth.components() != prox.components())
    throw std::invalid_argument("run_sspg: oracle sizes differ");
  if (stop.kind == StopKind::DistToReference && !reference)
    throw std::invalid_argument("run_sspg: DistToReference needs a reference");

  const std::size_t dim = oracle_dimension(smooth, opts, reference);
  SolverState state =
      make_state(opts.x0 ? *opts.x0 : Vector::Zero(dim), seed);

  Trace trace;
  trace.seed = seed;
  trace.schedule = schedule.describe();

  using Clock = std::chrono::steady_clock;
  Clock::duration elapsed{};

  auto record = [&](const Vector& x, std::size_t k) {
    TraceRecord r;
    r.k = k;
    if (reference) r.sq_dist_to_opt = (x - *reference).squaredNorm();
    if (opts.record_objective) r.objective = eval_full_objective(smooth, prox, x);
    if (opts.feasibility) r.dist_to_feasible = opts.feasibility(x);
    if (opts.record_wall_time)
      r.wall_time_s = std::chrono::duration<double>(elapsed).count();
    trace.records.push_back(r);
  };

  auto reached = [&](const Vector& x) {
    return stop.kind == StopKind::DistToReference &&
           (x - *reference).norm() <= stop.threshold;
  };

  record(state.x, 0);
  if (reached(state.x)) {
    trace.converged = true;
    trace.final_x = state.x;
    return trace;
  }

  const std::size_t window = opts.gradient_map_window > 0
                                 ? opts.gradient_map_window
                                 : smooth.components();
  std::deque<double> gmap_window;
  double gmap_sum = 0.0;

  bool converged = stop.kind == StopKind::MaxIter;
  while (state.k < stop.cap) {
    const double mu = stepsize(schedule, state.k + 1);
    const auto start = Clock::now();
    Vector previous;
    if (stop.kind == StopKind::GradientMapNorm) previous = state.x;
    state = sspg_step(smooth, prox, std::move(state), mu);
    elapsed += Clock::now() - start;

    bool done = false;
    if (stop.kind == StopKind::DistToReference) {
      done = reached(state.x);
    } else if (stop.kind == StopKind::GradientMapNorm) {
      const double g = (state.x - previous).norm() / mu;
      gmap_window.push_back(g);
      gmap_sum += g;
      if (gmap_window.size() > window) {
        gmap_sum -= gmap_window.front();
        gmap_window.pop_front();
      }
      done = gmap_window.size() == window &&
             gmap_sum / static_cast<double>(window) <= stop.threshold;
    }
    if (done || state.k == stop.cap || keep_record(state.k))
      record(state.x, state.k);
    if (done) {
      converged = true;
      break;
    }
  }
  trace.converged = converged;
  trace.iterations = state.k;
  trace.final_x = std::move(state.x);
  return trace;
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimation of expectations

struct MeanTrace {
  std::vector<std::size_t> k;
  std::vector<double> mean;    // estimate of E[metric(x^k)]
  std::vector<double> stderr_; // standard error of the mean
  std::size_t replicas = 0;    // R

  std::size_t size() const { return k.size(); }
};

struct MonteCarloOptions {
  std::optional<Vector> x0;
  unsigned threads = 1;
};

/// Runs one replica per seed for `horizon` iterations and averages
/// metric(x^k) over replicas for every k in [0, horizon]. Replicas are
/// independent and may run on several threads; the reduction runs in seed
/// order so the result does not depend on the thread count.
template <SmoothOracle S, ProxOracle P, typename Metric>
MeanTrace monte_carlo(const S& smooth, const P& prox,
                      const StepsizeSchedule& schedule,
                      std::span<const std::uint64_t> seeds,
                      std::size_t horizon, const Vector& x0, Metric metric,
                      unsigned threads = 1) {
  schedule.validate();
  const std::size_t R = seeds.size();
  if (R < 2) throw std::invalid_argument("monte_carlo: need at least 2 seeds");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != R)
    throw std::invalid_argument("monte_carlo: seeds must be distinct");

  std::vector<double> mus(horizon);
  for (std::size_t k = 0; k < horizon; ++k) mus[k] = stepsize(schedule, k + 1);

  std::vector<std::vector<double>> values(R);
  auto replica = [&](std::size_t r) {
    std::vector<double>& out = values[r];
    out.resize(horizon + 1);
    SolverState state = make_state(x0, seeds[r]);
    out[0] = metric(state.x);
    for (std::size_t k = 0; k < horizon; ++k) {
      state = sspg_step(smooth, prox, std::move(state), mus[k]);
      out[k + 1] = metric(state.x);
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(R)));
  if (workers == 1) {
    for (std::size_t r = 0; r < R; ++r) replica(r);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t r = w; r < R; r += workers) replica(r);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  MeanTrace out;
  out.replicas = R;
  out.k.resize(horizon + 1);
  out.mean.resize(horizon + 1);
  out.stderr_.resize(horizon + 1);
  const double n = static_cast<double>(R);
  for (std::size_t k = 0; k <= horizon; ++k) {
    double sum = 0.0;
    for (std::size_t r = 0; r < R; ++r) sum += values[r][k];
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      const double d = values[r][k] - mean;
      ss += d * d;
    }
    out.k[k] = k;
    out.mean[k] = mean;
    out.stderr_[k] = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

inline std::vector<std::uint64_t> seed_range(std::uint64_t seed0,
                                             std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = seed0 + i;
  return seeds;
}

/// Seed-averaged E||x^k - x*||^2 over seeds seed0, ..., seed0 + R - 1.
template <SmoothOracle S, ProxOracle P>
MeanTrace run_monte_carlo(const S& smooth, const P& prox,
                          const StepsizeSchedule& schedule,
                          std::uint64_t seed0, std::size_t replicas,
                          std::size_t horizon, const Vector& reference,
                          const MonteCarloOptions& opts = {}) {
  const auto seeds = seed_range(seed0, replicas);
  const Vector x0 = opts.x0 ? *opts.x0 : Vector::Zero(reference.size());
  return monte_carlo(
      smooth, prox, schedule, std::span<const std::uint64_t>(seeds), horizon,
      x0, [&reference](const Vector& x) { return (x - reference).squaredNorm(); },
      opts.threads);
}

// ---------------------------------------------------------------------------
// Recurrence verification

struct RecurrenceViolation {
  std::size_t k;  // transition k -> k+1
  double lhs;     // mean[k+1]
  double rhs;     // (1 - sigma mu_k) mean[k] + mu_k^2 Sigma
  double allowed; // slack * combined stderr
};

struct RecurrenceReport {
  std::size_t checked = 0;
  std::vector<RecurrenceViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks mean[k+1] <= (1 - sigma_f mu_k) mean[k] + mu_k^2 Sigma at every
/// consecutive pair of the mean trace, allowing `slack` standard errors of
/// the difference (errors combined as if independent).
inline RecurrenceReport check_recurrence(const MeanTrace& trace,
                                         const TheoryConstants& constants,
                                         const StepsizeSchedule& schedule,
                                         double slack = 5.0) {
  RecurrenceReport report;
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    if (trace.k[i + 1] != trace.k[i] + 1) continue;
    const double mu = stepsize(schedule, trace.k[i] + 1);
    const double contraction = 1.0 - constants.strong_convexity * mu;
    const double rhs = contraction * trace.mean[i] + mu * mu * constants.sigma;
    const double se = std::hypot(trace.stderr_[i + 1],
                                 contraction * trace.stderr_[i]);
    const double allowed = slack * se;
    ++report.checked;
    if (trace.mean[i + 1] > rhs + allowed)
      report.violations.push_back({trace.k[i], trace.mean[i + 1], rhs, allowed});
  }
  return report;
}

}  // namespace sspg
