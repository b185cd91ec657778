#pragma once

// Deterministic full-batch proximal gradient for the SR objective, its
// Delta-composite inner prox, and the high-accuracy reference solver.

#include "sspg/engine.hpp"
#include "sspg/sr.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace sspg {

/// Upper estimate of ||D||_2^2: 20 power iterations on D^T D from the ones
/// vector, inflated by 10% and capped by ||D||_F^2.
inline double spectral_norm_sq_bound(const RowMatrix& D) {
  Vector v = Vector::Ones(D.cols()).normalized();
  double estimate = 0.0;
  for (int it = 0; it < 20; ++it) {
    Vector w = D.transpose() * (D * v);
    estimate = w.norm();
    if (estimate == 0.0) break;
    v = w / estimate;
  }
  return std::min(1.1 * estimate, D.squaredNorm());
}

struct CompositeProxResult {
  Vector z;
  Vector dual;             // u, with z = v - Delta^T u
  double residual = 0.0;   // sqrt(2 * duality gap) >= ||z - z*||
  std::size_t iterations = 0;
  bool converged = false;
};

/// prox of tau ||Delta .||_1 through its box-constrained dual
///
///   u* = argmin_{||u||_inf <= tau} 1/2 ||Delta^T u - v||^2,  z = v - Delta^T u*,
///
/// solved by FISTA with gradient restart. The primal-dual gap
/// tau ||Delta z||_1 - u^T Delta z bounds ||z - z*||^2 / 2.
class CompositeL1Prox {
 public:
  explicit CompositeL1Prox(RowMatrix analysis)
      : analysis_(std::move(analysis)),
        abs_analysis_(analysis_.cwiseAbs()),
        lipschitz_(spectral_norm_sq_bound(analysis_)) {}

  CompositeProxResult solve(double tau, const Vector& v, double tol,
                            std::size_t cap,
                            const Vector* warm_dual = nullptr) const {
    if (!(tau > 0.0)) throw std::invalid_argument("prox_l1_composite: tau <= 0");
    if (!(tol > 0.0) || cap < 1)
      throw std::invalid_argument("prox_l1_composite: bad tolerance or cap");
    const Eigen::Index p = analysis_.rows();
    auto project = [tau](const Vector& u) -> Vector {
      return u.cwiseMax(-tau).cwiseMin(tau);
    };

    CompositeProxResult res;
    Vector u = warm_dual && warm_dual->size() == p ? project(*warm_dual)
                                                   : Vector::Zero(p);
    Vector y = u, u_prev;
    double t = 1.0;
    const double L = lipschitz_ > 0.0 ? lipschitz_ : 1.0;

    // The gap is summed row by row as |d_r z| (tau - sgn(d_r z) u_r), each term
    // nonnegative. |d_r z| below its own rounding error is read as zero;
    // otherwise a kink row keeps the residual near sqrt(eps) forever.
    auto certify = [&](const Vector& dual) {
      res.z = v - analysis_.transpose() * dual;
      const Vector dz = analysis_ * res.z;
      const Vector err = (4.0 * std::numeric_limits<double>::epsilon()) *
                         (abs_analysis_ * res.z.cwiseAbs());
      double gap = 0.0;
      for (Eigen::Index r = 0; r < p; ++r) {
        const double mag = std::abs(dz[r]) - err[r];
        if (mag > 0.0) gap += mag * std::max(0.0, tau - std::copysign(1.0, dz[r]) * dual[r]);
      }
      res.residual = std::sqrt(2.0 * gap);
      return res.residual <= tol;
    };

    if (certify(u)) {
      res.dual = u;
      res.converged = true;
      return res;
    }
    for (std::size_t it = 1; it <= cap; ++it) {
      const Vector grad = analysis_ * (analysis_.transpose() * y - v);
      u_prev = u;
      u = project(y - grad / L);
      if ((y - u).dot(u - u_prev) > 0.0) t = 1.0;
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = u + ((t - 1.0) / t_next) * (u - u_prev);
      t = t_next;
      res.iterations = it;
      if (it % 5 == 0 || it == cap) {
        if (certify(u)) {
          res.converged = true;
          break;
        }
      }
    }
    res.dual = std::move(u);
    return res;
  }

  const RowMatrix& analysis() const { return analysis_; }
  double lipschitz() const { return lipschitz_; }

 private:
  RowMatrix analysis_;
  RowMatrix abs_analysis_;
  double lipschitz_;
};

inline CompositeProxResult prox_l1_composite(const RowMatrix& analysis,
                                             double tau, const Vector& v,
                                             double tol, std::size_t cap) {
  return CompositeL1Prox(analysis).solve(tau, v, tol, cap);
}

struct PGConfig {
  double lipschitz = 1.0;  // L' of the full smooth part, including alpha
  double inner_tol = 1e-10;
  std::size_t inner_cap = 20000;
  double outer_tol = 1e-6;
  std::size_t outer_cap = 100000;

  /// L' = ||T||_2^2 / m + alpha.
  static PGConfig defaults_for(const SRProblem& p) {
    PGConfig cfg;
    const Matrix gram = Matrix(p.dictionary.transpose() * p.dictionary);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    cfg.lipschitz = eig.eigenvalues().maxCoeff() / static_cast<double>(p.rows()) +
                    p.alpha;
    return cfg;
  }

  void validate() const {
    if (!(lipschitz > 0.0)) throw std::invalid_argument("PGConfig: L <= 0");
    if (!(inner_tol > 0.0) || !(outer_tol > 0.0))
      throw std::invalid_argument("PGConfig: tolerances must be positive");
    if (inner_cap < 1 || outer_cap < 1)
      throw std::invalid_argument("PGConfig: caps must be >= 1");
  }
};

struct PGStepResult {
  Vector x;
  double inner_residual = 0.0;
  bool inner_converged = true;
};

/// Proximal gradient on the SR objective with the ridge term kept in the
/// smooth part. Holds the inner dual between steps as a warm start.
class ProximalGradient {
 public:
  ProximalGradient(const SRProblem& problem, PGConfig cfg)
      : problem_(&problem), cfg_(cfg), inner_(problem.analysis) {
    problem.validate();
    cfg_.validate();
  }

  PGStepResult step(const Vector& x) {
    const SRProblem& p = *problem_;
    const Vector v = x - sr_full_gradient(p, x) / cfg_.lipschitz;
    if (p.lambda == 0.0) return {v, 0.0, true};
    auto res = inner_.solve(p.lambda / cfg_.lipschitz, v, cfg_.inner_tol,
                            cfg_.inner_cap, dual_.size() ? &dual_ : nullptr);
    dual_ = std::move(res.dual);
    return {std::move(res.z), res.residual, res.converged};
  }

  const PGConfig& config() const { return cfg_; }
  void reset() { dual_.resize(0); }

 private:
  const SRProblem* problem_;
  PGConfig cfg_;
  CompositeL1Prox inner_;
  Vector dual_;
};

/// One cold-started proximal gradient step.
inline PGStepResult pg_step(const SRProblem& problem, const Vector& x,
                            const PGConfig& cfg) {
  ProximalGradient pg(problem, cfg);
  return pg.step(x);
}

struct PGRunOptions {
  std::optional<Vector> x0;
  bool record_objective = true;
  bool record_wall_time = true;
};

struct PGTrace {
  Trace trace;
  double final_gradient_map = 0.0;
  bool inner_failures = false;  // some inner solve hit its cap
};

/// Iterates pg_step until ||x^k - x*|| <= outer_tol (with a reference) or the
/// gradient mapping L' ||x - pg_step(x)|| <= outer_tol (without one).
inline PGTrace run_pg(const SRProblem& problem, const PGConfig& cfg,
                      const std::optional<Vector>& reference = std::nullopt,
                      const PGRunOptions& opts = {}) {
  ProximalGradient pg(problem, cfg);
  Vector x = opts.x0 ? *opts.x0 : Vector::Zero(problem.cols());
  PGTrace out;
  Trace& trace = out.trace;
  trace.schedule = "proximal-gradient(L=" + std::to_string(cfg.lipschitz) + ")";

  using Clock = std::chrono::steady_clock;
  Clock::duration elapsed{};
  auto record = [&](const Vector& at, std::size_t k) {
    TraceRecord r;
    r.k = k;
    if (reference) r.sq_dist_to_opt = (at - *reference).squaredNorm();
    if (opts.record_objective) r.objective = sr_objective(problem, at);
    if (opts.record_wall_time)
      r.wall_time_s = std::chrono::duration<double>(elapsed).count();
    trace.records.push_back(r);
  };

  record(x, 0);
  if (reference && (x - *reference).norm() <= cfg.outer_tol) {
    trace.converged = true;
    trace.final_x = x;
    return out;
  }
  std::size_t k = 0;
  while (k < cfg.outer_cap) {
    const auto start = Clock::now();
    PGStepResult next = pg.step(x);
    elapsed += Clock::now() - start;
    out.inner_failures |= !next.inner_converged;
    out.final_gradient_map = cfg.lipschitz * (x - next.x).norm();
    if (!reference && out.final_gradient_map <= cfg.outer_tol) {
      trace.converged = true;  // x itself is certified; keep it
      break;
    }
    x = std::move(next.x);
    ++k;
    const bool done = reference && (x - *reference).norm() <= cfg.outer_tol;
    if (done || k == cfg.outer_cap || keep_record(k)) record(x, k);
    if (done) {
      trace.converged = true;
      break;
    }
  }
  trace.iterations = k;
  trace.final_x = std::move(x);
  return out;
}

struct ReferenceSolution {
  Vector x;
  double residual = 0.0;  // L' ||x - pg_step(x)||
  std::size_t iterations = 0;
};

/// High-accuracy minimizer by long-horizon proximal gradient, certified by
/// its gradient mapping. Throws when the certificate is not reached.
inline ReferenceSolution reference_solution(
    const SRProblem& problem, double tol,
    const std::optional<Vector>& x0 = std::nullopt,
    std::size_t outer_cap = 1000000) {
  if (!(tol > 0.0)) throw std::invalid_argument("reference_solution: tol <= 0");
  PGConfig cfg = PGConfig::defaults_for(problem);
  cfg.outer_tol = tol;
  cfg.inner_tol = tol / 100.0;
  cfg.inner_cap = 100000;
  cfg.outer_cap = outer_cap;
  PGRunOptions opts;
  opts.x0 = x0;
  opts.record_objective = false;
  opts.record_wall_time = false;
  PGTrace run = run_pg(problem, cfg, std::nullopt, opts);
  if (!run.trace.converged) {
    throw std::runtime_error(
        "reference_solution: no certificate after " +
        std::to_string(run.trace.iterations) +
        " iterations, gradient mapping " + std::to_string(run.final_gradient_map));
  }
  return {run.trace.final_x, run.final_gradient_map, run.trace.iterations};
}

}  // namespace sspg
