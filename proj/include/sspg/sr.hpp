#pragma once

// Multi-parametric cosparse representation
//
//   min_x  (1/2m) ||T x - y||^2 + lambda ||Delta x||_1 + (alpha/2) ||x||^2
//
// split per row xi into
//
//   f(x; xi) = 1/2 (T_xi x - y_xi)^2 + (alpha/2) ||x||^2
//   h(x; xi) = m lambda |Delta_xi x|
//
// T and Delta share the row index, so Delta has as many rows as T (p == m).

#include "sspg/core.hpp"
#include "sspg/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace sspg {

struct SRProblem {
  RowMatrix dictionary;  // T, m x n
  Vector signal;         // y, m
  RowMatrix analysis;    // Delta, m x n
  double lambda = 1.0;
  double alpha = 1.0;
  std::uint64_t seed = 0;

  std::size_t rows() const { return static_cast<std::size_t>(dictionary.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(dictionary.cols()); }

  void validate() const {
    if (dictionary.rows() < 1 || dictionary.cols() < 1)
      throw std::invalid_argument("SRProblem: empty dictionary");
    if (signal.size() != dictionary.rows())
      throw std::invalid_argument("SRProblem: signal length != rows of T");
    if (analysis.rows() != dictionary.rows() ||
        analysis.cols() != dictionary.cols())
      throw std::invalid_argument("SRProblem: Delta must be m x n like T");
    if (!(lambda >= 0.0) || !(alpha > 0.0))
      throw std::invalid_argument("SRProblem: need lambda >= 0 and alpha > 0");
    for (Eigen::Index r = 0; r < analysis.rows(); ++r) {
      if (analysis.row(r).norm() < 1e-12)
        throw std::invalid_argument("SRProblem: zero row " + std::to_string(r) +
                                    " in Delta");
    }
  }

  bool operator==(const SRProblem& o) const {
    return dictionary == o.dictionary && signal == o.signal &&
           analysis == o.analysis && lambda == o.lambda && alpha == o.alpha &&
           seed == o.seed;
  }
};

/// Standard-normal T (m x n), Delta (m x n) and y (m) from one seeded stream,
/// drawn in that order, row-major. Delta rows with norm < 1e-12 are redrawn.
inline SRProblem generate_sr_instance(std::size_t n, std::size_t m,
                                      double alpha, double lambda,
                                      std::uint64_t seed) {
  if (n < 1 || m < 1) throw std::invalid_argument("generate_sr_instance: n, m >= 1");
  Rng rng(seed);
  SRProblem p;
  p.alpha = alpha;
  p.lambda = lambda;
  p.seed = seed;
  const auto rows = static_cast<Eigen::Index>(m);
  const auto cols = static_cast<Eigen::Index>(n);
  p.dictionary.resize(rows, cols);
  p.analysis.resize(rows, cols);
  p.signal.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) p.dictionary(r, c) = rng.normal();
  for (Eigen::Index r = 0; r < rows; ++r) {
    do {
      for (Eigen::Index c = 0; c < cols; ++c) p.analysis(r, c) = rng.normal();
    } while (p.analysis.row(r).norm() < 1e-12);
  }
  for (Eigen::Index r = 0; r < rows; ++r) p.signal[r] = rng.normal();
  p.validate();
  return p;
}

/// grad f(x; xi) = T_xi^T (T_xi x - y_xi) + alpha x.
inline Vector sr_grad(const SRProblem& p, const Vector& x, SampleIndex xi) {
  check_sample(xi, p.rows());
  const auto r = static_cast<Eigen::Index>(xi.value());
  const double residual = p.dictionary.row(r).dot(x) - p.signal[r];
  return residual * p.dictionary.row(r).transpose() + p.alpha * x;
}

/// Relative tolerance at the branch boundary |beta| = m lambda mu, where both
/// branches of the closed form agree.
inline constexpr double kProxBranchTol = 1e-12;

/// prox of m lambda |Delta_xi .|: with beta = Delta_xi v / ||Delta_xi||^2,
/// either projects v onto the hyperplane Delta_xi z = 0 (|beta| <= m lambda mu)
/// or shifts it by m lambda mu sgn(beta) Delta_xi^T.
inline Vector sr_prox(const SRProblem& p, const Vector& v, SampleIndex xi,
                      double mu) {
  check_sample(xi, p.rows());
  if (!(mu > 0.0)) throw std::invalid_argument("sr_prox: mu <= 0");
  const auto r = static_cast<Eigen::Index>(xi.value());
  const auto d = p.analysis.row(r);
  const double norm2 = d.squaredNorm();
  if (norm2 < 1e-24) throw std::invalid_argument("sr_prox: zero Delta row");
  const double beta = d.dot(v) / norm2;
  const double threshold = static_cast<double>(p.rows()) * p.lambda * mu;
  if (std::abs(beta) <= threshold * (1.0 + kProxBranchTol))
    return v - beta * d.transpose();
  return v - std::copysign(threshold, beta) * d.transpose();
}

/// f(.; xi) for the SR split.
class SRSmooth {
 public:
  explicit SRSmooth(const SRProblem& problem) : p_(&problem) {}

  Vector grad(const Vector& x, SampleIndex xi) const { return sr_grad(*p_, x, xi); }
  double value(const Vector& x, SampleIndex xi) const {
    check_sample(xi, p_->rows());
    const auto r = static_cast<Eigen::Index>(xi.value());
    const double residual = p_->dictionary.row(r).dot(x) - p_->signal[r];
    return 0.5 * residual * residual + 0.5 * p_->alpha * x.squaredNorm();
  }
  std::size_t components() const { return p_->rows(); }
  std::size_t dimension() const { return p_->cols(); }

 private:
  const SRProblem* p_;
};

/// h(.; xi) = m lambda |Delta_xi .| for the SR split.
class SRProx {
  using Row = decltype(std::declval<const RowMatrix&>().row(0));

  Row row(SampleIndex xi) const {
    check_sample(xi, p_->rows());
    return p_->analysis.row(static_cast<Eigen::Index>(xi.value()));
  }

 public:
  explicit SRProx(const SRProblem& problem) : p_(&problem) {}

  Vector prox(const Vector& v, SampleIndex xi, double mu) const {
    return sr_prox(*p_, v, xi, mu);
  }
  double value(const Vector& x, SampleIndex xi) const {
    return weight() * std::abs(row(xi).dot(x));
  }
  /// sgn(Delta_xi x) m lambda Delta_xi^T, with sgn(0) = 0.
  Vector subgrad(const Vector& x, SampleIndex xi) const {
    const double s = row(xi).dot(x);
    const double sign = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
    return sign * weight() * row(xi).transpose();
  }
  /// Distance from v to m lambda [sgn] Delta_xi^T, where [sgn] is the whole
  /// interval [-1, 1] when Delta_xi x vanishes up to roundoff.
  double subdiff_distance(const Vector& x, const Vector& v,
                          SampleIndex xi) const {
    const auto d = row(xi);
    const double s = d.dot(x);
    const double w = weight();
    const double zero_tol = 1e-10 * d.norm() * (1.0 + x.norm());
    double t;
    if (std::abs(s) > zero_tol) {
      t = std::copysign(w, s);
    } else {
      t = std::clamp(d.dot(v) / d.squaredNorm(), -w, w);
    }
    return (v - t * d.transpose()).norm();
  }
  std::size_t components() const { return p_->rows(); }
  double weight() const { return static_cast<double>(p_->rows()) * p_->lambda; }

 private:
  const SRProblem* p_;
};

/// Full objective, evaluated directly from the matrices.
inline double sr_objective(const SRProblem& p, const Vector& x) {
  const double m = static_cast<double>(p.rows());
  return (p.dictionary * x - p.signal).squaredNorm() / (2.0 * m) +
         p.lambda * (p.analysis * x).lpNorm<1>() +
         0.5 * p.alpha * x.squaredNorm();
}

/// (1/m) T^T (T x - y) + alpha x.
inline Vector sr_full_gradient(const SRProblem& p, const Vector& x) {
  const double m = static_cast<double>(p.rows());
  return p.dictionary.transpose() * (p.dictionary * x - p.signal) / m +
         p.alpha * x;
}

struct SRConstants {
  TheoryConstants theory;
  double strong_convexity_floor = 0.0;  // alpha alone
};

/// L_f = max_xi ||T_xi||^2 + alpha; sigma_f = alpha + lambda_min(T^T T / m).
inline SRConstants sr_constants(const SRProblem& p) {
  p.validate();
  SRConstants c;
  c.strong_convexity_floor = p.alpha;
  c.theory.lipschitz = p.dictionary.rowwise().squaredNorm().maxCoeff() + p.alpha;
  const Matrix gram = Matrix(p.dictionary.transpose() * p.dictionary) /
                      static_cast<double>(p.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  c.theory.strong_convexity = p.alpha + std::max(0.0, eig.eigenvalues()[0]);
  return c;
}

struct SigmaEstimate {
  double sigma = 0.0;        // (2/m) sum ||g_F(x*; xi)||^2
  double certificate = 0.0;  // || (1/m) sum g_F(x*; xi) ||
  bool found = false;        // certificate <= tol
  Vector coefficients;       // s_xi in [-1, 1]
  std::size_t free_rows = 0;
};

struct SigmaOptions {
  /// |Delta_xi x*| at or below this (relative to ||Delta_xi||) is a kink row.
  double kink_tol = 1e-7;
  std::size_t max_iterations = 200000;
};

/// Builds a zero-mean representation of per-sample subgradients at x*:
///
///   g_xi = grad f(x*; xi) + m lambda s_xi Delta_xi^T,
///
/// with s_xi = sgn(Delta_xi x*) off the kinks and s_xi in [-1, 1] chosen on
/// the kinks by minimizing ||sum_xi g_xi||^2 with accelerated projected
/// gradient. Returns Sigma = (2/m) sum ||g_xi||^2 and the norm of the mean.
inline SigmaEstimate zero_mean_subgradient_sigma(const SRProblem& p,
                                                 const Vector& x_star,
                                                 double tol,
                                                 const SigmaOptions& opts = {}) {
  p.validate();
  const Eigen::Index m = p.dictionary.rows();
  const double md = static_cast<double>(m);
  const double w = md * p.lambda;

  const Vector residual = p.dictionary * x_star - p.signal;
  const Vector dx = p.analysis * x_star;
  Vector s = Vector::Zero(m);
  std::vector<Eigen::Index> free;
  for (Eigen::Index r = 0; r < m; ++r) {
    if (std::abs(dx[r]) <= opts.kink_tol * p.analysis.row(r).norm())
      free.push_back(r);
    else
      s[r] = dx[r] > 0.0 ? 1.0 : -1.0;
  }

  // Fixed part of the sum of subgradients.
  Vector fixed = p.dictionary.transpose() * residual + md * p.alpha * x_star +
                 w * (p.analysis.transpose() * s);

  if (!free.empty() && w > 0.0) {
    const auto q = static_cast<Eigen::Index>(free.size());
    Matrix A(x_star.size(), q);  // columns w Delta_xi^T
    for (Eigen::Index j = 0; j < q; ++j)
      A.col(j) = w * p.analysis.row(free[j]).transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A * A.transpose(),
                                              Eigen::EigenvaluesOnly);
    const double L = std::max(eig.eigenvalues().maxCoeff(), 1e-300);

    Vector u = Vector::Zero(q), u_prev = u, z = u;
    double t = 1.0;
    auto project = [](const Vector& v) -> Vector {
      return v.cwiseMax(-1.0).cwiseMin(1.0);
    };
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
      const Vector grad = A.transpose() * (fixed + A * z);
      u_prev = u;
      u = project(z - grad / L);
      // Gradient-based restart keeps the momentum monotone.
      if ((z - u).dot(u - u_prev) > 0.0) t = 1.0;
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      z = u + ((t - 1.0) / t_next) * (u - u_prev);
      t = t_next;
      if (it % 16 == 0) {
        const double step = (u - u_prev).norm() * L;
        const double mean_norm = (fixed + A * u).norm() / md;
        if (mean_norm <= 1e-3 * tol || step <= 1e-14 * (1.0 + L)) break;
      }
    }
    for (Eigen::Index j = 0; j < q; ++j) s[free[j]] = u[j];
    fixed += A * u;
  }

  SigmaEstimate out;
  out.coefficients = s;
  out.free_rows = free.size();
  out.certificate = fixed.norm() / md;
  double total = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    const Vector g = residual[r] * p.dictionary.row(r).transpose() +
                     p.alpha * x_star + w * s[r] * p.analysis.row(r).transpose();
    total += g.squaredNorm();
  }
  out.sigma = 2.0 * total / md;
  out.found = out.certificate <= tol;
  return out;
}

}  // namespace sspg
