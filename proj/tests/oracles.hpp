#pragma once

// Independent numerical oracles used by the tests. None of these call into
// the library's solvers.

#include "sspg/core.hpp"
#include "sspg/rng.hpp"

#include <cmath>
#include <functional>
#include <utility>

namespace oracle {

using sspg::Vector;

inline Vector random_vector(sspg::Rng& rng, Eigen::Index n, double scale = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

/// Golden-section minimization of a unimodal function on [a, b], carried out
/// in long double so the bracket shrinks well below double roundoff.
inline long double golden_section(const std::function<long double(long double)>& f,
                                  long double a, long double b,
                                  int iterations = 200) {
  const long double r = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  long double c = b - r * (b - a), d = a + r * (b - a);
  long double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations && b - a > 0.0L; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return (a + b) / 2.0L;
}

/// Argmin of f over a uniform grid of `points` nodes on [a, b].
inline double grid_argmin(const std::function<double(double)>& f, double a,
                          double b, int points) {
  double best = a, best_value = f(a);
  for (int i = 1; i < points; ++i) {
    const double t = a + (b - a) * i / (points - 1);
    const double v = f(t);
    if (v < best_value) {
      best_value = v;
      best = t;
    }
  }
  return best;
}

/// Central finite-difference gradient with per-coordinate step h (1 + |x_i|).
inline Vector central_difference(const std::function<double(const Vector&)>& f,
                                 const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * (1.0 + std::abs(x[i]));
    Vector plus = x, minus = x;
    plus[i] += step;
    minus[i] -= step;
    g[i] = (f(plus) - f(minus)) / (2.0 * step);
  }
  return g;
}

/// Projected gradient on {lo <= u <= hi} for min 1/2 u^T Q u + c^T u, with a
/// fixed 1/L step and many iterations; slow but transparent.
inline Vector box_qp(const sspg::Matrix& Q, const Vector& c, double lo,
                     double hi, int iterations) {
  Eigen::SelfAdjointEigenSolver<sspg::Matrix> eig(Q, Eigen::EigenvaluesOnly);
  const double L = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  Vector u = Vector::Zero(c.size());
  for (int it = 0; it < iterations; ++it)
    u = (u - (Q * u + c) / L).cwiseMax(lo).cwiseMin(hi);
  return u;
}

}  // namespace oracle
