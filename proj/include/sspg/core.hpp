#pragma once

// Problem-agnostic building blocks: sampled oracles for the composite model
//
//   F(x) = (1/m) sum_xi [ f(x; xi) + h(x; xi) ],
//
// stepsize schedules, objective evaluation, Moreau envelopes and the prox
// stationarity residual.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace sspg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One component xi of the finite sample space {0, ..., m-1}.
class SampleIndex {
 public:
  constexpr SampleIndex() = default;
  constexpr explicit SampleIndex(std::size_t value) : value_(value) {}

  constexpr std::size_t value() const { return value_; }
  constexpr auto operator<=>(const SampleIndex&) const = default;

 private:
  std::size_t value_ = 0;
};

inline void check_sample(SampleIndex xi, std::size_t m) {
  if (xi.value() >= m) {
    throw std::out_of_range("sample index " + std::to_string(xi.value()) +
                            " outside [0, " + std::to_string(m) + ")");
  }
}

/// Sampled smooth term f(.; xi) with per-component Lipschitz gradient.
template <typename O>
concept SmoothOracle =
    requires(const O& o, const Vector& x, SampleIndex xi) {
      { o.grad(x, xi) } -> std::convertible_to<Vector>;
      { o.value(x, xi) } -> std::convertible_to<double>;
      { o.components() } -> std::convertible_to<std::size_t>;
    };

/// Sampled nonsmooth term h(.; xi), accessed through its proximal map.
/// `value` may return +inf (indicator components); `subgrad` returns one
/// member of the subdifferential.
template <typename O>
concept ProxOracle =
    requires(const O& o, const Vector& x, SampleIndex xi, double mu) {
      { o.prox(x, xi, mu) } -> std::convertible_to<Vector>;
      { o.value(x, xi) } -> std::convertible_to<double>;
      { o.subgrad(x, xi) } -> std::convertible_to<Vector>;
      { o.components() } -> std::convertible_to<std::size_t>;
    };

/// Prox oracles that can measure dist(v, dh(x; xi)) against the whole
/// subdifferential rather than a single selected member.
template <typename O>
concept SubdifferentialAware =
    ProxOracle<O> &&
    requires(const O& o, const Vector& x, const Vector& v, SampleIndex xi) {
      { o.subdiff_distance(x, v, xi) } -> std::convertible_to<double>;
    };

// ---------------------------------------------------------------------------
// Elementary oracles

/// f == 0.
class ZeroSmooth {
 public:
  ZeroSmooth(std::size_t dim, std::size_t components)
      : dim_(dim), m_(components) {}

  Vector grad(const Vector& x, SampleIndex) const {
    return Vector::Zero(x.size());
  }
  double value(const Vector&, SampleIndex) const { return 0.0; }
  std::size_t components() const { return m_; }
  std::size_t dimension() const { return dim_; }

 private:
  std::size_t dim_;
  std::size_t m_;
};

/// h == 0, prox is the identity.
class IdentityProx {
 public:
  explicit IdentityProx(std::size_t components) : m_(components) {}

  Vector prox(const Vector& y, SampleIndex, double) const { return y; }
  double value(const Vector&, SampleIndex) const { return 0.0; }
  Vector subgrad(const Vector& x, SampleIndex) const {
    return Vector::Zero(x.size());
  }
  double subdiff_distance(const Vector&, const Vector& v, SampleIndex) const {
    return v.norm();
  }
  std::size_t components() const { return m_; }

 private:
  std::size_t m_;
};

/// h(x; xi) = weight * ||x||_1 for every xi (a xi-independent regularizer).
class L1NormProx {
 public:
  L1NormProx(double weight, std::size_t components)
      : weight_(weight), m_(components) {
    if (!(weight >= 0.0)) throw std::invalid_argument("L1NormProx: weight < 0");
  }

  Vector prox(const Vector& y, SampleIndex, double mu) const {
    const double t = weight_ * mu;
    return y.unaryExpr([t](double v) {
      return std::copysign(std::max(std::abs(v) - t, 0.0), v);
    });
  }
  double value(const Vector& x, SampleIndex) const {
    return weight_ * x.lpNorm<1>();
  }
  Vector subgrad(const Vector& x, SampleIndex) const {
    return x.unaryExpr([w = weight_](double v) {
      return v > 0.0 ? w : (v < 0.0 ? -w : 0.0);
    });
  }
  double subdiff_distance(const Vector& x, const Vector& v,
                          SampleIndex) const {
    double sq = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double target =
          x[i] != 0.0 ? std::copysign(weight_, x[i])
                      : std::clamp(v[i], -weight_, weight_);
      sq += (v[i] - target) * (v[i] - target);
    }
    return std::sqrt(sq);
  }
  std::size_t components() const { return m_; }
  double weight() const { return weight_; }

 private:
  double weight_;
  std::size_t m_;
};

// ---------------------------------------------------------------------------
// Stepsizes and constants

enum class StepsizeKind { Constant, Polynomial };

/// mu_k = min(mu0, clamp) or min(mu0 / k^gamma, clamp), k >= 1.
struct StepsizeSchedule {
  StepsizeKind kind = StepsizeKind::Constant;
  double mu0 = 1.0;
  double gamma = 1.0;
  double clamp = kInf;

  static StepsizeSchedule constant(double mu, double clamp = kInf) {
    StepsizeSchedule s{StepsizeKind::Constant, mu, 1.0, clamp};
    s.validate();
    return s;
  }
  static StepsizeSchedule polynomial(double mu0, double gamma,
                                     double clamp = kInf) {
    StepsizeSchedule s{StepsizeKind::Polynomial, mu0, gamma, clamp};
    s.validate();
    return s;
  }

  /// Copy clamped at 1/(2 L_f), the largest step the recurrence bounds admit.
  StepsizeSchedule clamped_for(double lipschitz) const {
    StepsizeSchedule s = *this;
    s.clamp = 1.0 / (2.0 * lipschitz);
    s.validate();
    return s;
  }

  void validate() const {
    if (!(mu0 > 0.0) || !std::isfinite(mu0))
      throw std::invalid_argument("stepsize: mu0 must be positive and finite");
    if (!(clamp > 0.0))
      throw std::invalid_argument("stepsize: clamp must be positive");
    if (kind == StepsizeKind::Polynomial && !(gamma > 0.0 && gamma <= 1.0))
      throw std::invalid_argument("stepsize: gamma must lie in (0, 1]");
  }

  std::string describe() const {
    std::string s = kind == StepsizeKind::Constant ? "constant" : "polynomial";
    s += "(mu0=" + std::to_string(mu0);
    if (kind == StepsizeKind::Polynomial) s += ",gamma=" + std::to_string(gamma);
    if (std::isfinite(clamp)) s += ",clamp=" + std::to_string(clamp);
    return s + ")";
  }

  bool operator==(const StepsizeSchedule&) const = default;
};

/// Stepsize for iteration k; iterations are numbered from 1.
inline double stepsize(const StepsizeSchedule& schedule, std::size_t k) {
  if (k == 0) throw std::invalid_argument("stepsize: iteration index starts at 1");
  double mu = schedule.mu0;
  if (schedule.kind == StepsizeKind::Polynomial)
    mu = schedule.mu0 / std::pow(static_cast<double>(k), schedule.gamma);
  return std::min(mu, schedule.clamp);
}

/// Problem constants entering the convergence bounds.
struct TheoryConstants {
  double lipschitz = 1.0;         // L_f
  double strong_convexity = 1.0;  // sigma_f
  double sigma = 0.0;             // Sigma = 2 E ||g_F(x*; xi)||^2
  double grad_bound = 0.0;        // S*_F
  std::optional<double> kappa;    // linear regularity, CFP only

  void validate() const {
    if (!(lipschitz > 0.0)) throw std::invalid_argument("L_f must be positive");
    if (!(strong_convexity > 0.0))
      throw std::invalid_argument("sigma_f must be positive");
    if (strong_convexity > lipschitz * (1.0 + 1e-12))
      throw std::invalid_argument("sigma_f must not exceed L_f");
    if (!(sigma >= 0.0)) throw std::invalid_argument("Sigma must be >= 0");
    if (!(grad_bound >= 0.0)) throw std::invalid_argument("S*_F must be >= 0");
    if (kappa && !(*kappa > 0.0 && *kappa <= 1.0))
      throw std::invalid_argument("kappa must lie in (0, 1]");
  }
};

// ---------------------------------------------------------------------------
// Operations

/// (1/m) sum_xi [f(x; xi) + h(x; xi)]; +inf when some indicator rejects x.
template <SmoothOracle S, ProxOracle P>
double eval_full_objective(const S& smooth, const P& prox, const Vector& x) {
  const std::size_t m = smooth.components();
  if (prox.components() != m)
    throw std::invalid_argument("eval_full_objective: oracle sizes differ");
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const SampleIndex xi{i};
    const double h = prox.value(x, xi);
    if (!std::isfinite(h)) return kInf;
    total += smooth.value(x, xi) + h;
  }
  return total / static_cast<double>(m);
}

struct Envelope {
  double value;
  Vector point;  // prox(x; xi, mu)
};

/// Moreau envelope h_mu(x; xi) together with its minimizer.
template <ProxOracle P>
Envelope moreau_envelope(const P& prox, const Vector& x, SampleIndex xi,
                         double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("moreau_envelope: mu <= 0");
  Vector z = prox.prox(x, xi, mu);
  const double value = prox.value(z, xi) + (z - x).squaredNorm() / (2.0 * mu);
  return {value, std::move(z)};
}

/// Stationarity residual of z as a candidate for prox(y; xi, mu):
/// dist((y - z)/mu, dh(z; xi)). Oracles that only expose a single subgradient
/// are measured against that member. Returns +inf when h(z; xi) = +inf.
template <ProxOracle P>
double prox_optimality_residual(const P& prox, const Vector& y,
                                const Vector& z, SampleIndex xi, double mu) {
  if (!(mu > 0.0))
    throw std::invalid_argument("prox_optimality_residual: mu <= 0");
  if (!std::isfinite(prox.value(z, xi))) return kInf;
  const Vector v = (y - z) / mu;
  if constexpr (SubdifferentialAware<P>) {
    return prox.subdiff_distance(z, v, xi);
  } else {
    return (prox.subgrad(z, xi) - v).norm();
  }
}

}  // namespace sspg
