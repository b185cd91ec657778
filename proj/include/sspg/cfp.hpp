#pragma once

// Convex feasibility: find x in the intersection of finitely many closed
// convex sets X_xi. In the composite model this is f = 0 and h(.; xi) the
// indicator of X_xi, whose prox is the Euclidean projection.

#include "sspg/core.hpp"
#include "sspg/engine.hpp"
#include "sspg/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sspg {

/// {x : a^T x <= b}
struct Halfspace {
  Vector a;
  double b = 0.0;
};

/// {x : a^T x = b}
struct Hyperplane {
  Vector a;
  double b = 0.0;
};

/// {x : ||x - center|| <= radius}
struct Ball {
  Vector center;
  double radius = 1.0;
};

using ConvexSetSpec = std::variant<Halfspace, Hyperplane, Ball>;

inline Eigen::Index set_dimension(const ConvexSetSpec& set) {
  return std::visit(
      [](const auto& s) -> Eigen::Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, Ball>)
          return s.center.size();
        else
          return s.a.size();
      },
      set);
}

inline void validate_set(const ConvexSetSpec& set) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Ball>) {
          if (!(s.radius > 0.0)) throw std::invalid_argument("ball radius <= 0");
        } else {
          if (!(s.a.norm() > 0.0))
            throw std::invalid_argument("halfspace/hyperplane normal is zero");
        }
      },
      set);
}

inline Vector project_set(const ConvexSetSpec& set, const Vector& x) {
  return std::visit(
      [&x](const auto& s) -> Vector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Halfspace>) {
          const double excess = s.a.dot(x) - s.b;
          if (excess <= 0.0) return x;
          return x - (excess / s.a.squaredNorm()) * s.a;
        } else if constexpr (std::is_same_v<T, Hyperplane>) {
          return x - ((s.a.dot(x) - s.b) / s.a.squaredNorm()) * s.a;
        } else {
          const Vector offset = x - s.center;
          const double dist = offset.norm();
          if (dist <= s.radius) return x;
          return s.center + (s.radius / dist) * offset;
        }
      },
      set);
}

inline double set_distance(const ConvexSetSpec& set, const Vector& x) {
  return (x - project_set(set, x)).norm();
}

/// Membership up to a tolerance scaled by the set's size.
inline bool set_contains(const ConvexSetSpec& set, const Vector& x,
                         double tol = 1e-9) {
  return std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Halfspace>) {
          return s.a.dot(x) - s.b <= tol * s.a.norm() * (1.0 + x.norm());
        } else if constexpr (std::is_same_v<T, Hyperplane>) {
          return std::abs(s.a.dot(x) - s.b) <= tol * s.a.norm() * (1.0 + x.norm());
        } else {
          return (x - s.center).norm() <= s.radius * (1.0 + tol) + tol;
        }
      },
      set);
}

/// dist(v, N_X(x)) for x in X.
inline double normal_cone_distance(const ConvexSetSpec& set, const Vector& x,
                                   const Vector& v, double tol = 1e-9) {
  return std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Hyperplane>) {
          const double t = s.a.dot(v) / s.a.squaredNorm();
          return (v - t * s.a).norm();
        } else {
          Vector normal;
          bool on_boundary;
          if constexpr (std::is_same_v<T, Halfspace>) {
            normal = s.a;
            on_boundary =
                std::abs(s.a.dot(x) - s.b) <= tol * s.a.norm() * (1.0 + x.norm());
          } else {
            normal = x - s.center;
            on_boundary = std::abs(normal.norm() - s.radius) <= tol * (1.0 + s.radius);
          }
          if (!on_boundary || normal.norm() == 0.0) return v.norm();
          const double t = std::max(0.0, normal.dot(v) / normal.squaredNorm());
          return (v - t * normal).norm();
        }
      },
      set);
}

struct CFPProblem {
  std::vector<ConvexSetSpec> sets;
  std::optional<Vector> feasible_point;

  Eigen::Index dimension() const {
    if (sets.empty()) throw std::invalid_argument("CFPProblem: no sets");
    return set_dimension(sets.front());
  }

  bool all_affine() const {
    for (const auto& s : sets)
      if (!std::holds_alternative<Hyperplane>(s)) return false;
    return true;
  }

  void validate() const {
    if (sets.empty()) throw std::invalid_argument("CFPProblem: no sets");
    const Eigen::Index n = dimension();
    for (const auto& s : sets) {
      validate_set(s);
      if (set_dimension(s) != n)
        throw std::invalid_argument("CFPProblem: mixed dimensions");
    }
    if (feasible_point) {
      if (feasible_point->size() != n)
        throw std::invalid_argument("CFPProblem: witness has wrong dimension");
      for (const auto& s : sets)
        if (!set_contains(s, *feasible_point, 1e-10))
          throw std::invalid_argument("CFPProblem: witness is not feasible");
    }
  }
};

/// Indicator prox oracle of a CFP: prox is the projection onto X_xi.
class IndicatorProx {
 public:
  explicit IndicatorProx(const CFPProblem& problem) : p_(&problem) {}

  Vector prox(const Vector& v, SampleIndex xi, double) const {
    return project_set(set(xi), v);
  }
  double value(const Vector& x, SampleIndex xi) const {
    return set_contains(set(xi), x) ? 0.0 : kInf;
  }
  Vector subgrad(const Vector& x, SampleIndex) const {
    return Vector::Zero(x.size());
  }
  double subdiff_distance(const Vector& x, const Vector& v,
                          SampleIndex xi) const {
    return normal_cone_distance(set(xi), x, v);
  }
  std::size_t components() const { return p_->sets.size(); }

 private:
  const ConvexSetSpec& set(SampleIndex xi) const {
    check_sample(xi, p_->sets.size());
    return p_->sets[xi.value()];
  }
  const CFPProblem* p_;
};

struct DistanceEstimate {
  double distance = 0.0;
  Vector projection;
  bool exact = false;
  bool converged = false;
  std::size_t iterations = 0;
};

/// dist_X(x) for X the intersection. Affine families are solved exactly as a
/// least-norm linear system; otherwise Dykstra's cyclic projections run until
/// a full sweep moves the iterate by at most tol.
inline DistanceEstimate cfp_distance(const CFPProblem& problem, const Vector& x,
                                     double tol = 1e-12,
                                     std::size_t cap = 1000000) {
  problem.validate();
  DistanceEstimate out;
  if (problem.all_affine()) {
    const auto rows = static_cast<Eigen::Index>(problem.sets.size());
    Matrix A(rows, x.size());
    Vector b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto& h = std::get<Hyperplane>(problem.sets[i]);
      A.row(i) = h.a.transpose();
      b[i] = h.b;
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
    const Vector correction = cod.solve(A * x - b);
    out.projection = x - correction;
    out.distance = correction.norm();
    out.exact = out.converged = true;
    return out;
  }

  const std::size_t count = problem.sets.size();
  std::vector<Vector> increments(count, Vector::Zero(x.size()));
  Vector z = x;
  for (std::size_t sweep = 1; sweep <= cap; ++sweep) {
    const Vector before = z;
    for (std::size_t i = 0; i < count; ++i) {
      const Vector shifted = z + increments[i];
      const Vector projected = project_set(problem.sets[i], shifted);
      increments[i] = shifted - projected;
      z = projected;
    }
    out.iterations = sweep;
    if ((z - before).norm() <= tol) {
      out.converged = true;
      break;
    }
  }
  out.projection = z;
  out.distance = (x - z).norm();
  return out;
}

/// E_xi[dist^2_{X_xi}(x)] under uniform sampling.
inline double mean_sq_set_distance(const CFPProblem& problem, const Vector& x) {
  double total = 0.0;
  for (const auto& s : problem.sets) {
    const double d = set_distance(s, x);
    total += d * d;
  }
  return total / static_cast<double>(problem.sets.size());
}

/// Bounded linear-regularity estimate: min over samples x drawn uniformly in
/// the ball of the given radius around the feasible point of
/// E_xi[dist^2_{X_xi}(x)] / dist^2_X(x), clamped to (0, 1]. Samples with
/// dist_X(x) < 1e-6 radius are skipped.
inline double estimate_kappa(const CFPProblem& problem, std::size_t samples,
                             double radius, std::uint64_t seed) {
  problem.validate();
  if (samples < 100) throw std::invalid_argument("estimate_kappa: samples < 100");
  if (!(radius > 0.0)) throw std::invalid_argument("estimate_kappa: radius <= 0");
  const Eigen::Index n = problem.dimension();
  const Vector center = problem.feasible_point
                            ? *problem.feasible_point
                            : cfp_distance(problem, Vector::Zero(n)).projection;
  Rng rng(seed);
  double best = kInf;
  std::size_t used = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    Vector dir(n);
    for (Eigen::Index i = 0; i < n; ++i) dir[i] = rng.normal();
    const double scale =
        radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
    const double nrm = dir.norm();
    if (nrm == 0.0) continue;
    const Vector x = center + (scale / nrm) * dir;
    const double dist = cfp_distance(problem, x).distance;
    if (dist < 1e-6 * radius) continue;
    ++used;
    best = std::min(best, mean_sq_set_distance(problem, x) / (dist * dist));
  }
  if (used == 0)
    throw std::runtime_error(
        "estimate_kappa: every sample was near-feasible; increase the radius");
  return std::clamp(best, std::numeric_limits<double>::min(), 1.0);
}

struct RapOptions {
  std::optional<Vector> x0;
  bool record_wall_time = true;
};

/// Randomized alternating projections: SSPG with f = 0 and indicator prox.
/// Records dist_X(x^k) at every iteration.
inline Trace run_rap(const CFPProblem& problem, std::uint64_t seed,
                     std::size_t iterations, const RapOptions& opts = {}) {
  if (iterations < 1) throw std::invalid_argument("run_rap: K must be >= 1");
  problem.validate();
  const auto n = static_cast<std::size_t>(problem.dimension());
  const ZeroSmooth smooth(n, problem.sets.size());
  const IndicatorProx prox(problem);
  RunOptions run;
  run.x0 = opts.x0 ? *opts.x0 : Vector::Zero(static_cast<Eigen::Index>(n));
  run.record_objective = false;
  run.record_wall_time = opts.record_wall_time;
  run.feasibility = [&problem](const Vector& x) {
    return cfp_distance(problem, x).distance;
  };
  return run_sspg(smooth, prox, StepsizeSchedule::constant(1.0), seed,
                  StoppingRule::max_iter(iterations), std::nullopt, run);
}

/// Two hyperplanes through the origin of R^2 whose normals form `angle`.
inline CFPProblem two_line_instance(double angle) {
  CFPProblem p;
  Vector a1(2), a2(2);
  a1 << 0.0, 1.0;
  a2 << -std::sin(angle), std::cos(angle);
  p.sets = {Hyperplane{a1, 0.0}, Hyperplane{a2, 0.0}};
  p.feasible_point = Vector::Zero(2);
  return p;
}

// ---------------------------------------------------------------------------
// JSON instance format
//
//   {"format_version": 1,
//    "sets": [{"kind": "halfspace", "a": [...], "b": 0.0},
//             {"kind": "hyperplane", "a": [...], "b": 0.0},
//             {"kind": "ball", "center": [...], "radius": 1.0}],
//    "feasible_point": [...]}            // optional

inline constexpr int kCFPFormatVersion = 1;

namespace detail {

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(),
                                  static_cast<Eigen::Index>(values.size()));
}

inline nlohmann::json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline void reject_unknown(const nlohmann::json& j,
                           std::initializer_list<const char*> allowed,
                           const std::string& where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) known |= item.key() == key;
    if (!known)
      throw std::invalid_argument(where + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace detail

inline nlohmann::json cfp_to_json(const CFPProblem& problem) {
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& s : problem.sets) {
    std::visit(
        [&sets](const auto& set) {
          using T = std::decay_t<decltype(set)>;
          if constexpr (std::is_same_v<T, Halfspace>)
            sets.push_back({{"kind", "halfspace"},
                            {"a", detail::vector_to_json(set.a)},
                            {"b", set.b}});
          else if constexpr (std::is_same_v<T, Hyperplane>)
            sets.push_back({{"kind", "hyperplane"},
                            {"a", detail::vector_to_json(set.a)},
                            {"b", set.b}});
          else
            sets.push_back({{"kind", "ball"},
                            {"center", detail::vector_to_json(set.center)},
                            {"radius", set.radius}});
        },
        s);
  }
  nlohmann::json j = {{"format_version", kCFPFormatVersion}, {"sets", sets}};
  if (problem.feasible_point)
    j["feasible_point"] = detail::vector_to_json(*problem.feasible_point);
  return j;
}

inline CFPProblem cfp_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"format_version", "sets", "feasible_point"},
                         "CFP instance");
  if (j.at("format_version").get<int>() != kCFPFormatVersion)
    throw std::invalid_argument("CFP instance: unsupported format_version");
  CFPProblem p;
  for (const auto& s : j.at("sets")) {
    const auto kind = s.at("kind").get<std::string>();
    if (kind == "halfspace") {
      detail::reject_unknown(s, {"kind", "a", "b"}, "halfspace");
      p.sets.push_back(Halfspace{detail::vector_from_json(s.at("a")),
                                 s.at("b").get<double>()});
    } else if (kind == "hyperplane") {
      detail::reject_unknown(s, {"kind", "a", "b"}, "hyperplane");
      p.sets.push_back(Hyperplane{detail::vector_from_json(s.at("a")),
                                  s.at("b").get<double>()});
    } else if (kind == "ball") {
      detail::reject_unknown(s, {"kind", "center", "radius"}, "ball");
      p.sets.push_back(Ball{detail::vector_from_json(s.at("center")),
                            s.at("radius").get<double>()});
    } else {
      throw std::invalid_argument("CFP instance: unknown set kind '" + kind + "'");
    }
  }
  if (j.contains("feasible_point"))
    p.feasible_point = detail::vector_from_json(j.at("feasible_point"));
  p.validate();
  return p;
}

}  // namespace sspg
