#pragma once

#include "sspg/core.hpp"
#include "sspg/engine.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sspg {

// ---------------------------------------------------------------------------
// Rate fits

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope x.
inline LinearFit least_squares_line(const std::vector<double>& xs,
                                    const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("least_squares_line: need >= 2 paired points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("least_squares_line: constant x");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  fit.points = xs.size();
  return fit;
}

struct RateReport {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t k_min = 0;
  std::size_t k_max = 0;
  double r_squared = 0.0;
  double theory_exponent = 0.0;  // gamma; the expected slope is -gamma
  bool pass = false;
};

inline constexpr double kRateSlopeTolerance = 0.2;
inline constexpr double kRateMinRSquared = 0.9;

/// Fits log(mean) against log(k) on k in [k_min, k_max]. Passes when the
/// slope is within 0.2 of -theory_exponent and R^2 >= 0.9.
inline RateReport fit_rate_exponent(const MeanTrace& trace, std::size_t k_min,
                                    std::size_t k_max, double theory_exponent) {
  if (!(k_min < k_max) || k_min == 0)
    throw std::invalid_argument("fit_rate_exponent: need 0 < k_min < k_max");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const std::size_t k = trace.k[i];
    if (k < k_min || k > k_max) continue;
    if (!(trace.mean[i] > 0.0)) {
      throw std::domain_error(
          "fit_rate_exponent: nonpositive mean at k=" + std::to_string(k) +
          " (below the noise floor; shrink the window)");
    }
    xs.push_back(std::log(static_cast<double>(k)));
    ys.push_back(std::log(trace.mean[i]));
  }
  if (xs.size() < 2)
    throw std::invalid_argument("fit_rate_exponent: window outside the trace");
  const LinearFit fit = least_squares_line(xs, ys);
  RateReport r;
  r.slope = fit.slope;
  r.intercept = fit.intercept;
  r.k_min = k_min;
  r.k_max = k_max;
  r.r_squared = fit.r_squared;
  r.theory_exponent = theory_exponent;
  r.pass = std::abs(fit.slope + theory_exponent) <= kRateSlopeTolerance &&
           fit.r_squared >= kRateMinRSquared;
  return r;
}

/// Fits log(mean) against k on [k_min, k_max]; exp(slope) is the per-step
/// contraction factor.
inline LinearFit fit_geometric_rate(const MeanTrace& trace, std::size_t k_min,
                                    std::size_t k_max) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const std::size_t k = trace.k[i];
    if (k < k_min || k > k_max) continue;
    if (!(trace.mean[i] > 0.0))
      throw std::domain_error("fit_geometric_rate: nonpositive mean at k=" +
                              std::to_string(k));
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(trace.mean[i]));
  }
  return least_squares_line(xs, ys);
}

struct Plateau {
  double level = 0.0;
  double stderr_ = 0.0;  // mean of the per-k standard errors over the tail
};

/// Mean of the final tail_fraction of the trace.
inline Plateau plateau(const MeanTrace& trace, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 0.5))
    throw std::invalid_argument("plateau_level: tail_fraction must be in (0, 0.5]");
  if (trace.size() == 0) throw std::invalid_argument("plateau_level: empty trace");
  const std::size_t count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(tail_fraction * trace.size())));
  Plateau p;
  for (std::size_t i = trace.size() - count; i < trace.size(); ++i) {
    p.level += trace.mean[i];
    p.stderr_ += trace.stderr_[i];
  }
  p.level /= static_cast<double>(count);
  p.stderr_ /= static_cast<double>(count);
  return p;
}

inline double plateau_level(const MeanTrace& trace, double tail_fraction) {
  return plateau(trace, tail_fraction).level;
}

// ---------------------------------------------------------------------------
// Theory bounds

/// (1 - mu sigma_f)^k d0^2 + (mu / sigma_f) Sigma.
inline double constant_step_bound(std::size_t k, double mu, double sigma_f,
                                  double d0_sq, double sigma) {
  return std::pow(1.0 - mu * sigma_f, static_cast<double>(k)) * d0_sq +
         mu / sigma_f * sigma;
}

/// Iterates b_{k+1} = (1 - sigma_f mu_k) b_k + mu_k^2 Sigma from b_0 = d0^2.
inline std::vector<double> recurrence_bound_curve(
    const StepsizeSchedule& schedule, const TheoryConstants& constants,
    double d0_sq, std::size_t horizon) {
  std::vector<double> b(horizon + 1);
  b[0] = d0_sq;
  for (std::size_t k = 0; k < horizon; ++k) {
    const double mu = stepsize(schedule, k + 1);
    b[k + 1] = (1.0 - constants.strong_convexity * mu) * b[k] +
               mu * mu * constants.sigma;
  }
  return b;
}

/// (1 - kappa/8)^k d0^2, the linear envelope for randomized projections.
inline double cfp_linear_bound(std::size_t k, double kappa, double d0_sq) {
  return std::pow(1.0 - kappa / 8.0, static_cast<double>(k)) * d0_sq;
}

/// phi_a(t) = (t^a - 1) / a, with phi_0 = ln.
inline double phi(double a, double t) {
  if (a == 0.0) return std::log(t);
  return (std::pow(t, a) - 1.0) / a;
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest text that round-trips at 17 significant digits.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v,
                                 std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

inline const char* kTraceCsvHeader =
    "k,sq_dist_to_opt,objective,dist_to_feasible,wall_time_s";
inline const char* kMeanTraceCsvHeader = "k,mean_sq_dist,stderr,R";

inline void write_trace_csv(const Trace& trace, std::ostream& os,
                            bool include_wall_time = true) {
  os << kTraceCsvHeader << '\n';
  for (const auto& r : trace.records) {
    os << r.k << ',' << format_optional(r.sq_dist_to_opt) << ','
       << format_optional(r.objective) << ','
       << format_optional(r.dist_to_feasible) << ','
       << (include_wall_time ? format_optional(r.wall_time_s) : std::string())
       << '\n';
  }
}

inline void write_mean_trace_csv(const MeanTrace& trace, std::ostream& os) {
  os << kMeanTraceCsvHeader << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    os << trace.k[i] << ',' << format_double(trace.mean[i]) << ','
       << format_double(trace.stderr_[i]) << ',' << trace.replicas << '\n';
  }
}

namespace detail {

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

inline void finish_write(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::optional<double> parse_cell(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw std::invalid_argument("bad CSV number '" + std::string(cell) + "'");
  return v;
}

inline std::size_t parse_index(std::string_view cell) {
  std::size_t v = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw std::invalid_argument("bad CSV index '" + std::string(cell) + "'");
  return v;
}

}  // namespace detail

inline void emit_trace_csv(const Trace& trace, const std::string& path,
                           bool include_wall_time = true) {
  auto os = detail::open_for_write(path);
  write_trace_csv(trace, os, include_wall_time);
  detail::finish_write(os, path);
}

inline void emit_trace_csv(const MeanTrace& trace, const std::string& path) {
  auto os = detail::open_for_write(path);
  write_mean_trace_csv(trace, os);
  detail::finish_write(os, path);
}

/// Reads the records of a trace CSV (run metadata is not part of the file).
inline std::vector<TraceRecord> parse_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTraceCsvHeader)
    throw std::invalid_argument("trace CSV: unexpected header");
  std::vector<TraceRecord> records;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 5) throw std::invalid_argument("trace CSV: need 5 columns");
    TraceRecord r;
    r.k = detail::parse_index(cells[0]);
    r.sq_dist_to_opt = detail::parse_cell(cells[1]);
    r.objective = detail::parse_cell(cells[2]);
    r.dist_to_feasible = detail::parse_cell(cells[3]);
    r.wall_time_s = detail::parse_cell(cells[4]);
    records.push_back(r);
  }
  return records;
}

inline MeanTrace parse_mean_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMeanTraceCsvHeader)
    throw std::invalid_argument("mean trace CSV: unexpected header");
  MeanTrace t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 4)
      throw std::invalid_argument("mean trace CSV: need 4 columns");
    t.k.push_back(detail::parse_index(cells[0]));
    t.mean.push_back(detail::parse_cell(cells[1]).value());
    t.stderr_.push_back(detail::parse_cell(cells[2]).value());
    t.replicas = detail::parse_index(cells[3]);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Static plots

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal SVG line chart; log10 axes where requested, nonpositive points
/// on a log axis are dropped.
inline std::string render_svg(const std::vector<PlotSeries>& series,
                              const std::string& title, bool log_x,
                              bool log_y) {
  constexpr double W = 640, H = 420, left = 70, right = 20, top = 40, bottom = 50;
  auto tx = [log_x](double v) { return log_x ? std::log10(v) : v; };
  auto ty = [log_y](double v) { return log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!log_x || x > 0) &&
           (!log_y || y > 0);
  };
  double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (usable(s.x[i], s.y[i])) {
        x0 = std::min(x0, tx(s.x[i]));
        x1 = std::max(x1, tx(s.x[i]));
        y0 = std::min(y0, ty(s.y[i]));
        y1 = std::max(y1, ty(s.y[i]));
      }
  if (!(x0 < x1)) { x0 = 0; x1 = 1; }
  if (!(y0 < y1)) { y0 -= 1; y1 += 1; }
  auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double v) { return H - bottom - (ty(v) - y0) / (y1 - y0) * (H - top - bottom); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n"
     << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\""
     << W - left - right << "\" height=\"" << H - top - bottom
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  auto label = [&](double v, bool log) {
    return log ? "1e" + format_double(std::round(v * 100) / 100) : format_double(v);
  };
  os << "<text x=\"" << left << "\" y=\"" << H - 20
     << "\" font-family=\"sans-serif\" font-size=\"11\">" << label(x0, log_x)
     << "</text>\n<text x=\"" << W - right << "\" y=\"" << H - 20
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
     << label(x1, log_x) << "</text>\n<text x=\"5\" y=\"" << H - bottom
     << "\" font-family=\"sans-serif\" font-size=\"11\">" << label(y0, log_y)
     << "</text>\n<text x=\"5\" y=\"" << top + 10
     << "\" font-family=\"sans-serif\" font-size=\"11\">" << label(y1, log_y)
     << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i)
      if (usable(series[s].x[i], series[s].y[i]))
        os << px(series[s].x[i]) << ',' << py(series[s].y[i]) << ' ';
    os << "\"/>\n<text x=\"" << left + 10 << "\" y=\"" << top + 18 + 16 * s
       << "\" fill=\"" << color << "\" font-family=\"sans-serif\" "
       << "font-size=\"12\">" << series[s].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace sspg
