#include "oracles.hpp"
#include "sspg/analysis.hpp"
#include "sspg/baseline.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <sstream>

using namespace sspg;

namespace {

MeanTrace synthetic(std::size_t K, const std::function<double(std::size_t)>& f) {
  MeanTrace t;
  t.replicas = 2;
  for (std::size_t k = 0; k <= K; ++k) {
    t.k.push_back(k);
    t.mean.push_back(f(k));
    t.stderr_.push_back(0.0);
  }
  return t;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(RateFit, ExactPowerLaw) {
  const MeanTrace t = synthetic(1000, [](std::size_t k) { return 3.0 / std::max<double>(k, 1); });
  const RateReport r = fit_rate_exponent(t, 10, 1000, 1.0);
  EXPECT_NEAR(r.slope, -1.0, 1e-12);
  EXPECT_NEAR(r.intercept, std::log(3.0), 1e-10);
  EXPECT_NEAR(r.r_squared, 1.0, 1e-12);
  EXPECT_TRUE(r.pass);
}

TEST(RateFit, NoisySquareRootDecay) {
  Rng rng(1);
  const MeanTrace t = synthetic(10000, [&](std::size_t k) {
    return 2.0 / std::sqrt(std::max<double>(k, 1)) * (1.0 + 0.01 * rng.normal());
  });
  const RateReport r = fit_rate_exponent(t, 100, 10000, 0.5);
  EXPECT_GE(r.slope, -0.55);
  EXPECT_LE(r.slope, -0.45);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(fit_rate_exponent(t, 100, 10000, 1.0).pass);
}

TEST(RateFit, ScaleInvariant) {
  Rng rng(2);
  MeanTrace t = synthetic(5000, [&](std::size_t k) {
    return std::pow(std::max<double>(k, 1), -0.7) * std::exp(0.1 * rng.normal());
  });
  const RateReport a = fit_rate_exponent(t, 50, 5000, 0.7);
  for (double& v : t.mean) v *= 37.5;
  const RateReport b = fit_rate_exponent(t, 50, 5000, 0.7);
  EXPECT_NEAR(a.slope, b.slope, 1e-12);
  EXPECT_NEAR(b.intercept - a.intercept, std::log(37.5), 1e-10);
  EXPECT_GE(a.r_squared, 0.0);
  EXPECT_LE(a.r_squared, 1.0);
}

TEST(RateFit, Errors) {
  MeanTrace t = synthetic(100, [](std::size_t) { return 1.0; });
  t.mean[50] = 0.0;
  EXPECT_THROW(fit_rate_exponent(t, 10, 100, 1.0), std::domain_error);
  EXPECT_THROW(fit_rate_exponent(t, 100, 10, 1.0), std::invalid_argument);
  EXPECT_THROW(fit_rate_exponent(t, 0, 10, 1.0), std::invalid_argument);
  EXPECT_THROW(fit_rate_exponent(t, 200, 300, 1.0), std::invalid_argument);
}

TEST(GeometricFit, RecoversContraction) {
  const MeanTrace t = synthetic(200, [](std::size_t k) { return 4.0 * std::pow(0.9, k); });
  const LinearFit f = fit_geometric_rate(t, 0, 200);
  EXPECT_NEAR(std::exp(f.slope), 0.9, 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(Plateau, TailMean) {
  const MeanTrace t = synthetic(99, [](std::size_t k) { return k < 80 ? 10.0 : 2.0; });
  EXPECT_DOUBLE_EQ(plateau_level(t, 0.2), 2.0);
  EXPECT_THROW(plateau_level(t, 0.0), std::invalid_argument);
  EXPECT_THROW(plateau_level(t, 0.6), std::invalid_argument);
}

TEST(Plateau, DeterministicRunVanishes) {
  const SRProblem p = generate_sr_instance(4, 1, 0.5, 0.3, 3);
  const Vector ref = reference_solution(p, 1e-12).x;
  const double L = sr_constants(p).theory.lipschitz;
  MonteCarloOptions opts;
  opts.x0 = Vector::Constant(4, 2.0);
  const auto sched = StepsizeSchedule::constant(1.0 / (2.0 * L));
  const double short_run = plateau_level(
      run_monte_carlo(SRSmooth(p), SRProx(p), sched, 1, 2, 100, ref, opts), 0.2);
  const double long_run = plateau_level(
      run_monte_carlo(SRSmooth(p), SRProx(p), sched, 1, 2, 1000, ref, opts), 0.2);
  EXPECT_LT(long_run, 1e-3 * short_run);
  EXPECT_LT(long_run, 1e-15);
}

TEST(Plateau, HalvingStepRoughlyHalvesLevel) {
  const SRProblem p = generate_sr_instance(10, 40, 2.0, 1e-3, 11);
  const Vector ref = reference_solution(p, 1e-10).x;
  const double L = sr_constants(p).theory.lipschitz;
  MonteCarloOptions opts;
  opts.threads = 4;
  const double mu = 1.0 / (4.0 * L);
  const double full = plateau_level(
      run_monte_carlo(SRSmooth(p), SRProx(p), StepsizeSchedule::constant(mu), 1, 200,
                      8000, ref, opts), 0.5);
  const double half = plateau_level(
      run_monte_carlo(SRSmooth(p), SRProx(p), StepsizeSchedule::constant(mu / 2), 1,
                      200, 8000, ref, opts), 0.5);
  EXPECT_GE(half / full, 0.3);
  EXPECT_LE(half / full, 0.8);
}

TEST(Bounds, ConstantStepFormula) {
  EXPECT_DOUBLE_EQ(constant_step_bound(0, 0.1, 2.0, 3.0, 4.0), 3.0 + 0.05 * 4.0);
  EXPECT_NEAR(constant_step_bound(10, 0.1, 2.0, 3.0, 4.0),
              std::pow(0.8, 10) * 3.0 + 0.2, 1e-15);
}

TEST(Bounds, RecurrenceCurveConstantStepStaysUnderClosedForm) {
  TheoryConstants c{4.0, 1.0, 0.5, 0.0, std::nullopt};
  const auto sched = StepsizeSchedule::constant(0.125);
  const auto b = recurrence_bound_curve(sched, c, 2.0, 500);
  for (std::size_t k = 0; k <= 500; ++k)
    ASSERT_LE(b[k], constant_step_bound(k, 0.125, 1.0, 2.0, 0.5) * (1.0 + 1e-12));
}

TEST(Bounds, CfpEnvelopeAndPhi) {
  EXPECT_DOUBLE_EQ(cfp_linear_bound(0, 0.25, 2.0), 2.0);
  EXPECT_NEAR(cfp_linear_bound(3, 0.25, 2.0), 2.0 * std::pow(1.0 - 1.0 / 32.0, 3), 1e-15);
  EXPECT_DOUBLE_EQ(phi(0.0, std::exp(2.0)), 2.0);
  EXPECT_DOUBLE_EQ(phi(0.5, 4.0), 2.0);
}

TEST(Csv, FloatsUseSeventeenDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Csv, TraceRoundTrip) {
  Trace t;
  Rng rng(5);
  for (std::size_t k = 0; k < 50; ++k) {
    TraceRecord r;
    r.k = k;
    r.sq_dist_to_opt = rng.uniform() * 1e-7;
    if (k % 2) r.objective = rng.normal();
    if (k % 3) r.dist_to_feasible = rng.uniform();
    r.wall_time_s = 1e-6 * static_cast<double>(k);
    t.records.push_back(r);
  }
  std::stringstream ss;
  write_trace_csv(t, ss);
  EXPECT_EQ(parse_trace_csv(ss), t.records);

  std::stringstream without;
  write_trace_csv(t, without, false);
  const auto parsed = parse_trace_csv(without);
  for (const auto& r : parsed) EXPECT_FALSE(r.wall_time_s.has_value());
}

TEST(Csv, MeanTraceSchemaAndRoundTrip) {
  MeanTrace t = synthetic(20, [](std::size_t k) { return 1.0 / (1.0 + k); });
  t.stderr_[3] = 0.125;
  std::stringstream ss;
  write_mean_trace_csv(t, ss);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  EXPECT_EQ(header, "k,mean_sq_dist,stderr,R");
  const MeanTrace back = parse_mean_trace_csv(ss);
  EXPECT_EQ(back.k, t.k);
  EXPECT_EQ(back.mean, t.mean);
  EXPECT_EQ(back.stderr_, t.stderr_);
  EXPECT_EQ(back.replicas, t.replicas);
}

TEST(Csv, BadInputRejected) {
  std::stringstream wrong("a,b,c\n1,2,3\n");
  EXPECT_THROW(parse_trace_csv(wrong), std::invalid_argument);
  std::stringstream bad(std::string(kTraceCsvHeader) + "\n1,x,,,\n");
  EXPECT_THROW(parse_trace_csv(bad), std::invalid_argument);
}

TEST(Csv, UnwritablePathNamesThePath) {
  Trace t;
  try {
    emit_trace_csv(t, "/nonexistent-dir/trace.csv");
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/trace.csv"), std::string::npos);
  }
}

TEST(Csv, HundredThousandRowsUnderTwoSeconds) {
  Trace t;
  for (std::size_t k = 0; k < 100000; ++k) {
    TraceRecord r;
    r.k = k;
    r.sq_dist_to_opt = 1.0 / (1.0 + static_cast<double>(k));
    r.objective = 0.5 + r.sq_dist_to_opt.value();
    r.wall_time_s = 1e-7 * static_cast<double>(k);
    t.records.push_back(r);
  }
  const auto path = temp_path("sspg_bench_trace.csv");
  const auto start = std::chrono::steady_clock::now();
  emit_trace_csv(t, path);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(seconds, 2.0);
  std::ifstream is(path);
  EXPECT_EQ(parse_trace_csv(is).size(), 100000u);
  std::filesystem::remove(path);
}

TEST(Svg, RendersSeriesAndSkipsNonpositive) {
  const std::string svg = render_svg(
      {{"a", {1.0, 10.0, 100.0}, {1.0, 0.1, 0.0}}, {"b", {1.0, 2.0}, {2.0, 3.0}}},
      "demo", true, true);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("demo"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
