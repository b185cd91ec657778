#include "oracles.hpp"
#include "sspg/baseline.hpp"
#include "sspg/sr.hpp"
#include "sspg/sr_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace sspg;

namespace {

// Minimizes m lambda |Delta_xi z| + ||z - v||^2 / (2 mu) over z = v - t Delta_xi^T.
Vector golden_prox(const SRProblem& p, const Vector& v, std::size_t xi, double mu) {
  const Vector d = p.analysis.row(static_cast<Eigen::Index>(xi)).transpose();
  long double dv = 0.0L, dd = 0.0L;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    dv += static_cast<long double>(d[i]) * v[i];
    dd += static_cast<long double>(d[i]) * d[i];
  }
  const long double w = static_cast<long double>(p.rows()) * p.lambda;
  auto phi = [&](long double t) {
    return w * std::abs(dv - t * dd) + t * t * dd / (2.0L * mu);
  };
  const long double beta = dv / dd;
  const long double t = oracle::golden_section(
      phi, std::min(0.0L, beta) - 1.0L, std::max(0.0L, beta) + 1.0L, 400);
  return v - static_cast<double>(t) * d;
}

}  // namespace

TEST(Generate, Fig1Shapes) {
  const SRProblem p = generate_sr_instance(20, 80, 0.5, 5.0, 7);
  EXPECT_EQ(p.dictionary.rows(), 80);
  EXPECT_EQ(p.dictionary.cols(), 20);
  EXPECT_EQ(p.analysis.rows(), 80);
  EXPECT_EQ(p.analysis.cols(), 20);
  EXPECT_EQ(p.signal.size(), 80);
}

TEST(Generate, Fig2Shapes) {
  const SRProblem p = generate_sr_instance(50, 300, 0.2, 5e-4, 1);
  EXPECT_EQ(p.dictionary.rows(), 300);
  EXPECT_EQ(p.dictionary.cols(), 50);
  EXPECT_EQ(p.signal.size(), 300);
}

TEST(Generate, SeedDeterminesInstance) {
  EXPECT_TRUE(generate_sr_instance(6, 10, 0.5, 1.0, 3) ==
              generate_sr_instance(6, 10, 0.5, 1.0, 3));
  EXPECT_FALSE(generate_sr_instance(6, 10, 0.5, 1.0, 3) ==
               generate_sr_instance(6, 10, 0.5, 1.0, 4));
}

TEST(Generate, Validation) {
  EXPECT_THROW(generate_sr_instance(0, 4, 0.5, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(generate_sr_instance(3, 4, 0.0, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(generate_sr_instance(3, 4, 0.5, -1.0, 1), std::invalid_argument);
  SRProblem p = generate_sr_instance(3, 4, 0.5, 1.0, 1);
  p.analysis.row(2).setZero();
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Gradient, ZeroInput) {
  const SRProblem p = generate_sr_instance(4, 6, 0.5, 1.0, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    const Vector g = sr_grad(p, Vector::Zero(4), SampleIndex{i});
    const Vector expected = -p.signal[static_cast<Eigen::Index>(i)] *
                            p.dictionary.row(static_cast<Eigen::Index>(i)).transpose();
    EXPECT_LT((g - expected).norm(), 1e-15);
  }
}

TEST(Gradient, VanishesOnInterpolatingPointWithoutRidge) {
  SRProblem p = generate_sr_instance(4, 6, 0.5, 1.0, 2);
  p.alpha = 0.0;
  Vector x(4);
  x << 1.0, -2.0, 0.5, 3.0;
  p.signal = p.dictionary * x;
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_LT(sr_grad(p, x, SampleIndex{i}).norm(), 1e-12);
}

TEST(Gradient, CentralFiniteDifferences) {
  const SRProblem p = generate_sr_instance(8, 30, 0.5, 1.0, 3);
  const SRSmooth f(p);
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const Vector x = oracle::random_vector(rng, 8, 2.0);
    const SampleIndex xi{rng.below(30)};
    const Vector fd = oracle::central_difference(
        [&](const Vector& z) { return f.value(z, xi); }, x);
    const Vector g = sr_grad(p, x, xi);
    ASSERT_LE((g - fd).norm() / std::max(g.norm(), 1e-12), 1e-6) << "trial " << trial;
  }
}

TEST(Gradient, AveragedGradientIdentity) {
  const SRProblem p = generate_sr_instance(7, 25, 0.3, 1.0, 5);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = oracle::random_vector(rng, 7);
    Vector avg = Vector::Zero(7);
    for (std::size_t i = 0; i < 25; ++i) avg += sr_grad(p, x, SampleIndex{i});
    avg /= 25.0;
    const Vector direct =
        p.dictionary.transpose() * (p.dictionary * x - p.signal) / 25.0 + 0.3 * x;
    EXPECT_LT((avg - direct).norm(), 1e-12 * (1.0 + direct.norm()));
  }
}

TEST(Prox, KernelPointUnchanged) {
  const SRProblem p = generate_sr_instance(5, 7, 0.5, 2.0, 8);
  Rng rng(1);
  Vector v = oracle::random_vector(rng, 5);
  const Vector d = p.analysis.row(4).transpose();
  v -= d * d.dot(v) / d.squaredNorm();
  EXPECT_LT((sr_prox(p, v, SampleIndex{4}, 0.3) - v).norm(), 1e-14);
}

TEST(Prox, ScalarSoftThreshold) {
  SRProblem p;
  p.dictionary = RowMatrix::Ones(1, 1);
  p.analysis = RowMatrix::Ones(1, 1);
  p.signal = Vector::Zero(1);
  p.alpha = 1.0;
  p.lambda = 2.0;  // m lambda mu = 2 with m = 1, mu = 1
  Vector v(1);
  v << 5.0;
  const Vector z = sr_prox(p, v, SampleIndex{0}, 1.0);
  EXPECT_DOUBLE_EQ(z[0], 3.0);
  const double grid = oracle::grid_argmin(
      [](double t) { return 2.0 * std::abs(t) + (t - 5.0) * (t - 5.0) / 2.0; },
      -10.0, 10.0, 200001);
  EXPECT_NEAR(z[0], grid, 1e-4);
}

TEST(Prox, MatchesGoldenSectionOracle) {
  Rng rng(10);
  for (int family = 0; family < 4; ++family) {
    const SRProblem p = generate_sr_instance(3 + 2 * family, 12, 0.5,
                                             family == 0 ? 5.0 : 0.05, 40 + family);
    for (int trial = 0; trial < 250; ++trial) {
      const Vector v = oracle::random_vector(rng, p.dictionary.cols(), 3.0);
      const std::size_t xi = rng.below(12);
      const double mu = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
      const Vector z = sr_prox(p, v, SampleIndex{xi}, mu);
      ASSERT_LE((z - golden_prox(p, v, xi, mu)).norm(), 1e-8);
      ASSERT_LE(prox_optimality_residual(SRProx(p), v, z, SampleIndex{xi}, mu), 1e-9);
    }
  }
}

TEST(Prox, BothBranchesExercised) {
  const SRProblem p = generate_sr_instance(4, 10, 0.5, 0.5, 12);
  Rng rng(13);
  int project = 0, shift = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector v = oracle::random_vector(rng, 4, 3.0);
    const std::size_t xi = rng.below(10);
    const double mu = 0.1 * rng.uniform() + 1e-3;
    const Vector z = sr_prox(p, v, SampleIndex{xi}, mu);
    const double dz = p.analysis.row(static_cast<Eigen::Index>(xi)).dot(z);
    if (std::abs(dz) < 1e-10) ++project; else ++shift;
  }
  EXPECT_GT(project, 50);
  EXPECT_GT(shift, 50);
}

TEST(Prox, FirmlyNonexpansive) {
  const SRProblem p = generate_sr_instance(6, 10, 0.5, 0.5, 14);
  Rng rng(15);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector a = oracle::random_vector(rng, 6, 2.0);
    const Vector b = oracle::random_vector(rng, 6, 2.0);
    const SampleIndex xi{rng.below(10)};
    const double mu = 0.2 * rng.uniform() + 1e-3;
    const Vector pa = sr_prox(p, a, xi, mu), pb = sr_prox(p, b, xi, mu);
    ASSERT_LE((pa - pb).squaredNorm(), (pa - pb).dot(a - b) + 1e-12);
  }
}

TEST(Prox, StationarityIntervalMembership) {
  const SRProblem p = generate_sr_instance(5, 8, 0.5, 0.4, 16);
  const double w = 8 * 0.4;
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector v = oracle::random_vector(rng, 5, 2.0);
    const std::size_t xi = rng.below(8);
    const double mu = 0.3 * rng.uniform() + 1e-3;
    const Vector z = sr_prox(p, v, SampleIndex{xi}, mu);
    const Vector d = p.analysis.row(static_cast<Eigen::Index>(xi)).transpose();
    // (v - z)/mu = w s d with s in the subdifferential of |.| at d^T z.
    const Vector g = (v - z) / mu;
    const double s = g.dot(d) / (w * d.squaredNorm());
    ASSERT_LT((g - w * s * d).norm(), 1e-9 * (1.0 + g.norm()));
    const double dz = d.dot(z);
    if (std::abs(dz) > 1e-9 * (1.0 + z.norm()) * d.norm())
      ASSERT_NEAR(s, dz > 0 ? 1.0 : -1.0, 1e-9);
    else
      ASSERT_LE(std::abs(s), 1.0 + 1e-9);
  }
}

TEST(ProxOracle, ValueConsistency) {
  const SRProblem p = generate_sr_instance(5, 9, 0.5, 0.7, 18);
  const SRProx h(p);
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = oracle::random_vector(rng, 5);
    double total = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
      const double v = h.value(x, SampleIndex{i});
      EXPECT_NEAR(v, 9 * 0.7 *
                         std::abs(p.analysis.row(static_cast<Eigen::Index>(i)).dot(x)),
                  1e-12);
      total += v;
    }
    EXPECT_NEAR(total / 9.0, 0.7 * (p.analysis * x).lpNorm<1>(), 1e-12);
  }
}

TEST(Constants, PureRidge) {
  SRProblem p = generate_sr_instance(3, 4, 0.7, 1.0, 1);
  p.dictionary.setZero();
  const SRConstants c = sr_constants(p);
  EXPECT_DOUBLE_EQ(c.theory.lipschitz, 0.7);
  EXPECT_DOUBLE_EQ(c.theory.strong_convexity, 0.7);
}

TEST(Constants, SingleRow) {
  SRProblem p;
  p.dictionary.resize(1, 2);
  p.dictionary << 3.0, 0.0;
  p.analysis = RowMatrix::Ones(1, 2);
  p.signal = Vector::Zero(1);
  p.alpha = 1.0;
  p.lambda = 1.0;
  EXPECT_DOUBLE_EQ(sr_constants(p).theory.lipschitz, 10.0);
}

TEST(Constants, StrongConvexityMatchesEigenOracle) {
  const SRProblem p = generate_sr_instance(5, 20, 0.4, 1.0, 21);
  // Jacobi eigenvalues of the dense Hessian (1/m) T^T T + alpha I.
  Matrix H = Matrix(p.dictionary.transpose() * p.dictionary) / 20.0 +
             0.4 * Matrix::Identity(5, 5);
  Eigen::JacobiSVD<Matrix> svd(H);
  const double smallest = svd.singularValues().minCoeff();
  EXPECT_NEAR(sr_constants(p).theory.strong_convexity, smallest, 1e-8);
}

TEST(Constants, StrongConvexityOnRandomPairs) {
  const SRProblem p = generate_sr_instance(5, 20, 0.1, 1.0, 22);
  const double s = sr_constants(p).theory.strong_convexity;
  auto F = [&](const Vector& x) {
    return (p.dictionary * x - p.signal).squaredNorm() / 40.0 + 0.05 * x.squaredNorm();
  };
  Rng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector x = oracle::random_vector(rng, 5, 2.0);
    const Vector y = oracle::random_vector(rng, 5, 2.0);
    const double rhs = F(y) + sr_full_gradient(p, y).dot(x - y) +
                       0.5 * s * (x - y).squaredNorm();
    ASSERT_GE(F(x), rhs - 1e-10 * (1.0 + std::abs(rhs)));
  }
}

TEST(Sigma, PureRidge) {
  const SRProblem p = generate_sr_instance(4, 12, 0.5, 0.0, 24);
  const Vector x = reference_solution(p, 1e-11).x;
  const SigmaEstimate s = zero_mean_subgradient_sigma(p, x, 1e-6);
  double total = 0.0;
  for (std::size_t i = 0; i < 12; ++i) total += sr_grad(p, x, SampleIndex{i}).squaredNorm();
  EXPECT_NEAR(s.sigma, 2.0 * total / 12.0, 1e-10 * (1.0 + s.sigma));
  EXPECT_NEAR(s.certificate, sr_full_gradient(p, x).norm(), 1e-12);
  EXPECT_LE(s.certificate, 1e-9);
  EXPECT_TRUE(s.found);
}

TEST(Sigma, DeterministicProblemHasZeroSigma) {
  const SRProblem p = generate_sr_instance(4, 1, 0.5, 0.3, 25);
  const Vector x = reference_solution(p, 1e-12).x;
  const SigmaEstimate s = zero_mean_subgradient_sigma(p, x, 1e-8);
  EXPECT_LE(s.certificate, 1e-9);
  EXPECT_LE(s.sigma, 1e-16);
}

TEST(Sigma, RandomInstanceAgainstBoxQpOracle) {
  const SRProblem p = generate_sr_instance(4, 10, 0.5, 0.3, 26);
  const Vector x = reference_solution(p, 1e-10).x;
  const SigmaEstimate s = zero_mean_subgradient_sigma(p, x, 1e-6);
  EXPECT_LE(s.certificate, 1e-6);
  EXPECT_GT(s.free_rows, 0u);

  // Box QP over the kink coefficients, solved by plain projected gradient.
  const double w = 10 * 0.3;
  Vector fixed = p.dictionary.transpose() * (p.dictionary * x - p.signal) + 10 * 0.5 * x;
  std::vector<Eigen::Index> kinks;
  for (Eigen::Index r = 0; r < 10; ++r) {
    const double dx = p.analysis.row(r).dot(x);
    if (std::abs(dx) <= 1e-7 * p.analysis.row(r).norm())
      kinks.push_back(r);
    else
      fixed += w * (dx > 0 ? 1.0 : -1.0) * p.analysis.row(r).transpose();
  }
  ASSERT_EQ(kinks.size(), s.free_rows);
  Matrix A(4, static_cast<Eigen::Index>(kinks.size()));
  for (std::size_t j = 0; j < kinks.size(); ++j)
    A.col(static_cast<Eigen::Index>(j)) = w * p.analysis.row(kinks[j]).transpose();
  const Vector u = oracle::box_qp(A.transpose() * A, A.transpose() * fixed, -1.0,
                                  1.0, 200000);
  EXPECT_LE((fixed + A * u).norm() / 10.0, 1e-6);
  EXPECT_LE(s.coefficients.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Io, RoundTrip) {
  const SRProblem p = generate_sr_instance(6, 18, 0.2, 5e-4, 31);
  const auto path = (std::filesystem::temp_directory_path() / "sspg_io_test.bin").string();
  save_sr_instance(p, path);
  EXPECT_TRUE(load_sr_instance(path) == p);
  std::filesystem::remove(path);
}

TEST(Io, RejectsForeignFile) {
  const auto path = (std::filesystem::temp_directory_path() / "sspg_io_bad.bin").string();
  {
    std::ofstream os(path, std::ios::binary);
    os << "not an instance";
  }
  EXPECT_THROW(load_sr_instance(path), std::runtime_error);
  std::filesystem::remove(path);
  EXPECT_THROW(load_sr_instance(path), std::runtime_error);
}
