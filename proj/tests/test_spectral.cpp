#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "predict/conditioning.hpp"
#include "predict/errors.hpp"
#include "predict/ode.hpp"
#include "predict/spectral_linear.hpp"
#include "test_util.hpp"

using namespace predict;
using linear::LinearExample;
using linear::LinearModel;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Real-space value of a kernel from its Fourier coefficients.
double kernel_value(const Eigen::VectorXcd& coeff, int K, double x) {
  double acc = coeff[K].real();
  for (int k = 1; k <= K; ++k) {
    const std::complex<double> e(std::cos(k * x), std::sin(k * x));
    acc += 2.0 * (coeff[K + k] * e).real();
  }
  return acc;
}

} // namespace

TEST_CASE("constraint covariance matches real-space quadrature against the closed-form prior") {
  // Independent route: convolve the two unit-mass periodic Gaussians into one
  // of width sigma*sqrt(2) and integrate it against the closed-form
  // Green function with composite Simpson. No Fourier sums involved.
  for (double frac : {1.0, 0.5}) {
    const LinearModel model = LinearModel::make(1.0, 5, frac);
    const LinearExample ex(model);
    const double sigma = frac * model.dx();
    double worst = 0.0;
    for (int b = 0; b < 5; ++b)
      for (int a = 0; a < 5; ++a) {
        const double ref =
            oracle::constraint_cov_entry(1.0, sigma, kTwoPi * b / 5.0, kTwoPi * a / 5.0);
        worst = std::max(worst, std::abs(ex.M()(b, a) - ref));
      }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("constraint covariance is translation invariant over evenly spaced kernels") {
  const LinearExample ex(LinearModel::make(1.0, 5, 1.0));
  const Eigen::MatrixXd& M = ex.M();
  for (int shift = 1; shift < 5; ++shift)
    for (int a = 0; a < 5; ++a) {
      const int b = (a + shift) % 5;
      CHECK(M(a, b) == doctest::Approx(M(0, shift % 5)).epsilon(1e-12));
    }
  CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("kernel Gram matrix matches the Gaussian convolution closed form") {
  const LinearModel model = LinearModel::make(1.0, 5, 1.0);
  const LinearExample ex(model);
  const double width = model.sigma * std::sqrt(2.0);
  for (int b = 0; b < 5; ++b)
    for (int a = 0; a < 5; ++a) {
      const double ref = oracle::periodic_gaussian(kTwoPi * (b - a) / 5.0, width);
      CHECK(ex.gram()(b, a) == doctest::Approx(ref).epsilon(1e-10));
    }
}

TEST_CASE("the stationary two-point function hits the closed form at half period") {
  const LinearExample ex(LinearModel::make(1.0, 5, 1.0, 512));
  const double got = ex.covariance_profile(std::numbers::pi);
  const double want = oracle::green_periodic(1.0, std::numbers::pi);
  CHECK(std::abs(got - want) < 1e-6); // alternating truncation tail at this separation
  // reflection symmetry of the series itself
  CHECK(ex.covariance_profile(1.3) == doctest::Approx(ex.covariance_profile(kTwoPi - 1.3)).epsilon(1e-12));
}

TEST_CASE("kernel Fourier coefficients: unit mass, conjugate symmetry, real-space match") {
  const LinearModel model = LinearModel::make(1.0, 5, 1.0);
  const int K = model.K;
  for (int alpha : {0, 2}) {
    const Eigen::VectorXcd c = linear::kernel_fourier(model, alpha);
    REQUIRE(c.size() == 2 * K + 1);
    CHECK(c[K].real() == doctest::Approx(1.0 / kTwoPi).epsilon(1e-13)); // unit mass
    CHECK(std::abs(c[K].imag()) < 1e-15);
    for (int k : {1, 2, 7, 50}) {
      CHECK(std::abs(c[K + k] - std::conj(c[K - k])) < 1e-15);
    }
    const double xa = kTwoPi * alpha / 5.0;
    for (double x : {0.0, 0.3, 1.7, std::numbers::pi, 5.1}) {
      const double want = oracle::periodic_gaussian(x - xa, model.sigma);
      CHECK(kernel_value(c, K, x) == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("zero measured values give the zero interpolant") {
  const LinearModel model = LinearModel::make(1.0, 5, 1.0);
  Eigen::VectorXd x(3);
  x << 0.0, 1.0, 4.0;
  const auto [p, q] = linear::optimal_interpolant(model, Eigen::VectorXd::Zero(10), x);
  CHECK(p.cwiseAbs().maxCoeff() == 0.0);
  CHECK(q.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the interpolant reproduces the measured values through the kernels") {
  const LinearModel model = LinearModel::make(1.0, 5, 1.0);
  const LinearExample ex(model);
  const Eigen::VectorXd V = ex.sample_collective_values(404);
  // mode representation of the conditional p field = regression columns * V^p
  const Eigen::MatrixXcd reg = ex.regression_fourier();
  const Eigen::VectorXcd p_modes = reg * V.head(5);
  const Eigen::VectorXd back = ex.apply_kernels_modes(p_modes);
  CHECK((back - V.head(5)).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + V.cwiseAbs().maxCoeff()));
}

TEST_CASE("spectral interpolant agrees with dense grid conditioning") {
  // Dual route: the same conditional mean computed (a) by Fourier regression
  // sums and (b) by dense linear algebra on a grid restriction of the prior.
  const LinearModel model = LinearModel::make(1.0, 5, 1.0, 200);
  const LinearExample ex(model);
  const int n_eval = 512;
  REQUIRE(n_eval >= 2 * model.K + 1);
  const GaussianMoments prior = ex.grid_prior(n_eval);
  const GridKernels kernels = ex.grid_kernels(n_eval);
  const Eigen::VectorXd V = ex.sample_collective_values(405);

  ConditionedGaussian cond(prior, kernels, V);
  const Field grid_mean = cond.conditional_mean();

  Eigen::VectorXd x(n_eval);
  for (int j = 0; j < n_eval; ++j) x[j] = kTwoPi * j / n_eval;
  const auto [p, q] = ex.interpolant(V, x);
  CHECK((p - grid_mean.comps[0]).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((q - grid_mean.comps[1]).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("grid and spectral constraint covariances coincide") {
  const LinearModel model = LinearModel::make(1.0, 5, 1.0, 200);
  const LinearExample ex(model);
  const int n_eval = 512;
  const Eigen::MatrixXd Mg =
      constraint_covariance(ex.grid_prior(n_eval), ex.grid_kernels(n_eval));
  // grid kernels stack the p block then the q block with zero cross terms
  REQUIRE(Mg.rows() == 10);
  const double scale = ex.M().cwiseAbs().maxCoeff();
  CHECK((Mg.topLeftCorner(5, 5) - ex.M()).cwiseAbs().maxCoeff() < 1e-10 * scale);
  CHECK((Mg.bottomRightCorner(5, 5) - ex.M()).cwiseAbs().maxCoeff() < 1e-10 * scale);
  CHECK(Mg.topRightCorner(5, 5).cwiseAbs().maxCoeff() < 1e-12 * scale);
}

TEST_CASE("the effective generator is the tangent of the exact evolution") {
  const LinearExample ex(LinearModel::make(1.0, 5, 1.0));
  const Eigen::MatrixXd J = ex.effective_matrix();
  REQUIRE(J.rows() == 10);
  // block structure: zero diagonal blocks, skew pair off the diagonal
  CHECK(J.topLeftCorner(5, 5).cwiseAbs().maxCoeff() == 0.0);
  CHECK(J.bottomRightCorner(5, 5).cwiseAbs().maxCoeff() == 0.0);
  CHECK((J.topRightCorner(5, 5) + J.bottomLeftCorner(5, 5)).cwiseAbs().maxCoeff() < 1e-14);
  // B * M is the kernel Gram matrix, hence symmetric
  const Eigen::MatrixXd BM = ex.B() * ex.M();
  CHECK((BM - BM.transpose()).cwiseAbs().maxCoeff() < 1e-10 * BM.cwiseAbs().maxCoeff());

  // t = 0 identity
  const Eigen::VectorXd V = ex.sample_collective_values(77);
  CHECK((ex.exact_evolution(V, 0.0) - V).cwiseAbs().maxCoeff() < 1e-12 * V.cwiseAbs().maxCoeff());

  // fourth-order central difference of the exact evolution at t = 0
  const double h = 1e-3;
  const Eigen::VectorXd fd = (8.0 * (ex.exact_evolution(V, h) - ex.exact_evolution(V, -h)) -
                              (ex.exact_evolution(V, 2 * h) - ex.exact_evolution(V, -2 * h))) /
                             (12.0 * h);
  CHECK((fd - J * V).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + V.cwiseAbs().maxCoeff()));
}

TEST_CASE("trig kernels close exactly: rotation at the dispersion frequency") {
  const int k0 = 3, K = 64;
  const LinearModel model = LinearModel::with_kernels(1.0, linear::trig_pair_kernels(k0, K));
  const LinearExample ex(model);
  const double w = k0 * k0 + 1.0; // dispersion at the kernel mode
  const Eigen::MatrixXd J = ex.effective_matrix();

  // J generates a rotation: J^2 = -w^2 I
  const Eigen::MatrixXd J2 = J * J;
  CHECK((J2 + w * w * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);

  Eigen::VectorXd V(4);
  V << 0.9, -0.3, 0.2, 1.1;
  for (int i = 0; i <= 40; ++i) {
    const double t = 0.25 * i; // covers [0, 10]
    const Eigen::VectorXd exact = ex.exact_evolution(V, t);
    const Eigen::VectorXd rotated = std::cos(w * t) * V + (std::sin(w * t) / w) * (J * V);
    CHECK((exact - rotated).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("sampled collective values are centered with covariance M") {
  const LinearExample ex(LinearModel::make(1.0, 5, 1.0));
  const int draws = 10'000;
  Eigen::MatrixXd sum_outer = Eigen::MatrixXd::Zero(10, 10);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(10);
  for (int s = 0; s < draws; ++s) {
    const Eigen::VectorXd V = ex.sample_collective_values(derive_seed(2024, 9, s));
    sum += V;
    sum_outer += V * V.transpose();
  }
  const Eigen::VectorXd mean = sum / draws;
  const Eigen::MatrixXd cov = sum_outer / draws - mean * mean.transpose();
  // target covariance: diag(M, M) with no cross-block correlation
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(10, 10);
  target.topLeftCorner(5, 5) = ex.M();
  target.bottomRightCorner(5, 5) = ex.M();
  for (int i = 0; i < 10; ++i) {
    CHECK(std::abs(mean[i]) < 5.0 * std::sqrt(target(i, i) / draws));
    for (int j = 0; j < 10; ++j) {
      const double se =
          std::sqrt((target(i, i) * target(j, j) + target(i, j) * target(i, j)) / draws);
      CHECK(std::abs(cov(i, j) - target(i, j)) < 5.0 * se);
    }
  }
}

TEST_CASE("narrower kernels make the constraint covariance better conditioned") {
  const double c_wide = LinearExample(LinearModel::make(1.0, 5, 1.0)).condition_number();
  const double c_mid = LinearExample(LinearModel::make(1.0, 5, 0.5)).condition_number();
  const double c_narrow = LinearExample(LinearModel::make(1.0, 5, 0.1)).condition_number();
  CHECK(c_wide > c_mid);
  CHECK(c_mid > c_narrow);
  CHECK(c_narrow >= 1.0);
}

TEST_CASE("the effective flow conserves its quadratic invariant") {
  const LinearExample ex(LinearModel::make(1.0, 5, 1.0));
  const Eigen::MatrixXd J = ex.effective_matrix();
  const Eigen::MatrixXd Minv = ex.M_inverse();
  // M^-1 B M^-1 symmetric <=> V^T diag(M^-1, M^-1) V is invariant under J
  const Eigen::MatrixXd S = Minv * ex.B() * Minv;
  CHECK((S - S.transpose()).cwiseAbs().maxCoeff() < 1e-10 * S.cwiseAbs().maxCoeff());

  Eigen::MatrixXd Sfull = Eigen::MatrixXd::Zero(10, 10);
  Sfull.topLeftCorner(5, 5) = Minv;
  Sfull.bottomRightCorner(5, 5) = Minv;
  const Eigen::VectorXd V0 = ex.sample_collective_values(31);
  const double q0 = V0.dot(Sfull * V0);

  ode::Settings s;
  s.dt = 1e-3;
  s.t_end = 10.0;
  s.record_every = 1000;
  const auto traj = ode::integrate(
      [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = J * y; }, V0, s);
  double worst = 0.0;
  for (const auto& y : traj.states) worst = std::max(worst, std::abs(y.dot(Sfull * y) - q0));
  CHECK(worst < 1e-8 * std::abs(q0));
}

TEST_CASE("overlapping kernels beyond the condition limit are rejected") {
  CHECK(testutil::thrown_code([] { LinearExample ex(LinearModel::make(1.0, 5, 50.0)); }) ==
        static_cast<int>(ErrorCode::ill_conditioned));
}

TEST_CASE("truncation choice respects the floor and auto-raises for narrow kernels") {
  const int k1 = linear::choose_truncation(1.0, 0.05, 8);
  CHECK(k1 > 8); // a width-0.05 kernel needs far more modes
  const int k2 = linear::choose_truncation(1.0, 1.0, 512);
  CHECK(k2 >= 512);
  const LinearModel model = LinearModel::make(1.0, 5, 1.0, 512);
  CHECK(model.K == linear::choose_truncation(1.0, model.sigma, 512));
}

TEST_CASE("malformed spectral kernels are rejected") {
  CHECK(testutil::thrown_code([] { linear::trig_pair_kernels(100, 64); }) ==
        static_cast<int>(ErrorCode::invalid_input)); // mode above truncation
  linear::SpectralKernels bad;
  bad.K = 4;
  bad.coeffs = {Eigen::VectorXcd::Ones(7)}; // wrong length (needs 2K+1 = 9)
  CHECK(testutil::thrown_code([&] { bad.validate(); }) ==
        static_cast<int>(ErrorCode::invalid_input));
  Eigen::VectorXcd asym = Eigen::VectorXcd::Zero(9);
  asym[4] = 1.0;
  asym[5] = std::complex<double>(0.0, 1.0); // conj(asym[3]) would have to be -i
  asym[3] = std::complex<double>(0.0, 1.0);
  linear::SpectralKernels bad2;
  bad2.K = 4;
  bad2.coeffs = {asym};
  CHECK(testutil::thrown_code([&] { bad2.validate(); }) ==
        static_cast<int>(ErrorCode::invalid_input));
}
