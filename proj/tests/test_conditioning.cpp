#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "predict/conditioning.hpp"
#include "predict/errors.hpp"
#include "predict/field.hpp"
#include "test_util.hpp"

using namespace predict;

namespace {

Eigen::MatrixXd random_spd(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd R(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) R(i, j) = normal(rng);
  Eigen::MatrixXd C = R * R.transpose() / dim;
  C += 0.5 * Eigen::MatrixXd::Identity(dim, dim);
  return C;
}

Eigen::VectorXd random_vector(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  return v;
}

// A small two-component periodic system with three overlapping bump kernels.
struct TestSystem {
  int n = 6;
  int d = 2;
  GaussianMoments prior;
  GridKernels kernels;

  static TestSystem make(std::uint64_t seed) {
    const int n = 6, d = 2;
    Eigen::MatrixXd cov = random_spd(d * n, seed);
    Field mean = Field::from_flat(random_vector(d * n, seed + 1), d, n, 1.0 / n);
    std::vector<GridKernel> ks;
    std::mt19937_64 rng(seed + 2);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    for (int alpha = 0; alpha < 3; ++alpha) {
      GridKernel k;
      k.component = alpha % d;
      k.weights.resize(n);
      for (int j = 0; j < n; ++j) k.weights[j] = unif(rng);
      k.center = alpha;
      ks.push_back(k);
    }
    return TestSystem{n, d, GaussianMoments(std::move(mean), std::move(cov)),
                      GridKernels(std::move(ks), n, d)};
  }
};

} // namespace

TEST_CASE("constraint covariance of unit kernels under a white prior is the identity") {
  const int n = 4, d = 1;
  Field mean = Field::from_flat(Eigen::VectorXd::Zero(n), d, n, 0.25);
  GaussianMoments prior(mean, Eigen::MatrixXd::Identity(n, n));
  std::vector<GridKernel> ks(2);
  ks[0].component = 0;
  ks[0].weights = Eigen::VectorXd::Unit(n, 0);
  ks[1].component = 0;
  ks[1].weights = Eigen::VectorXd::Unit(n, 2);
  GridKernels kernels(ks, n, d);
  const Eigen::MatrixXd M = constraint_covariance(prior, kernels);
  CHECK((M - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("a single flat kernel under a white prior gives its squared norm") {
  const int n = 4, d = 1;
  Field mean = Field::from_flat(Eigen::VectorXd::Zero(n), d, n, 0.25);
  GaussianMoments prior(mean, Eigen::MatrixXd::Identity(n, n));
  std::vector<GridKernel> ks(1);
  ks[0].component = 0;
  ks[0].weights = Eigen::VectorXd::Constant(n, 1.0); // normalized to weight 1/4 each
  GridKernels kernels(ks, n, d);
  const Eigen::MatrixXd M = constraint_covariance(prior, kernels);
  CHECK(M(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("conditioning agrees with a dense reference implementation") {
  TestSystem sys = TestSystem::make(91);
  const Eigen::VectorXd V = random_vector(3, 17);
  ConditionedGaussian cond(sys.prior, sys.kernels, V);
  const auto ref = oracle::condition_dense(sys.prior.mean().flat(), sys.prior.cov(),
                                           sys.kernels.dense(), V);

  CHECK((cond.constraint_cov() - ref.m_matrix).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((cond.coefficients() - ref.coeff).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((cond.conditional_mean().flat() - ref.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((cond.cond_cov() - ref.cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("regression fields are biorthogonal to the kernels") {
  TestSystem sys = TestSystem::make(23);
  const Eigen::MatrixXd coeff = regression_coefficients(sys.prior, sys.kernels);
  const Eigen::MatrixXd P = sys.kernels.dense() * coeff; // should be the 3x3 identity
  CHECK((P - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("the conditional mean reproduces the measured values") {
  TestSystem sys = TestSystem::make(7);
  const Eigen::VectorXd V = random_vector(3, 8);
  ConditionedGaussian cond(sys.prior, sys.kernels, V);
  const Eigen::VectorXd back = sys.kernels.apply_flat(cond.conditional_mean().flat());
  CHECK((back - V).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + V.cwiseAbs().maxCoeff()));
}

TEST_CASE("measuring the prior's own averages leaves the mean unchanged") {
  TestSystem sys = TestSystem::make(41);
  const Eigen::VectorXd V = sys.kernels.apply_flat(sys.prior.mean().flat());
  ConditionedGaussian cond(sys.prior, sys.kernels, V);
  CHECK((cond.conditional_mean().flat() - sys.prior.mean().flat()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("the conditional mean is affine in the measured values") {
  TestSystem sys = TestSystem::make(5);
  const Eigen::VectorXd V1 = random_vector(3, 51);
  const Eigen::VectorXd V2 = random_vector(3, 52);
  const double a = 0.3;
  ConditionedGaussian c1(sys.prior, sys.kernels, V1);
  ConditionedGaussian c2(sys.prior, sys.kernels, V2);
  ConditionedGaussian cmix(sys.prior, sys.kernels, a * V1 + (1.0 - a) * V2);
  const Eigen::VectorXd mix =
      a * c1.conditional_mean().flat() + (1.0 - a) * c2.conditional_mean().flat();
  CHECK((cmix.conditional_mean().flat() - mix).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("the conditional covariance annihilates the kernels") {
  TestSystem sys = TestSystem::make(3);
  const Eigen::MatrixXd cc = conditional_covariance(sys.prior, sys.kernels);
  const double scale = sys.prior.cov().cwiseAbs().maxCoeff();
  CHECK((sys.kernels.dense() * cc).cwiseAbs().maxCoeff() < 1e-10 * scale);
}

TEST_CASE("the conditional covariance does not depend on the measured values") {
  TestSystem sys = TestSystem::make(13);
  ConditionedGaussian c1(sys.prior, sys.kernels, random_vector(3, 1));
  ConditionedGaussian c2(sys.prior, sys.kernels, 100.0 * random_vector(3, 2));
  CHECK(testutil::bitwise_equal(c1.cond_cov(), c2.cond_cov())); // identical, not merely close
}

TEST_CASE("the conditional covariance stays positive semidefinite") {
  TestSystem sys = TestSystem::make(29);
  const Eigen::MatrixXd cc = conditional_covariance(sys.prior, sys.kernels);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cc);
  CHECK(eig.eigenvalues().minCoeff() > -1e-10 * cc.diagonal().maxCoeff());
}

TEST_CASE("pairing moments match the Stein recursion up to order eight") {
  const Eigen::MatrixXd cov = random_spd(3, 1234);
  const Eigen::VectorXd mean = random_vector(3, 1235);
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int l = 1; l <= 8; ++l) {
    for (int rep = 0; rep < 4; ++rep) {
      std::vector<int> idx(l);
      for (int& i : idx) i = pick(rng);
      const double got = wick_moment(cov, mean, idx);
      const double ref = oracle::stein_moment(cov, mean, idx);
      CHECK(got == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("pairing moments match plain Monte Carlo sampling") {
  const Eigen::MatrixXd cov = random_spd(3, 60);
  const Eigen::VectorXd mean = 0.3 * random_vector(3, 61);
  const Eigen::MatrixXd chol = cov.llt().matrixL();
  std::mt19937_64 rng(62);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int draws = 400'000;
  const std::vector<std::vector<int>> cases = {{0, 1}, {0, 1, 2}, {0, 0, 1, 2}, {0, 1, 1, 2, 2, 0}};
  std::vector<std::vector<double>> prods(cases.size());
  for (auto& p : prods) p.reserve(draws);
  Eigen::VectorXd z(3);
  for (int s = 0; s < draws; ++s) {
    for (int i = 0; i < 3; ++i) z[i] = normal(rng);
    const Eigen::VectorXd x = mean + chol * z;
    for (std::size_t c = 0; c < cases.size(); ++c) {
      double p = 1.0;
      for (int i : cases[c]) p *= x[i];
      prods[c].push_back(p);
    }
  }
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto stat = oracle::mean_se(prods[c]);
    const double exact = wick_moment(cov, mean, cases[c]);
    CHECK(std::abs(exact - stat.mean) < 5.0 * stat.se);
  }
}

TEST_CASE("central pairing moments: known closed forms") {
  const Eigen::MatrixXd cov = random_spd(4, 99);
  CHECK(wick_central_moment(cov, {0, 1, 2}) == 0.0); // odd order vanishes
  CHECK(wick_central_moment(cov, {1, 3}) == doctest::Approx(cov(1, 3)).epsilon(1e-14));
  const double s2 = cov(2, 2);
  CHECK(wick_central_moment(cov, {2, 2, 2, 2}) == doctest::Approx(3.0 * s2 * s2).epsilon(1e-13));
}

TEST_CASE("moment order above eight is rejected") {
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
  const std::vector<int> nine(9, 0);
  CHECK(testutil::thrown_code([&] { wick_moment(cov, mean, nine); }) ==
        static_cast<int>(ErrorCode::unsupported_order));
  CHECK(testutil::thrown_code([&] { wick_central_moment(cov, nine); }) ==
        static_cast<int>(ErrorCode::unsupported_order));
  CHECK(testutil::thrown_code([&] { wick_moment(cov, mean, {0, 5}); }) ==
        static_cast<int>(ErrorCode::invalid_input)); // index out of range
}

TEST_CASE("conditional third moment agrees with the Stein recursion") {
  TestSystem sys = TestSystem::make(83);
  const Eigen::VectorXd V = random_vector(3, 84);
  ConditionedGaussian cond(sys.prior, sys.kernels, V);
  const auto ref = oracle::condition_dense(sys.prior.mean().flat(), sys.prior.cov(),
                                           sys.kernels.dense(), V);
  for (int comp = 0; comp < sys.d; ++comp) {
    for (int site = 0; site < sys.n; site += 2) {
      const int k = comp * sys.n + site;
      const double got = cond.conditional_cubic(comp, site);
      const double want = oracle::stein_moment(ref.cov, ref.mean, {k, k, k});
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("conditional third moment agrees with exact conditional sampling") {
  TestSystem sys = TestSystem::make(19);
  const Eigen::VectorXd V = random_vector(3, 20);
  ConditionedGaussian cond(sys.prior, sys.kernels, V);
  oracle::ConditionalSampler sampler(sys.prior.mean().flat(), sys.prior.cov(),
                                     sys.kernels.dense(), V);
  std::mt19937_64 rng(21);
  const int draws = 200'000;
  const int comp = 1, site = 3;
  const int k = comp * sys.n + site;
  std::vector<double> cubes;
  cubes.reserve(draws);
  for (int s = 0; s < draws; ++s) {
    const Eigen::VectorXd u = sampler.draw(rng);
    cubes.push_back(u[k] * u[k] * u[k]);
  }
  const auto stat = oracle::mean_se(cubes);
  CHECK(std::abs(cond.conditional_cubic(comp, site) - stat.mean) < 5.0 * stat.se);
}

TEST_CASE("shape and rank problems are reported with specific codes") {
  TestSystem sys = TestSystem::make(55);

  // wrong number of measured values
  CHECK(testutil::thrown_code([&] {
          ConditionedGaussian bad(sys.prior, sys.kernels, Eigen::VectorXd::Zero(2));
        }) == static_cast<int>(ErrorCode::invalid_input));

  // duplicated kernel rows make the constraint covariance singular
  std::vector<GridKernel> dup(2);
  dup[0].component = 0;
  dup[0].weights = Eigen::VectorXd::Constant(sys.n, 1.0);
  dup[1] = dup[0];
  GridKernels dup_kernels(dup, sys.n, sys.d);
  CHECK(testutil::thrown_code([&] { constraint_covariance(sys.prior, dup_kernels); }) ==
        static_cast<int>(ErrorCode::ill_conditioned));

  // kernel weights that cannot be normalized
  std::vector<GridKernel> zero(1);
  zero[0].component = 0;
  zero[0].weights = Eigen::VectorXd::Zero(sys.n);
  CHECK(testutil::thrown_code([&] { GridKernels bad(zero, sys.n, sys.d); }) ==
        static_cast<int>(ErrorCode::invalid_input));

  // non-symmetric matrix into the SPD inverse
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK(testutil::thrown_code([&] { spd_inverse(asym); }) ==
        static_cast<int>(ErrorCode::invalid_input));

  // indefinite matrix
  Eigen::MatrixXd indef = Eigen::MatrixXd::Identity(2, 2);
  indef(1, 1) = -1.0;
  CHECK(testutil::thrown_code([&] { spd_inverse(indef); }) ==
        static_cast<int>(ErrorCode::ill_conditioned));

  // condition number beyond the policy limit
  Eigen::MatrixXd stiff = Eigen::MatrixXd::Identity(2, 2);
  stiff(1, 1) = 1e13;
  CHECK(testutil::thrown_code([&] { spd_inverse(stiff); }) ==
        static_cast<int>(ErrorCode::ill_conditioned));
}
