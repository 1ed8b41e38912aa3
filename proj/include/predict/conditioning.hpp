#pragma once

#include <Eigen/Dense>
#include <vector>

#include "predict/field.hpp"
#include "predict/numerics.hpp"

namespace predict {

// Result of inverting a symmetric positive-definite matrix with diagnostics.
struct SpdInverse {
  Eigen::MatrixXd inverse;
  double eig_min = 0.0;
  double eig_max = 0.0;
  double condition = 0.0;
};

// SPD factorization path shared by every module that inverts a constraint
// covariance. Rejects non-SPD input and condition numbers above the policy
// limit with ErrorCode::ill_conditioned.
SpdInverse spd_inverse(const Eigen::MatrixXd& M, const NumericalPolicy& pol = {});

// Gaussian prior on the flattened (component-major) grid state.
class GaussianMoments {
public:
  enum class Validate { full, light }; // light: skip the eigenvalue check (large test oracles)

  GaussianMoments(Field mean, Eigen::MatrixXd cov, const NumericalPolicy& pol = {},
                  Validate v = Validate::full);

  const Field& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  int dim() const { return static_cast<int>(cov_.rows()); }
  const NumericalPolicy& policy() const { return pol_; }

private:
  Field mean_;
  Eigen::MatrixXd cov_;
  NumericalPolicy pol_;
};

// M_{beta,alpha} = g_beta . C . g_alpha, validated SPD within the policy limits.
Eigen::MatrixXd constraint_covariance(const GaussianMoments& prior, const GridKernels& kernels,
                                      const NumericalPolicy& pol = {});

// Regression fields c_alpha = sum_beta (C g_beta) [M^-1]_{beta,alpha}, one per
// collective variable, returned as columns of a (d*n) x N matrix.
Eigen::MatrixXd regression_coefficients(const GaussianMoments& prior, const GridKernels& kernels,
                                        const NumericalPolicy& pol = {});

// Conditional covariance C - sum_alpha c_alpha (g_alpha^T C). Independent of
// the measured values by construction, hence no V argument.
Eigen::MatrixXd conditional_covariance(const GaussianMoments& prior, const GridKernels& kernels,
                                       const NumericalPolicy& pol = {});

// Prior + kernels + measured values with the cached conditioning algebra.
class ConditionedGaussian {
public:
  ConditionedGaussian(GaussianMoments prior, GridKernels kernels, Eigen::VectorXd values,
                      NumericalPolicy pol = {});

  const GaussianMoments& prior() const { return prior_; }
  const GridKernels& kernels() const { return kernels_; }
  const Eigen::VectorXd& values() const { return values_; }
  const Eigen::MatrixXd& constraint_cov() const { return M_; }
  const Eigen::MatrixXd& constraint_cov_inverse() const { return M_inv_; }
  double condition_number() const { return condition_; }
  const Eigen::MatrixXd& coefficients() const { return coeff_; } // c_alpha columns
  const Eigen::MatrixXd& cond_cov() const { return cond_cov_; }  // shared across all V

  Field conditional_mean() const;
  // Third conditional moment of one scalar component value, from the
  // conditional pairing rule: <p^3> = 3 <p^2><p> - 2 <p>^3.
  double conditional_cubic(int component, int site) const;

private:
  GaussianMoments prior_;
  GridKernels kernels_;
  Eigen::VectorXd values_;
  NumericalPolicy pol_;
  Eigen::MatrixXd M_, M_inv_, coeff_, cond_cov_;
  Eigen::VectorXd mean_flat_, cond_mean_flat_;
  double condition_ = 0.0;
};

// Raw Gaussian moment E[u_{i1} ... u_{il}] from mean and covariance, computed
// by expanding about the mean and pairing the centered factors. Orders above
// 8 raise ErrorCode::unsupported_order.
double wick_moment(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean,
                   const std::vector<int>& indices);

// Central moment (zero-mean pairing sum); odd orders vanish identically.
double wick_central_moment(const Eigen::MatrixXd& cov, const std::vector<int>& indices);

} // namespace predict
