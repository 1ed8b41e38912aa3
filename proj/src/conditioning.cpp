#include "predict/conditioning.hpp"

#include <cmath>
#include <string>

namespace predict {

SpdInverse spd_inverse(const Eigen::MatrixXd& M, const NumericalPolicy& pol) {
  require(M.rows() == M.cols() && M.rows() >= 1, ErrorCode::invalid_input, "matrix must be square");
  require(M.allFinite(), ErrorCode::invalid_input, "matrix must be finite");
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  require(asym <= 1e-12 * scale, ErrorCode::invalid_input, "matrix must be symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  SpdInverse out;
  out.eig_min = eig.eigenvalues().minCoeff();
  out.eig_max = eig.eigenvalues().maxCoeff();
  require(out.eig_min > 0.0, ErrorCode::ill_conditioned,
          "constraint covariance is not positive definite (min eigenvalue " +
              std::to_string(out.eig_min) + ")");
  out.condition = out.eig_max / out.eig_min;
  require(out.condition <= pol.condition_limit, ErrorCode::ill_conditioned,
          "constraint covariance condition number " + std::to_string(out.condition) +
              " exceeds limit");
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  require(llt.info() == Eigen::Success, ErrorCode::ill_conditioned, "SPD factorization failed");
  out.inverse = llt.solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
  return out;
}

GaussianMoments::GaussianMoments(Field mean, Eigen::MatrixXd cov, const NumericalPolicy& pol,
                                 Validate v)
    : mean_(std::move(mean)), cov_(std::move(cov)), pol_(pol) {
  mean_.validate();
  const Eigen::Index m = static_cast<Eigen::Index>(mean_.d()) * mean_.n();
  require(cov_.rows() == m && cov_.cols() == m, ErrorCode::invalid_input,
          "covariance shape does not match the mean field");
  require(cov_.allFinite(), ErrorCode::invalid_input, "covariance must be finite");
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  require((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          ErrorCode::invalid_input, "covariance must be symmetric");
  if (v == Validate::full) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_, Eigen::EigenvaluesOnly);
    const double eps_spd = pol_.spd_slack * std::max(0.0, cov_.diagonal().maxCoeff());
    require(eig.eigenvalues().minCoeff() >= -eps_spd, ErrorCode::invalid_input,
            "covariance is not positive semidefinite within tolerance");
  }
}

Eigen::MatrixXd constraint_covariance(const GaussianMoments& prior, const GridKernels& kernels,
                                      const NumericalPolicy& pol) {
  require(prior.dim() == kernels.dense().cols(), ErrorCode::invalid_input,
          "kernel set does not match the prior dimensions");
  const Eigen::MatrixXd& G = kernels.dense();
  Eigen::MatrixXd M = G * prior.cov() * G.transpose();
  M = 0.5 * (M + M.transpose()).eval();
  spd_inverse(M, pol); // validation only: SPD within condition limit
  return M;
}

Eigen::MatrixXd regression_coefficients(const GaussianMoments& prior, const GridKernels& kernels,
                                        const NumericalPolicy& pol) {
  const Eigen::MatrixXd& G = kernels.dense();
  require(prior.dim() == G.cols(), ErrorCode::invalid_input,
          "kernel set does not match the prior dimensions");
  Eigen::MatrixXd CG = prior.cov() * G.transpose(); // columns C g_beta
  Eigen::MatrixXd M = G * CG;
  M = 0.5 * (M + M.transpose()).eval();
  return CG * spd_inverse(M, pol).inverse;
}

Eigen::MatrixXd conditional_covariance(const GaussianMoments& prior, const GridKernels& kernels,
                                       const NumericalPolicy& pol) {
  const Eigen::MatrixXd& G = kernels.dense();
  require(prior.dim() == G.cols(), ErrorCode::invalid_input,
          "kernel set does not match the prior dimensions");
  Eigen::MatrixXd CG = prior.cov() * G.transpose();
  Eigen::MatrixXd M = G * CG;
  M = 0.5 * (M + M.transpose()).eval();
  Eigen::MatrixXd cond = prior.cov() - CG * spd_inverse(M, pol).inverse * CG.transpose();
  cond = 0.5 * (cond + cond.transpose()).eval();
  return cond;
}

ConditionedGaussian::ConditionedGaussian(GaussianMoments prior, GridKernels kernels,
                                         Eigen::VectorXd values, NumericalPolicy pol)
    : prior_(std::move(prior)), kernels_(std::move(kernels)), values_(std::move(values)), pol_(pol) {
  const Eigen::MatrixXd& G = kernels_.dense();
  require(prior_.dim() == G.cols(), ErrorCode::invalid_input,
          "kernel set does not match the prior dimensions");
  require(values_.size() == kernels_.count(), ErrorCode::invalid_input,
          "measured values length does not match the kernel count");
  require(values_.allFinite(), ErrorCode::invalid_input, "measured values must be finite");

  Eigen::MatrixXd CG = prior_.cov() * G.transpose();
  M_ = G * CG;
  M_ = 0.5 * (M_ + M_.transpose()).eval();
  SpdInverse inv = spd_inverse(M_, pol_);
  M_inv_ = inv.inverse;
  condition_ = inv.condition;
  coeff_ = CG * M_inv_;
  cond_cov_ = prior_.cov() - coeff_ * CG.transpose();
  cond_cov_ = 0.5 * (cond_cov_ + cond_cov_.transpose()).eval();

  // conditional covariance must stay PSD within the slack of the prior scale
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cond_cov_, Eigen::EigenvaluesOnly);
    const double eps_spd = pol_.spd_slack * std::max(0.0, prior_.cov().diagonal().maxCoeff());
    require(eig.eigenvalues().minCoeff() >= -eps_spd, ErrorCode::ill_conditioned,
            "conditional covariance lost positive semidefiniteness");
  }

  mean_flat_ = prior_.mean().flat();
  // mean is always applied through the kernels, never assumed zero
  cond_mean_flat_ = mean_flat_ + coeff_ * (values_ - G * mean_flat_);

  // reproduction check: G <u>_V = V to the policy tolerance (relative to V scale)
  const double vscale = std::max(1.0, values_.cwiseAbs().maxCoeff());
  const double resid = (G * cond_mean_flat_ - values_).cwiseAbs().maxCoeff();
  require(resid <= pol_.constraint_reproduction_tol * vscale, ErrorCode::ill_conditioned,
          "conditional mean does not reproduce the measured values");
}

Field ConditionedGaussian::conditional_mean() const {
  return Field::from_flat(cond_mean_flat_, prior_.mean().d(), prior_.mean().n(), prior_.mean().dx);
}

double ConditionedGaussian::conditional_cubic(int component, int site) const {
  const int n = prior_.mean().n();
  require(component >= 0 && component < prior_.mean().d(), ErrorCode::invalid_input,
          "component out of range");
  require(site >= 0 && site < n, ErrorCode::invalid_input, "site out of range");
  const Eigen::Index idx = static_cast<Eigen::Index>(component) * n + site;
  const double m = cond_mean_flat_[idx];
  const double second = m * m + cond_cov_(idx, idx);
  return 3.0 * second * m - 2.0 * m * m * m;
}

namespace {

// sum over pairings of idx[0..l), all indices distinct positions (values may repeat)
double pairing_sum(const Eigen::MatrixXd& cov, std::vector<int>& idx) {
  const std::size_t l = idx.size();
  if (l == 0) return 1.0;
  if (l % 2 == 1) return 0.0;
  if (l == 2) return cov(idx[0], idx[1]);
  double total = 0.0;
  const int first = idx[0];
  for (std::size_t j = 1; j < l; ++j) {
    const int partner = idx[j];
    std::vector<int> rest;
    rest.reserve(l - 2);
    for (std::size_t k = 1; k < l; ++k)
      if (k != j) rest.push_back(idx[k]);
    total += cov(first, partner) * pairing_sum(cov, rest);
  }
  return total;
}

} // namespace

double wick_central_moment(const Eigen::MatrixXd& cov, const std::vector<int>& indices) {
  require(indices.size() <= 8, ErrorCode::unsupported_order,
          "moment order above 8 is not supported");
  for (int i : indices)
    require(i >= 0 && i < cov.rows(), ErrorCode::invalid_input, "moment index out of range");
  std::vector<int> idx = indices;
  return pairing_sum(cov, idx);
}

double wick_moment(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean,
                   const std::vector<int>& indices) {
  const std::size_t l = indices.size();
  require(l <= 8, ErrorCode::unsupported_order, "moment order above 8 is not supported");
  require(mean.size() == cov.rows(), ErrorCode::invalid_input, "mean length mismatch");
  for (int i : indices)
    require(i >= 0 && i < cov.rows(), ErrorCode::invalid_input, "moment index out of range");
  // expand the product of (mean + centered) factors over subsets of centered ones
  double total = 0.0;
  for (unsigned mask = 0; mask < (1u << l); ++mask) {
    double mean_part = 1.0;
    std::vector<int> centered;
    for (std::size_t k = 0; k < l; ++k) {
      if (mask & (1u << k))
        centered.push_back(indices[k]);
      else
        mean_part *= mean[indices[k]];
    }
    if (centered.size() % 2 == 1) continue; // odd central parts vanish
    total += mean_part * pairing_sum(cov, centered);
  }
  return total;
}

} // namespace predict
