#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "predict/conditioning.hpp"
#include "predict/errors.hpp"
#include "predict/field.hpp"

namespace predict::linear {

// Fourier-side kernels on the circle of length 2*pi: coefficients for modes
// k = -K..K stored at index k+K. Real kernels, so coeff(-k) = conj(coeff(k)).
struct SpectralKernels {
  int K = 0;
  std::vector<Eigen::VectorXcd> coeffs;

  int count() const { return static_cast<int>(coeffs.size()); }
  void validate() const;
};

// Periodic unit-mass Gaussians centered at x_alpha = 2*pi*alpha/N:
// coeff_k = exp(-k^2 sigma^2 / 4) exp(-i k x_alpha) / (2*pi).
SpectralKernels gaussian_kernels(int N, double sigma, int K);

// {cos(k0 x), sin(k0 x)} test kernels (eigenfunction pair of the dynamics).
SpectralKernels trig_pair_kernels(int k0, int K);

// Smallest truncation >= K_min whose analytic tail bounds (Gaussian factor
// included) drop below 1e-10 of the k = 0 term.
int choose_truncation(double m0, double sigma, int K_min);

struct LinearModel {
  double m0 = 1.0;
  int N = 0;        // kernels per component
  double sigma = 0; // absolute kernel width; 0 for custom kernel sets
  int K = 512;
  SpectralKernels kernels;

  double dx() const;
  static LinearModel make(double m0, int N, double sigma_fraction_of_dx, int K_request = 512);
  static LinearModel with_kernels(double m0, SpectralKernels kernels); // test-kernel path
  void validate() const;
};

// Dispersion-resolved engine for one model: constraint covariance M, kernel
// Gram matrix, effective generator and the exact propagator sums.
class LinearExample {
public:
  explicit LinearExample(LinearModel model, const NumericalPolicy& pol = {});

  const LinearModel& model() const { return model_; }
  const Eigen::MatrixXd& M() const { return M_; }
  const Eigen::MatrixXd& M_inverse() const { return M_inv_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::MatrixXd& B() const { return B_; } // gram * M^-1
  double condition_number() const { return condition_; }

  // 2N x 2N generator of dV/dt = J V with state (V^p_1.., V^q_1..).
  Eigen::MatrixXd effective_matrix() const;

  // mean collective values at time t given V at time 0 (cC, cS built per call)
  Eigen::VectorXd exact_evolution(const Eigen::VectorXd& V, double t) const;
  Eigen::MatrixXd cos_propagator(double t) const; // cC(t); cC(0) = M
  Eigen::MatrixXd sin_propagator(double t) const; // cS(t); cS(0) = 0

  // conditional mean fields <p(x)>_V, <q(x)>_V at the given points
  std::pair<Eigen::VectorXd, Eigen::VectorXd> interpolant(const Eigen::VectorXd& V,
                                                          const Eigen::VectorXd& x) const;

  double covariance_profile(double separation) const; // stationary two-point function
  GaussianMoments grid_prior(int n_eval) const;       // requires n_eval >= 2K+1
  GridKernels grid_kernels(int n_eval) const;         // image-sum samples (Gaussian path only)

  // V drawn by sampling a prior field spectrally and applying the kernels
  Eigen::VectorXd sample_collective_values(std::uint64_t seed) const;

  // regression fields in Fourier space: column alpha holds the coefficients
  // of c_alpha(x) = sum_beta (a^-1 g_beta)(x) [M^-1]_{beta,alpha}
  Eigen::MatrixXcd regression_fourier() const;

  // U_alpha = <g_alpha, f> for a field given by its mode coefficients
  Eigen::VectorXd apply_kernels_modes(const Eigen::VectorXcd& f) const;

  double omega(int k) const; // dispersion k^2 + m0^2

  static double kernel_image_sum(double x, double sigma); // periodic Gaussian, unit mass

private:
  Eigen::MatrixXd pair_sum(const std::function<double(int)>& weight) const;

  LinearModel model_;
  NumericalPolicy pol_;
  Eigen::MatrixXd M_, M_inv_, gram_, B_;
  double condition_ = 0.0;
};

// Operation-style entry points (each builds the engine internally).
GaussianMoments spectral_covariance(const LinearModel& model, int n_eval);
Eigen::VectorXcd kernel_fourier(const LinearModel& model, int alpha);
std::pair<Eigen::VectorXd, Eigen::VectorXd> optimal_interpolant(const LinearModel& model,
                                                                const Eigen::VectorXd& V,
                                                                const Eigen::VectorXd& x);
Eigen::MatrixXd effective_linear_rhs(const LinearModel& model);
Eigen::VectorXd exact_evolution(const LinearModel& model, const Eigen::VectorXd& V, double t);

} // namespace predict::linear
