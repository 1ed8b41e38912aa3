#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "predict/conditioning.hpp"
#include "predict/errors.hpp"
#include "predict/field.hpp"
#include "predict/mcmc.hpp"
#include "predict/numerics.hpp"
#include "predict/ode.hpp"

namespace predict::lattice {

// Periodic n-site lattice with two conjugate components (p, q), dx = 1/n, and
// N discretized Gaussian kernels g_alpha(j) ~ exp(-d(c_alpha,j)^2/(n sigma)^2),
// normalized to unit sum.
struct LatticeModel {
  int n = 16;
  double sigma = 0.25;
  std::vector<int> centers = {0, 8}; // grid sites, zero-based

  double dx() const { return 1.0 / n; }
  int N() const { return static_cast<int>(centers.size()); }
  static LatticeModel make(int n = 16, int N = 2, double sigma = 0.25); // evenly spaced centers
  void validate() const;
  Eigen::VectorXd kernel_shape(int alpha) const; // unnormalized bump values
  GridKernels kernels() const;                   // 2N kernels: p block then q block
};

int periodic_distance(int a, int b, int n);

// H = 1/2 sum_j [ ((p(j+1)-p(j))/dx)^2 + ((q(j+1)-q(j))/dx)^2 + (p^4+q^4)/2 ]
double hamiltonian(const LatticeModel& model, const Field& state);

// dp(j)/dt = -(q(j-1)-2q(j)+q(j+1))/dx^2 + q^3(j)
// dq(j)/dt = +(p(j-1)-2p(j)+p(j+1))/dx^2 - p^3(j)
Field fine_rhs(const LatticeModel& model, const Field& state);
void fine_rhs_flat(const LatticeModel& model, const Eigen::VectorXd& y, Eigen::VectorXd& dy);
ode::Rhs fine_rhs_function(const LatticeModel& model);

// Canonical density exp(-H) over the flat (p, q) state. The quadratic variant
// (quartic off, mass2 > 0) is the exactly solvable sub-model used to check the
// covariance estimator against the inverse discrete Helmholtz circulant.
struct TargetOptions {
  bool quartic = true;
  double mass2 = 0.0;
};
mcmc::TargetDensity canonical_target(const LatticeModel& model, const TargetOptions& opts = {});

struct ChainParams {
  long long sweeps = 2'000'000; // post-burn-in sweeps, split across replicas
  long long burn_in = 100'000;  // per replica, with width adaptation
  long long thinning = 10;
  double proposal_width = 0.5;  // initial width before burn-in tuning
  int replicas = 8;
  int batches = 100;            // total batch-means batches, split across replicas
  std::uint64_t seed = 0;
};

// Stationary two-point function of the canonical density, estimated by
// Metropolis sampling: c(r) = <p(j) p(j+r)> averaged over j, samples, and the
// two components. The circular estimator makes c(r) = c(n-r) exact and the
// resulting circulant PSD by construction.
struct CovarianceProfile {
  Eigen::VectorXd c;  // length n
  Eigen::VectorXd se; // batch-means standard error per entry
  double cross_max_abs = 0.0; // largest |pq| estimate (asserted ~ 0, then dropped)
  double cross_max_z = 0.0;   // the same in standard errors
  long long sweeps = 0;
  long long burn_in = 0;
  long long recorded = 0;
  double acceptance_min = 0.0;
  double acceptance_max = 0.0;
  double width_min = 0.0;
  double width_max = 0.0;
  std::uint64_t seed = 0;
};

CovarianceProfile estimate_covariance(const LatticeModel& model, const ChainParams& params,
                                      const TargetOptions& opts = {});

// Zero-mean Gaussian with circulant pp = qq blocks built from c and zero pq
// blocks. Rejects profiles whose circulant is not positive definite.
GaussianMoments gaussianized_prior(const LatticeModel& model, const CovarianceProfile& profile,
                                   const NumericalPolicy& pol = {});

// Index triples b1 <= b2 <= b3 enumerating the cubic monomials in N variables.
std::vector<std::array<int, 3>> cubic_monomials(int N);

// Closed ODE system for V = (V^p_1..N, V^q_1..N):
//   dV^p/dt = L V^q + T(V^q),  dV^q/dt = -L V^p - T(V^p),
// where L and the cubic map T come from conditioning the Gaussianized prior:
// the conditional mean enters the lattice Laplacian, the conditional cubic
// moment <x^3>_V = m^3 + 3 m s supplies both the 3 m s linear correction and
// the pure cubic terms.
class EffectiveSystem {
public:
  EffectiveSystem(LatticeModel model, GaussianMoments prior, NumericalPolicy pol = {});

  const LatticeModel& model() const { return model_; }
  const GaussianMoments& prior() const { return prior_; }
  int N() const { return model_.N(); }
  const Eigen::MatrixXd& linear() const { return L_; } // N x N
  const std::vector<std::array<int, 3>>& monomials() const { return monomials_; }
  const Eigen::MatrixXd& cubic() const { return T_; }  // N x monomials, multiplicities included

  void rhs(const Eigen::VectorXd& V, Eigen::VectorXd& dV) const; // precomputed polynomial
  Eigen::VectorXd rhs(const Eigen::VectorXd& V) const;
  ode::Rhs rhs_function() const;

  // Reference path: a fresh conditioned Gaussian per call, contracted against
  // the fine-scale equations term by term. Must agree with rhs() to rounding.
  Eigen::VectorXd rhs_direct(const Eigen::VectorXd& V) const;

  // Polynomial extracted from rhs_direct probes alone. linear/cubic rows
  // 0..N-1 are the p equations in V^q; rows N..2N-1 the q equations in V^p.
  struct PolynomialFit {
    Eigen::MatrixXd linear;  // 2N x N
    Eigen::MatrixXd cubic;   // 2N x monomials
    double max_residual = 0.0;   // probe interpolation residual
    double max_cross_term = 0.0; // dependence on the opposite block (~ 0)
  };
  PolynomialFit fit_coefficients() const;

private:
  void eval_cubic(const Eigen::VectorXd& W, Eigen::VectorXd& out) const;

  LatticeModel model_;
  GaussianMoments prior_;
  GridKernels kernels_;
  NumericalPolicy pol_;
  std::vector<std::array<int, 3>> monomials_;
  Eigen::MatrixXd L_, T_;
};

// Spec'd operation form of the closed right-hand side (generic per-call path).
Eigen::VectorXd effective_nonlinear_rhs(const LatticeModel& model, const GaussianMoments& prior,
                                        const Eigen::VectorXd& V, const NumericalPolicy& pol = {});

// One canonical equilibrium state (flat layout), and measured collective
// values derived from it. Used to fix the published initial data.
Eigen::VectorXd sample_canonical_state(const LatticeModel& model, long long burn_in_sweeps,
                                       std::uint64_t seed);
Eigen::VectorXd sample_canonical_values(const LatticeModel& model, long long burn_in_sweeps,
                                        std::uint64_t seed);

struct EnsembleParams {
  int count = 10'000;
  double t_end = 1.0;
  double dt = 1e-3;
  double first_step_dt = 1e-4;   // step for the finite-difference slope at t = 0
  int record_every = 50;         // statistics/histogram stride in steps
  long long member_spacing = 40; // sweeps between consecutive members
  long long burn_in = 20'000;    // sweeps per seeding replica
  int replicas = 8;
  double proposal_width = 0.5;
  int histogram_bins = 40;
  int batches = 100; // batch-means batches over the member index
  std::uint64_t seed = 0;
};

struct LevelStats {
  double t = 0.0;
  Eigen::VectorXd mean;   // per collective variable (2N)
  Eigen::VectorXd se;     // batch-means standard error of the mean
  Eigen::VectorXd var;    // ensemble variance
  Eigen::VectorXd var_se; // batch-means standard error of the variance
};

struct Histogram {
  double t = 0.0;
  Eigen::VectorXd bin_lo, bin_hi, density; // bins shared across time levels
};

struct EnsembleStats {
  std::vector<LevelStats> levels;    // t = 0 through t_end
  std::vector<Histogram> histograms; // distribution of U^p_1 per level
  Eigen::VectorXd first_step_mean;   // <U(dt)> for the closure identity
  Eigen::VectorXd first_step_se;
  double first_step_dt = 0.0;
  double max_constraint_residual = 0.0; // at t = 0 over all members
  double energy_drift_max = 0.0;        // |H(T)-H(0)|/H(0)
  double energy_drift_mean = 0.0;
  double acceptance_min = 0.0;
  double acceptance_max = 0.0;
  int count = 0;
  std::uint64_t seed = 0;
};

// Ground-truth pipeline: seeds `count` initial states from the TRUE quartic
// canonical density conditioned on G u = V (projection-mode chains), then
// integrates each with RK4 and reduces to per-time-level statistics of the
// collective variables.
EnsembleStats ensemble_oracle(const LatticeModel& model, const Eigen::VectorXd& V,
                              const EnsembleParams& params, const NumericalPolicy& pol = {});

} // namespace predict::lattice
