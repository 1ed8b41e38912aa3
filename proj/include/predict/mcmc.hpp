#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "predict/errors.hpp"
#include "predict/numerics.hpp"

namespace predict::mcmc {

// Unnormalized target exp(-neg_log). neg_log_delta is an optional fast path
// for single-site proposals: energy change when `site` takes `value`.
struct TargetDensity {
  std::function<double(const Eigen::VectorXd&)> neg_log;
  std::function<double(const Eigen::VectorXd&, int site, double value)> neg_log_delta;
};

enum class ProposalKind { single_site, full_vector };

struct ChainSettings {
  // One step is a full sweep of single-site proposals, or one full-vector
  // proposal. steps counts post-burn-in steps.
  long long steps = 0;
  long long burn_in = 0;
  long long thinning = 1;
  double proposal_width = 0.1;
  bool adapt_during_burn_in = true; // width frozen after burn-in
  double target_acceptance = 0.5;
  ProposalKind proposal = ProposalKind::single_site;
  std::uint64_t seed = 0;
};

struct ChainDiagnostics {
  long long proposals = 0; // post burn-in
  long long accepted = 0;
  double acceptance_rate = 0.0;
  double tuned_width = 0.0;
  long long recorded = 0;
  std::uint64_t seed = 0;
};

using SampleSink = std::function<void(const Eigen::VectorXd&)>;

// Symmetric-proposal Metropolis chain. Identical seeds and settings produce
// bit-identical sample streams.
ChainDiagnostics run_chain(const TargetDensity& target, const Eigen::VectorXd& init,
                           const ChainSettings& settings, const SampleSink& sink);

struct ConstraintSystem {
  enum class Mode { projection, penalty };
  Eigen::MatrixXd G;      // N x m, full row rank
  Eigen::VectorXd values; // V
  Mode mode = Mode::projection;
  double penalty_delta = 0.05;
};

// Minimum-norm solution of G u = V.
Eigen::VectorXd feasible_point(const ConstraintSystem& cs, const NumericalPolicy& pol = {});

// Orthonormal basis of null(G) via modified Gram-Schmidt, m x (m - N).
Eigen::MatrixXd null_space_basis(const Eigen::MatrixXd& G, const NumericalPolicy& pol = {});

// Constrained sampling. projection: proposals are random steps projected onto
// null(G) through the precomputed orthonormal basis, so every emitted sample
// satisfies G u = V to within accumulation roundoff. penalty: the target is
// multiplied by exp(-sum (U_alpha - V_alpha)^2 / delta^2) and the chain runs
// unconstrained. An empty init starts from feasible_point(cs).
ChainDiagnostics run_constrained_chain(const TargetDensity& target, const ConstraintSystem& cs,
                                       const Eigen::VectorXd& init, const ChainSettings& settings,
                                       const SampleSink& sink, const NumericalPolicy& pol = {});

} // namespace predict::mcmc
