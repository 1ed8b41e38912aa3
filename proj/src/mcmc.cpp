#include "predict/mcmc.hpp"

#include <cmath>
#include <random>

namespace predict::mcmc {

namespace {

constexpr long long kAdaptBlock = 100; // proposals per width adjustment during burn-in

struct Adapter {
  double width;
  double target;
  bool enabled;
  long long block_proposals = 0;
  long long block_accepted = 0;

  void record(bool accepted) {
    if (!enabled) return;
    ++block_proposals;
    if (accepted) ++block_accepted;
    if (block_proposals >= kAdaptBlock) {
      const double rate = static_cast<double>(block_accepted) / block_proposals;
      width *= std::exp(0.8 * (rate - target));
      width = std::clamp(width, 1e-10, 1e10);
      block_proposals = 0;
      block_accepted = 0;
    }
  }
};

void validate_settings(const ChainSettings& s) {
  require(s.steps >= 1, ErrorCode::invalid_input, "chain needs steps >= 1");
  require(s.burn_in >= 0, ErrorCode::invalid_input, "burn_in must be >= 0");
  require(s.thinning >= 1, ErrorCode::invalid_input, "thinning must be >= 1");
  require(s.proposal_width > 0.0 && std::isfinite(s.proposal_width), ErrorCode::invalid_input,
          "proposal width must be positive");
  require(s.target_acceptance > 0.0 && s.target_acceptance < 1.0, ErrorCode::invalid_input,
          "target acceptance must lie in (0, 1)");
}

} // namespace

ChainDiagnostics run_chain(const TargetDensity& target, const Eigen::VectorXd& init,
                           const ChainSettings& settings, const SampleSink& sink) {
  validate_settings(settings);
  require(static_cast<bool>(target.neg_log), ErrorCode::invalid_input, "target has no density");
  require(init.size() >= 1 && init.allFinite(), ErrorCode::invalid_input,
          "initial state must be finite and non-empty");

  const Eigen::Index m = init.size();
  std::mt19937_64 rng(settings.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXd u = init;
  double energy = target.neg_log(u);
  require(std::isfinite(energy), ErrorCode::invalid_input, "target not finite at the initial state");

  Adapter adapter{settings.proposal_width, settings.target_acceptance,
                  settings.adapt_during_burn_in};
  ChainDiagnostics diag;
  diag.seed = settings.seed;

  const bool single = settings.proposal == ProposalKind::single_site;
  const bool has_delta = static_cast<bool>(target.neg_log_delta);
  Eigen::VectorXd prop;
  if (!single) prop.resize(m);

  auto do_step = [&](bool burning) {
    if (single) {
      for (Eigen::Index site = 0; site < m; ++site) {
        const double old_value = u[site];
        const double value = old_value + adapter.width * normal(rng);
        double d_energy;
        if (has_delta) {
          d_energy = target.neg_log_delta(u, static_cast<int>(site), value);
        } else {
          u[site] = value;
          const double next = target.neg_log(u);
          u[site] = old_value;
          d_energy = next - energy;
        }
        const double r = unif(rng);
        const bool accept = d_energy <= 0.0 || r < std::exp(-d_energy);
        if (accept) {
          u[site] = value;
          energy += d_energy;
        }
        if (burning) {
          adapter.record(accept);
        } else {
          ++diag.proposals;
          if (accept) ++diag.accepted;
        }
      }
    } else {
      for (Eigen::Index i = 0; i < m; ++i) prop[i] = u[i] + adapter.width * normal(rng);
      const double next = target.neg_log(prop);
      const double d_energy = next - energy;
      const double r = unif(rng);
      const bool accept = d_energy <= 0.0 || r < std::exp(-d_energy);
      if (accept) {
        u.swap(prop);
        energy = next;
      }
      if (burning) {
        adapter.record(accept);
      } else {
        ++diag.proposals;
        if (accept) ++diag.accepted;
      }
    }
  };

  for (long long i = 0; i < settings.burn_in; ++i) do_step(true);
  adapter.enabled = false; // width frozen from here on
  for (long long i = 0; i < settings.steps; ++i) {
    do_step(false);
    if ((i + 1) % settings.thinning == 0) {
      if (sink) sink(u);
      ++diag.recorded;
    }
  }
  diag.tuned_width = adapter.width;
  diag.acceptance_rate =
      diag.proposals > 0 ? static_cast<double>(diag.accepted) / diag.proposals : 0.0;
  return diag;
}

Eigen::VectorXd feasible_point(const ConstraintSystem& cs, const NumericalPolicy& pol) {
  const Eigen::Index N = cs.G.rows(), m = cs.G.cols();
  require(N >= 1 && m >= 1 && N <= m, ErrorCode::invalid_input, "constraint matrix shape invalid");
  require(cs.values.size() == N, ErrorCode::invalid_input, "constraint values length mismatch");
  require(cs.G.allFinite() && cs.values.allFinite(), ErrorCode::invalid_input,
          "constraints must be finite");
  Eigen::MatrixXd GG = cs.G * cs.G.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(GG, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  require(lmax > 0.0 && lmin > pol.rank_tol * pol.rank_tol * lmax, ErrorCode::degenerate_constraints,
          "constraint rows are rank deficient");
  Eigen::LLT<Eigen::MatrixXd> llt(GG);
  require(llt.info() == Eigen::Success, ErrorCode::degenerate_constraints,
          "constraint normal equations not factorizable");
  return cs.G.transpose() * llt.solve(cs.values);
}

Eigen::MatrixXd null_space_basis(const Eigen::MatrixXd& G, const NumericalPolicy& pol) {
  const Eigen::Index N = G.rows(), m = G.cols();
  require(N >= 1 && m >= 1 && N < m, ErrorCode::invalid_input,
          "null space requires more columns than constraint rows");
  require(G.allFinite(), ErrorCode::invalid_input, "constraints must be finite");

  // modified Gram-Schmidt on the rows of G, then on the coordinate directions
  Eigen::MatrixXd R(N, m);
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::VectorXd v = G.row(i).transpose();
    const double before = v.norm();
    require(before > 0.0, ErrorCode::degenerate_constraints, "zero constraint row");
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < i; ++j) v -= v.dot(R.row(j).transpose()) * R.row(j).transpose();
    const double after = v.norm();
    require(after > pol.rank_tol * before, ErrorCode::degenerate_constraints,
            "constraint rows are rank deficient");
    R.row(i) = v.transpose() / after;
  }

  Eigen::MatrixXd Q(m, m - N);
  Eigen::Index found = 0;
  for (Eigen::Index i = 0; i < m && found < m - N; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(m, i);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < N; ++j) v -= v.dot(R.row(j).transpose()) * R.row(j).transpose();
      for (Eigen::Index j = 0; j < found; ++j) v -= Q.col(j).dot(v) * Q.col(j);
    }
    const double norm = v.norm();
    if (norm > 1e-8) {
      Q.col(found++) = v / norm;
    }
  }
  require(found == m - N, ErrorCode::degenerate_constraints,
          "failed to complete a null-space basis");
  return Q;
}

ChainDiagnostics run_constrained_chain(const TargetDensity& target, const ConstraintSystem& cs,
                                       const Eigen::VectorXd& init, const ChainSettings& settings,
                                       const SampleSink& sink, const NumericalPolicy& pol) {
  validate_settings(settings);
  require(static_cast<bool>(target.neg_log), ErrorCode::invalid_input, "target has no density");
  const Eigen::Index N = cs.G.rows(), m = cs.G.cols();
  require(cs.values.size() == N, ErrorCode::invalid_input, "constraint values length mismatch");

  if (cs.mode == ConstraintSystem::Mode::penalty) {
    require(cs.penalty_delta > 0.0 && std::isfinite(cs.penalty_delta), ErrorCode::invalid_input,
            "penalty delta must be positive");
    const double inv_d2 = 1.0 / (cs.penalty_delta * cs.penalty_delta);
    TargetDensity penalized;
    penalized.neg_log = [&target, &cs, inv_d2](const Eigen::VectorXd& u) {
      const Eigen::VectorXd r = cs.G * u - cs.values;
      return target.neg_log(u) + inv_d2 * r.squaredNorm();
    };
    if (target.neg_log_delta) {
      penalized.neg_log_delta = [&target, &cs, inv_d2](const Eigen::VectorXd& u, int site,
                                                       double value) {
        double d = target.neg_log_delta(u, site, value);
        const double dv = value - u[site];
        for (Eigen::Index a = 0; a < cs.G.rows(); ++a) {
          const double r = cs.G.row(a).dot(u) - cs.values[a];
          const double rn = r + cs.G(a, site) * dv;
          d += inv_d2 * (rn * rn - r * r);
        }
        return d;
      };
    }
    const Eigen::VectorXd start = init.size() > 0 ? init : feasible_point(cs, pol);
    return run_chain(penalized, start, settings, sink);
  }

  // projection mode
  Eigen::VectorXd u = init.size() > 0 ? init : feasible_point(cs, pol);
  require(u.size() == m, ErrorCode::invalid_input, "initial state length mismatch");
  {
    const double vscale = std::max(1.0, cs.values.cwiseAbs().maxCoeff());
    const double resid = (cs.G * u - cs.values).cwiseAbs().maxCoeff();
    require(resid <= 1e-8 * vscale, ErrorCode::invalid_input,
            "initial state violates the constraints");
  }
  Eigen::MatrixXd Q = null_space_basis(cs.G, pol);
  const Eigen::Index r = Q.cols();

  std::mt19937_64 rng(settings.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  double energy = target.neg_log(u);
  require(std::isfinite(energy), ErrorCode::invalid_input, "target not finite at the initial state");

  Adapter adapter{settings.proposal_width, settings.target_acceptance,
                  settings.adapt_during_burn_in};
  ChainDiagnostics diag;
  diag.seed = settings.seed;

  const bool single = settings.proposal == ProposalKind::single_site;
  // coordinate steps projected onto null(G): columns of P = Q Q^T
  Eigen::MatrixXd P;
  if (single) P = Q * Q.transpose();
  Eigen::VectorXd prop(m), z;
  if (!single) z.resize(r);

  auto do_step = [&](bool burning) {
    auto metropolis = [&](bool accept_record) {
      const double next = target.neg_log(prop);
      const double d_energy = next - energy;
      const double rr = unif(rng);
      const bool accept = d_energy <= 0.0 || rr < std::exp(-d_energy);
      if (accept) {
        u.swap(prop);
        energy = next;
      }
      if (!accept_record) {
        adapter.record(accept);
      } else {
        ++diag.proposals;
        if (accept) ++diag.accepted;
      }
    };
    if (single) {
      for (Eigen::Index site = 0; site < m; ++site) {
        prop = u + (adapter.width * normal(rng)) * P.col(site);
        metropolis(!burning);
      }
    } else {
      for (Eigen::Index i = 0; i < r; ++i) z[i] = normal(rng);
      prop = u + Q * (adapter.width * z);
      metropolis(!burning);
    }
  };

  for (long long i = 0; i < settings.burn_in; ++i) do_step(true);
  adapter.enabled = false;
  for (long long i = 0; i < settings.steps; ++i) {
    do_step(false);
    if ((i + 1) % settings.thinning == 0) {
      if (sink) sink(u);
      ++diag.recorded;
    }
  }
  diag.tuned_width = adapter.width;
  diag.acceptance_rate =
      diag.proposals > 0 ? static_cast<double>(diag.accepted) / diag.proposals : 0.0;
  return diag;
}

} // namespace predict::mcmc
