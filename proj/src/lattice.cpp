#include "predict/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace predict::lattice {

namespace {

// periodic second difference q(j-1) - 2 q(j) + q(j+1)
inline double lap_at(const Eigen::VectorXd& v, int j, int n) {
  return v[(j + n - 1) % n] - 2.0 * v[j] + v[(j + 1) % n];
}

std::vector<double> to_series(const Eigen::VectorXd& col) {
  return std::vector<double>(col.data(), col.data() + col.size());
}

} // namespace

int periodic_distance(int a, int b, int n) {
  const int d = std::abs(a - b) % n;
  return std::min(d, n - d);
}

LatticeModel LatticeModel::make(int n, int N, double sigma) {
  require(N >= 1, ErrorCode::invalid_input, "need at least one kernel");
  LatticeModel m;
  m.n = n;
  m.sigma = sigma;
  m.centers.resize(N);
  for (int a = 0; a < N; ++a) {
    require(static_cast<long long>(a) * n % N == 0, ErrorCode::invalid_input,
            "kernel count must divide the site count for an even mesh");
    m.centers[a] = a * n / N;
  }
  m.validate();
  return m;
}

void LatticeModel::validate() const {
  require(n >= 4, ErrorCode::invalid_input, "lattice needs n >= 4");
  require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::invalid_input, "sigma must be positive");
  require(!centers.empty() && N() < n, ErrorCode::invalid_input,
          "kernel count must satisfy 1 <= N < n");
  for (int c : centers)
    require(c >= 0 && c < n, ErrorCode::invalid_input, "kernel center outside the grid");
}

Eigen::VectorXd LatticeModel::kernel_shape(int alpha) const {
  require(alpha >= 0 && alpha < N(), ErrorCode::invalid_input, "kernel index out of range");
  Eigen::VectorXd w(n);
  const double denom = double(n) * n * sigma * sigma;
  for (int j = 0; j < n; ++j) {
    const double d = periodic_distance(centers[alpha], j, n);
    w[j] = std::exp(-d * d / denom);
  }
  return w;
}

GridKernels LatticeModel::kernels() const {
  validate();
  std::vector<GridKernel> ks;
  ks.reserve(2 * N());
  for (int comp = 0; comp < 2; ++comp)
    for (int a = 0; a < N(); ++a) {
      GridKernel k;
      k.component = comp;
      k.center = centers[a];
      k.weights = kernel_shape(a); // normalized to unit sum by GridKernels
      ks.push_back(std::move(k));
    }
  return GridKernels(std::move(ks), n, 2);
}

double hamiltonian(const LatticeModel& model, const Field& state) {
  require(state.d() == 2 && state.n() == model.n, ErrorCode::invalid_input,
          "state must hold (p, q) on the model grid");
  const int n = model.n;
  const double n2 = double(n) * n; // 1/dx^2
  double acc = 0.0;
  for (const auto& x : state.comps)
    for (int j = 0; j < n; ++j) {
      const double diff = x[(j + 1) % n] - x[j];
      acc += 0.5 * n2 * diff * diff + 0.25 * x[j] * x[j] * x[j] * x[j];
    }
  return acc;
}

Field fine_rhs(const LatticeModel& model, const Field& state) {
  require(state.d() == 2 && state.n() == model.n, ErrorCode::invalid_input,
          "state must hold (p, q) on the model grid");
  const int n = model.n;
  const double n2 = double(n) * n;
  const auto& p = state.comps[0];
  const auto& q = state.comps[1];
  Field out;
  out.dx = state.dx;
  out.comps = {Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int j = 0; j < n; ++j) {
    out.comps[0][j] = -n2 * lap_at(q, j, n) + q[j] * q[j] * q[j];
    out.comps[1][j] = +n2 * lap_at(p, j, n) - p[j] * p[j] * p[j];
  }
  return out;
}

void fine_rhs_flat(const LatticeModel& model, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
  const int n = model.n;
  require(y.size() == 2 * n, ErrorCode::invalid_input, "flat state must hold 2n values");
  dy.resize(2 * n);
  const double n2 = double(n) * n;
  const double* p = y.data();
  const double* q = y.data() + n;
  for (int j = 0; j < n; ++j) {
    const int jm = (j + n - 1) % n, jp = (j + 1) % n;
    dy[j] = -n2 * (q[jm] - 2.0 * q[j] + q[jp]) + q[j] * q[j] * q[j];
    dy[n + j] = +n2 * (p[jm] - 2.0 * p[j] + p[jp]) - p[j] * p[j] * p[j];
  }
}

ode::Rhs fine_rhs_function(const LatticeModel& model) {
  model.validate();
  const LatticeModel m = model;
  return [m](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { fine_rhs_flat(m, y, dy); };
}

mcmc::TargetDensity canonical_target(const LatticeModel& model, const TargetOptions& opts) {
  model.validate();
  require(opts.mass2 >= 0.0 && std::isfinite(opts.mass2), ErrorCode::invalid_input,
          "mass2 must be >= 0");
  require(opts.quartic || opts.mass2 > 0.0, ErrorCode::invalid_input,
          "quadratic target needs a positive mass to be normalizable");
  const int n = model.n;
  const double n2 = double(n) * n;
  const bool quartic = opts.quartic;
  const double mass2 = opts.mass2;

  mcmc::TargetDensity t;
  t.neg_log = [n, n2, quartic, mass2](const Eigen::VectorXd& u) {
    require(u.size() == 2 * n, ErrorCode::invalid_input, "state must hold 2n values");
    double acc = 0.0;
    for (int comp = 0; comp < 2; ++comp) {
      const double* x = u.data() + comp * n;
      for (int j = 0; j < n; ++j) {
        const double diff = x[(j + 1) % n] - x[j];
        acc += 0.5 * n2 * diff * diff + 0.5 * mass2 * x[j] * x[j];
        if (quartic) acc += 0.25 * x[j] * x[j] * x[j] * x[j];
      }
    }
    return acc;
  };
  t.neg_log_delta = [n, n2, quartic, mass2](const Eigen::VectorXd& u, int site, double value) {
    const int comp = site / n, j = site % n;
    const double* x = u.data() + comp * n;
    const double xl = x[(j + n - 1) % n], xr = x[(j + 1) % n], x0 = x[j];
    double d = 0.5 * n2 * ((xr - value) * (xr - value) - (xr - x0) * (xr - x0)) +
               0.5 * n2 * ((value - xl) * (value - xl) - (x0 - xl) * (x0 - xl)) +
               0.5 * mass2 * (value * value - x0 * x0);
    if (quartic) d += 0.25 * (value * value * value * value - x0 * x0 * x0 * x0);
    return d;
  };
  return t;
}

CovarianceProfile estimate_covariance(const LatticeModel& model, const ChainParams& params,
                                      const TargetOptions& opts) {
  model.validate();
  require(params.sweeps >= 1 && params.burn_in >= 0, ErrorCode::invalid_input,
          "chain needs sweeps >= 1 and burn_in >= 0");
  require(params.thinning >= 1, ErrorCode::invalid_input, "thinning must be >= 1");
  require(params.replicas >= 1, ErrorCode::invalid_input, "need at least one replica");
  require(params.batches >= 2, ErrorCode::invalid_input, "batch means need >= 2 batches");

  const int n = model.n;
  const int bpr = std::max(1, params.batches / params.replicas);
  const mcmc::TargetDensity target = canonical_target(model, opts);

  Eigen::MatrixXd pooled_c(n, 0), pooled_x(n, 0);
  CovarianceProfile out;
  out.sweeps = params.sweeps;
  out.burn_in = params.burn_in;
  out.seed = params.seed;
  out.acceptance_min = 1.0;
  out.acceptance_max = 0.0;
  out.width_min = std::numeric_limits<double>::infinity();
  out.width_max = 0.0;

  for (int rep = 0; rep < params.replicas; ++rep) {
    const long long steps =
        params.sweeps / params.replicas + (rep < params.sweeps % params.replicas ? 1 : 0);
    if (steps == 0) continue;
    const long long records = steps / params.thinning;
    require(records >= bpr, ErrorCode::invalid_input,
            "chain too short for the requested batch count");
    const long long batch_len = records / bpr;
    const long long used = batch_len * bpr;

    Eigen::MatrixXd batch_c = Eigen::MatrixXd::Zero(n, bpr);
    Eigen::MatrixXd batch_x = Eigen::MatrixXd::Zero(n, bpr);
    long long idx = 0;
    auto sink = [&](const Eigen::VectorXd& u) {
      if (idx < used) {
        const long long b = idx / batch_len;
        const double* p = u.data();
        const double* q = u.data() + n;
        for (int r = 0; r < n; ++r) {
          double app = 0.0, aqq = 0.0, apq = 0.0;
          for (int j = 0; j < n; ++j) {
            const int k = j + r < n ? j + r : j + r - n;
            app += p[j] * p[k];
            aqq += q[j] * q[k];
            apq += p[j] * q[k];
          }
          batch_c(r, b) += 0.5 * (app + aqq) / n;
          batch_x(r, b) += apq / n;
        }
      }
      ++idx;
    };

    mcmc::ChainSettings settings;
    settings.steps = steps;
    settings.burn_in = params.burn_in;
    settings.thinning = params.thinning;
    settings.proposal_width = params.proposal_width;
    settings.seed = derive_seed(params.seed, seed_stream::covariance_chain, rep);
    const mcmc::ChainDiagnostics diag =
        mcmc::run_chain(target, Eigen::VectorXd::Zero(2 * n), settings, sink);

    require(diag.acceptance_rate >= 0.2 && diag.acceptance_rate <= 0.8, ErrorCode::tuning,
            "covariance chain acceptance rate " + std::to_string(diag.acceptance_rate) +
                " outside [0.2, 0.8] at width " + std::to_string(diag.tuned_width) +
                " (replica " + std::to_string(rep) + ")");
    out.acceptance_min = std::min(out.acceptance_min, diag.acceptance_rate);
    out.acceptance_max = std::max(out.acceptance_max, diag.acceptance_rate);
    out.width_min = std::min(out.width_min, diag.tuned_width);
    out.width_max = std::max(out.width_max, diag.tuned_width);
    out.recorded += diag.recorded;

    batch_c /= double(batch_len);
    batch_x /= double(batch_len);
    pooled_c.conservativeResize(n, pooled_c.cols() + bpr);
    pooled_c.rightCols(bpr) = batch_c;
    pooled_x.conservativeResize(n, pooled_x.cols() + bpr);
    pooled_x.rightCols(bpr) = batch_x;
  }

  const Eigen::Index B = pooled_c.cols();
  require(B >= 2, ErrorCode::invalid_input, "batch means need >= 2 batches");
  out.c.resize(n);
  out.se.resize(n);
  for (int r = 0; r < n; ++r) {
    const double mean = pooled_c.row(r).mean();
    const double var = (pooled_c.row(r).array() - mean).square().sum() / double(B - 1);
    out.c[r] = mean;
    out.se[r] = std::sqrt(var / double(B));

    const double xmean = pooled_x.row(r).mean();
    const double xvar = (pooled_x.row(r).array() - xmean).square().sum() / double(B - 1);
    const double xse = std::sqrt(xvar / double(B));
    out.cross_max_abs = std::max(out.cross_max_abs, std::abs(xmean));
    const double z = xse > 0.0 ? std::abs(xmean) / xse : (xmean == 0.0 ? 0.0 : 1e300);
    out.cross_max_z = std::max(out.cross_max_z, z);
  }
  // the p and q blocks are independent under the canonical density; a cross
  // term many standard errors from zero means the sampler is broken
  require(out.cross_max_z <= 6.0, ErrorCode::invalid_profile,
          "pq cross-covariance inconsistent with zero (max " +
              std::to_string(out.cross_max_abs) + ", " + std::to_string(out.cross_max_z) +
              " standard errors)");
  return out;
}

GaussianMoments gaussianized_prior(const LatticeModel& model, const CovarianceProfile& profile,
                                   const NumericalPolicy& pol) {
  model.validate();
  const int n = model.n;
  require(profile.c.size() == n, ErrorCode::invalid_profile, "profile length must equal n");
  require(profile.c.allFinite(), ErrorCode::invalid_profile, "profile must be finite");
  require(profile.c[0] > 0.0, ErrorCode::invalid_profile, "profile must have c(0) > 0");

  // circulant eigenvalues are the real DFT of c; all must be positive
  const double pi = 3.14159265358979323846;
  for (int k = 0; k < n; ++k) {
    double lambda = 0.0;
    for (int r = 0; r < n; ++r) lambda += profile.c[r] * std::cos(2.0 * pi * k * r / n);
    require(lambda > 0.0, ErrorCode::invalid_profile,
            "profile circulant is not positive definite (mode " + std::to_string(k) + ")");
  }

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = profile.c[(i - j + n) % n];
      cov(i, j) = v;
      cov(n + i, n + j) = v;
    }
  Field mean;
  mean.dx = model.dx();
  mean.comps = {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  return GaussianMoments(std::move(mean), std::move(cov), pol);
}

std::vector<std::array<int, 3>> cubic_monomials(int N) {
  std::vector<std::array<int, 3>> out;
  for (int a = 0; a < N; ++a)
    for (int b = a; b < N; ++b)
      for (int c = b; c < N; ++c) out.push_back({a, b, c});
  return out;
}

EffectiveSystem::EffectiveSystem(LatticeModel model, GaussianMoments prior, NumericalPolicy pol)
    : model_(std::move(model)), prior_(std::move(prior)), kernels_(model_.kernels()), pol_(pol) {
  const int n = model_.n, N = model_.N();
  require(prior_.mean().d() == 2 && prior_.mean().n() == n, ErrorCode::invalid_input,
          "prior shape does not match the lattice model");
  monomials_ = cubic_monomials(N);

  const Eigen::MatrixXd coeff = regression_coefficients(prior_, kernels_, pol_);
  const Eigen::MatrixXd cond = conditional_covariance(prior_, kernels_, pol_);

  // regression fields of the p kernels live in the p block; the q block must
  // mirror them exactly for a block-diagonal prior with equal blocks
  Eigen::MatrixXd C(n, N);
  for (int b = 0; b < N; ++b) C.col(b) = coeff.col(b).head(n);
  const double cscale = std::max(1.0, C.cwiseAbs().maxCoeff());
  for (int b = 0; b < N; ++b) {
    require((coeff.col(N + b).tail(n) - C.col(b)).cwiseAbs().maxCoeff() <= 1e-8 * cscale,
            ErrorCode::invalid_input, "prior lacks the equal-block structure of the lattice model");
    require(coeff.col(b).tail(n).cwiseAbs().maxCoeff() <= 1e-8 * cscale,
            ErrorCode::invalid_input, "prior couples the p and q blocks");
  }
  const Eigen::VectorXd s = cond.diagonal().head(n);

  const double n2 = double(n) * n;
  L_.resize(N, N);
  for (int a = 0; a < N; ++a) {
    const Eigen::VectorXd& g = kernels_.kernel(a).weights;
    for (int b = 0; b < N; ++b) {
      double lap_term = 0.0, var_term = 0.0;
      for (int j = 0; j < n; ++j) {
        lap_term += g[j] * lap_at(C.col(b), j, n);
        var_term += g[j] * s[j] * C(j, b);
      }
      L_(a, b) = -n2 * lap_term + 3.0 * var_term;
    }
  }

  T_.resize(N, static_cast<Eigen::Index>(monomials_.size()));
  for (int a = 0; a < N; ++a) {
    const Eigen::VectorXd& g = kernels_.kernel(a).weights;
    for (std::size_t m = 0; m < monomials_.size(); ++m) {
      const auto [b1, b2, b3] = monomials_[m];
      const int mult = (b1 == b3) ? 1 : (b1 == b2 || b2 == b3 ? 3 : 6);
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += g[j] * C(j, b1) * C(j, b2) * C(j, b3);
      T_(a, static_cast<Eigen::Index>(m)) = mult * acc;
    }
  }
}

void EffectiveSystem::eval_cubic(const Eigen::VectorXd& W, Eigen::VectorXd& out) const {
  out.setZero(model_.N());
  for (std::size_t m = 0; m < monomials_.size(); ++m) {
    const auto [b1, b2, b3] = monomials_[m];
    const double prod = W[b1] * W[b2] * W[b3];
    out += prod * T_.col(static_cast<Eigen::Index>(m));
  }
}

void EffectiveSystem::rhs(const Eigen::VectorXd& V, Eigen::VectorXd& dV) const {
  const int N = model_.N();
  require(V.size() == 2 * N, ErrorCode::invalid_input, "V must hold 2N values");
  dV.resize(2 * N);
  Eigen::VectorXd cub(N);
  eval_cubic(V.tail(N), cub);
  dV.head(N) = L_ * V.tail(N) + cub;
  eval_cubic(V.head(N), cub);
  dV.tail(N) = -(L_ * V.head(N) + cub);
}

Eigen::VectorXd EffectiveSystem::rhs(const Eigen::VectorXd& V) const {
  Eigen::VectorXd dV;
  rhs(V, dV);
  return dV;
}

ode::Rhs EffectiveSystem::rhs_function() const {
  const Eigen::MatrixXd L = L_, T = T_;
  const auto mono = monomials_;
  const int N = model_.N();
  return [L, T, mono, N](double, const Eigen::VectorXd& V, Eigen::VectorXd& dV) {
    dV.resize(2 * N);
    dV.head(N) = L * V.tail(N);
    dV.tail(N) = -(L * V.head(N));
    for (std::size_t m = 0; m < mono.size(); ++m) {
      const auto [b1, b2, b3] = mono[m];
      dV.head(N) += (V[N + b1] * V[N + b2] * V[N + b3]) * T.col(static_cast<Eigen::Index>(m));
      dV.tail(N) -= (V[b1] * V[b2] * V[b3]) * T.col(static_cast<Eigen::Index>(m));
    }
  };
}

Eigen::VectorXd EffectiveSystem::rhs_direct(const Eigen::VectorXd& V) const {
  const int n = model_.n, N = model_.N();
  require(V.size() == 2 * N, ErrorCode::invalid_input, "V must hold 2N values");
  const ConditionedGaussian cg(prior_, kernels_, V, pol_);
  const Field mean = cg.conditional_mean();
  const Eigen::VectorXd& mp = mean.comps[0];
  const Eigen::VectorXd& mq = mean.comps[1];
  const double n2 = double(n) * n;

  Eigen::VectorXd dV(2 * N);
  for (int a = 0; a < N; ++a) {
    const Eigen::VectorXd& g = kernels_.kernel(a).weights;
    double dp = 0.0, dq = 0.0;
    for (int j = 0; j < n; ++j) {
      dp += g[j] * (-n2 * lap_at(mq, j, n) + cg.conditional_cubic(1, j));
      dq += g[j] * (+n2 * lap_at(mp, j, n) - cg.conditional_cubic(0, j));
    }
    dV[a] = dp;
    dV[N + a] = dq;
  }
  return dV;
}

EffectiveSystem::PolynomialFit EffectiveSystem::fit_coefficients() const {
  const int N = model_.N();
  const int M = static_cast<int>(monomials_.size());

  // deterministic probe set spanning the odd-cubic polynomial space
  std::vector<Eigen::VectorXd> probes;
  for (int b = 0; b < N; ++b) {
    probes.push_back(Eigen::VectorXd::Unit(N, b));
    probes.push_back(2.0 * Eigen::VectorXd::Unit(N, b));
  }
  for (int b = 0; b < N; ++b)
    for (int g = b + 1; g < N; ++g) {
      probes.push_back(Eigen::VectorXd::Unit(N, b) + Eigen::VectorXd::Unit(N, g));
      probes.push_back(Eigen::VectorXd::Unit(N, b) - Eigen::VectorXd::Unit(N, g));
    }
  for (int b = 0; b < N; ++b)
    for (int g = b + 1; g < N; ++g)
      for (int d = g + 1; d < N; ++d)
        probes.push_back(Eigen::VectorXd::Unit(N, b) + Eigen::VectorXd::Unit(N, g) +
                         Eigen::VectorXd::Unit(N, d));

  const int P = static_cast<int>(probes.size());
  Eigen::MatrixXd A(P, N + M);
  Eigen::MatrixXd yp(P, N), yq(P, N);
  Eigen::VectorXd probe_full = Eigen::VectorXd::Zero(2 * N);
  for (int i = 0; i < P; ++i) {
    const Eigen::VectorXd& W = probes[i];
    A.row(i).head(N) = W.transpose();
    for (int m = 0; m < M; ++m) {
      const auto [b1, b2, b3] = monomials_[m];
      A(i, N + m) = W[b1] * W[b2] * W[b3];
    }
    probe_full.setZero();
    probe_full.tail(N) = W;
    yp.row(i) = rhs_direct(probe_full).head(N).transpose();
    probe_full.setZero();
    probe_full.head(N) = W;
    yq.row(i) = rhs_direct(probe_full).tail(N).transpose();
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  require(qr.rank() == N + M, ErrorCode::ill_conditioned, "probe design is rank deficient");
  const Eigen::MatrixXd cp = qr.solve(yp); // (N+M) x N, column per p equation
  const Eigen::MatrixXd cq = qr.solve(yq);

  PolynomialFit fit;
  fit.linear.resize(2 * N, N);
  fit.cubic.resize(2 * N, M);
  fit.linear.topRows(N) = cp.topRows(N).transpose();
  fit.cubic.topRows(N) = cp.bottomRows(M).transpose();
  fit.linear.bottomRows(N) = cq.topRows(N).transpose();
  fit.cubic.bottomRows(N) = cq.bottomRows(M).transpose();
  fit.max_residual = std::max((A * cp - yp).cwiseAbs().maxCoeff(),
                              (A * cq - yq).cwiseAbs().maxCoeff());

  // the p equations may not depend on V^p, nor the q equations on V^q
  Eigen::VectorXd both(2 * N);
  both.head(N) = probes[0];
  both.tail(N) = probes[0];
  const Eigen::VectorXd mixed = rhs_direct(both);
  probe_full.setZero();
  probe_full.tail(N) = probes[0];
  const Eigen::VectorXd pure_p = rhs_direct(probe_full);
  probe_full.setZero();
  probe_full.head(N) = probes[0];
  const Eigen::VectorXd pure_q = rhs_direct(probe_full);
  fit.max_cross_term =
      std::max((mixed.head(N) - pure_p.head(N)).cwiseAbs().maxCoeff(),
               (mixed.tail(N) - pure_q.tail(N)).cwiseAbs().maxCoeff());
  return fit;
}

Eigen::VectorXd effective_nonlinear_rhs(const LatticeModel& model, const GaussianMoments& prior,
                                        const Eigen::VectorXd& V, const NumericalPolicy& pol) {
  return EffectiveSystem(model, prior, pol).rhs_direct(V);
}

Eigen::VectorXd sample_canonical_state(const LatticeModel& model, long long burn_in_sweeps,
                                       std::uint64_t seed) {
  model.validate();
  require(burn_in_sweeps >= 1, ErrorCode::invalid_input, "need at least one burn-in sweep");
  mcmc::ChainSettings settings;
  settings.steps = 1;
  settings.burn_in = burn_in_sweeps;
  settings.thinning = 1;
  settings.proposal_width = 0.5;
  settings.seed = derive_seed(seed, seed_stream::canonical_state, 0);
  Eigen::VectorXd state;
  mcmc::run_chain(canonical_target(model), Eigen::VectorXd::Zero(2 * model.n), settings,
                  [&](const Eigen::VectorXd& u) { state = u; });
  return state;
}

Eigen::VectorXd sample_canonical_values(const LatticeModel& model, long long burn_in_sweeps,
                                        std::uint64_t seed) {
  return model.kernels().apply_flat(sample_canonical_state(model, burn_in_sweeps, seed));
}

EnsembleStats ensemble_oracle(const LatticeModel& model, const Eigen::VectorXd& V,
                              const EnsembleParams& params, const NumericalPolicy& pol) {
  model.validate();
  const int n = model.n, N = model.N();
  require(V.size() == 2 * N, ErrorCode::invalid_input, "V must hold 2N values");
  require(params.count >= 4, ErrorCode::invalid_input,
          "ensemble statistics need count >= 4");
  require(params.t_end > 0.0 && params.dt > 0.0, ErrorCode::invalid_input,
          "need positive t_end and dt");
  // stiffest linear mode rotates at 4 n^2; RK4 is unstable past ~2.8 dt units
  require(params.dt * 4.0 * n * n <= 2.5, ErrorCode::invalid_input,
          "dt outside the RK4 stability region (dt * 4 * n^2 must be <= 2.5)");
  require(params.first_step_dt > 0.0 && params.first_step_dt * 4.0 * n * n <= 2.5,
          ErrorCode::invalid_input, "first_step_dt must be positive and within RK4 stability");
  require(params.record_every >= 1 && params.replicas >= 1 && params.member_spacing >= 1 &&
              params.burn_in >= 0 && params.histogram_bins >= 1 && params.batches >= 2,
          ErrorCode::invalid_input, "invalid ensemble parameters");

  const GridKernels kernels = model.kernels();
  const Eigen::MatrixXd& G = kernels.dense();
  const mcmc::TargetDensity target = canonical_target(model);
  mcmc::ConstraintSystem cs;
  cs.G = G;
  cs.values = V;
  cs.mode = mcmc::ConstraintSystem::Mode::projection;

  EnsembleStats out;
  out.count = params.count;
  out.seed = params.seed;
  out.acceptance_min = 1.0;
  out.acceptance_max = 0.0;
  out.first_step_dt = params.first_step_dt;

  // seed the conditioned ensemble: replica chains, deterministic member slots
  std::vector<Eigen::VectorXd> members(params.count);
  int offset = 0;
  for (int rep = 0; rep < params.replicas; ++rep) {
    const int cnt =
        params.count / params.replicas + (rep < params.count % params.replicas ? 1 : 0);
    if (cnt == 0) continue;
    mcmc::ChainSettings settings;
    settings.steps = params.member_spacing * cnt;
    settings.burn_in = params.burn_in;
    settings.thinning = params.member_spacing;
    settings.proposal_width = params.proposal_width;
    settings.seed = derive_seed(params.seed, seed_stream::ensemble_chain, rep);
    int idx = 0;
    const mcmc::ChainDiagnostics diag = mcmc::run_constrained_chain(
        target, cs, Eigen::VectorXd(), settings,
        [&](const Eigen::VectorXd& u) { members[offset + idx++] = u; }, pol);
    require(idx == cnt, ErrorCode::invalid_input, "ensemble seeding recorded a wrong count");
    require(diag.acceptance_rate >= 0.2 && diag.acceptance_rate <= 0.8, ErrorCode::tuning,
            "ensemble chain acceptance rate " + std::to_string(diag.acceptance_rate) +
                " outside [0.2, 0.8] at width " + std::to_string(diag.tuned_width) +
                " (replica " + std::to_string(rep) + ")");
    out.acceptance_min = std::min(out.acceptance_min, diag.acceptance_rate);
    out.acceptance_max = std::max(out.acceptance_max, diag.acceptance_rate);
    offset += cnt;
  }

  const double vscale = std::max(1.0, V.cwiseAbs().maxCoeff());
  for (const auto& u : members) {
    const double resid = (G * u - V).cwiseAbs().maxCoeff() / vscale;
    out.max_constraint_residual = std::max(out.max_constraint_residual, resid);
  }

  // integrate one member to fix the recording grid, then the rest in parallel
  const ode::Rhs rhs = fine_rhs_function(model);
  ode::Settings os;
  os.dt = params.dt;
  os.t_end = params.t_end;
  os.record_every = params.record_every;
  const ode::Trajectory probe = ode::integrate(rhs, members[0], os);
  const int levels = static_cast<int>(probe.times.size());

  std::vector<Eigen::MatrixXd> level_vals(levels); // member x variable
  for (auto& lv : level_vals) lv.resize(params.count, 2 * N);
  Eigen::MatrixXd first_vals(params.count, 2 * N);
  Eigen::VectorXd drift(params.count);

  ode::Settings one;
  one.dt = params.first_step_dt;
  one.t_end = params.first_step_dt;
  one.record_every = 1;

  auto reduce_member = [&](std::size_t i, const ode::Trajectory& traj) {
    for (int l = 0; l < levels; ++l) level_vals[l].row(i) = (G * traj.states[l]).transpose();
    const Field y0 = Field::from_flat(traj.states.front(), 2, n, model.dx());
    const Field yT = Field::from_flat(traj.states.back(), 2, n, model.dx());
    const double h0 = hamiltonian(model, y0), hT = hamiltonian(model, yT);
    drift[i] = std::abs(hT - h0) / std::max(std::abs(h0), 1e-300);
    const ode::Trajectory step1 = ode::integrate(rhs, traj.states.front(), one);
    first_vals.row(i) = (G * step1.states.back()).transpose();
  };

  reduce_member(0, probe);
  const unsigned threads = thread_budget(env_thread_request());
  parallel_for(static_cast<std::size_t>(params.count) - 1, threads, [&](std::size_t k) {
    const std::size_t i = k + 1;
    const ode::Trajectory traj = ode::integrate(rhs, members[i], os);
    require(traj.times.size() == static_cast<std::size_t>(levels), ErrorCode::invalid_input,
            "uneven trajectory recording");
    reduce_member(i, traj);
  });

  out.energy_drift_max = drift.maxCoeff();
  out.energy_drift_mean = drift.mean();

  // per-level statistics with batch-means errors over the member index
  out.levels.resize(levels);
  for (int l = 0; l < levels; ++l) {
    LevelStats& st = out.levels[l];
    st.t = probe.times[l];
    st.mean.resize(2 * N);
    st.se.resize(2 * N);
    st.var.resize(2 * N);
    st.var_se.resize(2 * N);
    for (int v = 0; v < 2 * N; ++v) {
      const Eigen::VectorXd col = level_vals[l].col(v);
      const BatchStats bs = batch_means(to_series(col), params.batches);
      st.mean[v] = bs.mean;
      st.se[v] = bs.se;
      const Eigen::VectorXd centered = (col.array() - col.mean()).square();
      st.var[v] = params.count > 1 ? centered.sum() / double(params.count - 1) : 0.0;
      st.var_se[v] = batch_means(to_series(centered), params.batches).se;
    }
  }

  out.first_step_mean.resize(2 * N);
  out.first_step_se.resize(2 * N);
  for (int v = 0; v < 2 * N; ++v) {
    const BatchStats bs = batch_means(to_series(first_vals.col(v)), params.batches);
    out.first_step_mean[v] = bs.mean;
    out.first_step_se[v] = bs.se;
  }

  // shared histogram bins for U^p_1 across all time levels
  double lo = level_vals[0](0, 0), hi = lo;
  for (int l = 0; l < levels; ++l) {
    lo = std::min(lo, level_vals[l].col(0).minCoeff());
    hi = std::max(hi, level_vals[l].col(0).maxCoeff());
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const int bins = params.histogram_bins;
  const double width = (hi - lo) / bins;
  out.histograms.resize(levels);
  for (int l = 0; l < levels; ++l) {
    Histogram& h = out.histograms[l];
    h.t = probe.times[l];
    h.bin_lo.resize(bins);
    h.bin_hi.resize(bins);
    h.density = Eigen::VectorXd::Zero(bins);
    for (int b = 0; b < bins; ++b) {
      h.bin_lo[b] = lo + b * width;
      h.bin_hi[b] = b + 1 == bins ? hi : lo + (b + 1) * width;
    }
    for (int i = 0; i < params.count; ++i) {
      int b = static_cast<int>((level_vals[l](i, 0) - lo) / width);
      b = std::clamp(b, 0, bins - 1);
      h.density[b] += 1.0;
    }
    h.density /= double(params.count) * width;
  }
  return out;
}

} // namespace predict::lattice
