#include "predict/spectral_linear.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace predict::linear {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

} // namespace

void SpectralKernels::validate() const {
  require(K >= 1, ErrorCode::invalid_input, "spectral kernels need K >= 1");
  require(!coeffs.empty(), ErrorCode::invalid_input, "spectral kernel set is empty");
  for (const auto& c : coeffs) {
    require(c.size() == 2 * K + 1, ErrorCode::invalid_input, "coefficient length must be 2K+1");
    double scale = 0.0;
    for (int k = -K; k <= K; ++k) scale = std::max(scale, std::abs(c[k + K]));
    require(scale > 0.0 && std::isfinite(scale), ErrorCode::invalid_input,
            "kernel coefficients must be finite and nonzero");
    for (int k = 1; k <= K; ++k) {
      const std::complex<double> diff = c[K - k] - std::conj(c[K + k]);
      require(std::abs(diff) <= 1e-12 * scale, ErrorCode::invalid_input,
              "kernel coefficients must be conjugate symmetric");
    }
    require(std::abs(c[K].imag()) <= 1e-12 * scale, ErrorCode::invalid_input,
            "k = 0 coefficient must be real");
  }
}

SpectralKernels gaussian_kernels(int N, double sigma, int K) {
  require(N >= 1, ErrorCode::invalid_input, "need at least one kernel");
  require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::invalid_input, "sigma must be positive");
  require(K >= 8, ErrorCode::invalid_input, "truncation must be at least 8");
  SpectralKernels out;
  out.K = K;
  out.coeffs.reserve(N);
  for (int a = 0; a < N; ++a) {
    const double xa = kTwoPi * a / N;
    Eigen::VectorXcd c(2 * K + 1);
    for (int k = -K; k <= K; ++k) {
      const double damp = std::exp(-0.25 * k * k * sigma * sigma);
      c[k + K] = damp / kTwoPi * std::exp(std::complex<double>(0.0, -k * xa));
    }
    out.coeffs.push_back(std::move(c));
  }
  out.validate();
  return out;
}

SpectralKernels trig_pair_kernels(int k0, int K) {
  require(k0 >= 1 && k0 <= K, ErrorCode::invalid_input, "trig kernel mode must satisfy 1 <= k0 <= K");
  SpectralKernels out;
  out.K = K;
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(2 * K + 1);
  Eigen::VectorXcd s = Eigen::VectorXcd::Zero(2 * K + 1);
  c[K + k0] = c[K - k0] = 0.5;
  s[K + k0] = std::complex<double>(0.0, -0.5);
  s[K - k0] = std::complex<double>(0.0, 0.5);
  out.coeffs = {std::move(c), std::move(s)};
  out.validate();
  return out;
}

int choose_truncation(double m0, double sigma, int K_min) {
  require(m0 > 0.0 && std::isfinite(m0), ErrorCode::invalid_input, "m0 must be positive");
  require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::invalid_input, "sigma must be positive");
  int K = std::max(8, K_min);
  const auto ok = [&](int k) {
    // covariance-weighted sums: terms <= exp(-k^2 s^2/4) / (k^2 + m0^2)
    const double tail_cov = std::exp(-0.25 * double(k) * k * sigma * sigma) *
                            2.0 * (kPi / 2.0 - std::atan(k / m0)) / m0;
    // plain kernel products: terms <= exp(-k^2 s^2/2)
    const double r = std::exp(-double(k) * sigma * sigma);
    const double tail_gram = 2.0 * std::exp(-0.5 * double(k) * k * sigma * sigma) / (1.0 - r);
    return tail_cov < 1e-10 / (m0 * m0) && tail_gram < 1e-10;
  };
  while (!ok(K)) {
    require(K < (1 << 21), ErrorCode::invalid_input,
            "kernel width too small: truncation bound not reachable");
    K *= 2;
  }
  return K;
}

double LinearModel::dx() const { return kTwoPi / N; }

LinearModel LinearModel::make(double m0, int N, double sigma_fraction_of_dx, int K_request) {
  require(N >= 1, ErrorCode::invalid_input, "need at least one kernel");
  require(sigma_fraction_of_dx > 0.0 && std::isfinite(sigma_fraction_of_dx),
          ErrorCode::invalid_input, "sigma fraction must be positive");
  LinearModel m;
  m.m0 = m0;
  m.N = N;
  m.sigma = sigma_fraction_of_dx * kTwoPi / N;
  m.K = choose_truncation(m0, m.sigma, K_request);
  m.kernels = gaussian_kernels(N, m.sigma, m.K);
  m.validate();
  return m;
}

LinearModel LinearModel::with_kernels(double m0, SpectralKernels kernels) {
  kernels.validate();
  LinearModel m;
  m.m0 = m0;
  m.N = kernels.count();
  m.sigma = 0.0;
  m.K = kernels.K;
  m.kernels = std::move(kernels);
  m.validate();
  return m;
}

void LinearModel::validate() const {
  require(m0 > 0.0 && std::isfinite(m0), ErrorCode::invalid_input, "m0 must be positive");
  require(N >= 1, ErrorCode::invalid_input, "need at least one kernel");
  require(K >= 8, ErrorCode::invalid_input, "truncation must be at least 8");
  require(kernels.count() == N && kernels.K == K, ErrorCode::invalid_input,
          "kernel set does not match the model");
  kernels.validate();
}

LinearExample::LinearExample(LinearModel model, const NumericalPolicy& pol)
    : model_(std::move(model)), pol_(pol) {
  model_.validate();
  M_ = pair_sum([this](int k) { return 1.0 / omega(k); });
  gram_ = pair_sum([](int) { return 1.0; });
  SpdInverse inv = spd_inverse(M_, pol_);
  M_inv_ = inv.inverse;
  condition_ = inv.condition;
  B_ = gram_ * M_inv_;
  // propagator consistency at t = 0: cC(0) = M, cS(0) = 0
  const double scale = M_.cwiseAbs().maxCoeff();
  require((cos_propagator(0.0) - M_).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          ErrorCode::invalid_input, "cos propagator does not reduce to M at t = 0");
  require(sin_propagator(0.0).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorCode::invalid_input,
          "sin propagator does not vanish at t = 0");
}

double LinearExample::omega(int k) const { return double(k) * k + model_.m0 * model_.m0; }

Eigen::MatrixXd LinearExample::pair_sum(const std::function<double(int)>& weight) const {
  const int N = model_.N, K = model_.K;
  Eigen::MatrixXd out(N, N);
  for (int a = 0; a < N; ++a) {
    for (int b = a; b < N; ++b) {
      const auto& ga = model_.kernels.coeffs[a];
      const auto& gb = model_.kernels.coeffs[b];
      double acc = (ga[K] * std::conj(gb[K])).real() * weight(0);
      for (int k = 1; k <= K; ++k) {
        // conjugate-symmetric pair +-k collapses to twice the real part
        acc += 2.0 * (ga[K + k] * std::conj(gb[K + k])).real() * weight(k);
      }
      out(a, b) = out(b, a) = kTwoPi * acc;
    }
  }
  return out;
}

Eigen::MatrixXd LinearExample::cos_propagator(double t) const {
  return pair_sum([this, t](int k) { return std::cos(omega(k) * t) / omega(k); });
}

Eigen::MatrixXd LinearExample::sin_propagator(double t) const {
  return pair_sum([this, t](int k) { return std::sin(omega(k) * t) / omega(k); });
}

Eigen::MatrixXd LinearExample::effective_matrix() const {
  const int N = model_.N;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * N, 2 * N);
  J.topRightCorner(N, N) = B_;
  J.bottomLeftCorner(N, N) = -B_;
  return J;
}

Eigen::VectorXd LinearExample::exact_evolution(const Eigen::VectorXd& V, double t) const {
  const int N = model_.N;
  require(V.size() == 2 * N, ErrorCode::invalid_input, "V must hold 2N values");
  const Eigen::VectorXd wp = M_inv_ * V.head(N);
  const Eigen::VectorXd wq = M_inv_ * V.tail(N);
  const Eigen::MatrixXd cC = cos_propagator(t);
  const Eigen::MatrixXd cS = sin_propagator(t);
  Eigen::VectorXd out(2 * N);
  out.head(N) = cC * wp + cS * wq;
  out.tail(N) = cC * wq - cS * wp;
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> LinearExample::interpolant(
    const Eigen::VectorXd& V, const Eigen::VectorXd& x) const {
  const int N = model_.N, K = model_.K;
  require(V.size() == 2 * N, ErrorCode::invalid_input, "V must hold 2N values");
  const Eigen::VectorXd ap = M_inv_ * V.head(N); // expansion weights of sum_b (a^-1 g_b) ...
  const Eigen::VectorXd aq = M_inv_ * V.tail(N);
  Eigen::VectorXd p(x.size()), q(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double accp = 0.0, accq = 0.0;
    for (int b = 0; b < N; ++b) {
      const auto& gb = model_.kernels.coeffs[b];
      double phi = gb[K].real() / omega(0);
      for (int k = 1; k <= K; ++k) {
        const std::complex<double> e(std::cos(k * x[i]), std::sin(k * x[i]));
        phi += 2.0 * (gb[K + k] * e).real() / omega(k);
      }
      accp += phi * ap[b];
      accq += phi * aq[b];
    }
    p[i] = accp;
    q[i] = accq;
  }
  return {std::move(p), std::move(q)};
}

double LinearExample::covariance_profile(double separation) const {
  const int K = model_.K;
  double acc = 1.0 / omega(0);
  for (int k = 1; k <= K; ++k) acc += 2.0 * std::cos(k * separation) / omega(k);
  return acc / kTwoPi;
}

GaussianMoments LinearExample::grid_prior(int n_eval) const {
  require(n_eval >= 2 * model_.K + 1, ErrorCode::invalid_input,
          "evaluation grid must resolve the truncation (n_eval >= 2K+1)");
  const double dx = kTwoPi / n_eval;
  Eigen::VectorXd profile(n_eval);
  for (int r = 0; r < n_eval; ++r) profile[r] = covariance_profile(dx * r);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2 * n_eval, 2 * n_eval);
  for (int i = 0; i < n_eval; ++i)
    for (int j = 0; j < n_eval; ++j) {
      const int r = (i - j + n_eval) % n_eval;
      cov(i, j) = profile[r];
      cov(n_eval + i, n_eval + j) = profile[r];
    }
  Field mean;
  mean.dx = dx;
  mean.comps = {Eigen::VectorXd::Zero(n_eval), Eigen::VectorXd::Zero(n_eval)};
  // rank of the truncated spectrum is 2K+1 < n_eval, hence semi-definite with
  // exact zero modes: skip the dense eigenvalue sweep here
  return GaussianMoments(std::move(mean), std::move(cov), pol_, GaussianMoments::Validate::light);
}

GridKernels LinearExample::grid_kernels(int n_eval) const {
  require(model_.sigma > 0.0, ErrorCode::invalid_input,
          "grid kernels are defined for the Gaussian kernel family only");
  require(n_eval >= 2, ErrorCode::invalid_input, "n_eval must be at least 2");
  const double dx = kTwoPi / n_eval;
  std::vector<GridKernel> ks;
  for (int comp = 0; comp < 2; ++comp) {
    for (int a = 0; a < model_.N; ++a) {
      const double xa = kTwoPi * a / model_.N;
      GridKernel k;
      k.component = comp;
      k.center = xa;
      k.weights.resize(n_eval);
      for (int j = 0; j < n_eval; ++j) k.weights[j] = kernel_image_sum(j * dx - xa, model_.sigma);
      ks.push_back(std::move(k));
    }
  }
  return GridKernels(std::move(ks), n_eval, 2);
}

double LinearExample::kernel_image_sum(double x, double sigma) {
  // wrap x to [-pi, pi) and sum enough periodic images for double precision
  double y = std::remainder(x, kTwoPi);
  const int images = 2 + static_cast<int>(std::ceil(14.0 * sigma / kTwoPi));
  double acc = 0.0;
  for (int t = -images; t <= images; ++t) {
    const double z = (y - kTwoPi * t) / sigma;
    acc += std::exp(-z * z);
  }
  return acc / (std::sqrt(kPi) * sigma);
}

Eigen::VectorXd LinearExample::apply_kernels_modes(const Eigen::VectorXcd& f) const {
  const int N = model_.N, K = model_.K;
  require(f.size() == 2 * K + 1, ErrorCode::invalid_input, "mode vector length must be 2K+1");
  Eigen::VectorXd out(N);
  for (int a = 0; a < N; ++a) {
    const auto& ga = model_.kernels.coeffs[a];
    double acc = (std::conj(ga[K]) * f[K]).real();
    for (int k = 1; k <= K; ++k)
      acc += 2.0 * (std::conj(ga[K + k]) * f[K + k]).real();
    out[a] = kTwoPi * acc;
  }
  return out;
}

Eigen::VectorXd LinearExample::sample_collective_values(std::uint64_t seed) const {
  const int K = model_.K;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_modes = [&]() {
    Eigen::VectorXcd f = Eigen::VectorXcd::Zero(2 * K + 1);
    f[K] = normal(rng) * std::sqrt(1.0 / (kTwoPi * omega(0)));
    for (int k = 1; k <= K; ++k) {
      const double s = std::sqrt(1.0 / (kPi * omega(k)));
      const double a = s * normal(rng), b = s * normal(rng);
      f[K + k] = std::complex<double>(0.5 * a, -0.5 * b);
      f[K - k] = std::conj(f[K + k]);
    }
    return f;
  };
  const Eigen::VectorXcd ph = draw_modes();
  const Eigen::VectorXcd qh = draw_modes();
  Eigen::VectorXd V(2 * model_.N);
  V.head(model_.N) = apply_kernels_modes(ph);
  V.tail(model_.N) = apply_kernels_modes(qh);
  return V;
}

Eigen::MatrixXcd LinearExample::regression_fourier() const {
  const int N = model_.N, K = model_.K;
  Eigen::MatrixXcd raw(2 * K + 1, N); // column beta: (a^-1 g_beta)_k
  for (int b = 0; b < N; ++b)
    for (int k = -K; k <= K; ++k) raw(k + K, b) = model_.kernels.coeffs[b][k + K] / omega(k);
  return raw * M_inv_;
}

GaussianMoments spectral_covariance(const LinearModel& model, int n_eval) {
  return LinearExample(model).grid_prior(n_eval);
}

Eigen::VectorXcd kernel_fourier(const LinearModel& model, int alpha) {
  require(alpha >= 0 && alpha < model.kernels.count(), ErrorCode::invalid_input,
          "kernel index out of range");
  return model.kernels.coeffs[alpha];
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> optimal_interpolant(const LinearModel& model,
                                                                const Eigen::VectorXd& V,
                                                                const Eigen::VectorXd& x) {
  return LinearExample(model).interpolant(V, x);
}

Eigen::MatrixXd effective_linear_rhs(const LinearModel& model) {
  return LinearExample(model).effective_matrix();
}

Eigen::VectorXd exact_evolution(const LinearModel& model, const Eigen::VectorXd& V, double t) {
  return LinearExample(model).exact_evolution(V, t);
}

} // namespace predict::linear
