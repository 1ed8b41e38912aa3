#include "predict/ode.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace predict::ode {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

} // namespace

Trajectory integrate(const Rhs& rhs, const Eigen::VectorXd& y0, const Settings& s) {
  require(s.record_every >= 1, ErrorCode::invalid_input, "record_every must be >= 1");
  require(s.t_end >= 0.0 && std::isfinite(s.t_end), ErrorCode::invalid_input, "t_end must be finite and >= 0");
  require(all_finite(y0), ErrorCode::invalid_input, "initial state must be finite");

  Trajectory out;
  out.dt = s.dt;
  out.times.push_back(0.0);
  out.states.push_back(y0);
  if (s.t_end == 0.0) return out;

  require(s.dt > 0.0 && std::isfinite(s.dt), ErrorCode::invalid_input, "dt must be positive");
  require(s.dt <= s.t_end * (1.0 + 1e-12), ErrorCode::invalid_input, "dt exceeds t_end");

  const double steps_exact = s.t_end / s.dt;
  long long whole = static_cast<long long>(std::floor(steps_exact));
  double remainder = s.t_end - static_cast<double>(whole) * s.dt;
  // treat t_end/dt within 1 ulp of an integer as integral
  if (std::abs(steps_exact - std::round(steps_exact)) <=
      std::abs(steps_exact) * std::numeric_limits<double>::epsilon()) {
    whole = static_cast<long long>(std::round(steps_exact));
    remainder = 0.0;
  }
  out.partial_final_step = remainder > 0.0;

  const Eigen::Index m = y0.size();
  Eigen::VectorXd y = y0, k1(m), k2(m), k3(m), k4(m), tmp(m);
  auto step = [&](double t, double h) {
    rhs(t, y, k1);
    tmp = y + (0.5 * h) * k1;
    rhs(t + 0.5 * h, tmp, k2);
    tmp = y + (0.5 * h) * k2;
    rhs(t + 0.5 * h, tmp, k3);
    tmp = y + h * k3;
    rhs(t + h, tmp, k4);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  double t = 0.0;
  for (long long i = 0; i < whole; ++i) {
    step(t, s.dt);
    t = static_cast<double>(i + 1) * s.dt;
    if (!all_finite(y))
      fail(ErrorCode::divergence, "non-finite state at t = " + std::to_string(t));
    const bool last = (i + 1 == whole) && !out.partial_final_step;
    if ((i + 1) % s.record_every == 0 || last) {
      if (out.times.back() != t) {
        out.times.push_back(t);
        out.states.push_back(y);
      }
    }
  }
  if (out.partial_final_step) {
    step(t, remainder);
    t = s.t_end;
    if (!all_finite(y))
      fail(ErrorCode::divergence, "non-finite state at t = " + std::to_string(t));
    out.times.push_back(t);
    out.states.push_back(y);
  }
  return out;
}

} // namespace predict::ode
