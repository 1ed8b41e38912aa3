#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "predict/errors.hpp"

namespace predict::ode {

using Rhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;

struct Settings {
  double dt = 0.0;
  double t_end = 0.0;
  int record_every = 1;
};

struct Trajectory {
  std::vector<double> times;            // always includes t = 0 and t = t_end
  std::vector<Eigen::VectorXd> states;
  bool partial_final_step = false;      // t_end/dt was not an integer
  double dt = 0.0;
};

// Classical fixed-step RK4. A trailing partial step covers non-integral
// t_end/dt. Throws ErrorCode::divergence (message carries the failing time)
// as soon as the state stops being finite.
Trajectory integrate(const Rhs& rhs, const Eigen::VectorXd& y0, const Settings& s);

} // namespace predict::ode
