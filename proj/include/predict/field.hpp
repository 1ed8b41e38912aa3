#pragma once

#include <Eigen/Dense>
#include <vector>

#include "predict/errors.hpp"

namespace predict {

// Periodic multi-component grid field: d components with n values each.
// Flattened indexing is component-major: (component i, site j) -> i*n + j.
struct Field {
  std::vector<Eigen::VectorXd> comps;
  double dx = 1.0;

  int d() const { return static_cast<int>(comps.size()); }
  int n() const { return comps.empty() ? 0 : static_cast<int>(comps[0].size()); }

  Eigen::VectorXd flat() const;
  static Field from_flat(const Eigen::VectorXd& v, int d, int n, double dx);
  void validate() const; // equal component lengths, finite values, dx > 0
};

// One collective variable: weights applied to a single component. The weight
// vector is normalized to unit sum at construction.
struct GridKernel {
  int component = 0;
  Eigen::VectorXd weights;
  double center = 0.0; // informational: grid index or coordinate of the bump
};

// Grid-mode kernel set; rows of the constraint matrix G in flattened indexing.
class GridKernels {
public:
  GridKernels(std::vector<GridKernel> kernels, int n_sites, int components);

  int count() const { return static_cast<int>(kernels_.size()); }
  int n_sites() const { return n_; }
  int components() const { return d_; }
  const GridKernel& kernel(int alpha) const { return kernels_.at(alpha); }

  double apply(const Field& u, int alpha) const;
  Eigen::VectorXd apply_all(const Field& u) const;
  Eigen::VectorXd apply_flat(const Eigen::VectorXd& flat) const; // G * u
  const Eigen::MatrixXd& dense() const { return G_; }            // count x (d*n)

private:
  std::vector<GridKernel> kernels_;
  int n_ = 0;
  int d_ = 0;
  Eigen::MatrixXd G_;
};

} // namespace predict
