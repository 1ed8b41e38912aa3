#include "predict/field.hpp"

#include <cmath>

namespace predict {

Eigen::VectorXd Field::flat() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(d()) * n());
  for (int i = 0; i < d(); ++i) out.segment(static_cast<Eigen::Index>(i) * n(), n()) = comps[i];
  return out;
}

Field Field::from_flat(const Eigen::VectorXd& v, int d, int n, double dx) {
  require(d >= 1 && n >= 1, ErrorCode::invalid_input, "field needs d >= 1, n >= 1");
  require(v.size() == static_cast<Eigen::Index>(d) * n, ErrorCode::invalid_input, "flat vector length mismatch");
  Field f;
  f.dx = dx;
  f.comps.reserve(d);
  for (int i = 0; i < d; ++i) f.comps.push_back(v.segment(static_cast<Eigen::Index>(i) * n, n));
  f.validate();
  return f;
}

void Field::validate() const {
  require(!comps.empty(), ErrorCode::invalid_input, "field has no components");
  require(dx > 0.0 && std::isfinite(dx), ErrorCode::invalid_input, "grid spacing must be positive");
  const Eigen::Index n0 = comps[0].size();
  require(n0 >= 1, ErrorCode::invalid_input, "field has empty components");
  for (const auto& c : comps) {
    require(c.size() == n0, ErrorCode::invalid_input, "component lengths differ");
    require(c.allFinite(), ErrorCode::invalid_input, "field values must be finite");
  }
}

GridKernels::GridKernels(std::vector<GridKernel> kernels, int n_sites, int components)
    : kernels_(std::move(kernels)), n_(n_sites), d_(components) {
  require(n_ >= 1 && d_ >= 1, ErrorCode::invalid_input, "kernel set needs n >= 1, d >= 1");
  require(!kernels_.empty(), ErrorCode::invalid_input, "kernel set is empty");
  G_.setZero(static_cast<Eigen::Index>(kernels_.size()), static_cast<Eigen::Index>(d_) * n_);
  for (std::size_t a = 0; a < kernels_.size(); ++a) {
    auto& k = kernels_[a];
    require(k.component >= 0 && k.component < d_, ErrorCode::invalid_input, "kernel component out of range");
    require(k.weights.size() == n_, ErrorCode::invalid_input, "kernel weight length mismatch");
    require(k.weights.allFinite(), ErrorCode::invalid_input, "kernel weights must be finite");
    const double sum = k.weights.sum();
    require(std::abs(sum) > 1e-300, ErrorCode::invalid_input, "kernel weights sum to zero");
    k.weights /= sum; // unit-sum normalization is part of the contract
    G_.block(a, static_cast<Eigen::Index>(k.component) * n_, 1, n_) = k.weights.transpose();
  }
}

double GridKernels::apply(const Field& u, int alpha) const {
  const auto& k = kernels_.at(alpha);
  require(u.d() == d_ && u.n() == n_, ErrorCode::invalid_input, "field shape mismatch");
  return k.weights.dot(u.comps[k.component]);
}

Eigen::VectorXd GridKernels::apply_all(const Field& u) const {
  Eigen::VectorXd out(count());
  for (int a = 0; a < count(); ++a) out[a] = apply(u, a);
  return out;
}

Eigen::VectorXd GridKernels::apply_flat(const Eigen::VectorXd& flat) const {
  require(flat.size() == G_.cols(), ErrorCode::invalid_input, "flat state length mismatch");
  return G_ * flat;
}

} // namespace predict
