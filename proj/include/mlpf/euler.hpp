#pragma once

#include "mlpf/core.hpp"
#include "mlpf/model.hpp"

#include <vector>

namespace mlpf {

/// Log of the per-step potential G = exp{h(x).dy - (step/2) h(x).h(x)}, given h(x).
template <typename HDerived, typename YDerived>
typename HDerived::Scalar log_potential_of(const Eigen::MatrixBase<HDerived>& hx, const Eigen::MatrixBase<YDerived>& dy,
                                          typename HDerived::Scalar step) {
  return hx.dot(dy) - 0.5 * step * hx.squaredNorm();
}

/// log G for state x, observation increment dy and step size `step`.
/// Throws InvalidArgument on non-finite input or non-positive step.
double log_potential(const ModelSpec& model, const StateVector& x, const Eigen::Ref<const Eigen::VectorXd>& dy,
                     double step);

/// One unit interval of level-l Euler propagation.
struct UnitPropagation {
  StateVector endpoint;
  /// Sum over the 2^l steps of log G, each evaluated at the pre-step state.
  double log_potential_total = 0.0;
  /// Running sums; entry k covers the first k steps (entry 0 is 0). Empty unless retained.
  std::vector<double> partial_log_potential;
  /// state_dim x (2^l + 1) states including start and endpoint. Empty unless retained.
  Eigen::MatrixXd intermediate_states;

  bool retained() const { return !partial_log_potential.empty(); }
};

struct CoupledUnitPropagation {
  UnitPropagation fine;
  UnitPropagation coarse;
};

/// Euler propagation of x0 over one unit interval at level l:
///   x <- x + b(x) D + sigma(x) xi_k,   log_G += log G(x_before_step, dy_k, D).
///
/// `obs` is obs_dim x 2^l, `noise` is state_dim x 2^l with covariance D I per column.
UnitPropagation propagate_unit(const ModelSpec& model, int level, const StateVector& x0,
                               const Eigen::Ref<const Eigen::MatrixXd>& obs,
                               const Eigen::Ref<const Eigen::MatrixXd>& noise, bool retain = false);

/// Level-(l, l-1) coupled propagation driven by common Brownian increments. The
/// fine half uses `noise` verbatim; the coarse half uses pairwise sums
/// xi_{2j} + xi_{2j+1} together with `obs_coarse` (2^(l-1) increments).
CoupledUnitPropagation propagate_unit_coupled(const ModelSpec& model, int level, const StateVector& x_fine,
                                              const StateVector& x_coarse,
                                              const Eigen::Ref<const Eigen::MatrixXd>& obs_fine,
                                              const Eigen::Ref<const Eigen::MatrixXd>& obs_coarse,
                                              const Eigen::Ref<const Eigen::MatrixXd>& noise, bool retain = false);

/// Pairwise sums of adjacent noise columns: state_dim x (cols / 2).
Eigen::MatrixXd coarsen_noise(const Eigen::Ref<const Eigen::MatrixXd>& noise);

}  // namespace mlpf
