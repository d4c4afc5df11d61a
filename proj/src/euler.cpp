#include "mlpf/euler.hpp"

#include <string>

namespace mlpf {

double log_potential(const ModelSpec& model, const StateVector& x, const Eigen::Ref<const Eigen::VectorXd>& dy,
                     double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("log_potential: step must be positive and finite");
  if (!x.allFinite() || !dy.allFinite()) throw InvalidArgument("log_potential: non-finite input");
  const ObsVector hx = model.observation(x);
  if (hx.size() != dy.size()) throw InvalidArgument("log_potential: observation dimension mismatch");
  return log_potential_of(hx, dy, step);
}

UnitPropagation propagate_unit(const ModelSpec& model, int level, const StateVector& x0,
                               const Eigen::Ref<const Eigen::MatrixXd>& obs,
                               const Eigen::Ref<const Eigen::MatrixXd>& noise, bool retain) {
  if (level < 0) throw InvalidArgument("propagate_unit: negative level");
  const long steps = steps_per_unit(level);
  if (obs.cols() != steps || noise.cols() != steps) {
    throw InvalidArgument("propagate_unit: expected " + std::to_string(steps) + " observation and noise columns, got " +
                          std::to_string(obs.cols()) + " and " + std::to_string(noise.cols()));
  }
  if (noise.rows() != x0.size() || obs.rows() != model.obs_dim) {
    throw InvalidArgument("propagate_unit: dimension mismatch");
  }
  const double dt = step_size(level);

  UnitPropagation out;
  if (retain) {
    out.partial_log_potential.resize(static_cast<std::size_t>(steps) + 1);
    out.partial_log_potential[0] = 0.0;
    out.intermediate_states.resize(x0.size(), steps + 1);
    out.intermediate_states.col(0) = x0;
  }
  StateVector x = x0;
  double log_g = 0.0;
  for (long k = 0; k < steps; ++k) {
    const ObsVector hx = model.observation(x);
    log_g += log_potential_of(hx, obs.col(k), dt);
    x = x + model.drift(x) * dt + model.diffusion(x).lazyProduct(noise.col(k));
    if (retain) {
      out.partial_log_potential[static_cast<std::size_t>(k) + 1] = log_g;
      out.intermediate_states.col(k + 1) = x;
    }
  }
  out.endpoint = x;
  out.log_potential_total = log_g;
  return out;
}

Eigen::MatrixXd coarsen_noise(const Eigen::Ref<const Eigen::MatrixXd>& noise) {
  if (noise.cols() % 2 != 0) throw InvalidArgument("coarsen_noise: odd number of columns");
  Eigen::MatrixXd coarse(noise.rows(), noise.cols() / 2);
  for (Eigen::Index j = 0; j < coarse.cols(); ++j) coarse.col(j) = noise.col(2 * j) + noise.col(2 * j + 1);
  return coarse;
}

CoupledUnitPropagation propagate_unit_coupled(const ModelSpec& model, int level, const StateVector& x_fine,
                                              const StateVector& x_coarse,
                                              const Eigen::Ref<const Eigen::MatrixXd>& obs_fine,
                                              const Eigen::Ref<const Eigen::MatrixXd>& obs_coarse,
                                              const Eigen::Ref<const Eigen::MatrixXd>& noise, bool retain) {
  if (level < 1) throw InvalidArgument("propagate_unit_coupled: level must be >= 1");
  if (obs_coarse.cols() * 2 != obs_fine.cols()) {
    throw InvalidArgument("propagate_unit_coupled: coarse observations must have half as many increments");
  }
  CoupledUnitPropagation out;
  out.fine = propagate_unit(model, level, x_fine, obs_fine, noise, retain);
  out.coarse = propagate_unit(model, level - 1, x_coarse, obs_coarse, coarsen_noise(noise), retain);
  return out;
}

}  // namespace mlpf
