#pragma once

#include "mlpf/core.hpp"

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mlpf {

using ParamMap = std::map<std::string, double, std::less<>>;

/// Signal/observation pair
///   dY_t = h(X_t) dt + dB_t,   dX_t = b(X_t) dt + sigma(X_t) dW_t,   X_0 = x*.
///
/// Immutable once built; the callables must be pure so the spec can be shared
/// across worker threads.
struct ModelSpec {
  std::string name;
  int state_dim = 1;
  int obs_dim = 1;
  std::function<StateVector(const StateVector&)> drift;
  std::function<DiffusionMatrix(const StateVector&)> diffusion;
  std::function<ObsVector(const StateVector&)> observation;
  StateVector initial_state;
  bool is_linear_gaussian = false;
  bool has_constant_diffusion = false;
  /// Resolved parameters (defaults merged with overrides).
  ParamMap params;
};

/// Closed form of (1/2) d/dx log p(x) for the Student-t density with `nu`
/// degrees of freedom, zero location and unit scale.
double langevin_drift(double x, double nu);

/// Built-in benchmark models: "ou", "langevin", "gbm", "nonlinear_sigma".
///
/// Every model also accepts `x0` (initial state) and `h_scale` (observation
/// h(x) = h_scale * x, default 1). Unknown keys and invalid values throw
/// InvalidArgument.
ModelSpec builtin_model(std::string_view name, const ParamMap& params = {});

const std::vector<std::string>& builtin_model_names();

/// Default parameter map for a built-in model.
ParamMap builtin_defaults(std::string_view name);

}  // namespace mlpf
