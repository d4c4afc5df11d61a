#include "mlpf/model.hpp"

#include <cmath>

namespace mlpf {

namespace {

StateVector scalar_state(double v) {
  StateVector x(1);
  x(0) = v;
  return x;
}

DiffusionMatrix scalar_matrix(double v) {
  DiffusionMatrix m(1, 1);
  m(0, 0) = v;
  return m;
}

ParamMap resolve(std::string_view name, const ParamMap& overrides) {
  ParamMap merged = builtin_defaults(name);
  for (const auto& [key, value] : overrides) {
    auto it = merged.find(key);
    if (it == merged.end()) {
      throw InvalidArgument("model '" + std::string(name) + "': unknown parameter '" + key + "'");
    }
    if (!std::isfinite(value)) {
      throw InvalidArgument("model '" + std::string(name) + "': parameter '" + key + "' is not finite");
    }
    it->second = value;
  }
  return merged;
}

void require_positive(std::string_view model, const ParamMap& p, const char* key) {
  if (!(p.at(key) > 0.0)) {
    throw InvalidArgument("model '" + std::string(model) + "': parameter '" + key + "' must be > 0");
  }
}

}  // namespace

double langevin_drift(double x, double nu) { return -(nu + 1.0) * x / (2.0 * (nu + x * x)); }

const std::vector<std::string>& builtin_model_names() {
  static const std::vector<std::string> names{"ou", "langevin", "gbm", "nonlinear_sigma"};
  return names;
}

ParamMap builtin_defaults(std::string_view name) {
  if (name == "ou") return {{"theta", 1.0}, {"mu", 0.0}, {"sigma", 0.5}, {"x0", 0.0}, {"h_scale", 1.0}};
  if (name == "langevin") return {{"nu", 10.0}, {"x0", 0.0}, {"h_scale", 1.0}};
  // x0 = 0 is an absorbing state of geometric Brownian motion, hence the unit start.
  if (name == "gbm") return {{"mu", 0.02}, {"sigma", 0.2}, {"x0", 1.0}, {"h_scale", 1.0}};
  if (name == "nonlinear_sigma") return {{"theta", 0.0}, {"mu", 0.0}, {"x0", 0.0}, {"h_scale", 1.0}};
  throw InvalidArgument("unknown model '" + std::string(name) + "'");
}

ModelSpec builtin_model(std::string_view name, const ParamMap& overrides) {
  ModelSpec model;
  model.name = std::string(name);
  model.params = resolve(name, overrides);
  const ParamMap& p = model.params;
  const double h_scale = p.at("h_scale");
  model.initial_state = scalar_state(p.at("x0"));
  model.observation = [h_scale](const StateVector& x) -> ObsVector { return h_scale * x; };

  if (name == "ou") {
    require_positive(name, p, "sigma");
    const double theta = p.at("theta"), mu = p.at("mu"), sigma = p.at("sigma");
    model.drift = [theta, mu](const StateVector& x) { return scalar_state(theta * (mu - x(0))); };
    model.diffusion = [sigma](const StateVector&) { return scalar_matrix(sigma); };
    model.is_linear_gaussian = true;
    model.has_constant_diffusion = true;
  } else if (name == "langevin") {
    require_positive(name, p, "nu");
    const double nu = p.at("nu");
    model.drift = [nu](const StateVector& x) { return scalar_state(langevin_drift(x(0), nu)); };
    model.diffusion = [](const StateVector&) { return scalar_matrix(1.0); };
    model.has_constant_diffusion = true;
  } else if (name == "gbm") {
    require_positive(name, p, "sigma");
    const double mu = p.at("mu"), sigma = p.at("sigma");
    model.drift = [mu](const StateVector& x) { return scalar_state(mu * x(0)); };
    model.diffusion = [sigma](const StateVector& x) { return scalar_matrix(sigma * x(0)); };
  } else {
    const double theta = p.at("theta"), mu = p.at("mu");
    model.drift = [theta, mu](const StateVector& x) { return scalar_state(theta * (mu - x(0))); };
    model.diffusion = [](const StateVector& x) { return scalar_matrix(1.0 / std::sqrt(1.0 + x(0) * x(0))); };
  }
  return model;
}

}  // namespace mlpf
