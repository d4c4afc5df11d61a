#include "mlpf/oracle.hpp"

#include "mlpf/rng.hpp"

#include <cmath>
#include <numbers>

namespace mlpf {

KalmanResult kalman_run(const ObservationPath& path, int level, const OuParams& params, double h_scale, double x0) {
  if (level < 0) throw InvalidArgument("kalman_run: negative level");
  if (level > path.finest_level()) {
    throw FrequencyExceeded("kalman_run: level " + std::to_string(level) + " exceeds the data frequency");
  }
  if (path.obs_dim() != 1) throw InvalidArgument("kalman_run: scalar observations required");
  const Eigen::MatrixXd obs = path.level_increments(level);
  const double dt = step_size(level);
  const double a = 1.0 - params.theta * dt;
  const double q = params.sigma * params.sigma * dt;
  const double h = h_scale;
  const double log_2pi_dt = std::log(2.0 * std::numbers::pi * dt);

  KalmanResult out;
  out.level = level;
  out.states.reserve(static_cast<std::size_t>(obs.cols()) + 1);
  KalmanState s{x0, 0.0, 0.0};
  out.states.push_back(s);
  double potential_correction = 0.0;
  const long per_unit = steps_per_unit(level);
  for (Eigen::Index k = 0; k < obs.cols(); ++k) {
    const double dy = obs(0, k);
    const double predicted = h * s.mean * dt;
    const double innovation_var = dt + h * h * s.variance * dt * dt;
    const double innovation = dy - predicted;
    s.log_evidence += -0.5 * (std::log(2.0 * std::numbers::pi * innovation_var) + innovation * innovation / innovation_var);
    potential_correction += 0.5 * log_2pi_dt + dy * dy / (2.0 * dt);
    const double gain = s.variance * h * dt / innovation_var;
    s.mean += gain * innovation;
    s.variance *= 1.0 - gain * h * dt;
    s.mean += params.theta * (params.mu - s.mean) * dt;
    s.variance = a * a * s.variance + q;
    out.states.push_back(s);
    if ((k + 1) % per_unit == 0) {
      out.integer_means.push_back(s.mean);
      out.integer_variances.push_back(s.variance);
    }
  }
  out.log_normalizer = s.log_evidence + potential_correction;
  return out;
}

KalmanResult kalman_run(const ObservationPath& path, int level, const ModelSpec& model) {
  if (model.name != "ou" || !model.is_linear_gaussian) {
    throw InvalidArgument("kalman_run: model '" + model.name + "' is not the Ornstein-Uhlenbeck model");
  }
  const auto& p = model.params;
  return kalman_run(path, level, OuParams{p.at("theta"), p.at("mu"), p.at("sigma")}, p.at("h_scale"), p.at("x0"));
}

double ReferenceTruth::value(double time, std::string_view functional) const {
  for (std::size_t r = 0; r < times.size(); ++r) {
    if (std::abs(times[r] - time) > 1e-9) continue;
    for (std::size_t k = 0; k < functionals.size(); ++k) {
      if (functionals[k] == functional) return values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
    }
  }
  throw InvalidArgument("reference truth: no value for the requested time/functional");
}

double ReferenceTruth::standard_error(double time, std::string_view functional) const {
  for (std::size_t r = 0; r < times.size(); ++r) {
    if (std::abs(times[r] - time) > 1e-9) continue;
    for (std::size_t k = 0; k < functionals.size(); ++k) {
      if (functionals[k] == functional) {
        return standard_errors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
      }
    }
  }
  throw InvalidArgument("reference truth: no value for the requested time/functional");
}

ReferenceTruth reference_truth(const ModelSpec& model, const ObservationPath& path, int ref_level,
                               std::size_t ref_particles, const FilterOptions& options, std::uint64_t seed,
                               int replicates) {
  ReferenceTruth truth;
  if (model.is_linear_gaussian) {
    const KalmanResult kalman = kalman_run(path, ref_level, model);
    std::vector<double> times = options.report_times;
    if (times.empty()) {
      for (int t = 1; t <= path.horizon(); ++t) times.push_back(t);
    }
    truth.times = times;
    truth.values.resize(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(options.functionals.size()));
    for (std::size_t r = 0; r < times.size(); ++r) {
      const double ticks = std::ldexp(times[r], ref_level);
      if (std::abs(ticks - std::round(ticks)) > 1e-9) throw InvalidArgument("reference truth: time off the grid");
      const KalmanState& s = kalman.states.at(static_cast<std::size_t>(std::llround(ticks)));
      for (std::size_t k = 0; k < options.functionals.size(); ++k) {
        const std::string& name = options.functionals[k].name;
        double v;
        if (name == "x") {
          v = s.mean;
        } else if (name == "x2") {
          v = s.mean * s.mean + s.variance;
        } else if (name == "one") {
          v = 1.0;
        } else {
          throw InvalidArgument("reference truth: Kalman oracle cannot evaluate functional '" + name + "'");
        }
        truth.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
      }
    }
    truth.standard_errors = Eigen::MatrixXd::Zero(truth.values.rows(), truth.values.cols());
    for (const auto& f : options.functionals) truth.functionals.push_back(f.name);
    return truth;
  }

  if (replicates < 2) throw InvalidArgument("reference truth: need at least 2 replicates for a standard error");
  std::vector<Eigen::MatrixXd> runs;
  for (int r = 0; r < replicates; ++r) {
    FilterOutput run = pf_run(model, path, ref_level, ref_particles, options,
                              derive_seed(seed, 0x5245464552ULL, static_cast<std::uint64_t>(r)));
    if (r == 0) {
      truth.times = run.times;
      truth.functionals = run.functionals;
    }
    runs.push_back(std::move(run.estimates));
  }
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(runs.front().rows(), runs.front().cols());
  for (const auto& run : runs) mean += run;
  mean /= static_cast<double>(replicates);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(mean.rows(), mean.cols());
  for (const auto& run : runs) sq += (run - mean).cwiseAbs2();
  truth.values = mean;
  truth.standard_errors = (sq / static_cast<double>(replicates - 1) / static_cast<double>(replicates)).cwiseSqrt();
  truth.stochastic = true;
  return truth;
}

}  // namespace mlpf
