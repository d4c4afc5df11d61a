#pragma once

#include "mlpf/filters.hpp"
#include "mlpf/model.hpp"
#include "mlpf/path_data.hpp"

#include <cstdint>
#include <vector>

namespace mlpf {

struct KalmanState {
  double mean = 0.0;
  double variance = 0.0;
  /// Running sum of Gaussian predictive log-densities of the increments.
  double log_evidence = 0.0;
};

struct OuParams {
  double theta = 1.0;
  double mu = 0.0;
  double sigma = 0.5;
};

struct KalmanResult {
  int level = 0;
  /// Filter at every grid time kD, k = 0..T 2^l; entry 0 is the point mass at x0.
  std::vector<KalmanState> states;
  /// Filter means and variances at t = 1..T.
  std::vector<double> integer_means;
  std::vector<double> integer_variances;
  /// log gamma_T(1) in potential form: directly comparable with a particle
  /// filter's log-normalizer (0 when h = 0).
  double log_normalizer = 0.0;

  const KalmanState& at_time(int t) const { return states.at(static_cast<std::size_t>(t) << level); }
};

/// Exact filter of the level-l Euler-discretized OU model with h(x) = h_scale x.
/// Each step conditions on the increment dy_k ~ N(h m D, D + h^2 P D^2) and then
/// predicts m <- m + theta (mu - m) D, P <- (1 - theta D)^2 P + sigma^2 D.
KalmanResult kalman_run(const ObservationPath& path, int level, const OuParams& params, double h_scale = 1.0,
                        double x0 = 0.0);

/// Same, with parameters taken from a built-in OU model. Throws for any other model.
KalmanResult kalman_run(const ObservationPath& path, int level, const ModelSpec& model);

struct ReferenceTruth {
  std::vector<double> times;
  std::vector<std::string> functionals;
  Eigen::MatrixXd values;
  /// Standard error of `values` (replicate mean); zero for the Kalman oracle.
  Eigen::MatrixXd standard_errors;
  bool stochastic = false;

  double value(double time, std::string_view functional) const;
  double standard_error(double time, std::string_view functional) const;
};

/// Kalman filter at `ref_level` for OU; otherwise the mean of `replicates`
/// independent particle filters at `ref_level` with `ref_particles` each, with
/// the standard error taken from their spread.
ReferenceTruth reference_truth(const ModelSpec& model, const ObservationPath& path, int ref_level,
                               std::size_t ref_particles, const FilterOptions& options, std::uint64_t seed,
                               int replicates = 5);

}  // namespace mlpf
