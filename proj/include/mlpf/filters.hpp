#pragma once

#include "mlpf/core.hpp"
#include "mlpf/euler.hpp"
#include "mlpf/model.hpp"
#include "mlpf/path_data.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mlpf {

enum class ResamplePolicy {
  kAlways,        ///< Resample after every unit interval.
  kEssBelowHalf,  ///< Resample when ESS < N / 2 (coarse ESS for coupled filters).
};

enum class CouplingKind {
  kMaximal,      ///< Maximal coupling of the resampling indices.
  kSorted,       ///< Comonotone inverse-CDF coupling over sorted states (d_x = 1 only).
  kIndependent,  ///< Independent fine/coarse resampling; diagnostic hook only.
};

struct Functional {
  std::string name;
  std::function<double(const StateVector&)> fn;
};

/// "x" (first state component), "x2" (its square) or "one".
Functional functional_by_name(std::string_view name);
std::vector<Functional> default_functionals();

struct FilterOptions {
  std::vector<Functional> functionals = default_functionals();
  /// Times in (0, T] on the level grid; empty means the integers 1..T.
  std::vector<double> report_times;
  ResamplePolicy policy = ResamplePolicy::kEssBelowHalf;
  CouplingKind coupling = CouplingKind::kMaximal;
  /// Coupled filters: also trigger on the fine ESS.
  bool trigger_on_both = false;
  int workers = 1;
};

struct FilterDiagnostics {
  std::vector<double> resample_times;
  /// ESS at every integer time before resampling (coarse ESS for coupled filters).
  std::vector<double> ess_trace;
  /// Coupled filters: fraction of pairs that have always drawn a common ancestor,
  /// recorded after each resampling.
  std::vector<double> same_ancestor_trace;
  double final_same_ancestor_fraction = 1.0;

  std::size_t resample_count() const { return resample_times.size(); }
  double min_ess() const;
  double mean_ess() const;
};

struct FilterOutput {
  int level = 0;
  std::size_t particles = 0;
  bool coupled = false;
  std::vector<double> times;
  std::vector<std::string> functionals;
  /// times x functionals. Level-l filter for a PF, fine filter for a CPF.
  Eigen::MatrixXd estimates;
  /// Coupled filters only; NaN where a time is not on the coarse grid.
  Eigen::MatrixXd coarse_estimates;
  Eigen::MatrixXd differences;
  double log_normalizer = 0.0;
  double coarse_log_normalizer = 0.0;
  FilterDiagnostics diagnostics;
  std::uint64_t cost_units = 0;

  Eigen::Index time_index(double time) const;
  Eigen::Index functional_index(std::string_view name) const;
  double estimate(double time, std::string_view functional) const;
  double difference(double time, std::string_view functional) const;
};

/// Particle filter at level l with N particles.
FilterOutput pf_run(const ModelSpec& model, const ObservationPath& path, int level, std::size_t particles,
                    const FilterOptions& options, std::uint64_t seed);

/// Coupled particle filter targeting levels l and l - 1.
FilterOutput cpf_run(const ModelSpec& model, const ObservationPath& path, int level, std::size_t particles,
                     const FilterOptions& options, std::uint64_t seed);

/// Weighted estimate at an intermediate grid time p + step * 2^-l, from the
/// cumulative log-weights entering interval p and the retained partial
/// potentials of that interval.
double pf_estimate_intermediate(const Eigen::Ref<const Eigen::VectorXd>& cumulative_log_weights,
                                std::span<const UnitPropagation> propagations, long step, const Functional& phi);

/// Fine-minus-coarse intermediate estimate; `fine_step` must be even so the
/// time lies on the coarse grid.
double cpf_estimate_intermediate(const Eigen::Ref<const Eigen::VectorXd>& fine_cumulative_log_weights,
                                 const Eigen::Ref<const Eigen::VectorXd>& coarse_cumulative_log_weights,
                                 std::span<const CoupledUnitPropagation> propagations, long fine_step,
                                 const Functional& phi);

double log_normalizing_constant(const FilterOutput& output);

const char* to_string(ResamplePolicy policy);
const char* to_string(CouplingKind kind);
ResamplePolicy parse_resample_policy(std::string_view text);
CouplingKind parse_coupling_kind(std::string_view text);

}  // namespace mlpf
