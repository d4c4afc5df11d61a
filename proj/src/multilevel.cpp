#include "mlpf/multilevel.hpp"

#include "mlpf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mlpf {

namespace {

constexpr double kTimeTolerance = 1e-9;

std::size_t count_of(double value) {
  return static_cast<std::size_t>(std::max(2.0, std::ceil(value)));
}

/// Smallest level whose grid contains t.
int grid_level(double t) {
  for (int l = 0; l <= 30; ++l) {
    const double ticks = std::ldexp(t, l);
    if (std::abs(ticks - std::round(ticks)) <= kTimeTolerance * std::ldexp(1.0, l)) return l;
  }
  throw InvalidArgument("report time " + std::to_string(t) + " is not dyadic");
}

}  // namespace

LevelAllocation allocate(AllocationRule rule, int max_level, double base, bool constant_diffusion) {
  if (max_level < 0) throw InvalidArgument("allocate: L must be >= 0");
  if (!(base > 0.0) || !std::isfinite(base)) throw InvalidArgument("allocate: base must be positive");
  LevelAllocation a;
  a.max_level = max_level;
  a.rule = rule;
  a.base = base;
  a.epsilon = std::sqrt(step_size(max_level));
  if (rule != AllocationRule::kSinglePf && max_level == 0) {
    a.rule = AllocationRule::kSinglePf;
    a.warning = std::string(to_string(rule)) + " with L = 0 degrades to a single level-0 particle filter";
  }
  const double inv_eps2 = std::ldexp(1.0, max_level);
  const double big_l = static_cast<double>(max_level);
  switch (a.rule) {
    case AllocationRule::kSinglePf:
      a.counts = {count_of(base * inv_eps2)};
      return a;
    case AllocationRule::kMlpfNonconstant: {
      const double top = std::pow(step_size(max_level), -0.25);
      for (int l = 0; l <= max_level; ++l) {
        a.counts.push_back(count_of(base * inv_eps2 * top * std::pow(step_size(l), 0.75)));
      }
      return a;
    }
    case AllocationRule::kMlpfConstant:
      for (int l = 0; l <= max_level; ++l) a.counts.push_back(count_of(base * inv_eps2 * step_size(l) * big_l));
      return a;
    case AllocationRule::kWassersteinNew:
      for (int l = 0; l <= max_level; ++l) {
        const double shape = constant_diffusion ? std::pow(step_size(l), 1.5) : step_size(l) * big_l;
        a.counts.push_back(count_of(base * inv_eps2 * shape));
      }
      return a;
  }
  return a;
}

double total_cost(const LevelAllocation& allocation, int horizon) {
  if (allocation.counts.empty()) throw InvalidArgument("total_cost: empty allocation");
  const double t = horizon;
  if (!allocation.multilevel()) {
    return t * static_cast<double>(allocation.counts.front()) * std::ldexp(1.0, allocation.max_level);
  }
  double per_unit = static_cast<double>(allocation.counts[0]);
  for (std::size_t l = 1; l < allocation.counts.size(); ++l) {
    const double fine = std::ldexp(1.0, static_cast<int>(l));
    per_unit += static_cast<double>(allocation.counts[l]) * (fine + 0.5 * fine);
  }
  return t * per_unit;
}

double MLPFOutput::estimate(double time, std::string_view functional) const {
  Eigen::Index row = -1;
  for (std::size_t r = 0; r < times.size(); ++r) {
    if (std::abs(times[r] - time) <= kTimeTolerance) row = static_cast<Eigen::Index>(r);
  }
  if (row < 0) throw InvalidArgument("no combined estimate at time " + std::to_string(time));
  for (std::size_t k = 0; k < functionals.size(); ++k) {
    if (functionals[k] == functional) return combined(row, static_cast<Eigen::Index>(k));
  }
  throw InvalidArgument("no functional named '" + std::string(functional) + "'");
}

std::uint64_t level_seed(std::uint64_t master_seed, int level) {
  return derive_seed(master_seed, 0x4c4556454cULL, static_cast<std::uint64_t>(level));
}

MLPFOutput mlpf_run(const ModelSpec& model, const ObservationPath& path, const LevelAllocation& allocation,
                    const FilterOptions& options, std::uint64_t master_seed) {
  const int big_l = allocation.max_level;
  if (big_l > path.finest_level()) {
    throw FrequencyExceeded("allocation level " + std::to_string(big_l) + " exceeds the data frequency (finest level " +
                            std::to_string(path.finest_level()) + ")");
  }
  if (allocation.counts.empty()) throw InvalidArgument("mlpf_run: empty allocation");
  if (allocation.multilevel() && allocation.counts.size() != static_cast<std::size_t>(big_l) + 1) {
    throw InvalidArgument("mlpf_run: allocation must list N_0..N_L");
  }

  MLPFOutput out;
  if (!allocation.multilevel()) {
    const int level = big_l;
    out.levels.push_back(pf_run(model, path, level, allocation.counts.front(), options, level_seed(master_seed, level)));
    out.times = out.levels.front().times;
    out.functionals = out.levels.front().functionals;
    out.combined = out.levels.front().estimates;
    out.cost_units = out.levels.front().cost_units;
    return out;
  }

  std::vector<double> requested = options.report_times;
  if (requested.empty()) {
    for (int t = 1; t <= path.horizon(); ++t) requested.push_back(t);
  }
  std::sort(requested.begin(), requested.end());
  requested.erase(std::unique(requested.begin(), requested.end()), requested.end());
  std::vector<int> grid(requested.size());
  for (std::size_t r = 0; r < requested.size(); ++r) {
    grid[r] = grid_level(requested[r]);
    if (grid[r] > big_l) {
      throw InvalidArgument("report time " + std::to_string(requested[r]) + " is finer than level L = " +
                            std::to_string(big_l));
    }
  }

  for (int l = 0; l <= big_l; ++l) {
    FilterOptions level_options = options;
    level_options.report_times.clear();
    for (std::size_t r = 0; r < requested.size(); ++r) {
      if (grid[r] <= l) level_options.report_times.push_back(requested[r]);
    }
    const std::size_t n = allocation.counts[static_cast<std::size_t>(l)];
    const std::uint64_t seed = level_seed(master_seed, l);
    out.levels.push_back(l == 0 ? pf_run(model, path, 0, n, level_options, seed)
                                : cpf_run(model, path, l, n, level_options, seed));
    out.cost_units += out.levels.back().cost_units;
  }

  out.times = requested;
  out.functionals = out.levels.front().functionals;
  const auto n_func = static_cast<Eigen::Index>(out.functionals.size());
  out.combined.resize(static_cast<Eigen::Index>(requested.size()), n_func);
  for (std::size_t r = 0; r < requested.size(); ++r) {
    const double t = requested[r];
    const int base_level = grid[r];
    const FilterOutput& base = out.levels[static_cast<std::size_t>(base_level)];
    for (Eigen::Index f = 0; f < n_func; ++f) {
      double value = base.estimates(base.time_index(t), f);
      for (int m = base_level + 1; m <= big_l; ++m) {
        const FilterOutput& level = out.levels[static_cast<std::size_t>(m)];
        value += level.differences(level.time_index(t), f);
      }
      out.combined(static_cast<Eigen::Index>(r), f) = value;
    }
  }
  return out;
}

const char* to_string(AllocationRule rule) {
  switch (rule) {
    case AllocationRule::kMlpfNonconstant:
      return "mlpf_nonconstant";
    case AllocationRule::kMlpfConstant:
      return "mlpf_constant";
    case AllocationRule::kWassersteinNew:
      return "wasserstein_new";
    case AllocationRule::kSinglePf:
      return "single_pf";
  }
  return "single_pf";
}

AllocationRule parse_allocation_rule(std::string_view text) {
  if (text == "mlpf_nonconstant") return AllocationRule::kMlpfNonconstant;
  if (text == "mlpf_constant") return AllocationRule::kMlpfConstant;
  if (text == "wasserstein_new") return AllocationRule::kWassersteinNew;
  if (text == "single_pf") return AllocationRule::kSinglePf;
  throw InvalidArgument("unknown allocation rule '" + std::string(text) + "'");
}

}  // namespace mlpf
