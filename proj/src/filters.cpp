#include "mlpf/filters.hpp"

#include "mlpf/parallel.hpp"
#include "mlpf/resampling.hpp"
#include "mlpf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mlpf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTimeTolerance = 1e-9;

/// A requested report time expressed on the level grid.
struct GridTime {
  double time;
  Eigen::Index row;
  int interval;  // p such that time in (p, p + 1]
  long step;     // 1..2^l within the interval; 2^l means the integer time p + 1
};

std::vector<double> resolve_times(const std::vector<double>& requested, int horizon, int level) {
  std::vector<double> times;
  if (requested.empty()) {
    for (int t = 1; t <= horizon; ++t) times.push_back(t);
    return times;
  }
  const double scale = std::ldexp(1.0, level);
  for (const double t : requested) {
    if (!(t > 0.0) || t > horizon + kTimeTolerance) {
      throw InvalidArgument("report time " + std::to_string(t) + " outside (0, T]");
    }
    const double ticks = t * scale;
    if (std::abs(ticks - std::round(ticks)) > kTimeTolerance * scale) {
      throw InvalidArgument("report time " + std::to_string(t) + " is not on the level-" + std::to_string(level) +
                            " grid");
    }
    times.push_back(std::round(ticks) / scale);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

std::vector<std::vector<GridTime>> group_by_interval(const std::vector<double>& times, int horizon, int level) {
  std::vector<std::vector<GridTime>> groups(static_cast<std::size_t>(horizon));
  const long per_unit = steps_per_unit(level);
  for (std::size_t r = 0; r < times.size(); ++r) {
    const long ticks = std::lround(times[r] * static_cast<double>(per_unit));
    const long p = (ticks - 1) / per_unit;
    const long step = ticks - p * per_unit;
    groups[static_cast<std::size_t>(p)].push_back(
        {times[r], static_cast<Eigen::Index>(r), static_cast<int>(p), step});
  }
  return groups;
}

/// Weighted mean sum_i w_i phi(x_i) / sum_i w_i with w_i = exp(lw_i - max).
/// For phi = 1 the numerator and denominator are the same sum, so the ratio is exactly 1.
template <typename StateAt>
double weighted_mean(const Eigen::Ref<const Eigen::VectorXd>& log_weights, StateAt&& state_at,
                     const Functional& phi) {
  const double max = log_weights.maxCoeff();
  if (!std::isfinite(max)) throw DegenerateWeights("weighted estimate: no finite log-weight");
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < log_weights.size(); ++i) {
    const double w = std::exp(log_weights(i) - max);
    num += w * phi.fn(state_at(i));
    den += w;
  }
  return num / den;
}

double log_mean_exp(const Eigen::VectorXd& log_weights) {
  const double max = log_weights.maxCoeff();
  if (!std::isfinite(max)) throw DegenerateWeights("normalizing constant: no finite log-weight");
  const double sum = (log_weights.array() - max).unaryExpr([](double v) { return std::exp(v); }).sum();
  return max + std::log(sum / static_cast<double>(log_weights.size()));
}

bool on_grid(long step, int shift) { return (step % (1L << shift)) == 0; }

void check_common(const ModelSpec& model, const ObservationPath& path, int level, std::size_t particles,
                  const FilterOptions& options) {
  if (level < 0) throw InvalidArgument("filter: negative level");
  if (level > path.finest_level()) {
    throw FrequencyExceeded("filter level " + std::to_string(level) + " exceeds the data frequency (finest level " +
                            std::to_string(path.finest_level()) + ")");
  }
  if (particles < 1) throw InvalidArgument("filter: need at least one particle");
  if (particles > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("filter: too many particles");
  if (options.functionals.empty()) throw InvalidArgument("filter: empty functional set");
  if (model.obs_dim != path.obs_dim()) throw InvalidArgument("filter: model and data observation dimensions differ");
}

FilterOutput make_output(int level, std::size_t particles, const std::vector<double>& times,
                         const FilterOptions& options) {
  FilterOutput out;
  out.level = level;
  out.particles = particles;
  out.times = times;
  for (const auto& f : options.functionals) out.functionals.push_back(f.name);
  out.estimates = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(times.size()),
                                            static_cast<Eigen::Index>(options.functionals.size()), kNaN);
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& values, const std::vector<std::size_t>& indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (const std::size_t i : indices) out.push_back(values[i]);
  return out;
}

}  // namespace

double FilterDiagnostics::min_ess() const {
  return ess_trace.empty() ? kNaN : *std::min_element(ess_trace.begin(), ess_trace.end());
}

double FilterDiagnostics::mean_ess() const {
  if (ess_trace.empty()) return kNaN;
  return std::accumulate(ess_trace.begin(), ess_trace.end(), 0.0) / static_cast<double>(ess_trace.size());
}

Eigen::Index FilterOutput::time_index(double time) const {
  for (std::size_t r = 0; r < times.size(); ++r) {
    if (std::abs(times[r] - time) <= kTimeTolerance) return static_cast<Eigen::Index>(r);
  }
  throw InvalidArgument("no estimate reported at time " + std::to_string(time));
}

Eigen::Index FilterOutput::functional_index(std::string_view name) const {
  for (std::size_t k = 0; k < functionals.size(); ++k) {
    if (functionals[k] == name) return static_cast<Eigen::Index>(k);
  }
  throw InvalidArgument("no functional named '" + std::string(name) + "'");
}

double FilterOutput::estimate(double time, std::string_view functional) const {
  return estimates(time_index(time), functional_index(functional));
}

double FilterOutput::difference(double time, std::string_view functional) const {
  if (!coupled) throw InvalidArgument("difference estimates exist only for coupled filters");
  return differences(time_index(time), functional_index(functional));
}

Functional functional_by_name(std::string_view name) {
  if (name == "x") return {"x", [](const StateVector& x) { return x(0); }};
  if (name == "x2") return {"x2", [](const StateVector& x) { return x(0) * x(0); }};
  if (name == "one") return {"one", [](const StateVector&) { return 1.0; }};
  throw InvalidArgument("unknown functional '" + std::string(name) + "' (expected x, x2 or one)");
}

std::vector<Functional> default_functionals() {
  return {functional_by_name("x"), functional_by_name("x2"), functional_by_name("one")};
}

double pf_estimate_intermediate(const Eigen::Ref<const Eigen::VectorXd>& cumulative_log_weights,
                                std::span<const UnitPropagation> propagations, long step, const Functional& phi) {
  if (static_cast<std::size_t>(cumulative_log_weights.size()) != propagations.size() || propagations.empty()) {
    throw InvalidArgument("pf_estimate_intermediate: weights and propagations differ in length");
  }
  const long steps = static_cast<long>(propagations.front().partial_log_potential.size()) - 1;
  if (steps < 1) throw InvalidArgument("pf_estimate_intermediate: partial potentials were not retained");
  if (step < 1 || step >= steps) throw InvalidArgument("pf_estimate_intermediate: time not on the interior grid");
  const auto k = static_cast<std::size_t>(step);
  Eigen::VectorXd log_v(cumulative_log_weights.size());
  for (Eigen::Index i = 0; i < log_v.size(); ++i) {
    log_v(i) = cumulative_log_weights(i) + propagations[static_cast<std::size_t>(i)].partial_log_potential[k];
  }
  return weighted_mean(
      log_v,
      [&](Eigen::Index i) -> StateVector {
        return propagations[static_cast<std::size_t>(i)].intermediate_states.col(step);
      },
      phi);
}

double cpf_estimate_intermediate(const Eigen::Ref<const Eigen::VectorXd>& fine_cumulative_log_weights,
                                 const Eigen::Ref<const Eigen::VectorXd>& coarse_cumulative_log_weights,
                                 std::span<const CoupledUnitPropagation> propagations, long fine_step,
                                 const Functional& phi) {
  if (fine_step % 2 != 0) throw InvalidArgument("cpf_estimate_intermediate: time not on the coarse grid");
  std::vector<UnitPropagation> fine, coarse;
  fine.reserve(propagations.size());
  coarse.reserve(propagations.size());
  for (const auto& p : propagations) {
    fine.push_back(p.fine);
    coarse.push_back(p.coarse);
  }
  return pf_estimate_intermediate(fine_cumulative_log_weights, fine, fine_step, phi) -
         pf_estimate_intermediate(coarse_cumulative_log_weights, coarse, fine_step / 2, phi);
}

double log_normalizing_constant(const FilterOutput& output) { return output.log_normalizer; }

FilterOutput pf_run(const ModelSpec& model, const ObservationPath& path, int level, std::size_t particles,
                    const FilterOptions& options, std::uint64_t seed) {
  check_common(model, path, level, particles, options);
  const int horizon = path.horizon();
  const auto times = resolve_times(options.report_times, horizon, level);
  const auto groups = group_by_interval(times, horizon, level);
  FilterOutput out = make_output(level, particles, times, options);

  const long per_unit = steps_per_unit(level);
  const double sqrt_dt = std::sqrt(step_size(level));
  const Eigen::MatrixXd obs = path.level_increments(level);
  const auto n = static_cast<Eigen::Index>(particles);
  const auto level_tag = static_cast<std::uint32_t>(level);

  std::vector<StateVector> states(particles, model.initial_state);
  Eigen::VectorXd cumulative = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd increment(n);
  std::vector<UnitPropagation> retained;

  for (int p = 0; p < horizon; ++p) {
    const auto& group = groups[static_cast<std::size_t>(p)];
    const bool retain = std::any_of(group.begin(), group.end(), [&](const GridTime& g) { return g.step < per_unit; });
    if (retain) retained.assign(particles, UnitPropagation{});
    const auto obs_unit = obs.middleCols(p * per_unit, per_unit);

    parallel_for(particles, options.workers, [&](std::size_t begin, std::size_t end) {
      Eigen::MatrixXd noise(model.state_dim, per_unit);
      for (std::size_t i = begin; i < end; ++i) {
        CounterStream stream(seed, StreamPurpose::kPropagation, level_tag, static_cast<std::uint32_t>(i),
                             static_cast<std::uint32_t>(p));
        stream.fill_gaussian(noise, sqrt_dt);
        UnitPropagation prop = propagate_unit(model, level, states[i], obs_unit, noise, retain);
        states[i] = prop.endpoint;
        increment(static_cast<Eigen::Index>(i)) = prop.log_potential_total;
        if (retain) retained[i] = std::move(prop);
      }
    });

    for (const GridTime& g : group) {
      if (g.step == per_unit) continue;
      for (std::size_t f = 0; f < options.functionals.size(); ++f) {
        out.estimates(g.row, static_cast<Eigen::Index>(f)) =
            pf_estimate_intermediate(cumulative, retained, g.step, options.functionals[f]);
      }
    }

    cumulative += increment;
    if (!group.empty() && group.back().step == per_unit) {
      for (std::size_t f = 0; f < options.functionals.size(); ++f) {
        out.estimates(group.back().row, static_cast<Eigen::Index>(f)) = weighted_mean(
            cumulative, [&](Eigen::Index i) -> const StateVector& { return states[static_cast<std::size_t>(i)]; },
            options.functionals[f]);
      }
    }

    const WeightVector weights = normalize_log_weights(cumulative);
    const double current_ess = ess(weights);
    out.diagnostics.ess_trace.push_back(current_ess);
    const bool fire = options.policy == ResamplePolicy::kAlways || current_ess < 0.5 * static_cast<double>(particles);
    if (!fire) continue;

    out.log_normalizer += log_mean_exp(cumulative);
    const Categorical ancestors(weights.normalized);
    std::vector<std::size_t> indices(particles);
    parallel_for(particles, options.workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        CounterStream stream(seed, StreamPurpose::kResampling, level_tag, static_cast<std::uint32_t>(i),
                             static_cast<std::uint32_t>(p));
        indices[i] = ancestors.inverse_cdf(stream.uniform());
      }
    });
    states = gather(states, indices);
    cumulative.setZero();
    out.diagnostics.resample_times.push_back(p + 1);
  }
  out.log_normalizer += log_mean_exp(cumulative);
  out.cost_units = static_cast<std::uint64_t>(particles) * static_cast<std::uint64_t>(per_unit) *
                   static_cast<std::uint64_t>(horizon);
  return out;
}

FilterOutput cpf_run(const ModelSpec& model, const ObservationPath& path, int level, std::size_t particles,
                     const FilterOptions& options, std::uint64_t seed) {
  if (level < 1) throw InvalidArgument("cpf_run: level must be >= 1");
  check_common(model, path, level, particles, options);
  if (options.coupling == CouplingKind::kSorted && model.state_dim != 1) {
    throw InvalidArgument("cpf_run: sorted coupling requires a one-dimensional state");
  }
  const int horizon = path.horizon();
  const auto times = resolve_times(options.report_times, horizon, level);
  const auto groups = group_by_interval(times, horizon, level);
  FilterOutput out = make_output(level, particles, times, options);
  out.coupled = true;
  out.coarse_estimates = out.estimates;
  out.differences = out.estimates;

  const long per_unit = steps_per_unit(level);
  const long per_unit_coarse = per_unit / 2;
  const double sqrt_dt = std::sqrt(step_size(level));
  const Eigen::MatrixXd obs_fine = path.level_increments(level);
  const Eigen::MatrixXd obs_coarse = path.level_increments(level - 1);
  const auto n = static_cast<Eigen::Index>(particles);
  const auto level_tag = static_cast<std::uint32_t>(level);
  const double half = 0.5 * static_cast<double>(particles);

  std::vector<StateVector> fine_states(particles, model.initial_state);
  std::vector<StateVector> coarse_states(particles, model.initial_state);
  Eigen::VectorXd fine_cum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd coarse_cum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd fine_inc(n), coarse_inc(n);
  std::vector<char> same_ancestor(particles, 1);
  std::vector<CoupledUnitPropagation> retained;

  auto fine_at = [&](Eigen::Index i) -> const StateVector& { return fine_states[static_cast<std::size_t>(i)]; };
  auto coarse_at = [&](Eigen::Index i) -> const StateVector& { return coarse_states[static_cast<std::size_t>(i)]; };

  for (int p = 0; p < horizon; ++p) {
    const auto& group = groups[static_cast<std::size_t>(p)];
    const bool retain = std::any_of(group.begin(), group.end(), [&](const GridTime& g) { return g.step < per_unit; });
    if (retain) retained.assign(particles, CoupledUnitPropagation{});
    const auto fine_unit = obs_fine.middleCols(p * per_unit, per_unit);
    const auto coarse_unit = obs_coarse.middleCols(p * per_unit_coarse, per_unit_coarse);

    parallel_for(particles, options.workers, [&](std::size_t begin, std::size_t end) {
      Eigen::MatrixXd noise(model.state_dim, per_unit);
      for (std::size_t i = begin; i < end; ++i) {
        CounterStream stream(seed, StreamPurpose::kPropagation, level_tag, static_cast<std::uint32_t>(i),
                             static_cast<std::uint32_t>(p));
        stream.fill_gaussian(noise, sqrt_dt);
        CoupledUnitPropagation prop = propagate_unit_coupled(model, level, fine_states[i], coarse_states[i], fine_unit,
                                                             coarse_unit, noise, retain);
        fine_states[i] = prop.fine.endpoint;
        coarse_states[i] = prop.coarse.endpoint;
        fine_inc(static_cast<Eigen::Index>(i)) = prop.fine.log_potential_total;
        coarse_inc(static_cast<Eigen::Index>(i)) = prop.coarse.log_potential_total;
        if (retain) retained[i] = std::move(prop);
      }
    });

    if (retain) {
      std::vector<UnitPropagation> fine_props, coarse_props;
      fine_props.reserve(particles);
      coarse_props.reserve(particles);
      for (auto& prop : retained) {
        fine_props.push_back(std::move(prop.fine));
        coarse_props.push_back(std::move(prop.coarse));
      }
      for (const GridTime& g : group) {
        if (g.step == per_unit) continue;
        for (std::size_t f = 0; f < options.functionals.size(); ++f) {
          const auto col = static_cast<Eigen::Index>(f);
          const double fine = pf_estimate_intermediate(fine_cum, fine_props, g.step, options.functionals[f]);
          out.estimates(g.row, col) = fine;
          if (on_grid(g.step, 1)) {
            const double coarse =
                pf_estimate_intermediate(coarse_cum, coarse_props, g.step / 2, options.functionals[f]);
            out.coarse_estimates(g.row, col) = coarse;
            out.differences(g.row, col) = fine - coarse;
          }
        }
      }
    }

    fine_cum += fine_inc;
    coarse_cum += coarse_inc;
    if (!group.empty() && group.back().step == per_unit) {
      const Eigen::Index row = group.back().row;
      for (std::size_t f = 0; f < options.functionals.size(); ++f) {
        const auto col = static_cast<Eigen::Index>(f);
        const double fine = weighted_mean(fine_cum, fine_at, options.functionals[f]);
        const double coarse = weighted_mean(coarse_cum, coarse_at, options.functionals[f]);
        out.estimates(row, col) = fine;
        out.coarse_estimates(row, col) = coarse;
        out.differences(row, col) = fine - coarse;
      }
    }

    const WeightVector wf = normalize_log_weights(fine_cum);
    const WeightVector wc = normalize_log_weights(coarse_cum);
    const double coarse_ess = ess(wc);
    out.diagnostics.ess_trace.push_back(coarse_ess);
    bool fire = options.policy == ResamplePolicy::kAlways || coarse_ess < half;
    if (options.trigger_on_both && ess(wf) < half) fire = true;
    if (!fire) continue;

    out.log_normalizer += log_mean_exp(fine_cum);
    out.coarse_log_normalizer += log_mean_exp(coarse_cum);

    std::vector<IndexPair> pairs(particles);
    auto stream_for = [&](std::size_t i) {
      return CounterStream(seed, StreamPurpose::kResampling, level_tag, static_cast<std::uint32_t>(i),
                           static_cast<std::uint32_t>(p));
    };
    switch (options.coupling) {
      case CouplingKind::kMaximal: {
        const MaximalCoupling coupling(wf, wc);
        parallel_for(particles, options.workers, [&](std::size_t begin, std::size_t end) {
          for (std::size_t i = begin; i < end; ++i) {
            CounterStream stream = stream_for(i);
            UniformChooser<CounterStream> chooser(stream);
            pairs[i] = coupling.draw(chooser);
          }
        });
        break;
      }
      case CouplingKind::kSorted: {
        std::vector<double> xf(particles), xc(particles);
        for (std::size_t i = 0; i < particles; ++i) {
          xf[i] = fine_states[i](0);
          xc[i] = coarse_states[i](0);
        }
        const SortedCoupling coupling(wf, wc, xf, xc);
        parallel_for(particles, options.workers, [&](std::size_t begin, std::size_t end) {
          for (std::size_t i = begin; i < end; ++i) pairs[i] = coupling.draw(stream_for(i).uniform());
        });
        break;
      }
      case CouplingKind::kIndependent: {
        const Categorical fine_law(wf.normalized);
        const Categorical coarse_law(wc.normalized);
        parallel_for(particles, options.workers, [&](std::size_t begin, std::size_t end) {
          for (std::size_t i = begin; i < end; ++i) {
            CounterStream stream = stream_for(i);
            const std::size_t f = fine_law.inverse_cdf(stream.uniform());
            const std::size_t c = coarse_law.inverse_cdf(stream.uniform());
            pairs[i] = {f, c, false};
          }
        });
        break;
      }
    }

    std::vector<StateVector> next_fine(particles), next_coarse(particles);
    std::vector<char> next_same(particles);
    std::size_t members = 0;
    for (std::size_t i = 0; i < particles; ++i) {
      const IndexPair& pair = pairs[i];
      next_fine[i] = fine_states[pair.fine_index];
      next_coarse[i] = coarse_states[pair.coarse_index];
      next_same[i] = static_cast<char>(pair.coupled && same_ancestor[pair.fine_index]);
      members += static_cast<std::size_t>(next_same[i]);
    }
    fine_states = std::move(next_fine);
    coarse_states = std::move(next_coarse);
    same_ancestor = std::move(next_same);
    fine_cum.setZero();
    coarse_cum.setZero();
    out.diagnostics.resample_times.push_back(p + 1);
    out.diagnostics.same_ancestor_trace.push_back(static_cast<double>(members) / static_cast<double>(particles));
  }
  out.log_normalizer += log_mean_exp(fine_cum);
  out.coarse_log_normalizer += log_mean_exp(coarse_cum);
  const auto members = std::count(same_ancestor.begin(), same_ancestor.end(), char{1});
  out.diagnostics.final_same_ancestor_fraction = static_cast<double>(members) / static_cast<double>(particles);
  out.cost_units = static_cast<std::uint64_t>(particles) * static_cast<std::uint64_t>(per_unit + per_unit_coarse) *
                   static_cast<std::uint64_t>(horizon);
  return out;
}

const char* to_string(ResamplePolicy policy) {
  return policy == ResamplePolicy::kAlways ? "always" : "ess_below_half";
}

const char* to_string(CouplingKind kind) {
  switch (kind) {
    case CouplingKind::kMaximal:
      return "maximal";
    case CouplingKind::kSorted:
      return "sorted";
    case CouplingKind::kIndependent:
      return "independent";
  }
  return "maximal";
}

ResamplePolicy parse_resample_policy(std::string_view text) {
  if (text == "always") return ResamplePolicy::kAlways;
  if (text == "ess_below_half") return ResamplePolicy::kEssBelowHalf;
  throw InvalidArgument("unknown resample policy '" + std::string(text) + "' (expected always or ess_below_half)");
}

CouplingKind parse_coupling_kind(std::string_view text) {
  if (text == "maximal") return CouplingKind::kMaximal;
  if (text == "sorted") return CouplingKind::kSorted;
  if (text == "independent") return CouplingKind::kIndependent;
  throw InvalidArgument("unknown coupling kind '" + std::string(text) + "' (expected maximal or sorted)");
}

}  // namespace mlpf
