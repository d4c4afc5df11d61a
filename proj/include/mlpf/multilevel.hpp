#pragma once

#include "mlpf/filters.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mlpf {

enum class AllocationRule {
  kMlpfNonconstant,  ///< N_l = base eps^-2 D_L^-1/4 D_l^3/4
  kMlpfConstant,     ///< N_l = base eps^-2 D_l L
  kWassersteinNew,   ///< N_l = base eps^-2 D_l^3/2 (constant sigma), base eps^-2 D_l L otherwise
  kSinglePf,         ///< N = base eps^-2 at level L only
};

/// Particle counts per level, with eps^2 = D_L.
struct LevelAllocation {
  int max_level = 0;
  std::vector<std::size_t> counts;  ///< N_0..N_L, or the single count for kSinglePf
  AllocationRule rule = AllocationRule::kSinglePf;
  double base = 1.0;
  double epsilon = 1.0;
  /// Non-empty when the requested rule was adjusted (e.g. L = 0 multilevel).
  std::string warning;

  bool multilevel() const { return rule != AllocationRule::kSinglePf; }
};

LevelAllocation allocate(AllocationRule rule, int max_level, double base, bool constant_diffusion = true);

/// Euler-step cost: T (N_0 + sum_{l>=1} N_l (2^l + 2^(l-1))) or T N 2^L.
double total_cost(const LevelAllocation& allocation, int horizon);

struct MLPFOutput {
  /// Level 0 PF first, then CPFs for l = 1..L (a single PF for kSinglePf).
  std::vector<FilterOutput> levels;
  std::vector<double> times;
  std::vector<std::string> functionals;
  Eigen::MatrixXd combined;
  std::uint64_t cost_units = 0;

  double estimate(double time, std::string_view functional) const;
};

/// Per-level seed; depends only on (master, level), never on execution order.
std::uint64_t level_seed(std::uint64_t master_seed, int level);

/// Level-0 PF plus independent level-l CPFs combined through the telescoping sum.
/// Non-integer report times t with finest grid level l* <= L are estimated from
/// the fine half of the level-l* CPF plus the differences of all higher levels.
MLPFOutput mlpf_run(const ModelSpec& model, const ObservationPath& path, const LevelAllocation& allocation,
                    const FilterOptions& options, std::uint64_t master_seed);

const char* to_string(AllocationRule rule);
AllocationRule parse_allocation_rule(std::string_view text);

}  // namespace mlpf
