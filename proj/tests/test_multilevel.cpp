#include "doctest.h"

#include "mlpf/multilevel.hpp"
#include "mlpf/oracle.hpp"
#include "mlpf/rng.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace mlpf;

namespace {
FilterOptions options_for(std::vector<std::string> names) {
  FilterOptions opt;
  opt.functionals.clear();
  for (const auto& n : names) opt.functionals.push_back(functional_by_name(n));
  return opt;
}
}  // namespace

TEST_CASE("allocation formulas") {
  // 32 * 2^(-3l/4) rounded up: 32, 19.03, 11.31, 6.73, 4
  const auto nc = allocate(AllocationRule::kMlpfNonconstant, 4, 1.0);
  CHECK(nc.counts == std::vector<std::size_t>{32, 20, 12, 7, 4});
  CHECK(nc.epsilon == doctest::Approx(0.25));

  CHECK(allocate(AllocationRule::kSinglePf, 4, 100.0).counts == std::vector<std::size_t>{1600});

  // base * 2^L * 2^-l * L
  CHECK(allocate(AllocationRule::kMlpfConstant, 3, 2.0).counts == std::vector<std::size_t>{48, 24, 12, 6});
  // base * 2^L * 2^(-3l/2)
  CHECK(allocate(AllocationRule::kWassersteinNew, 4, 1.0, true).counts == std::vector<std::size_t>{16, 6, 2, 2, 2});
  CHECK(allocate(AllocationRule::kWassersteinNew, 3, 2.0, false).counts ==
        allocate(AllocationRule::kMlpfConstant, 3, 2.0).counts);

  for (auto rule : {AllocationRule::kMlpfNonconstant, AllocationRule::kMlpfConstant, AllocationRule::kSinglePf}) {
    const auto a = allocate(rule, 5, 3.0), b = allocate(rule, 5, 12.0);
    for (std::size_t l = 0; l < a.counts.size(); ++l) {
      CHECK(b.counts[l] <= 4 * a.counts[l]);
      CHECK(b.counts[l] + 4 > 4 * a.counts[l]);
    }
  }
  CHECK_THROWS_AS(allocate(AllocationRule::kMlpfConstant, -1, 1.0), InvalidArgument);
  CHECK_THROWS_AS(allocate(AllocationRule::kMlpfConstant, 3, 0.0), InvalidArgument);
}

TEST_CASE("level zero multilevel request falls back to a single filter") {
  const auto a = allocate(AllocationRule::kMlpfConstant, 0, 10.0);
  CHECK_FALSE(a.multilevel());
  CHECK_FALSE(a.warning.empty());
  CHECK(a.counts.size() == 1);
  CHECK(total_cost(a, 7) == doctest::Approx(7.0 * a.counts[0]));
}

TEST_CASE("total cost") {
  CHECK(total_cost(allocate(AllocationRule::kSinglePf, 4, 100.0), 1) == 25600.0);
  LevelAllocation given;
  given.rule = AllocationRule::kMlpfNonconstant;
  given.max_level = 4;
  given.counts = {32, 20, 12, 8, 4};
  CHECK(total_cost(given, 1) == 356.0);
  CHECK(total_cost(given, 3) == 3 * 356.0);
  for (auto rule : {AllocationRule::kMlpfNonconstant, AllocationRule::kMlpfConstant, AllocationRule::kWassersteinNew,
                    AllocationRule::kSinglePf}) {
    for (int L = 1; L < 9; ++L) CHECK(total_cost(allocate(rule, L, 5.0), 10) < total_cost(allocate(rule, L + 1, 5.0), 10));
  }
}

TEST_CASE("telescoping sum at level zero is the plain filter") {
  const auto model = builtin_model("langevin");
  const auto path = simulate_observations(GenerationMode::kPBar, model, 3, 4, 2);
  const auto opt = options_for({"x", "x2"});
  const auto alloc = allocate(AllocationRule::kSinglePf, 0, 50.0);
  const auto ml = mlpf_run(model, path, alloc, opt, 9);
  const auto pf = pf_run(model, path, 0, alloc.counts[0], opt, level_seed(9, 0));
  CHECK(ml.combined == pf.estimates);
  CHECK(ml.cost_units == pf.cost_units);
}

TEST_CASE("combined estimate of the constant functional is one") {
  const auto model = builtin_model("gbm");
  const auto path = simulate_observations(GenerationMode::kPBar, model, 3, 5, 2);
  auto opt = options_for({"one", "x"});
  opt.report_times = {0.5, 1.0, 2.75, 3.0};
  const auto ml = mlpf_run(model, path, allocate(AllocationRule::kMlpfNonconstant, 4, 4.0, false), opt, 1);
  for (Eigen::Index r = 0; r < ml.combined.rows(); ++r) CHECK(ml.combined(r, 0) == 1.0);
}

TEST_CASE("levels are seeded independently of execution order") {
  const auto model = builtin_model("ou");
  const auto path = simulate_observations(GenerationMode::kPBar, model, 2, 4, 3);
  const auto opt = options_for({"x"});
  const auto alloc = allocate(AllocationRule::kMlpfConstant, 3, 4.0);
  const auto ml = mlpf_run(model, path, alloc, opt, 21);
  REQUIRE(ml.levels.size() == 4);
  for (int l = 3; l >= 1; --l) {
    const auto cpf = cpf_run(model, path, l, alloc.counts[static_cast<std::size_t>(l)], opt, level_seed(21, l));
    CHECK(cpf.differences == ml.levels[static_cast<std::size_t>(l)].differences);
  }
  double sum = ml.levels[0].estimates(1, 0);
  for (int l = 1; l <= 3; ++l) sum += ml.levels[static_cast<std::size_t>(l)].differences(1, 0);
  CHECK(ml.estimate(2, "x") == sum);
  CHECK(ml.cost_units == static_cast<std::uint64_t>(total_cost(alloc, 2)));
  CHECK(level_seed(21, 1) != level_seed(21, 2));
}

TEST_CASE("multilevel estimate agrees with Kalman") {
  const auto model = builtin_model("ou");
  const auto path = simulate_observations(GenerationMode::kPBar, model, 10, 5, 13);
  const double target = kalman_run(path, 5, model).at_time(10).mean;
  const auto alloc = allocate(AllocationRule::kMlpfConstant, 5, 10.0);
  std::vector<double> est;
  for (std::uint64_t r = 0; r < 12; ++r) est.push_back(mlpf_run(model, path, alloc, options_for({"x"}), derive_seed(4, r)).estimate(10, "x"));
  CHECK(std::abs(testing::mean(est) - target) < 4 * std::sqrt(testing::variance(est) / 12));
}

TEST_CASE("intermediate times use the finest grid they lie on") {
  const auto model = builtin_model("ou");
  const auto path = simulate_observations(GenerationMode::kPBar, model, 2, 4, 8);
  auto opt = options_for({"x"});
  opt.report_times = {0.5, 0.25, 1.125, 2.0};
  const auto alloc = allocate(AllocationRule::kMlpfConstant, 3, 4.0);
  const auto ml = mlpf_run(model, path, alloc, opt, 5);
  const auto& lv = ml.levels;
  CHECK(ml.estimate(0.5, "x") == lv[1].estimate(0.5, "x") + lv[2].difference(0.5, "x") + lv[3].difference(0.5, "x"));
  CHECK(ml.estimate(0.25, "x") == lv[2].estimate(0.25, "x") + lv[3].difference(0.25, "x"));
  CHECK(ml.estimate(1.125, "x") == lv[3].estimate(1.125, "x"));
  CHECK(ml.estimate(2.0, "x") == lv[0].estimate(2.0, "x") + lv[1].difference(2.0, "x") + lv[2].difference(2.0, "x") +
                                     lv[3].difference(2.0, "x"));
  CHECK(lv[0].times == std::vector<double>{2.0});
  CHECK(parse_allocation_rule("wasserstein_new") == AllocationRule::kWassersteinNew);
  CHECK(std::string(to_string(AllocationRule::kMlpfNonconstant)) == "mlpf_nonconstant");
}
