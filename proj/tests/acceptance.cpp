// Acceptance suite: one PASS/FAIL line per criterion, each with its own time limit.
// Usage: mlpf_acceptance [criterion numbers...]   (default: all)

#include "mlpf/bench.hpp"
#include "mlpf/euler.hpp"
#include "mlpf/filters.hpp"
#include "mlpf/oracle.hpp"
#include "mlpf/resampling.hpp"
#include "mlpf/rng.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

using namespace mlpf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
  return buf;
}

StateVector scalar(double x) {
  StateVector v(1);
  v << x;
  return v;
}

FilterOptions only(const char* functional, ResamplePolicy policy) {
  FilterOptions opt;
  opt.functionals = {functional_by_name(functional)};
  opt.policy = policy;
  return opt;
}

Outcome coupling_exactness() {
  CounterStream rng(101, StreamPurpose::kTest, 0, 0, 0);
  double worst_joint = 0, worst_marginal = 0, worst_alpha = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + trial % 3;
    Eigen::VectorXd a(n), b(n);
    do {
      for (int i = 0; i < n; ++i) {
        a(i) = std::floor(rng.uniform() * 10);
        b(i) = std::floor(rng.uniform() * 10);
      }
    } while (a.sum() == 0 || b.sum() == 0);
    const auto wf = weights_from_probabilities(a / a.sum());
    const auto wc = weights_from_probabilities(b / b.sum());
    const MaximalCoupling coupling(wf, wc);
    double coupled = 0;
    const Eigen::MatrixXd law = testing::enumerate_joint_law(coupling, n, &coupled);
    const Eigen::MatrixXd pmf = maximal_coupling_pmf(wf, wc);
    worst_joint = std::max(worst_joint, (law - pmf).cwiseAbs().maxCoeff());
    worst_marginal = std::max(worst_marginal, (law.rowwise().sum() - wf.normalized).cwiseAbs().maxCoeff());
    worst_marginal =
        std::max(worst_marginal, (law.colwise().sum().transpose() - wc.normalized).cwiseAbs().maxCoeff());
    worst_alpha = std::max(worst_alpha, std::abs(coupled - wf.normalized.cwiseMin(wc.normalized).sum()));
  }
  const bool ok = worst_joint <= 1e-12 && worst_marginal <= 1e-12 && worst_alpha <= 1e-12;
  return {ok, fmt("max |law - pmf| %.2e, max marginal error %.2e, max |P(coupled) - sum min| %.2e", worst_joint,
                  worst_marginal, worst_alpha)};
}

Outcome marginal_fidelity() {
  int mismatches = 0, cases = 0;
  for (const auto& name : builtin_model_names()) {
    const ModelSpec model = builtin_model(name);
    for (int l : {1, 4, 7}) {
      for (std::uint32_t c = 0; c < 100; ++c) {
        CounterStream draw(derive_seed(202, static_cast<std::uint64_t>(l)), StreamPurpose::kTest,
                           static_cast<std::uint32_t>(l), c, 0);
        const double xf = 4 * draw.uniform() - 2, xc = 4 * draw.uniform() - 2;
        const auto seed = static_cast<std::uint64_t>(draw.uniform() * 1e15);
        CounterStream noise_stream(seed, StreamPurpose::kPropagation, static_cast<std::uint32_t>(l), c, 0);
        Eigen::MatrixXd noise(1, 1L << l), obs_f(1, 1L << l);
        noise_stream.fill_gaussian(noise, std::sqrt(step_size(l)));
        noise_stream.fill_gaussian(obs_f, std::sqrt(step_size(l)));
        Eigen::MatrixXd obs_c(1, 1L << (l - 1)), summed(1, 1L << (l - 1));
        for (long j = 0; j < obs_c.cols(); ++j) {
          obs_c(0, j) = obs_f(0, 2 * j) + obs_f(0, 2 * j + 1);
          summed(0, j) = noise(0, 2 * j) + noise(0, 2 * j + 1);
        }
        const auto pair = propagate_unit_coupled(model, l, scalar(xf), scalar(xc), obs_f, obs_c, noise);
        const auto fine = propagate_unit(model, l, scalar(xf), obs_f, noise);
        const auto coarse = propagate_unit(model, l - 1, scalar(xc), obs_c, summed);
        const bool same = pair.fine.endpoint == fine.endpoint &&
                          pair.fine.log_potential_total == fine.log_potential_total &&
                          pair.coarse.endpoint == coarse.endpoint &&
                          pair.coarse.log_potential_total == coarse.log_potential_total;
        mismatches += !same;
        ++cases;
      }
    }
  }
  return {mismatches == 0, fmt("%.0f cases, %.0f not bit-identical", cases, mismatches)};
}

Outcome strong_rate() {
  std::string detail;
  bool ok = true;
  for (const char* name : {"gbm", "nonlinear_sigma"}) {
    const ModelSpec model = builtin_model(name);
    std::vector<double> levels, logs;
    for (int l = 3; l <= 8; ++l) {
      const Eigen::MatrixXd obs_f = Eigen::MatrixXd::Zero(1, 1L << l);
      const Eigen::MatrixXd obs_c = Eigen::MatrixXd::Zero(1, 1L << (l - 1));
      Eigen::MatrixXd noise(1, 1L << l);
      double acc = 0;
      for (std::uint32_t i = 0; i < 10000; ++i) {
        CounterStream s(303, StreamPurpose::kPropagation, static_cast<std::uint32_t>(l), i, 0);
        s.fill_gaussian(noise, std::sqrt(step_size(l)));
        const auto pair =
            propagate_unit_coupled(model, l, model.initial_state, model.initial_state, obs_f, obs_c, noise);
        acc += (pair.fine.endpoint - pair.coarse.endpoint).squaredNorm();
      }
      levels.push_back(l);
      logs.push_back(std::log2(acc / 10000));
    }
    const double slope = testing::ols_slope(levels, logs);
    ok = ok && slope >= -1.3 && slope <= -0.7;
    detail += name + fmt(" slope %.3f; ", slope);
  }
  return {ok, detail + "target [-1.3, -0.7]"};
}

Outcome same_ancestor_decay() {
  const ModelSpec model = builtin_model("ou");
  const auto path = simulate_observations(GenerationMode::kPBar, model, 10, 7, 404);
  const auto opt = only("x", ResamplePolicy::kAlways);
  std::vector<double> levels, logs;
  std::string detail;
  for (int l = 3; l <= 7; ++l) {
    double acc = 0;
    for (std::uint64_t r = 0; r < 20; ++r) {
      acc += cpf_run(model, path, l, 4000, opt, derive_seed(404, static_cast<std::uint64_t>(l), r))
                 .diagnostics.final_same_ancestor_fraction;
    }
    const double loss = 1 - acc / 20;
    levels.push_back(l);
    logs.push_back(std::log2(loss));
    detail += fmt("l=%.0f:%.4f ", l, loss);
  }
  const double slope = testing::ols_slope(levels, logs);
  return {slope <= -0.3, fmt("slope %.3f (target <= -0.3); 1 - Card(S_T)/N: ", slope) + detail};
}

Outcome cpf_variance_decay() {
  const ModelSpec model = builtin_model("ou");
  const auto path = simulate_observations(GenerationMode::kPBar, model, 10, 7, 505);
  const auto opt = only("x", ResamplePolicy::kAlways);
  std::vector<double> levels, logs;
  std::string detail;
  for (int l = 2; l <= 7; ++l) {
    std::vector<double> diffs;
    for (std::uint64_t r = 0; r < 50; ++r) {
      diffs.push_back(
          cpf_run(model, path, l, 1000, opt, derive_seed(505, static_cast<std::uint64_t>(l), r)).difference(10, "x"));
    }
    const double var = testing::variance(diffs);
    levels.push_back(l);
    logs.push_back(std::log2(var));
    detail += fmt("l=%.0f:%.3e ", l, var);
  }
  const double slope = testing::ols_slope(levels, logs);
  return {slope <= -0.4, fmt("slope %.3f (target <= -0.4); variance: ", slope) + detail};
}

Outcome kalman_bias_order() {
  const ModelSpec model = builtin_model("ou");
  std::vector<double> totals(7, 0.0);
  for (std::uint64_t p = 0; p < 10; ++p) {
    const auto path = simulate_observations(GenerationMode::kPBar, model, 10, 12, derive_seed(606, p));
    const auto reference = kalman_run(path, 12, model);
    for (int l = 3; l <= 9; ++l) {
      const auto k = kalman_run(path, l, model);
      for (std::size_t t = 0; t < k.integer_means.size(); ++t) {
        totals[static_cast<std::size_t>(l - 3)] += std::abs(k.integer_means[t] - reference.integer_means[t]);
      }
    }
  }
  std::vector<double> levels, logs;
  for (int l = 3; l <= 9; ++l) {
    levels.push_back(l);
    logs.push_back(std::log2(totals[static_cast<std::size_t>(l - 3)] / 100.0));
  }
  const double slope = testing::ols_slope(levels, logs);
  return {slope >= -1.4 && slope <= -0.6,
          fmt("slope %.3f (target [-1.4, -0.6]); mean |error| l=3: %.3e, l=9: %.3e", slope, std::exp2(logs.front()),
              std::exp2(logs.back()))};
}

// At 20 repeats each MSE carries about 30% relative noise, which scatters and
// attenuates a regression on log MSE; 100 keeps it near 14%.
constexpr int kSlopeRepeats = 100;

struct SlopeTarget {
  const char* model;
  const char* rule;
  double base;
  double lo, hi;
};

Outcome cost_mse_slopes() {
  const SlopeTarget targets[] = {{"ou", "mlpf_constant", 8, -1.5, -0.7},
                                 {"langevin", "mlpf_constant", 8, -1.5, -0.7},
                                 {"gbm", "mlpf_nonconstant", 5, -2.1, -1.1},
                                 {"nonlinear_sigma", "mlpf_nonconstant", 5, -2.1, -1.1}};
  bool ok = true;
  std::string detail;
  const fs::path out_root = fs::current_path() / "acceptance_out";
  for (const auto& t : targets) {
    std::ostringstream json;
    json << R"({"model": {"name": ")" << t.model << R"("}, "T": 10, "L_data": 9, "repeats": )" << kSlopeRepeats << R"(,
      "data": {"mode": "pbar", "seed": 1}, "master_seed": 7, "functionals": ["x"],
      "truth": {"ref_level": 9, "ref_N": 51200, "replicates": 5}, "record_wall_time": true,
      "estimators": [{"id": "PF", "rule": "single_pf", "L_min": 3, "L_max": 7, "base": 100},
                     {"id": "MLPF", "rule": ")"
         << t.rule << R"(", "L_min": 3, "L_max": 7, "base": )" << t.base << "}]}";
    const BenchmarkConfig config = parse_config(json.str());
    const BenchmarkResult result = run_benchmark(config);
    emit_outputs(result, out_root / t.model, {"csv", "json", "svg"});
    for (const auto& [id, fit] : fit_slopes(result.summary)) {
      const bool pf = id == "PF";
      const double lo = pf ? -2.6 : t.lo, hi = pf ? -1.5 : t.hi;
      const bool in = fit.slope >= lo && fit.slope <= hi;
      ok = ok && in;
      detail += std::string(t.model) + " " + id + fmt(" %.3f [%.1f, %.1f]", fit.slope, lo, hi) + (in ? "" : " OUT") +
                "; ";
    }
  }
  return {ok, detail};
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Outcome determinism() {
#ifndef MLPF_CLI_PATH
  return {false, "command-line tool path not configured"};
#else
  const fs::path dir = fs::temp_directory_path() / "mlpf_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << R"({"model": {"name": "nonlinear_sigma"}, "T": 5, "L_data": 6, "repeats": 4,
    "master_seed": 11, "data": {"seed": 3}, "truth": {"ref_N": 4000, "replicates": 3}, "record_wall_time": false,
    "functionals": ["x", "x2"],
    "estimators": [{"id": "pf", "rule": "single_pf", "L_min": 2, "L_max": 5, "base": 20},
                   {"id": "ml", "rule": "mlpf_nonconstant", "L_min": 2, "L_max": 5, "base": 4},
                   {"id": "ml_sorted", "rule": "mlpf_nonconstant", "coupling": "sorted", "L_min": 2, "L_max": 5,
                    "base": 4}]})";
  const std::string cli = MLPF_CLI_PATH;
  std::vector<std::string> runs{"w1a", "w1b", "w8"};
  for (const auto& run : runs) {
    const std::string workers = run == "w8" ? "8" : "1";
    const std::string cmd = cli + " benchmark --config " + (dir / "config.json").string() + " --workers " + workers +
                            " -o " + (dir / run).string() + " > " + (dir / (run + ".log")).string() + " 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "benchmark run '" + run + "' failed"};
  }
  bool ok = true;
  for (const char* file : {"records.csv", "summary.csv"}) {
    const std::string a = slurp(dir / "w1a" / file);
    ok = ok && !a.empty() && a == slurp(dir / "w1b" / file) && a == slurp(dir / "w8" / file);
  }
  const std::string records = slurp(dir / "w1a" / "records.csv");
  const auto lines = std::count(records.begin(), records.end(), '\n');
  fs::remove_all(dir);
  return {ok, fmt("records.csv (%.0f lines) and summary.csv identical across two 1-worker runs and an 8-worker run: ",
                  static_cast<double>(lines)) +
                  (ok ? "yes" : "no")};
#endif
}

Outcome pf_kalman_consistency() {
  const ModelSpec model = builtin_model("ou");
  const auto path = simulate_observations(GenerationMode::kPBar, model, 10, 6, 808);
  const double target = kalman_run(path, 6, model).at_time(1).mean;
  const auto opt = only("x", ResamplePolicy::kAlways);
  std::vector<double> rmse;
  bool means_ok = true;
  std::string detail;
  for (std::size_t n : {1000, 4000, 16000}) {
    std::vector<double> est;
    for (std::uint64_t r = 0; r < 30; ++r) {
      est.push_back(pf_run(model, path, 6, n, opt, derive_seed(808, n, r)).estimate(1, "x"));
    }
    double sq = 0;
    for (double e : est) sq += (e - target) * (e - target);
    rmse.push_back(std::sqrt(sq / 30));
    const double se = std::sqrt(testing::variance(est) / 30);
    const double z = (testing::mean(est) - target) / se;
    means_ok = means_ok && std::abs(z) < 4;
    detail += fmt("N=%.0f rmse %.3e z %.2f; ", static_cast<double>(n), rmse.back(), z);
  }
  const double r1 = rmse[0] / rmse[1], r2 = rmse[1] / rmse[2];
  const bool ok = means_ok && r1 >= 1.6 && r1 <= 2.6 && r2 >= 1.6 && r2 <= 2.6;
  return {ok, detail + fmt("ratios %.2f, %.2f (target [1.6, 2.6])", r1, r2)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "maximal-coupling exactness", 1.0, coupling_exactness},
      {2, "coupled-kernel marginal fidelity", 5.0, marginal_fidelity},
      {3, "strong coupling rate", 60.0, strong_rate},
      {4, "same-ancestor decay", 300.0, same_ancestor_decay},
      {5, "coupled filter variance decay", 300.0, cpf_variance_decay},
      {6, "discretization bias order", 60.0, kalman_bias_order},
      {7, "cost-MSE slopes", 1800.0, cost_mse_slopes},
      {8, "particle filter vs Kalman consistency", 300.0, pf_kalman_consistency},
      {9, "benchmark determinism", 120.0, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.limit_seconds;
    const bool pass = outcome.ok && in_time;
    failures += !pass;
    std::printf("[%s] %d %s: %s | %.1f s (limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                outcome.detail.c_str(), seconds, c.limit_seconds, in_time ? "" : ", EXCEEDED");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
