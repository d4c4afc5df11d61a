// Command-line front end: data simulation, single filter runs, reference truth and benchmarks.

#include "mlpf/bench.hpp"
#include "mlpf/filters.hpp"
#include "mlpf/multilevel.hpp"
#include "mlpf/oracle.hpp"
#include "mlpf/path_data.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct ModelArgs {
  std::string name = "ou";
  std::vector<std::string> params;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", name, "Built-in model: ou, langevin, gbm, nonlinear_sigma")->capture_default_str();
    cmd->add_option("--param", params, "Model parameter override, key=value (repeatable)");
  }

  mlpf::ModelSpec build() const {
    mlpf::ParamMap map;
    for (const auto& kv : params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw mlpf::ConfigError("--param", "expected key=value, got '" + kv + "'");
      double value = 0.0;
      try {
        std::size_t used = 0;
        value = std::stod(kv.substr(eq + 1), &used);
        if (used != kv.size() - eq - 1) throw std::invalid_argument(kv);
      } catch (const std::exception&) {
        throw mlpf::ConfigError("--param", "not a number in '" + kv + "'");
      }
      map[kv.substr(0, eq)] = value;
    }
    try {
      return mlpf::builtin_model(name, map);
    } catch (const mlpf::ConfigError&) {
      throw;
    } catch (const mlpf::Error& e) {
      throw mlpf::ConfigError("--model", e.what());
    }
  }
};

struct FilterArgs {
  std::string data;
  int level = 4;
  std::size_t particles = 1000;
  std::uint64_t seed = 1;
  std::string policy = "ess_below_half";
  std::vector<std::string> functionals{"x", "x2"};
  int workers = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--data", data, "Observation path written by simulate-data")->required();
    cmd->add_option("--level,-l", level, "Discretization level")->capture_default_str();
    cmd->add_option("--particles,-N", particles, "Particles")->capture_default_str();
    cmd->add_option("--seed", seed, "Seed")->capture_default_str();
    cmd->add_option("--policy", policy, "Resampling policy: always, ess_below_half")->capture_default_str();
    cmd->add_option("--functionals", functionals, "Functionals to report: x, x2, one");
    cmd->add_option("--workers", workers, "Worker threads")->capture_default_str();
  }

  mlpf::FilterOptions options() const {
    mlpf::FilterOptions opt;
    opt.functionals.clear();
    for (const auto& f : functionals) opt.functionals.push_back(mlpf::functional_by_name(f));
    opt.policy = mlpf::parse_resample_policy(policy);
    opt.workers = workers;
    return opt;
  }
};

void print_table(const std::vector<double>& times, const std::vector<std::string>& names,
                 const std::vector<std::pair<std::string, const Eigen::MatrixXd*>>& columns) {
  std::cout << "t";
  for (const auto& [label, m] : columns) {
    for (const auto& n : names) std::cout << ',' << label << n;
  }
  std::cout << '\n';
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::cout << mlpf::format_double(times[i]);
    for (const auto& [label, m] : columns) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) {
        std::cout << ',' << mlpf::format_double((*m)(static_cast<Eigen::Index>(i), j));
      }
    }
    std::cout << '\n';
  }
}

std::string read_text(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw mlpf::Error("cannot read '" + file + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel particle filters for partially observed diffusions"};
  app.require_subcommand(1);

  // simulate-data
  auto* sim = app.add_subcommand("simulate-data", "Simulate an observation path at the finest level");
  ModelArgs sim_model;
  sim_model.add_to(sim);
  int sim_T = 10, sim_L = 9;
  std::string sim_mode = "pbar", sim_out, sim_csv;
  std::uint64_t sim_seed = 1;
  sim->add_option("--T", sim_T, "Horizon")->capture_default_str();
  sim->add_option("--L-data", sim_L, "Finest level")->capture_default_str();
  sim->add_option("--mode", sim_mode, "pbar (Y is Brownian motion) or p (Y from a latent signal)")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Seed")->capture_default_str();
  sim->add_option("--out,-o", sim_out, "Binary output file")->required();
  sim->add_option("--csv", sim_csv, "Also write k,component,value CSV");

  // run-pf / run-cpf
  auto* pf = app.add_subcommand("run-pf", "Run a particle filter at one level");
  ModelArgs pf_model;
  FilterArgs pf_args;
  pf_model.add_to(pf);
  pf_args.add_to(pf);

  auto* cpf = app.add_subcommand("run-cpf", "Run a coupled particle filter at levels l and l-1");
  ModelArgs cpf_model;
  FilterArgs cpf_args;
  std::string cpf_coupling = "maximal";
  bool cpf_both = false;
  cpf_model.add_to(cpf);
  cpf_args.add_to(cpf);
  cpf->add_option("--coupling", cpf_coupling, "maximal, sorted or independent")->capture_default_str();
  cpf->add_flag("--trigger-on-both", cpf_both, "Also resample when the fine ESS drops below N/2");

  // run-mlpf
  auto* ml = app.add_subcommand("run-mlpf", "Run a multilevel particle filter");
  ModelArgs ml_model;
  FilterArgs ml_args;
  std::string ml_rule = "mlpf_constant", ml_coupling = "maximal";
  double ml_base = 10.0;
  ml_model.add_to(ml);
  ml_args.add_to(ml);
  ml->add_option("--rule", ml_rule, "mlpf_constant, mlpf_nonconstant, wasserstein_new, single_pf")->capture_default_str();
  ml->add_option("--base", ml_base, "Allocation constant")->capture_default_str();
  ml->add_option("--coupling", ml_coupling, "maximal, sorted or independent")->capture_default_str();

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Run a cost-vs-MSE benchmark from a JSON config");
  std::string bench_config, bench_out;
  int bench_workers = 0;
  bench->add_option("--config,-c", bench_config, "JSON config file")->required();
  bench->add_option("--output-dir,-o", bench_out, "Override the config's output directory");
  bench->add_option("--workers", bench_workers, "Override the config's worker count");

  // slope
  auto* slope = app.add_subcommand("slope", "Fit log-log slopes to a summary CSV");
  std::string slope_file;
  slope->add_option("summary", slope_file, "summary.csv written by benchmark")->required();

  // truth
  auto* truth = app.add_subcommand("truth", "Reference filter values (Kalman for OU, reference PF otherwise)");
  ModelArgs truth_model;
  std::string truth_data;
  int truth_level = -1, truth_reps = 5;
  std::size_t truth_N = 51200;
  std::uint64_t truth_seed = 1;
  std::vector<std::string> truth_functionals{"x", "x2"};
  truth_model.add_to(truth);
  truth->add_option("--data", truth_data, "Observation path")->required();
  truth->add_option("--ref-level", truth_level, "Reference level (default: the data level)");
  truth->add_option("--ref-N", truth_N, "Reference particles")->capture_default_str();
  truth->add_option("--replicates", truth_reps, "Reference PF replicates")->capture_default_str();
  truth->add_option("--seed", truth_seed, "Seed")->capture_default_str();
  truth->add_option("--functionals", truth_functionals, "Functionals to report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) {
      const auto model = sim_model.build();
      const auto path = mlpf::simulate_observations(mlpf::parse_generation_mode(sim_mode), model, sim_T, sim_L, sim_seed);
      mlpf::write_path(path, sim_out);
      if (!sim_csv.empty()) mlpf::write_path_csv(path, sim_csv);
      std::cerr << "wrote " << path.increments().cols() << " increments to " << sim_out << '\n';
    } else if (*pf) {
      const auto model = pf_model.build();
      const auto path = mlpf::read_path(pf_args.data);
      const auto out = mlpf::pf_run(model, path, pf_args.level, pf_args.particles, pf_args.options(), pf_args.seed);
      print_table(out.times, out.functionals, {{"", &out.estimates}});
      std::cerr << "log_normalizer " << mlpf::format_double(out.log_normalizer) << " resamples "
                << out.diagnostics.resample_count() << " cost " << out.cost_units << '\n';
    } else if (*cpf) {
      const auto model = cpf_model.build();
      const auto path = mlpf::read_path(cpf_args.data);
      auto opt = cpf_args.options();
      opt.coupling = mlpf::parse_coupling_kind(cpf_coupling);
      opt.trigger_on_both = cpf_both;
      const auto out = mlpf::cpf_run(model, path, cpf_args.level, cpf_args.particles, opt, cpf_args.seed);
      print_table(out.times, out.functionals,
                  {{"fine_", &out.estimates}, {"coarse_", &out.coarse_estimates}, {"diff_", &out.differences}});
      std::cerr << "same_ancestor " << mlpf::format_double(out.diagnostics.final_same_ancestor_fraction)
                << " resamples " << out.diagnostics.resample_count() << " cost " << out.cost_units << '\n';
    } else if (*ml) {
      const auto model = ml_model.build();
      const auto path = mlpf::read_path(ml_args.data);
      auto opt = ml_args.options();
      opt.coupling = mlpf::parse_coupling_kind(ml_coupling);
      const auto alloc = mlpf::allocate(mlpf::parse_allocation_rule(ml_rule), ml_args.level, ml_base,
                                        model.has_constant_diffusion);
      if (!alloc.warning.empty()) std::cerr << "warning: " << alloc.warning << '\n';
      const auto out = mlpf::mlpf_run(model, path, alloc, opt, ml_args.seed);
      print_table(out.times, out.functionals, {{"", &out.combined}});
      std::cerr << "counts";
      for (auto n : alloc.counts) std::cerr << ' ' << n;
      std::cerr << " cost " << out.cost_units << '\n';
    } else if (*bench) {
      auto config = mlpf::load_config(bench_config);
      if (!bench_out.empty()) config.output_dir = bench_out;
      if (bench_workers > 0) config.workers = bench_workers;
      std::filesystem::create_directories(config.output_dir);
      const auto partial_file = std::filesystem::path(config.output_dir) / "records.partial.csv";
      std::ofstream partial(partial_file, std::ios::trunc);
      partial << "estimator,L,repeat,seed,cost_units,wall_seconds,estimate,truth,squared_error\n" << std::flush;
      const auto result = mlpf::run_benchmark(config, [&](const mlpf::BenchmarkRecord& r) {
        partial << mlpf::csv_record_line(r) << std::flush;
        std::cerr << r.estimator << " L=" << r.level << " repeat=" << r.repeat << " se="
                  << mlpf::format_double(r.squared_error) << '\n';
      });
      mlpf::emit_outputs(result, config.output_dir, config.formats);
      partial.close();
      std::filesystem::remove(partial_file);
      std::cout << mlpf::summary_csv(result.summary);
      for (const auto& [id, fit] : mlpf::fit_slopes(result.summary)) {
        std::cout << "slope " << id << ' ' << mlpf::format_double(fit.slope) << " r2 "
                  << mlpf::format_double(fit.r_squared) << '\n';
      }
    } else if (*slope) {
      const auto rows = mlpf::parse_summary_csv(read_text(slope_file));
      std::cout << "estimator,slope,intercept,r_squared\n";
      for (const auto& [id, fit] : mlpf::fit_slopes(rows)) {
        std::cout << id << ',' << mlpf::format_double(fit.slope) << ',' << mlpf::format_double(fit.intercept) << ','
                  << mlpf::format_double(fit.r_squared) << '\n';
      }
    } else if (*truth) {
      const auto model = truth_model.build();
      const auto path = mlpf::read_path(truth_data);
      mlpf::FilterOptions opt;
      opt.functionals.clear();
      for (const auto& f : truth_functionals) opt.functionals.push_back(mlpf::functional_by_name(f));
      const int level = truth_level < 0 ? path.finest_level() : truth_level;
      const auto ref = mlpf::reference_truth(model, path, level, truth_N, opt, truth_seed, truth_reps);
      print_table(ref.times, ref.functionals, {{"", &ref.values}, {"se_", &ref.standard_errors}});
    }
  } catch (const mlpf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
