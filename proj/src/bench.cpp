#include "mlpf/bench.hpp"

#include "mlpf/oracle.hpp"
#include "mlpf/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mlpf {

namespace {

using nlohmann::json;

/// Typed, path-aware access to one JSON object; every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return object_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!object_.contains(key)) throw ConfigError(field(key), "missing required field");
    return object_.at(key);
  }

  int integer(const std::string& key, std::optional<int> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<int>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError(field(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }

  bool boolean(const std::string& key, std::optional<bool> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    if (!has(key)) return require(key, fallback);
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

 private:
  template <typename T>
  T require(const std::string& key, const std::optional<T>& fallback) {
    seen_.insert(key);
    if (!fallback) throw ConfigError(field(key), "missing required field");
    return *fallback;
  }

  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
auto rethrow_as_config(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(field, e.what());
  }
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

std::string join_counts(const std::vector<std::size_t>& counts) {
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(counts[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& text, const char* what) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw FormatError(std::string("csv: cannot parse ") + what + " from '" + text + "'");
  }
  return value;
}

void write_file(const std::filesystem::path& file, const std::string& content) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + file.string() + "'");
  out << content;
  if (!out) throw Error("failed writing '" + file.string() + "'");
}

}  // namespace

BenchmarkConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  BenchmarkConfig cfg;
  ObjectReader root(doc, "");

  {
    ObjectReader model(root.raw("model"), "model");
    cfg.model_name = model.string("name");
    if (model.has("params")) {
      const json& params = model.raw("params");
      check(params.is_object(), "model.params", "expected an object");
      for (auto it = params.begin(); it != params.end(); ++it) {
        check(it.value().is_number(), "model.params." + it.key(), "expected a number");
        cfg.model_params[it.key()] = it.value().get<double>();
      }
    }
    model.finish();
    rethrow_as_config("model", [&] { return builtin_model(cfg.model_name, cfg.model_params); });
  }

  cfg.horizon = root.integer("T");
  check(cfg.horizon >= 1, "T", "must be >= 1");
  cfg.data_level = root.integer("L_data");
  check(cfg.data_level >= 1 && cfg.data_level <= 24, "L_data", "must be in [1, 24]");
  check((static_cast<long>(cfg.horizon) << cfg.data_level) <= kMaxStoredIncrements, "L_data",
        "T * 2^L_data exceeds the stored-increment limit");

  if (root.has("data")) {
    ObjectReader data(root.raw("data"), "data");
    cfg.data_mode = rethrow_as_config("data.mode", [&] { return parse_generation_mode(data.string("mode", "pbar")); });
    cfg.data_seed = data.unsigned_integer("seed", 1);
    data.finish();
  }

  const json& estimators = root.raw("estimators");
  check(estimators.is_array() && !estimators.empty(), "estimators", "expected a non-empty array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    const std::string path = "estimators[" + std::to_string(i) + "]";
    ObjectReader e(estimators[i], path);
    EstimatorConfig est;
    est.rule = rethrow_as_config(e.field("rule"), [&] { return parse_allocation_rule(e.string("rule")); });
    est.coupling = rethrow_as_config(e.field("coupling"), [&] { return parse_coupling_kind(e.string("coupling", "maximal")); });
    est.min_level = e.integer("L_min");
    est.max_level = e.integer("L_max");
    est.base = e.number("base");
    est.policy = rethrow_as_config(e.field("resample_policy"),
                                   [&] { return parse_resample_policy(e.string("resample_policy", "ess_below_half")); });
    est.trigger_on_both = e.boolean("trigger_on_both", false);
    std::string default_id = to_string(est.rule);
    if (est.coupling != CouplingKind::kMaximal) default_id += std::string("_") + to_string(est.coupling);
    est.id = e.string("id", default_id);
    e.finish();
    check(!est.id.empty() && est.id.find_first_of(",\n\"") == std::string::npos, e.field("id"),
          "must be non-empty without commas, quotes or newlines");
    check(ids.insert(est.id).second, e.field("id"), "duplicate estimator id '" + est.id + "'");
    check(est.min_level >= 0 && est.min_level <= est.max_level, e.field("L_min"), "need 0 <= L_min <= L_max");
    check(est.max_level <= cfg.data_level, e.field("L_max"), "exceeds L_data");
    check(est.base > 0.0 && std::isfinite(est.base), e.field("base"), "must be positive");
    cfg.estimators.push_back(est);
  }

  cfg.functionals = root.strings("functionals", cfg.functionals);
  check(!cfg.functionals.empty(), "functionals", "must not be empty");
  for (std::size_t i = 0; i < cfg.functionals.size(); ++i) {
    rethrow_as_config("functionals[" + std::to_string(i) + "]", [&] { return functional_by_name(cfg.functionals[i]); });
  }
  cfg.repeats = root.integer("repeats", 20);
  check(cfg.repeats >= 2, "repeats", "must be >= 2");
  cfg.master_seed = root.unsigned_integer("master_seed", 1);
  cfg.output_dir = root.string("output_dir", cfg.output_dir);

  if (root.has("truth")) {
    ObjectReader truth(root.raw("truth"), "truth");
    cfg.truth.ref_level = truth.integer("ref_level", -1);
    cfg.truth.ref_particles = truth.unsigned_integer("ref_N", 51200);
    cfg.truth.replicates = truth.integer("replicates", 5);
    truth.finish();
  }
  if (cfg.truth.ref_level < 0) cfg.truth.ref_level = cfg.data_level;
  check(cfg.truth.ref_level <= cfg.data_level, "truth.ref_level", "exceeds L_data");
  check(cfg.truth.ref_particles >= 2, "truth.ref_N", "must be >= 2");
  check(cfg.truth.replicates >= 2, "truth.replicates", "must be >= 2");

  cfg.paths = root.integer("paths", 1);
  check(cfg.paths >= 1, "paths", "must be >= 1");
  cfg.workers = root.integer("workers", 1);
  check(cfg.workers >= 1, "workers", "must be >= 1");
  cfg.record_wall_time = root.boolean("record_wall_time", true);
  cfg.formats = root.strings("formats", cfg.formats);
  for (std::size_t i = 0; i < cfg.formats.size(); ++i) {
    const auto& f = cfg.formats[i];
    check(f == "csv" || f == "json" || f == "svg", "formats[" + std::to_string(i) + "]",
          "unknown format '" + f + "' (expected csv, json or svg)");
  }
  root.finish();

  for (std::size_t i = 0; i < cfg.estimators.size(); ++i) {
    if (cfg.estimators[i].coupling == CouplingKind::kSorted) {
      check(builtin_model(cfg.model_name, cfg.model_params).state_dim == 1,
            "estimators[" + std::to_string(i) + "].coupling", "sorted coupling needs a one-dimensional state");
    }
  }
  return cfg;
}

BenchmarkConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("<file>", "cannot read '" + file.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config,
                              const std::function<void(const BenchmarkRecord&)>& on_record) {
  const ModelSpec model = builtin_model(config.model_name, config.model_params);
  FilterOptions options;
  options.functionals.clear();
  for (const auto& name : config.functionals) options.functionals.push_back(functional_by_name(name));
  options.report_times = {static_cast<double>(config.horizon)};
  options.workers = config.workers;
  const double t_end = config.horizon;
  const std::string& scored = config.functionals.front();

  BenchmarkResult result;
  for (int path_index = 0; path_index < config.paths; ++path_index) {
    const std::uint64_t data_seed =
        path_index == 0 ? config.data_seed : derive_seed(config.data_seed, static_cast<std::uint64_t>(path_index));
    const ObservationPath path =
        simulate_observations(config.data_mode, model, config.horizon, config.data_level, data_seed);
    FilterOptions truth_options = options;
    truth_options.policy = ResamplePolicy::kEssBelowHalf;
    const ReferenceTruth truth =
        reference_truth(model, path, config.truth.ref_level, config.truth.ref_particles, truth_options,
                        derive_seed(config.master_seed, 0x5452555448ULL, static_cast<std::uint64_t>(path_index)),
                        config.truth.replicates);
    const double truth_value = truth.value(t_end, scored);

    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
      const EstimatorConfig& est = config.estimators[e];
      FilterOptions run_options = options;
      run_options.policy = est.policy;
      run_options.coupling = est.coupling;
      run_options.trigger_on_both = est.trigger_on_both;
      for (int level = est.min_level; level <= est.max_level; ++level) {
        const LevelAllocation allocation = allocate(est.rule, level, est.base, model.has_constant_diffusion);
        for (int r = 0; r < config.repeats; ++r) {
          BenchmarkRecord record;
          record.estimator = est.id;
          record.level = level;
          record.repeat = path_index * config.repeats + r;
          record.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(level),
                                    static_cast<std::uint64_t>(path_index), static_cast<std::uint64_t>(r));
          record.counts = allocation.counts;
          const auto start = std::chrono::steady_clock::now();
          const MLPFOutput out = mlpf_run(model, path, allocation, run_options, record.seed);
          const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
          record.wall_seconds = config.record_wall_time ? elapsed.count() : 0.0;
          record.cost_units = out.cost_units;
          record.estimate = out.estimate(t_end, scored);
          record.truth = truth_value;
          const double error = record.estimate - record.truth;
          record.squared_error = error * error;
          if (on_record) on_record(record);
          result.records.push_back(std::move(record));
        }
      }
    }
  }

  std::map<std::string, std::size_t> order;
  for (std::size_t e = 0; e < config.estimators.size(); ++e) order[config.estimators[e].id] = e;
  std::stable_sort(result.records.begin(), result.records.end(), [&](const auto& a, const auto& b) {
    return std::tuple(order[a.estimator], a.level, a.repeat) < std::tuple(order[b.estimator], b.level, b.repeat);
  });
  result.summary = summarize(result.records);
  return result;
}

std::vector<SummaryRow> summarize(std::span<const BenchmarkRecord> records) {
  std::vector<SummaryRow> rows;
  for (const auto& rec : records) {
    if (rows.empty() || rows.back().estimator != rec.estimator || rows.back().level != rec.level) {
      rows.push_back({rec.estimator, rec.level, 0.0, 0.0, 0});
    }
    SummaryRow& row = rows.back();
    row.mean_cost += static_cast<double>(rec.cost_units);
    row.mse += rec.squared_error;
    ++row.n_repeats;
  }
  for (auto& row : rows) {
    row.mean_cost /= row.n_repeats;
    row.mse /= row.n_repeats;
  }
  return rows;
}

SlopeFit fit_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw InvalidArgument("fit_slope: need at least 3 points");
  Eigen::MatrixXd design(static_cast<Eigen::Index>(points.size()), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [cost, mse] = points[i];
    if (!(cost > 0.0) || !(mse > 0.0)) throw InvalidArgument("fit_slope: cost and MSE must be positive");
    const auto row = static_cast<Eigen::Index>(i);
    design(row, 0) = std::log10(mse);
    design(row, 1) = 1.0;
    y(row) = std::log10(cost);
  }
  const Eigen::Vector2d beta = design.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd residual = y - design * beta;
  const double ss_tot = (y.array() - y.mean()).square().sum();
  SlopeFit fit;
  fit.slope = beta(0);
  fit.intercept = beta(1);
  fit.r_squared = ss_tot > 0.0 ? 1.0 - residual.squaredNorm() / ss_tot : 1.0;
  return fit;
}

std::vector<std::pair<std::string, SlopeFit>> fit_slopes(std::span<const SummaryRow> summary) {
  std::vector<std::string> ids;
  std::map<std::string, std::vector<std::pair<double, double>>> points;
  for (const auto& row : summary) {
    if (!points.count(row.estimator)) ids.push_back(row.estimator);
    points[row.estimator].emplace_back(row.mean_cost, row.mse);
  }
  std::vector<std::pair<std::string, SlopeFit>> fits;
  for (const auto& id : ids) {
    if (points[id].size() >= 3) fits.emplace_back(id, fit_slope(points[id]));
  }
  return fits;
}

std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

std::string csv_record_line(const BenchmarkRecord& r) {
  return r.estimator + ',' + std::to_string(r.level) + ',' + std::to_string(r.repeat) + ',' + std::to_string(r.seed) +
         ',' + std::to_string(r.cost_units) + ',' + format_double(r.wall_seconds) + ',' + format_double(r.estimate) +
         ',' + format_double(r.truth) + ',' + format_double(r.squared_error) + '\n';
}

std::string records_csv(std::span<const BenchmarkRecord> records) {
  std::string out = "estimator,L,repeat,seed,cost_units,wall_seconds,estimate,truth,squared_error\n";
  for (const auto& r : records) out += csv_record_line(r);
  return out;
}

std::string summary_csv(std::span<const SummaryRow> summary) {
  std::string out = "estimator,L,mean_cost,mse,n_repeats\n";
  for (const auto& s : summary) {
    out += s.estimator + ',' + std::to_string(s.level) + ',' + format_double(s.mean_cost) + ',' +
           format_double(s.mse) + ',' + std::to_string(s.n_repeats) + '\n';
  }
  return out;
}

std::vector<SummaryRow> parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "estimator,L,mean_cost,mse,n_repeats") {
    throw FormatError("summary csv: unexpected header");
  }
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 5) throw FormatError("summary csv: expected 5 columns in '" + line + "'");
    rows.push_back({cells[0], parse_number<int>(cells[1], "L"), parse_number<double>(cells[2], "mean_cost"),
                    parse_number<double>(cells[3], "mse"), parse_number<int>(cells[4], "n_repeats")});
  }
  return rows;
}

std::vector<BenchmarkRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "estimator,L,repeat,seed,cost_units,wall_seconds,estimate,truth,squared_error") {
    throw FormatError("records csv: unexpected header");
  }
  std::vector<BenchmarkRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != 9) throw FormatError("records csv: expected 9 columns in '" + line + "'");
    BenchmarkRecord r;
    r.estimator = c[0];
    r.level = parse_number<int>(c[1], "L");
    r.repeat = parse_number<int>(c[2], "repeat");
    r.seed = parse_number<std::uint64_t>(c[3], "seed");
    r.cost_units = parse_number<std::uint64_t>(c[4], "cost_units");
    r.wall_seconds = parse_number<double>(c[5], "wall_seconds");
    r.estimate = parse_number<double>(c[6], "estimate");
    r.truth = parse_number<double>(c[7], "truth");
    r.squared_error = parse_number<double>(c[8], "squared_error");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string cost_mse_svg(std::span<const SummaryRow> summary) {
  constexpr double kWidth = 720, kHeight = 520, kLeft = 80, kRight = 200, kTop = 30, kBottom = 60;
  static const char* kColors[] = {"#c9a227", "#000000", "#6cb4ee", "#b2182b", "#1b7837", "#762a83"};

  std::vector<std::string> ids;
  std::map<std::string, std::vector<std::pair<double, double>>> points;  // (log10 mse, log10 cost)
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& row : summary) {
    if (!(row.mse > 0.0) || !(row.mean_cost > 0.0)) continue;
    if (!points.count(row.estimator)) ids.push_back(row.estimator);
    const double x = std::log10(row.mse), y = std::log10(row.mean_cost);
    points[row.estimator].emplace_back(x, y);
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (ids.empty()) {
    xmin = ymin = 0.0;
    xmax = ymax = 1.0;
  }
  xmin = std::floor(xmin);
  xmax = std::ceil(xmax);
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
  auto py = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * plot_h; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double x = xmin; x <= xmax + 1e-9; x += 1.0) {
    svg << "<line x1=\"" << num(px(x)) << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << num(px(x)) << "\" y2=\""
        << kTop + plot_h + 5 << "\" stroke=\"#444\"/>";
    svg << "<text x=\"" << num(px(x)) << "\" y=\"" << kTop + plot_h + 20 << "\" text-anchor=\"middle\">"
        << static_cast<int>(x) << "</text>\n";
  }
  for (double y = ymin; y <= ymax + 1e-9; y += 1.0) {
    svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(py(y)) << "\" x2=\"" << kLeft << "\" y2=\"" << num(py(y))
        << "\" stroke=\"#444\"/>";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">" << static_cast<int>(y)
        << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\">log10 MSE</text>\n";
  svg << "<text transform=\"translate(20," << kTop + plot_h / 2
      << ") rotate(-90)\" text-anchor=\"middle\">log10 cost (Euler steps)</text>\n";

  for (std::size_t k = 0; k < ids.size(); ++k) {
    const std::string& id = ids[k];
    const char* color = kColors[k % (sizeof(kColors) / sizeof(kColors[0]))];
    svg << "<g class=\"estimator\" data-id=\"" << id << "\">\n";
    const auto& pts = points[id];
    std::string slope_label;
    if (pts.size() >= 3) {
      std::vector<std::pair<double, double>> raw;
      for (const auto& [x, y] : pts) raw.emplace_back(std::pow(10.0, y), std::pow(10.0, x));
      const SlopeFit fit = fit_slope(raw);
      double lo = pts.front().first, hi = pts.front().first;
      for (const auto& p : pts) {
        lo = std::min(lo, p.first);
        hi = std::max(hi, p.first);
      }
      svg << "<line class=\"fit\" x1=\"" << num(px(lo)) << "\" y1=\"" << num(py(fit.intercept + fit.slope * lo))
          << "\" x2=\"" << num(px(hi)) << "\" y2=\"" << num(py(fit.intercept + fit.slope * hi)) << "\" stroke=\""
          << color << "\" stroke-width=\"1.5\"/>\n";
      slope_label = " (slope " + num(fit.slope) + ")";
    }
    for (const auto& [x, y] : pts) {
      svg << "<circle class=\"point\" cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"4\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    svg << "<rect x=\"" << kLeft + plot_w + 15 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\""
        << color << "\"/>";
    svg << "<text x=\"" << kLeft + plot_w + 30 << "\" y=\"" << ly + 1 << "\">" << id << slope_label << "</text>\n";
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_outputs(const BenchmarkResult& result, const std::filesystem::path& directory,
                  const std::vector<std::string>& formats) {
  if (result.records.empty()) throw InvalidArgument("emit_outputs: no records to write");
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error("cannot create output directory '" + directory.string() + "': " + ec.message());
  auto wants = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };

  if (wants("csv")) {
    write_file(directory / "records.csv", records_csv(result.records));
    write_file(directory / "summary.csv", summary_csv(result.summary));
  }
  if (wants("json")) {
    json doc;
    doc["records"] = json::array();
    for (const auto& r : result.records) {
      doc["records"].push_back({{"estimator", r.estimator},
                                {"L", r.level},
                                {"repeat", r.repeat},
                                {"seed", r.seed},
                                {"counts", r.counts},
                                {"allocation", join_counts(r.counts)},
                                {"cost_units", r.cost_units},
                                {"wall_seconds", r.wall_seconds},
                                {"estimate", r.estimate},
                                {"truth", r.truth},
                                {"squared_error", r.squared_error}});
    }
    doc["summary"] = json::array();
    for (const auto& s : result.summary) {
      doc["summary"].push_back(
          {{"estimator", s.estimator}, {"L", s.level}, {"mean_cost", s.mean_cost}, {"mse", s.mse}, {"n_repeats", s.n_repeats}});
    }
    doc["slopes"] = json::object();
    for (const auto& [id, fit] : fit_slopes(result.summary)) {
      doc["slopes"][id] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}};
    }
    write_file(directory / "results.json", doc.dump(2) + "\n");
  }
  if (wants("svg")) write_file(directory / "cost_mse.svg", cost_mse_svg(result.summary));
}

}  // namespace mlpf
