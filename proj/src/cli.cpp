#include "fosr/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <set>

#include "fosr/error.hpp"
#include "fosr/parallel.hpp"
#include "fosr/simulate.hpp"
#include "fosr/tuning.hpp"

namespace fosr {
namespace {

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::set<std::string> kKernel{"domain", "kernel", "nu", "rho", "r", "quad_size", "k0"};
  static const std::map<std::string, std::set<std::string>> kKeys = [] {
    std::map<std::string, std::set<std::string>> keys;
    auto with = [](std::set<std::string> base, std::initializer_list<std::string> extra) {
      base.insert(extra);
      return base;
    };
    keys["fit"] = with(kKernel, {"observations", "covariates", "lambda"});
    keys["tune"] = with(kKernel, {"observations", "covariates", "lambda_grid", "nu_grid", "rho_grid", "cycles", "threads"});
    keys["simulate"] = {"setting", "full_grid", "n_grid", "m_grid", "reps", "delta_var", "eps_variance", "seed",
                        "tuning", "lambda", "lambda_grid", "nu_grid", "rho_grid", "cycles", "estimation_nu",
                        "estimation_rho", "estimation_k0", "estimation_quad_size", "truth_quad_size", "truth_tail",
                        "threads"};
    keys["rates"] = {"error_table", "h", "collapse_count"};
    keys["spectra"] = with(kKernel, {"source", "count"});
    keys["predict"] = {"model", "covariates", "probes"};
    return keys;
  }();
  return kKeys;
}

void check_keys(const std::string& command, const Config& config) {
  const auto& keys = allowed_keys().at(command);
  for (const auto& [key, value] : config.values()) {
    if (keys.count(key) == 0) throw InputError("config key '" + key + "' is not used by '" + command + "'");
  }
}

std::string cell(double v) { return format_double(v); }

std::string clean_cell(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return text;
}

Domain config_domain(const Config& config) { return Domain::parse(config.get_or("domain", "interval")); }

KernelSpec config_kernel(const Config& config, const Domain& domain) {
  const KernelFamily family = parse_family(config.get_or("kernel", "matern"));
  KernelSpec spec = family == KernelFamily::kMatern
                        ? KernelSpec::matern(config.get_double_or("nu", 1.5), config.get_double_or("rho", 1.0), domain)
                        : KernelSpec::sobolev(config.get_double_or("r", 2.0), domain);
  spec.validate();
  return spec;
}

struct BasisConfig {
  int quad_size = 0;
  int k0 = 0;
};

BasisConfig config_basis(const Config& config, const Domain& domain) {
  BasisConfig b;
  b.quad_size = config.get_int_or("quad_size", default_quadrature_size(domain));
  b.k0 = config.get_int_or("k0", 30);
  if (b.quad_size < 2) throw InputError("quad_size must be at least 2");
  if (b.k0 < 1) throw InputError("k0 must be positive");
  return b;
}

Dataset config_dataset(const Config& config, const Domain& domain, std::ostream& log) {
  ObservationCounts counts;
  Dataset data = load_observations(config.get_path("observations"), domain, &counts);
  load_covariates(config.get_path("covariates"), data);
  log << "loaded " << counts.subjects << " subjects, " << counts.observations << " observations, " << counts.outputs
      << " outputs, " << data.predictors() << " predictors\n";
  const DiagnosticsReport diag = diagnostics(data);
  if (diag.ill_conditioned) log << "warning: covariate second-moment matrix is ill-conditioned\n";
  if (diag.unbalanced) log << "warning: sampling is highly unbalanced across subjects\n";
  return data;
}

std::vector<double> config_lambda_values(const Config& config) {
  std::vector<double> values = config.get_list("lambda");
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("lambda values must be positive and finite");
  }
  return values;
}

Eigen::VectorXd config_lambda(const Config& config, int predictors) {
  const std::vector<double> values = config_lambda_values(config);
  if (values.size() == 1) return Eigen::VectorXd::Constant(predictors, values[0]);
  if (static_cast<int>(values.size()) != predictors) {
    throw InputError("lambda needs 1 or " + std::to_string(predictors) + " values");
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), predictors);
}

TuneGrid config_grid(const Config& config) {
  TuneGrid grid = TuneGrid::defaults();
  if (config.has("lambda_grid")) grid.lambda_grid = config.get_list("lambda_grid");
  if (config.has("nu_grid")) grid.nu_grid = config.get_list("nu_grid");
  if (config.has("rho_grid")) grid.rho_grid = config.get_list("rho_grid");
  grid.cycles = config.get_int_or("cycles", grid.cycles);
  grid.validate();
  return grid;
}

int config_threads(const Config& config) {
  const int threads = config.get_int_or("threads", worker_count());
  if (threads < 1) throw InputError("threads must be positive");
  return threads;
}

CsvTable coefficient_table(const FittedModel& model) {
  CsvTable t{{"output", "predictor", "k", "coefficient"}, {}};
  for (int l = 0; l < model.outputs(); ++l) {
    const Eigen::MatrixXd& b = model.coefficients()[static_cast<std::size_t>(l)];
    for (Eigen::Index p = 0; p < b.rows(); ++p)
      for (Eigen::Index k = 0; k < b.cols(); ++k)
        t.rows.push_back({std::to_string(l + 1), std::to_string(p + 1), std::to_string(k + 1), cell(b(p, k))});
  }
  return t;
}

// Probe abscissa for plots: the coordinate on the interval, the index elsewhere.
std::string probe_x(const Domain& domain, const Point& u, std::size_t index) {
  return domain.kind == DomainKind::kInterval ? cell(u[0]) : std::to_string(index + 1);
}

CsvTable beta_plot(const FittedModel& model) {
  const Quadrature& quad = model.basis().quadrature();
  CsvTable t{{"x", "y", "series"}, {}};
  for (int l = 0; l < model.outputs(); ++l) {
    const Eigen::MatrixXd values = model.beta(l, quad.nodes);
    for (Eigen::Index p = 0; p < values.cols(); ++p) {
      const std::string series = "beta_" + std::to_string(l + 1) + "_" + std::to_string(p + 1);
      for (std::size_t i = 0; i < quad.nodes.size(); ++i)
        t.rows.push_back({probe_x(quad.domain, quad.nodes[i], i), cell(values(static_cast<Eigen::Index>(i), p)), series});
    }
  }
  return t;
}

void add_model_outputs(std::vector<OutputFile>& out, const FittedModel& model, std::ostream& log) {
  if (model.diagnostics().rank_deficient) log << "warning: k0 exceeds the number of observations\n";
  out.push_back({"model.txt", serialize_model(model)});
  out.push_back({"coefficients.csv", to_csv(coefficient_table(model))});
  out.push_back({"plot_beta.csv", to_csv(beta_plot(model))});
}

std::vector<OutputFile> cmd_fit(const Config& config, std::ostream& log) {
  const Domain domain = config_domain(config);
  const KernelSpec spec = config_kernel(config, domain);
  const BasisConfig bc = config_basis(config, domain);
  (void)config_lambda_values(config);
  const Dataset data = config_dataset(config, domain, log);
  const Eigen::VectorXd lambda = config_lambda(config, data.predictors());
  auto basis = std::make_shared<const MercerBasis>(build_basis(spec, build_quadrature(domain, bc.quad_size), bc.k0));
  if (basis->truncated()) log << "note: basis holds " << basis->k0() << " of " << bc.k0 << " requested eigenpairs\n";
  const FittedModel model = fit(data, basis, lambda);
  log << "fit: gcv " << model.diagnostics().gcv << ", dof " << model.diagnostics().dof << "\n";
  std::vector<OutputFile> out;
  add_model_outputs(out, model, log);
  return out;
}

CsvTable trace_table(const LambdaTuning& tuning) {
  CsvTable t{{"cycle", "predictor", "lambda", "gcv", "dof"}, {}};
  for (const auto& row : tuning.trace) {
    t.rows.push_back({std::to_string(row.cycle), std::to_string(row.predictor), cell(row.lambda), cell(row.gcv), cell(row.dof)});
  }
  return t;
}

CsvTable trace_plot(const LambdaTuning& tuning) {
  CsvTable t{{"x", "y", "series"}, {}};
  for (std::size_t i = 0; i < tuning.trace.size(); ++i) t.rows.push_back({std::to_string(i), cell(tuning.trace[i].gcv), "gcv"});
  return t;
}

std::vector<OutputFile> cmd_tune(const Config& config, std::ostream& log) {
  const Domain domain = config_domain(config);
  const KernelSpec base = config_kernel(config, domain);
  const BasisConfig bc = config_basis(config, domain);
  const TuneGrid grid = config_grid(config);
  const int threads = config_threads(config);
  const Dataset data = config_dataset(config, domain, log);
  std::vector<OutputFile> out;
  if (base.family == KernelFamily::kSobolevSpectral) {
    auto basis = std::make_shared<const MercerBasis>(build_basis(base, build_quadrature(domain, bc.quad_size), bc.k0));
    const PenalizedProblem problem(data, basis);
    const LambdaTuning tuning = tune_lambda_cyclic(problem, grid);
    if (!std::isfinite(tuning.gcv)) throw NumericalError("no finite GCV score on the lambda grid");
    log << "tune: gcv " << tuning.gcv << "\n";
    add_model_outputs(out, problem.fit(tuning.lambda), log);
    out.push_back({"trace.csv", to_csv(trace_table(tuning))});
    out.push_back({"plot_gcv.csv", to_csv(trace_plot(tuning))});
    return out;
  }
  const KernelTuning result = tune_kernel(data, grid, domain, bc.quad_size, bc.k0, threads);
  log << "tune: nu " << result.spec.smoothness << ", rho " << result.spec.range << ", gcv " << result.gcv << "\n";
  CsvTable candidates{{"nu", "rho", "gcv", "status"}, {}};
  const LambdaTuning* chosen = nullptr;
  for (const auto& c : result.candidates) {
    candidates.rows.push_back({cell(c.spec.smoothness), cell(c.spec.range), c.tuning ? cell(c.tuning->gcv) : "nan",
                               c.tuning ? "ok" : clean_cell(c.error)});
    if (c.tuning && c.spec == result.spec) chosen = &*c.tuning;
  }
  add_model_outputs(out, *result.model, log);
  out.push_back({"trace.csv", to_csv(trace_table(*chosen))});
  out.push_back({"candidates.csv", to_csv(candidates)});
  out.push_back({"plot_gcv.csv", to_csv(trace_plot(*chosen))});
  return out;
}

SimSetting config_setting(const Config& config) {
  SimSetting s = SimSetting::preset(config.get_int_or("setting", 1));
  if (config.get_bool_or("full_grid", false)) s.use_full_grid();
  if (config.has("n_grid")) s.n_grid = config.get_int_list("n_grid");
  if (config.has("m_grid")) s.m_grid = config.get_int_list("m_grid");
  s.reps = config.get_int_or("reps", s.reps);
  s.delta_var = config.get_double_or("delta_var", s.delta_var);
  const std::string eps = config.get_or("eps_variance", "squared");
  if (eps != "squared" && eps != "linear") throw InputError("eps_variance must be 'squared' or 'linear'");
  s.eps_variance_squared = eps == "squared";
  if (config.has("seed")) {
    const long long seed = parse_int(config.get("seed"));
    s.seed = static_cast<std::uint64_t>(seed);
  }
  s.tuning = parse_tuning_mode(config.get_or("tuning", "full"));
  s.grid = config_grid(config);
  s.fixed_lambda = config.get_double_or("lambda", s.fixed_lambda);
  s.estimation_kernel = KernelSpec::matern(config.get_double_or("estimation_nu", s.estimation_kernel.smoothness),
                                           config.get_double_or("estimation_rho", s.estimation_kernel.range), s.domain);
  s.estimation_k0 = config.get_int_or("estimation_k0", s.estimation_k0);
  s.estimation_quad_size = config.get_int_or("estimation_quad_size", s.estimation_quad_size);
  s.truth_quad_size = config.get_int_or("truth_quad_size", s.truth_quad_size);
  s.truth_tail = config.get_int_or("truth_tail", s.truth_tail);
  s.validate();
  return s;
}

CsvTable error_csv(const ErrorTable& table) {
  CsvTable t{{"setting", "n", "m", "rep", "sq_error", "cause"}, {}};
  for (const auto& r : table.rows) {
    t.rows.push_back({std::to_string(r.setting), std::to_string(r.n), std::to_string(r.m), std::to_string(r.rep),
                      cell(r.sq_error), clean_cell(r.cause)});
  }
  return t;
}

ErrorTable parse_error_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::vector<std::string> expected{"setting", "n", "m", "rep", "sq_error", "cause"};
  if (t.header != expected) throw InputError(path.string() + ": expected header setting,n,m,rep,sq_error,cause");
  ErrorTable table;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    try {
      table.rows.push_back({static_cast<int>(parse_int(row[0])), static_cast<int>(parse_int(row[1])),
                            static_cast<int>(parse_int(row[2])), static_cast<int>(parse_int(row[3])),
                            parse_double(row[4]), row[5]});
    } catch (const InputError& e) {
      throw InputError("row " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return table;
}

std::vector<OutputFile> cmd_simulate(const Config& config, std::ostream& log) {
  const SimSetting s = config_setting(config);
  const int threads = config_threads(config);
  log << "simulate: setting " << s.id << ", " << s.n_grid.size() * s.m_grid.size() * static_cast<std::size_t>(s.reps)
      << " replicates, " << threads << " threads\n";
  const ErrorTable table = run_grid(s, threads);
  std::size_t failed = 0;
  for (const auto& r : table.rows) failed += r.cause.empty() ? 0 : 1;
  if (failed) log << "simulate: " << failed << " replicates failed\n";
  CsvTable plot{{"x", "y", "series"}, {}};
  for (const auto& c : cell_means(table)) plot.rows.push_back({std::to_string(c.n), cell(c.mean), "m=" + std::to_string(c.m)});
  return {{"errors.csv", to_csv(error_csv(table))}, {"plot_errors.csv", to_csv(plot)}};
}

std::vector<OutputFile> cmd_rates(const Config& config, std::ostream& log) {
  const double h = config.get_double("h");
  const int collapse_count = config.get_int_or("collapse_count", 3);
  const ErrorTable table = parse_error_csv(config.get_path("error_table"));
  const RateReport r = rate_report(table, h, collapse_count);
  CsvTable rates{{"setting", "series", "points", "slope", "std_error", "theory_nonparametric", "theory_parametric"}, {}};
  CsvTable plot{{"x", "y", "series"}, {}};
  auto add = [&](const SeriesSlope& s, const std::string& name) {
    rates.rows.push_back({std::to_string(s.setting), name, std::to_string(s.n.size()), cell(s.fit.slope),
                          cell(s.fit.std_error), cell(r.nonparametric_exponent), cell(r.parametric_exponent)});
    for (std::size_t i = 0; i < s.n.size(); ++i)
      plot.rows.push_back({std::to_string(s.n[i]), cell(s.mean_error[i]), "setting " + std::to_string(s.setting) + " " + name});
  };
  for (const auto& s : r.slopes) add(s, "m=" + std::to_string(s.m));
  for (const auto& s : r.diagonal) add(s, "m=n");
  CsvTable collapse{{"setting", "n", "m_compared", "relative_spread", "small_m_gap", "collapsed"}, {}};
  for (const auto& c : r.collapse) {
    std::string ms;
    for (int m : c.m) ms += (ms.empty() ? "" : " ") + std::to_string(m);
    collapse.rows.push_back({std::to_string(c.setting), std::to_string(c.n), ms, cell(c.relative_spread),
                             cell(c.small_m_gap), c.collapsed ? "1" : "0"});
  }
  CsvTable transition{{"setting", "estimated_exponent", "theory_exponent"}, {}};
  for (const auto& t : r.transition) {
    transition.rows.push_back({std::to_string(t.setting), cell(t.exponent), cell(r.transition_exponent)});
  }
  log << "rates: " << rates.rows.size() << " series\n";
  return {{"rates.csv", to_csv(rates)},
          {"collapse.csv", to_csv(collapse)},
          {"transition.csv", to_csv(transition)},
          {"plot_rates.csv", to_csv(plot)}};
}

std::vector<OutputFile> cmd_spectra(const Config& config, std::ostream& log) {
  const Domain domain = config_domain(config);
  const std::string source = config.get_or("source", "laplacian");
  const int count = config.get_int_or("count", 10);
  if (count < 1) throw InputError("count must be positive");
  Eigen::VectorXd values;
  std::string column;
  if (source == "laplacian") {
    values = analytic_laplacian_spectrum(domain, count).eigenvalues();
    column = "xi";
  } else if (source == "kernel") {
    const KernelSpec spec = config_kernel(config, domain);
    const BasisConfig bc = config_basis(config, domain);
    const MercerBasis basis = build_basis(spec, build_quadrature(domain, bc.quad_size), count);
    if (basis.truncated()) log << "note: " << basis.k0() << " of " << count << " eigenvalues are above the floor\n";
    values = basis.eigenvalues();
    column = "tau";
  } else {
    throw InputError("source must be 'laplacian' or 'kernel'");
  }
  CsvTable t{{"k", column, "cumulative_trace"}, {}};
  CsvTable plot{{"x", "y", "series"}, {}};
  double total = 0.0;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    total += values[k];
    t.rows.push_back({std::to_string(k + 1), cell(values[k]), cell(total)});
    plot.rows.push_back({std::to_string(k + 1), cell(values[k]), column});
  }
  return {{"spectra.csv", to_csv(t)}, {"plot_spectra.csv", to_csv(plot)}};
}

std::vector<Point> read_probes(const std::filesystem::path& path, const Domain& domain) {
  const CsvTable t = read_csv(path);
  const int dim = domain.ambient_dim();
  if (static_cast<int>(t.header.size()) != dim) throw InputError(path.string() + ": expected coordinate columns only");
  for (int c = 0; c < dim; ++c) {
    if (t.header[static_cast<std::size_t>(c)] != "coord_" + std::to_string(c + 1)) {
      throw InputError(path.string() + " header: expected column 'coord_" + std::to_string(c + 1) + "'");
    }
  }
  std::vector<Point> probes;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    try {
      std::array<double, 3> xyz{};
      for (int c = 0; c < dim; ++c) xyz[static_cast<std::size_t>(c)] = parse_double(t.rows[i][static_cast<std::size_t>(c)]);
      Point u = Point::from_span(xyz.data(), dim);
      validate_point(domain, u);
      probes.push_back(u);
    } catch (const std::exception& e) {
      throw InputError("row " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (probes.empty()) throw InputError(path.string() + ": no probe points");
  return probes;
}

std::vector<OutputFile> cmd_predict(const Config& config, std::ostream& log) {
  const FittedModel model = load_model(config.get_path("model"));
  const auto covariates = read_covariate_rows(config.get_path("covariates"));
  const Domain& domain = model.basis().domain();
  const std::vector<Point> probes =
      config.has("probes") ? read_probes(config.get_path("probes"), domain) : model.basis().quadrature().nodes;
  const int dim = domain.ambient_dim();
  for (const auto& [id, x] : covariates) {
    if (x.size() != model.predictors()) {
      throw InputError("subject '" + id + "' has " + std::to_string(x.size()) + " covariates, model needs " +
                       std::to_string(model.predictors()));
    }
  }
  CsvTable t{{"subject_id", "probe"}, {}};
  for (int c = 0; c < dim; ++c) t.header.push_back("coord_" + std::to_string(c + 1));
  for (int l = 0; l < model.outputs(); ++l) t.header.push_back("y_" + std::to_string(l + 1));
  CsvTable plot{{"x", "y", "series"}, {}};
  std::vector<Eigen::MatrixXd> beta;
  for (int l = 0; l < model.outputs(); ++l) beta.push_back(model.beta(l, probes));
  for (const auto& [id, x] : covariates) {
    for (std::size_t i = 0; i < probes.size(); ++i) {
      std::vector<std::string> row{id, std::to_string(i + 1)};
      for (int c = 0; c < dim; ++c) row.push_back(cell(probes[i][c]));
      for (int l = 0; l < model.outputs(); ++l) {
        const double y = beta[static_cast<std::size_t>(l)].row(static_cast<Eigen::Index>(i)).dot(x);
        row.push_back(cell(y));
        if (l == 0) plot.rows.push_back({probe_x(domain, probes[i], i), cell(y), id});
      }
      t.rows.push_back(std::move(row));
    }
  }
  log << "predict: " << covariates.size() << " subjects at " << probes.size() << " probes\n";
  return {{"predictions.csv", to_csv(t)}, {"plot_predictions.csv", to_csv(plot)}};
}

void write_outputs(const std::filesystem::path& dir, const std::vector<OutputFile>& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string());
  std::vector<std::filesystem::path> written;
  try {
    for (const auto& f : files) {
      write_file_atomic(dir / f.name, f.content);
      written.push_back(dir / f.name);
    }
  } catch (...) {
    for (const auto& p : written) std::filesystem::remove(p, ec);
    throw;
  }
}

}  // namespace

std::vector<OutputFile> run_command(const std::string& command, const Config& config, std::ostream& log) {
  if (allowed_keys().count(command) == 0) throw InputError("unknown command '" + command + "'");
  check_keys(command, config);
  if (command == "fit") return cmd_fit(config, log);
  if (command == "tune") return cmd_tune(config, log);
  if (command == "simulate") return cmd_simulate(config, log);
  if (command == "rates") return cmd_rates(config, log);
  if (command == "spectra") return cmd_spectra(config, log);
  return cmd_predict(config, log);
}

int run_cli(int argc, const char* const* argv, std::ostream& err) {
  CLI::App app{"Function-on-scalar regression in a reproducing kernel Hilbert space"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::optional<long long> seed;
  for (const char* name : {"fit", "tune", "simulate", "rates", "spectra", "predict"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value config file")->required();
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--override", overrides, "key=value, applied after the config file");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    err << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Config config = Config::load(config_path);
    for (const auto& o : overrides) config.apply_override(o);
    if (seed) config.set("seed", std::to_string(*seed));
    const auto files = run_command(command, config, err);
    write_outputs(out_dir, files);
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::domain_error& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace fosr
