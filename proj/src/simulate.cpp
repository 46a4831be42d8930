#include "fosr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <tuple>

#include "fosr/error.hpp"
#include "fosr/parallel.hpp"

namespace fosr {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Point uniform_point(const Domain& domain, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (domain.kind) {
    case DomainKind::kInterval: return Point{unit(rng)};
    case DomainKind::kSphere: {
      std::normal_distribution<double> normal;
      for (;;) {
        const double x = normal(rng), y = normal(rng), z = normal(rng);
        const double r = std::sqrt(x * x + y * y + z * z);
        if (r > 1e-12) return Point{x / r, y / r, z / r};
      }
    }
    default: {
      const double a = unit(rng);
      return Point{a, unit(rng)};
    }
  }
}

// Estimation basis together with its values at the truth quadrature nodes.
struct Candidate {
  KernelSpec spec;
  std::shared_ptr<const MercerBasis> basis;
  Eigen::MatrixXd at_truth_nodes;
};

}  // namespace

TuningMode parse_tuning_mode(std::string_view name) {
  if (name == "full") return TuningMode::kFull;
  if (name == "lambda") return TuningMode::kLambda;
  if (name == "fixed") return TuningMode::kFixed;
  throw InputError("unknown tuning mode '" + std::string(name) + "'");
}

std::string_view tuning_mode_name(TuningMode mode) {
  switch (mode) {
    case TuningMode::kFull: return "full";
    case TuningMode::kLambda: return "lambda";
    case TuningMode::kFixed: return "fixed";
  }
  return "full";
}

SimSetting SimSetting::preset(int id) {
  static constexpr std::array<std::tuple<double, int>, 6> kSettings{
      {{1.5, 7}, {3.5, 5}, {5.5, 3}, {5.5, 7}, {7.5, 5}, {9.5, 3}}};
  if (id < 1 || id > 6) throw InputError("simulation setting must be 1..6");
  SimSetting s;
  s.id = id;
  s.domain = Domain{id <= 3 ? DomainKind::kInterval : DomainKind::kSquare};
  s.nu = std::get<0>(kSettings[static_cast<std::size_t>(id - 1)]);
  s.leading = std::get<1>(kSettings[static_cast<std::size_t>(id - 1)]);
  s.rho = 1.0;
  s.estimation_kernel.domain = s.domain;
  return s;
}

void SimSetting::use_full_grid() {
  n_grid = {10, 25, 50, 75, 100, 125, 150};
  m_grid = {5, 10, 25, 50, 75, 100};
  reps = 1000;
}

void SimSetting::validate() const {
  if (n_grid.empty() || m_grid.empty()) throw InputError("n and m grids must be nonempty");
  for (int n : n_grid) {
    if (n < 1) throw InputError("n values must be positive");
  }
  for (int m : m_grid) {
    if (m < 1) throw InputError("m values must be positive");
  }
  if (reps < 1) throw InputError("reps must be positive");
  if (leading < 0) throw InputError("leading eigenfunction count must be non-negative");
  if (!(delta_var >= 0.0)) throw InputError("delta_var must be non-negative");
  if (!(nu > 0.0) || !(rho > 0.0)) throw InputError("true kernel parameters must be positive");
  if (truth_tail < 1) throw InputError("truth_tail must be positive");
  if (estimation_k0 < 1) throw InputError("estimation k0 must be positive");
  if (tuning == TuningMode::kFull) {
    grid.validate();
  } else {
    estimation_kernel.validate();
    if (!(estimation_kernel.domain == domain)) throw InputError("estimation kernel domain differs");
    if (tuning == TuningMode::kLambda) grid.validate();
    if (tuning == TuningMode::kFixed && !(fixed_lambda > 0.0 && std::isfinite(fixed_lambda))) throw InputError("lambda must be positive");
  }
}

Eigen::VectorXd gen_beta(const SimSetting& setting, const MercerBasis& basis) {
  if (basis.k0() <= setting.leading) {
    throw InputError("true basis holds " + std::to_string(basis.k0()) + " eigenpairs, needs more than k_s = " +
                     std::to_string(setting.leading));
  }
  Eigen::VectorXd beta = basis.eigenvalues();
  beta.head(setting.leading).setOnes();
  return beta;
}

std::mt19937_64 derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
  std::uint64_t state = splitmix64(seed);
  for (std::uint64_t label : labels) state = splitmix64(state ^ splitmix64(label + 0x632BE59BD9B4E019ULL));
  return std::mt19937_64(state);
}

Dataset gen_dataset(const SimSetting& setting, const MercerBasis& truth, const Eigen::VectorXd& beta, int n,
                    int m, std::mt19937_64& subject_rng, std::mt19937_64& obs_rng) {
  if (n < 1 || m < 1) throw InputError("n and m must be positive");
  std::normal_distribution<double> normal;
  const double delta_sd = std::sqrt(setting.delta_var);
  Eigen::VectorXd eps_sd = truth.eigenvalues();
  if (!setting.eps_variance_squared) eps_sd = eps_sd.cwiseSqrt();

  Dataset data;
  data.domain = setting.domain;
  data.subjects.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Subject s;
    s.id = "s" + std::to_string(i + 1);
    s.covariates = Eigen::VectorXd::Constant(1, 1.0 + normal(subject_rng));
    Eigen::VectorXd eps(truth.k0());
    for (int k = 0; k < truth.k0(); ++k) eps[k] = eps_sd[k] * normal(subject_rng);

    s.locations.reserve(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) s.locations.push_back(uniform_point(setting.domain, obs_rng));
    const Eigen::MatrixXd v = truth.evaluate(s.locations);
    s.responses = v * (s.covariates[0] * beta + eps);
    for (int j = 0; j < m; ++j) s.responses(j, 0) += delta_sd * normal(obs_rng);
    data.subjects.push_back(std::move(s));
  }
  return data;
}

double l2_sq_error(const Quadrature& quad, const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
  return (quad.weights.array() * (estimate - truth).array().square()).sum();
}

ErrorTable run_grid(const SimSetting& setting, int workers) {
  setting.validate();
  const Domain& domain = setting.domain;
  const int truth_size = setting.truth_quad_size > 0 ? setting.truth_quad_size : default_quadrature_size(domain);
  const Quadrature truth_quad = build_quadrature(domain, truth_size);
  const MercerBasis truth = nystrom_decompose(KernelSpec::matern(setting.nu, setting.rho, domain), truth_quad,
                                              std::min(setting.leading + setting.truth_tail, truth_quad.size()));
  const Eigen::VectorXd beta = gen_beta(setting, truth);
  const Eigen::VectorXd beta_at_nodes = truth.node_eigenvectors() * beta;

  const int est_size = setting.estimation_quad_size > 0 ? setting.estimation_quad_size
                                                        : (domain.intrinsic_dim() == 1 ? 128 : 16);
  const Quadrature est_quad = build_quadrature(domain, est_size);
  std::vector<KernelSpec> specs;
  if (setting.tuning == TuningMode::kFull) {
    for (double nu : setting.grid.nu_grid)
      for (double rho : setting.grid.rho_grid) specs.push_back(KernelSpec::matern(nu, rho, domain));
  } else {
    specs.push_back(setting.estimation_kernel);
  }
  std::vector<Candidate> candidates;
  std::string candidate_errors;
  for (const auto& spec : specs) {
    try {
      auto basis = std::make_shared<const MercerBasis>(
          build_basis(spec, est_quad, std::min(setting.estimation_k0, est_quad.size())));
      Eigen::MatrixXd at_nodes = basis->evaluate(truth_quad.nodes);
      candidates.push_back({spec, std::move(basis), std::move(at_nodes)});
    } catch (const NumericalError& e) {
      candidate_errors += std::string(candidate_errors.empty() ? "" : "; ") + e.what();
    }
  }

  const auto find_candidate = [&candidates, &candidate_errors](const KernelSpec& spec) -> const Candidate& {
    for (const auto& c : candidates) {
      if (c.spec == spec) return c;
    }
    throw NumericalError("estimation basis failed: " + candidate_errors);
  };
  const BasisProvider provider = [&find_candidate](const KernelSpec& spec) { return find_candidate(spec).basis; };

  struct Task {
    int n, m, rep;
  };
  std::vector<Task> tasks;
  for (int n : setting.n_grid)
    for (int m : setting.m_grid)
      for (int rep = 0; rep < setting.reps; ++rep) tasks.push_back({n, m, rep});

  ErrorTable table;
  table.rows.resize(tasks.size());

  parallel_for(
      tasks.size(),
      [&](std::size_t index) {
        const Task& task = tasks[index];
        ErrorRow& row = table.rows[index];
        row.setting = setting.id;
        row.n = task.n;
        row.m = task.m;
        row.rep = task.rep;
        try {
          if (candidates.empty()) throw NumericalError("no usable estimation kernel: " + candidate_errors);
          const auto id = static_cast<std::uint64_t>(setting.id);
          auto subject_rng = derive_stream(setting.seed, {id, static_cast<std::uint64_t>(task.n),
                                                          static_cast<std::uint64_t>(task.rep), 1});
          auto obs_rng = derive_stream(setting.seed, {id, static_cast<std::uint64_t>(task.n),
                                                      static_cast<std::uint64_t>(task.m),
                                                      static_cast<std::uint64_t>(task.rep), 2});
          const Dataset data = gen_dataset(setting, truth, beta, task.n, task.m, subject_rng, obs_rng);

          const Candidate* chosen = &candidates.front();
          Eigen::MatrixXd coef;
          if (setting.tuning == TuningMode::kFull) {
            const KernelTuning tuned = tune_kernel(data, setting.grid, provider, 1);
            chosen = &find_candidate(tuned.spec);
            coef = tuned.model->coefficients()[0];
          } else {
            const PenalizedProblem problem(data, chosen->basis);
            Eigen::VectorXd lambda = Eigen::VectorXd::Constant(1, setting.fixed_lambda);
            if (setting.tuning == TuningMode::kLambda) lambda = tune_lambda_cyclic(problem, setting.grid).lambda;
            coef = problem.fit(lambda).coefficients()[0];
          }
          const Eigen::VectorXd estimate = chosen->at_truth_nodes * coef.row(0).transpose();
          row.sq_error = l2_sq_error(truth_quad, estimate, beta_at_nodes);
          if (!std::isfinite(row.sq_error)) throw NumericalError("non-finite estimation error");
        } catch (const std::exception& e) {
          row.sq_error = std::numeric_limits<double>::quiet_NaN();
          row.cause = e.what();
        }
      },
      workers);
  return table;
}

std::vector<CellMean> cell_means(const ErrorTable& table) {
  std::map<std::tuple<int, int, int>, std::pair<double, int>> sums;
  for (const auto& row : table.rows) {
    if (!row.cause.empty() || !std::isfinite(row.sq_error)) continue;
    auto& cell = sums[{row.setting, row.n, row.m}];
    cell.first += row.sq_error;
    cell.second += 1;
  }
  std::vector<CellMean> out;
  for (const auto& [key, value] : sums) {
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), value.first / value.second, value.second});
  }
  return out;
}

RateReport rate_report(const ErrorTable& table, double h, int collapse_count) {
  if (!(h > 0.0)) throw InputError("h must be positive");
  if (collapse_count < 2) throw InputError("collapse comparison needs at least 2 m values");
  RateReport report;
  report.h = h;
  report.nonparametric_exponent = -2.0 * h / (2.0 * h + 1.0);
  report.parametric_exponent = -1.0;
  report.transition_exponent = 1.0 / (2.0 * h);

  const std::vector<CellMean> means = cell_means(table);
  std::map<std::pair<int, int>, std::vector<std::pair<int, double>>> by_m;   // (setting, m) -> (n, mean)
  std::map<std::pair<int, int>, std::vector<std::pair<int, double>>> by_n;   // (setting, n) -> (m, mean)
  std::map<int, std::vector<std::pair<int, double>>> diagonal;               // setting -> (n, mean) with m = n
  for (const auto& c : means) {
    by_m[{c.setting, c.m}].emplace_back(c.n, c.mean);
    by_n[{c.setting, c.n}].emplace_back(c.m, c.mean);
    if (c.m == c.n) diagonal[c.setting].emplace_back(c.n, c.mean);
  }

  auto make_series = [](int setting, int m, const std::vector<std::pair<int, double>>& points)
      -> std::optional<SeriesSlope> {
    if (points.size() < 3) return std::nullopt;
    SeriesSlope series;
    series.setting = setting;
    series.m = m;
    std::vector<double> x;
    for (const auto& [n, mean] : points) {
      if (!(mean > 0.0)) return std::nullopt;
      series.n.push_back(n);
      series.mean_error.push_back(mean);
      x.push_back(n);
    }
    series.fit = loglog_slope(x, series.mean_error);
    return series;
  };
  for (const auto& [key, points] : by_m) {
    if (auto s = make_series(key.first, key.second, points)) report.slopes.push_back(std::move(*s));
  }
  for (const auto& [setting, points] : diagonal) {
    if (auto s = make_series(setting, 0, points)) report.diagonal.push_back(std::move(*s));
  }
  if (report.slopes.empty() && report.diagonal.empty()) {
    throw InputError("rate report needs at least 3 distinct n for some (setting, m)");
  }

  std::map<int, std::pair<std::vector<double>, std::vector<double>>> transition_points;
  for (const auto& [key, points] : by_n) {
    if (static_cast<int>(points.size()) < collapse_count) continue;
    CollapseCheck check;
    check.setting = key.first;
    check.n = key.second;
    const auto first_large = points.end() - collapse_count;
    double lo = INFINITY, hi = -INFINITY, sum = 0.0;
    for (auto it = first_large; it != points.end(); ++it) {
      check.m.push_back(it->first);
      lo = std::min(lo, it->second);
      hi = std::max(hi, it->second);
      sum += it->second;
    }
    const double large_mean = sum / collapse_count;
    check.relative_spread = large_mean > 0.0 ? (hi - lo) / large_mean : 0.0;
    if (first_large != points.begin() && large_mean > 0.0) {
      check.small_m_gap = points.front().second / large_mean - 1.0;
    }
    check.collapsed = check.relative_spread < kCollapseTolerance && check.small_m_gap >= kCollapseTolerance;
    report.collapse.push_back(check);

    if (large_mean > 0.0) {
      // Smallest m from which every larger m stays within tolerance of the large-m mean.
      std::size_t start = points.size();
      while (start > 0 &&
             std::abs(points[start - 1].second - large_mean) <= kCollapseTolerance * large_mean) {
        --start;
      }
      if (start < points.size()) {
        transition_points[key.first].first.push_back(key.second);
        transition_points[key.first].second.push_back(points[start].first);
      }
    }
  }
  for (const auto& [setting, xy] : transition_points) {
    TransitionEstimate estimate{setting, std::numeric_limits<double>::quiet_NaN()};
    if (xy.first.size() >= 3) estimate.exponent = loglog_slope(xy.first, xy.second).slope;
    report.transition.push_back(estimate);
  }
  return report;
}

}  // namespace fosr
