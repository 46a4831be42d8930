#include "fosr/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "fosr/error.hpp"
#include "fosr/parallel.hpp"

namespace fosr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_axis(const std::vector<double>& values, const char* name) {
  if (values.empty()) throw InputError(std::string(name) + " is empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw InputError(std::string(name) + " must hold positive values");
    }
    if (i > 0 && !(values[i] > values[i - 1])) {
      throw InputError(std::string(name) + " must be strictly ascending");
    }
  }
}

struct Evaluation {
  double gcv = kInf;
  double dof = 0.0;
};

Evaluation evaluate(const PenalizedProblem& problem, const Eigen::VectorXd& lambda) {
  try {
    const auto solution = problem.solve(lambda);
    return {solution.gcv, solution.dof};
  } catch (const NumericalError&) {
    return {};
  }
}

}  // namespace

void TuneGrid::validate() const {
  validate_axis(lambda_grid, "lambda grid");
  validate_axis(nu_grid, "nu grid");
  validate_axis(rho_grid, "rho grid");
  if (cycles < 1) throw InputError("cycles must be at least 1");
}

std::vector<double> log_space(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw InputError("log_space: bad range");
  std::vector<double> out;
  if (n == 1) return {lo};
  const double step = (std::log10(hi) - std::log10(lo)) / (n - 1);
  for (int i = 0; i < n; ++i) out.push_back(std::pow(10.0, std::log10(lo) + step * i));
  out.front() = lo;
  out.back() = hi;
  return out;
}

TuneGrid TuneGrid::defaults() {
  return TuneGrid{log_space(1e-8, 1e2, 25), {1.5, 2.5, 3.5, 5.5}, {0.25, 0.5, 1.0, 2.0}, 3};
}

double gcv_score(const Dataset& data, std::shared_ptr<const MercerBasis> basis, const Eigen::VectorXd& lambda) {
  return PenalizedProblem(data, std::move(basis)).gcv(lambda);
}

LambdaTuning tune_lambda_cyclic(const PenalizedProblem& problem, const TuneGrid& grid) {
  validate_axis(grid.lambda_grid, "lambda grid");
  if (grid.cycles < 1) throw InputError("cycles must be at least 1");
  const int p = problem.predictors();
  const double median = grid.lambda_grid[(grid.lambda_grid.size() - 1) / 2];

  LambdaTuning out;
  out.lambda = Eigen::VectorXd::Constant(p, median);
  Evaluation current = evaluate(problem, out.lambda);
  out.initial_gcv = current.gcv;
  out.trace.push_back({0, 0, median, current.gcv, current.dof});

  for (int cycle = 1; cycle <= grid.cycles; ++cycle) {
    bool changed = false;
    for (int coord = 0; coord < p; ++coord) {
      Eigen::VectorXd trial = out.lambda;
      double best_value = out.lambda[coord];
      Evaluation best = current;
      for (double candidate : grid.lambda_grid) {
        if (candidate == out.lambda[coord]) continue;
        trial[coord] = candidate;
        const Evaluation e = evaluate(problem, trial);
        if (e.gcv < best.gcv) {
          best = e;
          best_value = candidate;
        }
      }
      if (best_value != out.lambda[coord]) {
        out.lambda[coord] = best_value;
        current = best;
        changed = true;
      }
      out.trace.push_back({cycle, coord + 1, out.lambda[coord], current.gcv, current.dof});
    }
    if (!changed) break;
  }
  out.gcv = current.gcv;
  out.dof = current.dof;
  return out;
}

KernelTuning tune_kernel(const Dataset& data, const TuneGrid& grid, const BasisProvider& provider, int workers) {
  grid.validate();
  data.validate();
  std::vector<KernelSpec> specs;
  for (double nu : grid.nu_grid) {
    for (double rho : grid.rho_grid) specs.push_back(KernelSpec::matern(nu, rho, data.domain));
  }
  std::vector<CandidateResult> results(specs.size());
  parallel_for(
      specs.size(),
      [&](std::size_t i) {
        results[i].spec = specs[i];
        try {
          results[i].basis = provider(specs[i]);
          const PenalizedProblem problem(data, results[i].basis);
          LambdaTuning tuning = tune_lambda_cyclic(problem, grid);
          if (!std::isfinite(tuning.gcv)) throw NumericalError("no finite GCV score on the lambda grid");
          results[i].tuning = std::move(tuning);
        } catch (const NumericalError& e) {
          results[i].error = e.what();
        }
      },
      workers);

  const CandidateResult* best = nullptr;
  for (const auto& r : results) {
    if (!r.tuning) continue;
    if (best == nullptr) {
      best = &r;
      continue;
    }
    const auto key = [](const CandidateResult& c) {
      return std::tuple(c.tuning->gcv, c.spec.smoothness, c.spec.range, c.tuning->lambda.sum());
    };
    if (key(r) < key(*best)) best = &r;
  }
  if (best == nullptr) {
    std::string causes;
    for (const auto& r : results) {
      causes += "\n  nu=" + std::to_string(r.spec.smoothness) + " rho=" + std::to_string(r.spec.range) +
                ": " + r.error;
    }
    throw NumericalError("kernel tuning failed for every candidate:" + causes);
  }

  KernelTuning out;
  out.spec = best->spec;
  out.lambda = best->tuning->lambda;
  out.gcv = best->tuning->gcv;
  out.model = std::make_shared<const FittedModel>(PenalizedProblem(data, best->basis).fit(out.lambda));
  out.candidates = std::move(results);
  return out;
}

KernelTuning tune_kernel(const Dataset& data, const TuneGrid& grid, const Domain& domain, int quad_size, int k0,
                         int workers) {
  if (!(data.domain == domain)) throw InputError("dataset domain differs from the tuning domain");
  const Quadrature quad = build_quadrature(domain, quad_size);
  const BasisProvider provider = [&quad, k0](const KernelSpec& spec) {
    return std::make_shared<const MercerBasis>(nystrom_decompose(spec, quad, std::min(k0, quad.size())));
  };
  return tune_kernel(data, grid, provider, workers);
}

}  // namespace fosr
