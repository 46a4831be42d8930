#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fosr/solver.hpp"

namespace fosr {

struct TuneGrid {
  std::vector<double> lambda_grid;
  std::vector<double> nu_grid;
  std::vector<double> rho_grid;
  int cycles = 3;

  /// Throws InputError unless every grid is nonempty, positive and ascending.
  void validate() const;

  /// lambda: 25 log-spaced points on [1e-8, 1e2]; nu in {3/2, 5/2, 7/2, 11/2};
  /// rho in {1/4, 1/2, 1, 2}; 3 cycles.
  static TuneGrid defaults();
};

/// n log-spaced points from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, int n);

/// Generalized cross-validation score of the weighted penalized fit.
double gcv_score(const Dataset& data, std::shared_ptr<const MercerBasis> basis, const Eigen::VectorXd& lambda);

/// One coordinate update of the cyclic tuner. Cycle 0 is the starting point.
struct TraceRow {
  int cycle = 0;
  int predictor = 0;  // 1-based; 0 on the starting row
  double lambda = 0.0;
  double gcv = 0.0;
  double dof = 0.0;
};

struct LambdaTuning {
  Eigen::VectorXd lambda;
  double gcv = 0.0;
  double dof = 0.0;
  double initial_gcv = 0.0;
  std::vector<TraceRow> trace;
};

/// Coordinate descent over the lambda grid: starts every lambda_p at the grid
/// median, then for each cycle and predictor takes the grid value minimizing
/// GCV with the others fixed. A coordinate only moves on strict improvement;
/// stops after `cycles` passes or a pass without change.
LambdaTuning tune_lambda_cyclic(const PenalizedProblem& problem, const TuneGrid& grid);

struct CandidateResult {
  KernelSpec spec;
  std::shared_ptr<const MercerBasis> basis;
  std::optional<LambdaTuning> tuning;
  std::string error;  // set when the candidate failed numerically
};

struct KernelTuning {
  KernelSpec spec;
  Eigen::VectorXd lambda;
  double gcv = 0.0;
  std::shared_ptr<const FittedModel> model;
  std::vector<CandidateResult> candidates;
};

/// Supplies the basis for a kernel spec; lets callers cache bases across datasets.
using BasisProvider = std::function<std::shared_ptr<const MercerBasis>(const KernelSpec&)>;

/// Grid search over (nu, rho) Matern kernels with cyclic lambda tuning for each.
/// Minimal GCV wins; ties go to smaller nu, then rho, then sum of lambda.
/// Throws NumericalError listing every candidate's failure when none succeeds.
KernelTuning tune_kernel(const Dataset& data, const TuneGrid& grid, const BasisProvider& provider,
                         int workers = 1);
KernelTuning tune_kernel(const Dataset& data, const TuneGrid& grid, const Domain& domain, int quad_size,
                         int k0, int workers = 1);

}  // namespace fosr
