#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "fosr/solver.hpp"
#include "fosr/tuning.hpp"

namespace fosr {

enum class TuningMode {
  kFull,    // GCV over (nu, rho) and lambda
  kLambda,  // fixed estimation kernel, GCV over lambda
  kFixed,   // fixed estimation kernel and lambda
};

TuningMode parse_tuning_mode(std::string_view name);
std::string_view tuning_mode_name(TuningMode mode);

/// One simulation scenario: the true coefficient function, the error
/// processes, the (n, m) sweep and how the estimator is tuned.
struct SimSetting {
  int id = 1;
  Domain domain{};
  double nu = 1.5;     // smoothness of the true kernel
  int leading = 7;     // k_s: eigenfunctions with unit coefficient
  double rho = 1.0;
  std::vector<int> n_grid{10, 25, 50, 75, 100};
  std::vector<int> m_grid{5, 10, 25, 50, 75, 100};
  int reps = 100;
  double delta_var = 0.1;
  /// Functional error coefficients get variance tau_k^2 (false: tau_k).
  bool eps_variance_squared = true;
  std::uint64_t seed = 20240101;

  int truth_quad_size = 0;  // 0: domain default
  int truth_tail = 60;      // true beta uses k_s + truth_tail eigenpairs

  TuningMode tuning = TuningMode::kFull;
  TuneGrid grid = TuneGrid::defaults();
  KernelSpec estimation_kernel = KernelSpec::matern(1.5, 1.0);
  double fixed_lambda = 1e-4;
  int estimation_quad_size = 0;  // 0: 128 for d = 1, 16 for d = 2
  int estimation_k0 = 30;

  /// Settings 1-6: d = 1 with (nu, k) in {(3/2,7), (7/2,5), (11/2,3)} and
  /// d = 2 (unit square) with {(11/2,7), (15/2,5), (19/2,3)}; rho = 1.
  static SimSetting preset(int id);
  /// Adds n = 125, 150 and 1000 replicates.
  void use_full_grid();
  void validate() const;
};

/// Coefficients of the true beta over `basis`: 1 for k <= k_s, tau_k after.
Eigen::VectorXd gen_beta(const SimSetting& setting, const MercerBasis& basis);

/// Independent generator for a labelled stream.
std::mt19937_64 derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> labels);

/// Y_ij = X_i beta(u_ij) + eps_i(u_ij) + delta_ij with X_i ~ N(1, 1),
/// eps_i = sum_k eps_ik v_k, eps_ik ~ N(0, tau_k^2), delta_ij ~ N(0, delta_var),
/// u_ij uniform. Subject-level draws come from `subject_rng`, location and
/// measurement-error draws from `obs_rng`.
Dataset gen_dataset(const SimSetting& setting, const MercerBasis& truth, const Eigen::VectorXd& beta, int n,
                    int m, std::mt19937_64& subject_rng, std::mt19937_64& obs_rng);

struct ErrorRow {
  int setting = 0;
  int n = 0;
  int m = 0;
  int rep = 0;
  double sq_error = 0.0;  // NaN when the replicate failed
  std::string cause;      // failure reason, empty on success
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
};

/// Squared L2(mu) distance between beta_hat and beta on the truth quadrature.
double l2_sq_error(const Quadrature& quad, const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth);

/// Sweeps (n, m, rep) for one setting. Deterministic in the seed regardless of
/// worker count; replicate failures become rows with a cause.
ErrorTable run_grid(const SimSetting& setting, int workers = 1);

/// Mean of successful sq_error per (setting, n, m).
struct CellMean {
  int setting = 0;
  int n = 0;
  int m = 0;
  double mean = 0.0;
  int count = 0;
};
std::vector<CellMean> cell_means(const ErrorTable& table);

struct SeriesSlope {
  int setting = 0;
  int m = 0;  // 0 for the m = n diagonal
  std::vector<int> n;
  std::vector<double> mean_error;
  SlopeFit fit;
};

struct CollapseCheck {
  int setting = 0;
  int n = 0;
  std::vector<int> m;          // the largest m values compared
  double relative_spread = 0;  // (max - min) / mean over those m
  double small_m_gap = 0;      // error at the smallest m over the large-m mean, minus 1
  bool collapsed = false;      // spread < 15% and a gap >= 15% to the smallest m
};

struct TransitionEstimate {
  int setting = 0;
  /// Slope of log m* on log n, where m* is the smallest m from which every
  /// larger m has error within 15% of the large-m mean; NaN with fewer than 3 n.
  double exponent = 0.0;
};

struct RateReport {
  double h = 0.0;
  double nonparametric_exponent = 0.0;  // -2h / (2h + 1)
  double parametric_exponent = -1.0;
  double transition_exponent = 0.0;     // m ~ n^(1/(2h))
  std::vector<TransitionEstimate> transition;
  std::vector<SeriesSlope> slopes;
  std::vector<SeriesSlope> diagonal;
  std::vector<CollapseCheck> collapse;
};

inline constexpr double kCollapseTolerance = 0.15;

/// Throws InputError when no (setting, m) has at least 3 distinct n.
RateReport rate_report(const ErrorTable& table, double h, int collapse_count = 3);

}  // namespace fosr
