#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "fosr/dataset.hpp"
#include "fosr/spectra.hpp"

namespace fosr {

/// Truncated-basis design. Row (i, j) is V_ij^T kron X_i^T, so column
/// k * P + p multiplies b[p][k] (vec of the P x k0 coefficient matrix).
struct Design {
  Eigen::MatrixXd matrix;     // N x (P k0)
  Eigen::VectorXd weights;    // w_ij = 1 / (n m_i)
  Eigen::MatrixXd responses;  // N x L
  int predictors = 0;
  int k0 = 0;
};

Design build_design(const Dataset& data, const MercerBasis& basis);

struct FitDiagnostics {
  double objective = 0.0;
  double gcv = 0.0;
  /// tr(H), the effective degrees of freedom.
  double dof = 0.0;
  /// k0 > N: the penalty alone keeps the system invertible.
  bool rank_deficient = false;
};

/// Estimated coefficient functions beta_lp(u) = sum_k b^(l)[p][k] v_k(u).
class FittedModel {
 public:
  FittedModel(std::shared_ptr<const MercerBasis> basis, std::vector<Eigen::MatrixXd> coefficients,
              Eigen::VectorXd lambda, FitDiagnostics diagnostics = {});

  [[nodiscard]] const MercerBasis& basis() const { return *basis_; }
  [[nodiscard]] std::shared_ptr<const MercerBasis> basis_ptr() const { return basis_; }
  /// coefficients()[l] is P x k0.
  [[nodiscard]] const std::vector<Eigen::MatrixXd>& coefficients() const { return coefficients_; }
  [[nodiscard]] const Eigen::VectorXd& lambda() const { return lambda_; }
  [[nodiscard]] const FitDiagnostics& diagnostics() const { return diagnostics_; }
  [[nodiscard]] int predictors() const { return static_cast<int>(lambda_.size()); }
  [[nodiscard]] int outputs() const { return static_cast<int>(coefficients_.size()); }

  /// beta_lp evaluated at the given points; rows follow points, columns follow p.
  [[nodiscard]] Eigen::MatrixXd beta(int output, std::span<const Point> points) const;
  /// RKHS norm ||beta_lp||_K of the truncated estimate; rows are outputs.
  [[nodiscard]] Eigen::MatrixXd rkhs_norms() const;

 private:
  std::shared_ptr<const MercerBasis> basis_;
  std::vector<Eigen::MatrixXd> coefficients_;
  Eigen::VectorXd lambda_;
  FitDiagnostics diagnostics_;
};

/// Penalized least-squares problem for one dataset and basis. Precomputes the
/// design and the normal matrix so that many penalties can be tried cheaply.
///
/// Internally the unknowns are rescaled to c = b / sqrt(tau_k), which turns the
/// penalty T^-1 kron Lambda into the diagonal I kron Lambda.
class PenalizedProblem {
 public:
  PenalizedProblem(const Dataset& data, std::shared_ptr<const MercerBasis> basis);

  struct Solution {
    Eigen::MatrixXd coefficients;  // (P k0) x L, vec layout
    double dof = 0.0;
    double objective = 0.0;
    double gcv = 0.0;
    Eigen::VectorXd weighted_rss;  // per output
  };

  /// Throws InputError for non-positive penalties, NumericalError when the
  /// factorization fails or tr(I - H) <= 0.
  [[nodiscard]] Solution solve(const Eigen::VectorXd& lambda) const;
  [[nodiscard]] double gcv(const Eigen::VectorXd& lambda) const { return solve(lambda).gcv; }

  [[nodiscard]] FittedModel fit(const Eigen::VectorXd& lambda) const;

  [[nodiscard]] const Design& design() const { return design_; }
  [[nodiscard]] const MercerBasis& basis() const { return *basis_; }
  [[nodiscard]] int predictors() const { return design_.predictors; }
  [[nodiscard]] int observations() const { return static_cast<int>(design_.matrix.rows()); }

 private:
  std::shared_ptr<const MercerBasis> basis_;
  Design design_;
  Eigen::VectorXd scale_;        // sqrt(tau_k) at index k * P + p
  Eigen::MatrixXd scaled_gram_;  // D A^T W A D
  Eigen::MatrixXd scaled_rhs_;   // D A^T W Y
};

/// Closed-form penalized fit with Lambda = diag(lambda).
FittedModel fit(const Dataset& data, std::shared_ptr<const MercerBasis> basis,
                const Eigen::VectorXd& lambda);

/// sum_l [ sum_ij w_ij (Y_ijl - X_i^T b^(l) V_ij)^2 + sum_p lambda_p sum_k b^(l)[p][k]^2 / tau_k ].
double objective(const Dataset& data, const MercerBasis& basis, const Eigen::VectorXd& lambda,
                 const std::vector<Eigen::MatrixXd>& coefficients);

/// Component l is sum_p x[p] beta_lp(u).
Eigen::VectorXd predict(const FittedModel& model, const Eigen::VectorXd& x, const Point& u);

/// Vec-layout column (P k0) from a P x k0 coefficient matrix, and back.
Eigen::VectorXd vectorize(const Eigen::MatrixXd& coefficients);
Eigen::MatrixXd unvectorize(const Eigen::VectorXd& vec, int predictors, int k0);

/// Untruncated estimator for P = 1, L = 1 from the representer theorem:
/// beta(u) = sum_a c_a K(u, u_a) over all observed locations. Reference
/// implementation for small problems only.
class RepresenterOracle {
 public:
  static constexpr int kMaxObservations = 200;

  RepresenterOracle(const Dataset& data, const KernelSpec& spec, double lambda);

  [[nodiscard]] double evaluate(const Point& u) const;
  [[nodiscard]] const Eigen::VectorXd& weights() const { return coef_; }

 private:
  KernelSpec spec_;
  std::vector<Point> locations_;
  Eigen::VectorXd coef_;
};

}  // namespace fosr
