#include "fosr/dataset.hpp"

#include <cmath>

#include "fosr/error.hpp"

namespace fosr {

int Dataset::predictors() const {
  return subjects.empty() ? 0 : static_cast<int>(subjects.front().covariates.size());
}

int Dataset::outputs() const {
  return subjects.empty() ? 0 : static_cast<int>(subjects.front().responses.cols());
}

int Dataset::total_observations() const {
  int total = 0;
  for (const auto& s : subjects) total += static_cast<int>(s.locations.size());
  return total;
}

void Dataset::validate() const {
  if (subjects.empty()) throw InputError("dataset has no subjects");
  const int p = predictors();
  const int l = outputs();
  if (p < 1) throw InputError("dataset needs at least one covariate");
  if (l < 1) throw InputError("dataset needs at least one response column");
  for (const auto& s : subjects) {
    const std::string who = "subject '" + s.id + "': ";
    if (s.covariates.size() != p) throw InputError(who + "covariate count differs");
    if (!s.covariates.allFinite()) throw InputError(who + "non-finite covariate");
    if (s.locations.empty()) throw InputError(who + "no observations");
    if (s.responses.rows() != static_cast<Eigen::Index>(s.locations.size()) || s.responses.cols() != l) {
      throw InputError(who + "response rows do not match locations");
    }
    if (!s.responses.allFinite()) throw InputError(who + "non-finite response");
    for (const auto& u : s.locations) validate_point(domain, u);
  }
}

DiagnosticsReport diagnostics(const Dataset& data) {
  DiagnosticsReport report;
  const int p = data.predictors();
  report.sigma_x = Eigen::MatrixXd::Zero(p, p);
  double inverse_sum = 0.0;
  double sum = 0.0;
  for (const auto& s : data.subjects) {
    report.sigma_x += s.covariates * s.covariates.transpose();
    report.max_abs_covariate = std::max(report.max_abs_covariate, s.covariates.cwiseAbs().maxCoeff());
    const double m = static_cast<double>(s.locations.size());
    sum += m;
    inverse_sum += 1.0 / m;
  }
  const double n = data.n();
  report.sigma_x /= n;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(report.sigma_x, Eigen::EigenvaluesOnly);
  report.sigma_min = solver.eigenvalues().minCoeff();
  report.sigma_max = solver.eigenvalues().maxCoeff();
  report.arithmetic_mean_m = sum / n;
  report.harmonic_mean_m = n / inverse_sum;
  // AM >= HM; for equal m_i the two can differ in the last bit.
  report.harmonic_mean_m = std::min(report.harmonic_mean_m, report.arithmetic_mean_m);
  report.ill_conditioned = report.sigma_min < 1e-8;
  report.unbalanced = report.arithmetic_mean_m / report.harmonic_mean_m > 10.0;
  return report;
}

}  // namespace fosr
