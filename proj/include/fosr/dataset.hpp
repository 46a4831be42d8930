#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fosr/domain.hpp"

namespace fosr {

/// One subject: scalar covariates X_i and scattered functional observations.
struct Subject {
  std::string id;
  Eigen::VectorXd covariates;      // length P
  std::vector<Point> locations;    // m_i points
  Eigen::MatrixXd responses;       // m_i x L
};

struct Dataset {
  Domain domain{};
  std::vector<Subject> subjects;

  [[nodiscard]] int n() const { return static_cast<int>(subjects.size()); }
  [[nodiscard]] int predictors() const;
  [[nodiscard]] int outputs() const;
  /// N = sum_i m_i.
  [[nodiscard]] int total_observations() const;

  /// Throws InputError unless every subject has m_i >= 1 finite responses,
  /// matching dimensions, valid locations, and P, L >= 1.
  void validate() const;
};

/// Design conditioning and sampling summaries.
struct DiagnosticsReport {
  Eigen::MatrixXd sigma_x;  // n^-1 sum_i X_i X_i^T
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double harmonic_mean_m = 0.0;
  double arithmetic_mean_m = 0.0;
  double max_abs_covariate = 0.0;
  /// sigma_min < 1e-8.
  bool ill_conditioned = false;
  /// arithmetic / harmonic mean of m_i exceeds 10.
  bool unbalanced = false;
};

DiagnosticsReport diagnostics(const Dataset& data);

}  // namespace fosr
