#include "fosr/solver.hpp"

#include <cmath>
#include <string>

#include "fosr/error.hpp"

namespace fosr {

Eigen::VectorXd vectorize(const Eigen::MatrixXd& coefficients) {
  return Eigen::Map<const Eigen::VectorXd>(coefficients.data(), coefficients.size());
}

Eigen::MatrixXd unvectorize(const Eigen::VectorXd& vec, int predictors, int k0) {
  if (vec.size() != static_cast<Eigen::Index>(predictors) * k0) {
    throw InputError("coefficient vector has the wrong length");
  }
  return Eigen::Map<const Eigen::MatrixXd>(vec.data(), predictors, k0);
}

Design build_design(const Dataset& data, const MercerBasis& basis) {
  data.validate();
  if (!(data.domain == basis.domain())) throw InputError("dataset and basis domains differ");
  const int n_obs = data.total_observations();
  const int p = data.predictors();
  const int k0 = basis.k0();

  std::vector<Point> locations;
  locations.reserve(static_cast<std::size_t>(n_obs));
  for (const auto& s : data.subjects) locations.insert(locations.end(), s.locations.begin(), s.locations.end());
  const Eigen::MatrixXd v = basis.evaluate(locations);

  Design design;
  design.predictors = p;
  design.k0 = k0;
  design.matrix.resize(n_obs, static_cast<Eigen::Index>(p) * k0);
  design.weights.resize(n_obs);
  design.responses.resize(n_obs, data.outputs());
  const double n = data.n();
  Eigen::Index row = 0;
  for (const auto& s : data.subjects) {
    const auto m = static_cast<Eigen::Index>(s.locations.size());
    for (Eigen::Index j = 0; j < m; ++j, ++row) {
      for (int k = 0; k < k0; ++k) {
        design.matrix.row(row).segment(static_cast<Eigen::Index>(k) * p, p) =
            v(row, k) * s.covariates.transpose();
      }
      design.weights[row] = 1.0 / (n * static_cast<double>(m));
      design.responses.row(row) = s.responses.row(j);
    }
  }
  return design;
}

FittedModel::FittedModel(std::shared_ptr<const MercerBasis> basis,
                         std::vector<Eigen::MatrixXd> coefficients, Eigen::VectorXd lambda,
                         FitDiagnostics diagnostics)
    : basis_(std::move(basis)),
      coefficients_(std::move(coefficients)),
      lambda_(std::move(lambda)),
      diagnostics_(diagnostics) {
  for (const auto& b : coefficients_) {
    if (b.rows() != lambda_.size() || b.cols() != basis_->k0()) {
      throw InputError("coefficient matrix must be P x k0");
    }
  }
  if ((lambda_.array() <= 0.0).any()) throw InputError("penalties must be positive");
}

Eigen::MatrixXd FittedModel::beta(int output, std::span<const Point> points) const {
  return basis_->evaluate(points) * coefficients_.at(static_cast<std::size_t>(output)).transpose();
}

Eigen::MatrixXd FittedModel::rkhs_norms() const {
  Eigen::MatrixXd norms(outputs(), predictors());
  const Eigen::ArrayXd inv_tau = basis_->eigenvalues().cwiseInverse().array();
  for (int l = 0; l < outputs(); ++l) {
    for (int p = 0; p < predictors(); ++p) {
      const Eigen::ArrayXd b = coefficients_[static_cast<std::size_t>(l)].row(p).transpose().array();
      norms(l, p) = std::sqrt((b.square() * inv_tau).sum());
    }
  }
  return norms;
}

PenalizedProblem::PenalizedProblem(const Dataset& data, std::shared_ptr<const MercerBasis> basis)
    : basis_(std::move(basis)), design_(build_design(data, *basis_)) {
  const int p = design_.predictors;
  const int k0 = design_.k0;
  scale_.resize(static_cast<Eigen::Index>(p) * k0);
  for (int k = 0; k < k0; ++k) {
    scale_.segment(static_cast<Eigen::Index>(k) * p, p).setConstant(std::sqrt(basis_->eigenvalues()[k]));
  }
  const Eigen::MatrixXd scaled = design_.matrix * scale_.asDiagonal();
  const Eigen::MatrixXd weighted = design_.weights.asDiagonal() * scaled;
  scaled_gram_ = Eigen::MatrixXd(scaled.cols(), scaled.cols());
  scaled_gram_.noalias() = scaled.transpose() * weighted;
  scaled_rhs_ = weighted.transpose() * design_.responses;
}

PenalizedProblem::Solution PenalizedProblem::solve(const Eigen::VectorXd& lambda) const {
  const int p = design_.predictors;
  if (lambda.size() != p) throw InputError("penalty vector must have one entry per predictor");
  if ((lambda.array() <= 0.0).any() || !lambda.allFinite()) throw InputError("penalties must be positive");

  Eigen::MatrixXd system = scaled_gram_;
  for (Eigen::Index i = 0; i < system.rows(); ++i) system(i, i) += lambda[i % p];
  const Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
    throw NumericalError("penalized normal matrix factorization failed (reciprocal condition " +
                         std::to_string(ldlt.rcond()) + ")");
  }

  Solution out;
  const Eigen::MatrixXd scaled_coef = llt.solve(scaled_rhs_);
  out.coefficients = scale_.asDiagonal() * scaled_coef;
  out.dof = llt.solve(scaled_gram_).trace();

  const Eigen::MatrixXd residual = design_.responses - design_.matrix * out.coefficients;
  out.weighted_rss = (design_.weights.asDiagonal() * residual.cwiseAbs2()).colwise().sum().transpose();
  double penalty = 0.0;
  for (Eigen::Index i = 0; i < scaled_coef.rows(); ++i) {
    penalty += lambda[i % p] * scaled_coef.row(i).squaredNorm();
  }
  out.objective = out.weighted_rss.sum() + penalty;

  const double n_obs = static_cast<double>(observations());
  const double denominator = (n_obs - out.dof) / n_obs;
  if (!(denominator > 0.0)) throw NumericalError("GCV denominator tr(I - H) is not positive");
  out.gcv = (out.weighted_rss.array() / n_obs).mean() / (denominator * denominator);
  return out;
}

FittedModel PenalizedProblem::fit(const Eigen::VectorXd& lambda) const {
  const Solution solution = solve(lambda);
  std::vector<Eigen::MatrixXd> coefficients;
  for (Eigen::Index l = 0; l < solution.coefficients.cols(); ++l) {
    coefficients.push_back(unvectorize(solution.coefficients.col(l), design_.predictors, design_.k0));
  }
  FitDiagnostics diag;
  diag.objective = solution.objective;
  diag.gcv = solution.gcv;
  diag.dof = solution.dof;
  diag.rank_deficient = design_.k0 > observations();
  return FittedModel(basis_, std::move(coefficients), lambda, diag);
}

FittedModel fit(const Dataset& data, std::shared_ptr<const MercerBasis> basis,
                const Eigen::VectorXd& lambda) {
  return PenalizedProblem(data, std::move(basis)).fit(lambda);
}

double objective(const Dataset& data, const MercerBasis& basis, const Eigen::VectorXd& lambda,
                 const std::vector<Eigen::MatrixXd>& coefficients) {
  const Design design = build_design(data, basis);
  if (static_cast<int>(coefficients.size()) != data.outputs()) {
    throw InputError("need one coefficient matrix per output");
  }
  const Eigen::ArrayXd inv_tau = basis.eigenvalues().cwiseInverse().array();
  double total = 0.0;
  for (int l = 0; l < data.outputs(); ++l) {
    const Eigen::MatrixXd& b = coefficients[static_cast<std::size_t>(l)];
    const Eigen::VectorXd residual = design.responses.col(l) - design.matrix * vectorize(b);
    total += (design.weights.array() * residual.array().square()).sum();
    for (int p = 0; p < b.rows(); ++p) {
      total += lambda[p] * (b.row(p).transpose().array().square() * inv_tau).sum();
    }
  }
  return total;
}

Eigen::VectorXd predict(const FittedModel& model, const Eigen::VectorXd& x, const Point& u) {
  if (x.size() != model.predictors()) throw InputError("covariate vector has the wrong length");
  const Eigen::VectorXd v = model.basis().evaluate(u);
  Eigen::VectorXd out(model.outputs());
  for (int l = 0; l < model.outputs(); ++l) {
    out[l] = x.dot(model.coefficients()[static_cast<std::size_t>(l)] * v);
  }
  return out;
}

RepresenterOracle::RepresenterOracle(const Dataset& data, const KernelSpec& spec, double lambda)
    : spec_(spec) {
  data.validate();
  if (data.predictors() != 1 || data.outputs() != 1) {
    throw InputError("representer oracle supports P = 1 and L = 1 only");
  }
  if (data.total_observations() > kMaxObservations) {
    throw InputError("representer oracle is limited to " + std::to_string(kMaxObservations) +
                     " observations");
  }
  if (!(lambda > 0.0)) throw InputError("penalty must be positive");

  // Minimizing sum_a w_a (Y_a - X_a (K c)_a)^2 + lambda c^T K c gives
  // K [(D W D K + lambda I) c - D W Y] = 0 with D = diag(X_a).
  std::vector<double> x;
  std::vector<double> w;
  std::vector<double> y;
  const double n = data.n();
  for (const auto& s : data.subjects) {
    const double m = static_cast<double>(s.locations.size());
    for (std::size_t j = 0; j < s.locations.size(); ++j) {
      locations_.push_back(s.locations[j]);
      x.push_back(s.covariates[0]);
      w.push_back(1.0 / (n * m));
      y.push_back(s.responses(static_cast<Eigen::Index>(j), 0));
    }
  }
  const auto count = static_cast<Eigen::Index>(locations_.size());
  const Eigen::MatrixXd gram = gram_matrix(spec_, locations_);
  const Eigen::VectorXd dw = Eigen::Map<Eigen::VectorXd>(x.data(), count).cwiseProduct(
      Eigen::Map<Eigen::VectorXd>(w.data(), count));
  Eigen::MatrixXd system =
      (dw.cwiseProduct(Eigen::Map<Eigen::VectorXd>(x.data(), count))).asDiagonal() * gram;
  system.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = dw.cwiseProduct(Eigen::Map<Eigen::VectorXd>(y.data(), count));
  coef_ = system.fullPivLu().solve(rhs);
}

double RepresenterOracle::evaluate(const Point& u) const {
  double value = 0.0;
  for (std::size_t a = 0; a < locations_.size(); ++a) {
    value += coef_[static_cast<Eigen::Index>(a)] * kernel_eval(spec_, u, locations_[a]);
  }
  return value;
}

}  // namespace fosr
