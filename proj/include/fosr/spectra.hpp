#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fosr/kernels.hpp"
#include "fosr/quadrature.hpp"

namespace fosr {

/// Laplace-Beltrami mode label. Interval: (k); torus: (k1, k2, trig) with
/// trig 0 = cos, 1 = sin; sphere: (l, m).
struct LaplacianMode {
  int a = 0;
  int b = 0;
  int trig = 0;
};

/// Closed-form Laplace-Beltrami eigensystem of a canonical manifold, with
/// eigenfunctions orthonormal under the unit-mass measure.
class ManifoldSpectrum {
 public:
  ManifoldSpectrum(Domain domain, Eigen::VectorXd eigenvalues, std::vector<LaplacianMode> modes);

  [[nodiscard]] const Domain& domain() const { return domain_; }
  /// Ascending xi_1 <= xi_2 <= ...
  [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  [[nodiscard]] const std::vector<LaplacianMode>& modes() const { return modes_; }
  [[nodiscard]] int size() const { return static_cast<int>(modes_.size()); }
  /// Number of zero eigenvalues.
  [[nodiscard]] int zero_count() const { return zero_count_; }

  /// First `count` eigenfunctions at u (count <= size()).
  [[nodiscard]] Eigen::VectorXd eigenfunctions(const Point& u, int count) const;

 private:
  Domain domain_;
  Eigen::VectorXd eigenvalues_;
  std::vector<LaplacianMode> modes_;
  int zero_count_ = 0;
  int max_degree_ = 0;
};

/// Interval (Neumann cosines, xi = (pi k)^2), flat torus (xi = (2 pi)^2 |k|^2)
/// or sphere (xi = l(l+1), multiplicity 2l+1). Ties follow lexicographic mode
/// order. Throws InputError for the square or count < 1.
ManifoldSpectrum analytic_laplacian_spectrum(const Domain& domain, int count);

/// Truncated Mercer eigensystem: tau_1 >= ... >= tau_k0 > 0 with eigenfunctions
/// orthonormal under the quadrature measure.
class MercerBasis {
 public:
  /// Nystrom-backed basis; eigenfunctions off the nodes come from the extension formula.
  MercerBasis(Quadrature quadrature, Eigen::VectorXd eigenvalues, Eigen::MatrixXd node_vectors,
              KernelFunction kernel, std::optional<KernelSpec> spec, int requested_k0);
  /// Basis with closed-form eigenfunctions taken from a Laplacian spectrum.
  MercerBasis(Quadrature quadrature, Eigen::VectorXd eigenvalues,
              std::shared_ptr<const ManifoldSpectrum> spectrum, KernelSpec spec);

  [[nodiscard]] int k0() const { return static_cast<int>(eigenvalues_.size()); }
  [[nodiscard]] int requested_k0() const { return requested_k0_; }
  /// True when eigenvalues under the relative floor reduced k0.
  [[nodiscard]] bool truncated() const { return k0() < requested_k0_; }
  [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  /// V[q][k] = v_k(node_q).
  [[nodiscard]] const Eigen::MatrixXd& node_eigenvectors() const { return node_vectors_; }
  [[nodiscard]] const Quadrature& quadrature() const { return quadrature_; }
  [[nodiscard]] const Domain& domain() const { return quadrature_.domain; }
  [[nodiscard]] const std::optional<KernelSpec>& spec() const { return spec_; }
  [[nodiscard]] bool analytic() const { return spectrum_ != nullptr; }

  /// (v_1(u), ..., v_k0(u)).
  [[nodiscard]] Eigen::VectorXd evaluate(const Point& u) const;
  /// Row a holds the eigenfunctions at points[a].
  [[nodiscard]] Eigen::MatrixXd evaluate(std::span<const Point> points) const;

  /// Truncated Mercer sum sum_k tau_k v_k(u) v_k(s).
  [[nodiscard]] double reconstruct_kernel(const Point& u, const Point& s) const;

  /// Copy keeping only the leading `k0` eigenpairs.
  [[nodiscard]] MercerBasis leading(int k0) const;

 private:
  Quadrature quadrature_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd node_vectors_;
  KernelFunction kernel_;
  std::optional<KernelSpec> spec_;
  std::shared_ptr<const ManifoldSpectrum> spectrum_;
  Eigen::MatrixXd extension_;  // W V diag(1/tau)
  int requested_k0_ = 0;
};

/// Relative floor under which Nystrom eigenvalues are dropped.
inline constexpr double kEigenvalueFloor = 1e-12;

/// Weighted Nystrom eigendecomposition of the integral operator of `kernel`
/// under `quad`. Throws NumericalError when the Gram matrix is indefinite
/// beyond 1e-8 relative.
MercerBasis nystrom_decompose(const KernelFunction& kernel, const Quadrature& quad, int k0,
                              std::optional<KernelSpec> spec = std::nullopt);
MercerBasis nystrom_decompose(const KernelSpec& spec, const Quadrature& quad, int k0);

/// v_k(u) via (1/tau_k) sum_q w_q K(u, s_q) V[q][k].
Eigen::VectorXd nystrom_extend(const MercerBasis& basis, const Point& u);

/// Mercer basis of the Sobolev kernel: tau_k = 1 on the null space of the
/// Laplacian and xi_k^(-r) beyond it. Requires 2r > d.
MercerBasis sobolev_kernel_from_spectrum(std::shared_ptr<const ManifoldSpectrum> spectrum,
                                         double r, int count, const Quadrature& quad);
MercerBasis sobolev_kernel_from_spectrum(std::shared_ptr<const ManifoldSpectrum> spectrum,
                                         double r, int count);

/// Builds the basis for any kernel spec: Nystrom for Matern, analytic for spectral.
MercerBasis build_basis(const KernelSpec& spec, const Quadrature& quad, int k0);

struct SlopeFit {
  double slope = 0.0;
  double std_error = 0.0;
};

/// OLS slope of log(values[k-1]) on log(k) for k in [first, last] (1-based, inclusive).
SlopeFit decay_slope(std::span<const double> values, int first, int last);

/// OLS slope of log(y) on log(x).
SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y);

struct TailDiagnostic {
  /// c_k = tau_k max_{u,s} |v_k(u) v_k(s)| over the probe grid.
  Eigen::VectorXd c;
  /// Max over the last quartile of k is below the max over the first quartile.
  bool decaying = false;
};

TailDiagnostic mercer_tail_diagnostic(const MercerBasis& basis, std::span<const Point> probe_grid);

}  // namespace fosr
