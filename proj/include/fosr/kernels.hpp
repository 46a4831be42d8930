#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string_view>

#include "fosr/domain.hpp"

namespace fosr {

enum class KernelFamily { kMatern, kSobolevSpectral };

std::string_view family_name(KernelFamily family);
KernelFamily parse_family(std::string_view name);

/// Kernel family, hyperparameters and the domain it lives on.
///
/// `smoothness` is nu for Matern and the Sobolev order r for the spectral
/// family; `range` (rho) is used by Matern only.
struct KernelSpec {
  KernelFamily family = KernelFamily::kMatern;
  double smoothness = 1.5;
  double range = 1.0;
  Domain domain{};

  /// Throws InputError on non-positive parameters or 2r <= d.
  void validate() const;

  static KernelSpec matern(double nu, double rho, Domain domain = {});
  static KernelSpec sobolev(double r, Domain domain);

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Symmetric kernel on domain points; Matern specs convert to this, and
/// tests use it for analytic kernels such as min(u, s).
using KernelFunction = std::function<double(const Point&, const Point&)>;

/// Matern correlation at distance t, normalized to 1 at t = 0. Uses the
/// closed form for half-integer nu and the Bessel route otherwise.
double matern_eval(const KernelSpec& spec, double t);

/// Matern correlation always computed through K_nu.
double matern_eval_bessel(double nu, double rho, double t);

/// Matern correlation for half-integer nu = p + 1/2 via the polynomial-times-exponential form.
double matern_eval_half_integer(int p, double rho, double t);

/// K(p, q) for a Matern spec; throws InputError for spectral specs, which
/// are only available through their Mercer basis.
double kernel_eval(const KernelSpec& spec, const Point& p, const Point& q);

KernelFunction make_kernel_function(const KernelSpec& spec);

/// G[a][b] = K(p_a, p_b).
Eigen::MatrixXd gram_matrix(const KernelFunction& kernel, std::span<const Point> points);
Eigen::MatrixXd gram_matrix(const KernelSpec& spec, std::span<const Point> points);

}  // namespace fosr
