#include "fosr/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fosr/bessel.hpp"
#include "fosr/error.hpp"

namespace fosr {
namespace {

// nu = p + 1/2 with p a small non-negative integer, or -1.
int half_integer_order(double nu) {
  const double p = nu - 0.5;
  if (p < 0.0 || p > 20.0) return -1;
  const double rounded = std::round(p);
  return rounded == p ? static_cast<int>(rounded) : -1;
}

}  // namespace

std::string_view family_name(KernelFamily family) {
  return family == KernelFamily::kMatern ? "matern" : "sobolev-spectral";
}

KernelFamily parse_family(std::string_view name) {
  if (name == "matern") return KernelFamily::kMatern;
  if (name == "sobolev-spectral" || name == "sobolev") return KernelFamily::kSobolevSpectral;
  throw InputError("unknown kernel family '" + std::string(name) + "'");
}

void KernelSpec::validate() const {
  if (!(smoothness > 0.0) || !std::isfinite(smoothness)) {
    throw InputError("kernel smoothness must be positive");
  }
  if (family == KernelFamily::kMatern) {
    if (!(range > 0.0) || !std::isfinite(range)) throw InputError("kernel range must be positive");
    return;
  }
  if (smoothness < 1.0) throw InputError("sobolev order r must be at least 1");
  if (!(2.0 * smoothness > domain.intrinsic_dim())) {
    throw InputError("sobolev kernel requires 2r > d");
  }
}

KernelSpec KernelSpec::matern(double nu, double rho, Domain domain) {
  KernelSpec spec{KernelFamily::kMatern, nu, rho, domain};
  spec.validate();
  return spec;
}

KernelSpec KernelSpec::sobolev(double r, Domain domain) {
  KernelSpec spec{KernelFamily::kSobolevSpectral, r, 1.0, domain};
  spec.validate();
  return spec;
}

double matern_eval_half_integer(int p, double rho, double t) {
  if (t < 0.0) throw DomainError("matern: negative distance");
  const double nu = p + 0.5;
  const double s = std::sqrt(2.0 * nu) * t / rho;
  // p!/(2p)! * sum_i (p+i)!/(i!(p-i)!) (2s)^(p-i), evaluated by Horner in 2s.
  double poly = 0.0;
  for (int i = 0; i <= p; ++i) {
    const double coef = std::exp(std::lgamma(p + i + 1.0) - std::lgamma(i + 1.0) -
                                 std::lgamma(p - i + 1.0) + std::lgamma(p + 1.0) -
                                 std::lgamma(2.0 * p + 1.0));
    poly = poly * (2.0 * s) + coef;
  }
  return std::exp(-s) * poly;
}

double matern_eval_bessel(double nu, double rho, double t) {
  if (t < 0.0) throw DomainError("matern: negative distance");
  if (!(nu > 0.0) || !(rho > 0.0)) throw DomainError("matern: nu and rho must be positive");
  if (t == 0.0) return 1.0;
  const double s = std::sqrt(2.0 * nu) * t / rho;
  const BesselKResult k = bessel_k_checked(nu, s);
  // Overflow only happens for s -> 0 with large nu, where the correlation is 1 - O(s^2).
  if (k.saturated) return 1.0;
  if (k.value == 0.0) return 0.0;
  const double log_value = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(s) +
                           std::log(k.value);
  return std::min(1.0, std::exp(log_value));
}

double matern_eval(const KernelSpec& spec, double t) {
  if (spec.family != KernelFamily::kMatern) throw InputError("matern_eval needs a matern spec");
  if (t < 0.0) throw DomainError("matern: negative distance");
  if (t == 0.0) return 1.0;
  const int p = half_integer_order(spec.smoothness);
  if (p >= 0) return matern_eval_half_integer(p, spec.range, t);
  return matern_eval_bessel(spec.smoothness, spec.range, t);
}

double kernel_eval(const KernelSpec& spec, const Point& p, const Point& q) {
  if (spec.family != KernelFamily::kMatern) {
    throw InputError("spectral kernels are evaluated through their Mercer basis");
  }
  return matern_eval(spec, distance(spec.domain, p, q));
}

KernelFunction make_kernel_function(const KernelSpec& spec) {
  if (spec.family != KernelFamily::kMatern) {
    throw InputError("spectral kernels are evaluated through their Mercer basis");
  }
  const int p = half_integer_order(spec.smoothness);
  if (p >= 0) {
    // Precompute the polynomial coefficients once per kernel.
    const double scale = std::sqrt(2.0 * spec.smoothness) / spec.range;
    Eigen::VectorXd coef(p + 1);
    for (int i = 0; i <= p; ++i) {
      coef[i] = std::exp(std::lgamma(p + i + 1.0) - std::lgamma(i + 1.0) -
                         std::lgamma(p - i + 1.0) + std::lgamma(p + 1.0) -
                         std::lgamma(2.0 * p + 1.0));
    }
    return [domain = spec.domain, scale, coef](const Point& a, const Point& b) {
      const double s = scale * distance(domain, a, b);
      double poly = 0.0;
      for (Eigen::Index i = 0; i < coef.size(); ++i) poly = poly * (2.0 * s) + coef[i];
      return std::exp(-s) * poly;
    };
  }
  return [spec](const Point& a, const Point& b) {
    return matern_eval_bessel(spec.smoothness, spec.range, distance(spec.domain, a, b));
  };
}

Eigen::MatrixXd gram_matrix(const KernelFunction& kernel, std::span<const Point> points) {
  if (points.empty()) throw InputError("gram_matrix: no points");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    gram(a, a) = kernel(points[a], points[a]);
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double value = kernel(points[a], points[b]);
      gram(a, b) = value;
      gram(b, a) = value;
    }
  }
  return gram;
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, std::span<const Point> points) {
  return gram_matrix(make_kernel_function(spec), points);
}

}  // namespace fosr
