#include "fosr/bessel.hpp"

#include <cmath>
#include <limits>

#include "fosr/error.hpp"

namespace fosr {

BesselKResult bessel_k_checked(double nu, double x) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("bessel_k: order must be positive");
  if (!(x > 0.0)) throw DomainError("bessel_k: argument must be positive");
  if (std::isinf(x)) return {0.0, false};
  const double value = std::cyl_bessel_k(nu, x);
  if (!std::isfinite(value)) return {std::numeric_limits<double>::max(), true};
  return {value, false};
}

double bessel_k(double nu, double x) { return bessel_k_checked(nu, x).value; }

}  // namespace fosr
