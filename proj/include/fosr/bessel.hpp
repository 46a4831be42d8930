#pragma once

namespace fosr {

struct BesselKResult {
  double value = 0.0;
  /// Set when K_nu(x) overflowed double range; `value` then holds DBL_MAX.
  bool saturated = false;
};

/// Modified Bessel function of the second kind K_nu(x), nu > 0, x > 0, via
/// std::cyl_bessel_k. Throws DomainError for nu <= 0 or x <= 0.
BesselKResult bessel_k_checked(double nu, double x);

/// K_nu(x); saturates to DBL_MAX instead of returning inf or NaN.
double bessel_k(double nu, double x);

}  // namespace fosr
