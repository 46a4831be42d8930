#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fosr/domain.hpp"

namespace fosr {

/// Discrete probability measure approximating the unit-mass measure on a domain.
struct Quadrature {
  Domain domain{};
  std::vector<Point> nodes;
  Eigen::VectorXd weights;

  [[nodiscard]] int size() const { return static_cast<int>(nodes.size()); }
};

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

/// Quadrature on a domain.
///
///   interval  `size` Gauss-Legendre nodes mapped to [0,1]
///   square    size x size Gauss-Legendre tensor grid
///   torus     size x size uniform midpoint grid (exact for trig products)
///   sphere    size Gauss nodes in cos(colatitude) x 2*size uniform longitudes
///
/// Weights are normalized to sum to one. Throws InputError for size < 2.
Quadrature build_quadrature(const Domain& domain, int size);

/// Node count per axis used when the caller does not choose one.
int default_quadrature_size(const Domain& domain);

}  // namespace fosr
