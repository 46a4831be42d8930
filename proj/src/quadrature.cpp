#include "fosr/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "fosr/error.hpp"

namespace fosr {

void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  nodes.resize(n);
  weights.resize(n);
  // P_n(x) and P_n'(x) by the three-term recurrence.
  auto legendre = [n](double x) {
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, n * (x * p1 - p0) / (x * x - 1.0)};
  };
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre(x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

int default_quadrature_size(const Domain& domain) {
  return domain.kind == DomainKind::kInterval ? 512 : 32;
}

Quadrature build_quadrature(const Domain& domain, int size) {
  if (size < 2) throw InputError("quadrature size must be at least 2");
  Quadrature quad;
  quad.domain = domain;
  Eigen::VectorXd gl_nodes;
  Eigen::VectorXd gl_weights;
  switch (domain.kind) {
    case DomainKind::kInterval: {
      gauss_legendre(size, gl_nodes, gl_weights);
      quad.weights.resize(size);
      for (int i = 0; i < size; ++i) {
        quad.nodes.push_back(Point{0.5 * (gl_nodes[i] + 1.0)});
        quad.weights[i] = 0.5 * gl_weights[i];
      }
      break;
    }
    case DomainKind::kSquare: {
      gauss_legendre(size, gl_nodes, gl_weights);
      quad.weights.resize(size * size);
      for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
          quad.nodes.push_back(Point{0.5 * (gl_nodes[i] + 1.0), 0.5 * (gl_nodes[j] + 1.0)});
          quad.weights[i * size + j] = 0.25 * gl_weights[i] * gl_weights[j];
        }
      }
      break;
    }
    case DomainKind::kTorus: {
      quad.weights = Eigen::VectorXd::Constant(size * size, 1.0 / (size * size));
      for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
          quad.nodes.push_back(Point{(i + 0.5) / size, (j + 0.5) / size});
        }
      }
      break;
    }
    case DomainKind::kSphere: {
      gauss_legendre(size, gl_nodes, gl_weights);
      const int longitudes = 2 * size;
      quad.weights.resize(size * longitudes);
      for (int i = 0; i < size; ++i) {
        const double z = gl_nodes[i];
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        for (int j = 0; j < longitudes; ++j) {
          const double phi = 2.0 * std::numbers::pi * (j + 0.5) / longitudes;
          quad.nodes.push_back(Point{rho * std::cos(phi), rho * std::sin(phi), z});
          quad.weights[i * longitudes + j] = 0.5 * gl_weights[i] / longitudes;
        }
      }
      break;
    }
  }
  quad.weights /= quad.weights.sum();
  return quad;
}

}  // namespace fosr
