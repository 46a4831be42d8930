#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "fosr/error.hpp"
#include "fosr/spectra.hpp"

using namespace fosr;

namespace {

constexpr double kPi = std::numbers::pi;
const Domain kInterval{DomainKind::kInterval};
const Domain kSphere{DomainKind::kSphere};
const Domain kTorus{DomainKind::kTorus};

KernelFunction brownian() {
  return [](const Point& a, const Point& b) { return std::min(a[0], b[0]); };
}

KernelFunction constant_kernel() {
  return [](const Point&, const Point&) { return 1.0; };
}

double brownian_tau(int k) { return 1.0 / ((k - 0.5) * (k - 0.5) * kPi * kPi); }

double max_orthonormality_error(const MercerBasis& basis) {
  const Eigen::MatrixXd& v = basis.node_eigenvectors();
  const Eigen::MatrixXd gram = v.transpose() * basis.quadrature().weights.asDiagonal() * v;
  return (gram - Eigen::MatrixXd::Identity(basis.k0(), basis.k0())).cwiseAbs().maxCoeff();
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("build_quadrature integrates known moments") {
  const Quadrature two = build_quadrature(kInterval, 2);
  CHECK(two.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));

  const Quadrature sixteen = build_quadrature(kInterval, 16);
  double second_moment = 0.0;
  for (int q = 0; q < sixteen.size(); ++q) {
    second_moment += sixteen.weights[q] * sixteen.nodes[q][0] * sixteen.nodes[q][0];
  }
  CHECK(std::abs(second_moment - 1.0 / 3.0) < 1e-12);

  // Y_10 under the unit-mass measure is sqrt(3) z.
  const Quadrature sphere = build_quadrature(kSphere, 32);
  CHECK(sphere.size() == 32 * 64);
  double y10 = 0.0;
  for (int q = 0; q < sphere.size(); ++q) {
    const double z = sphere.nodes[q][2];
    y10 += sphere.weights[q] * 3.0 * z * z;
    CHECK_NOTHROW(validate_point(kSphere, sphere.nodes[q]));
  }
  CHECK(std::abs(y10 - 1.0) < 1e-6);

  for (auto kind : {DomainKind::kSquare, DomainKind::kTorus}) {
    const Quadrature grid = build_quadrature(Domain{kind}, 8);
    CHECK(grid.size() == 64);
    CHECK(std::abs(grid.weights.sum() - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(build_quadrature(kSphere, 1), InputError);
}

TEST_CASE("nystrom on a rank-one kernel") {
  const Quadrature quad = build_quadrature(kInterval, 64);
  const MercerBasis basis = nystrom_decompose(constant_kernel(), quad, 3);
  CHECK(basis.k0() == 1);
  CHECK(basis.requested_k0() == 3);
  CHECK(basis.truncated());
  CHECK(basis.eigenvalues()[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (double u : {0.0, 0.37, 1.0}) {
    const Eigen::VectorXd v = nystrom_extend(basis, Point{u});
    REQUIRE(v.size() == 1);
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  const TailDiagnostic tail = mercer_tail_diagnostic(basis, quad.nodes);
  REQUIRE(tail.c.size() == 1);
  CHECK(tail.c[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nystrom reproduces the Brownian-motion Karhunen-Loeve expansion") {
  const Quadrature quad = build_quadrature(kInterval, 512);
  const MercerBasis basis = nystrom_decompose(brownian(), quad, 10);
  REQUIRE(basis.k0() == 10);
  CHECK(basis.eigenvalues()[0] == doctest::Approx(0.405285).epsilon(1e-5));
  CHECK(basis.eigenvalues()[1] == doctest::Approx(0.045032).epsilon(1e-4));
  for (int k = 1; k <= 10; ++k) {
    CHECK(std::abs(basis.eigenvalues()[k - 1] - brownian_tau(k)) < 0.02 * brownian_tau(k));
  }
  CHECK(max_orthonormality_error(basis) < 1e-8);

  // v_k(u) = sqrt(2) sin((k - 1/2) pi u), up to sign.
  const Eigen::VectorXd mid = nystrom_extend(basis, Point{0.5});
  CHECK(std::abs(std::abs(mid[0]) - 1.0) < 0.01);
  for (double u : {0.13, 0.5, 0.81}) {
    const Eigen::VectorXd v = nystrom_extend(basis, Point{u});
    for (int k = 1; k <= 4; ++k) {
      CHECK(std::abs(std::abs(v[k - 1]) - std::abs(std::numbers::sqrt2 * std::sin((k - 0.5) * kPi * u))) < 0.01);
    }
  }
}

TEST_CASE("nystrom eigenvalue error shrinks as the node count doubles") {
  double previous = 1.0;
  for (int nodes : {128, 256, 512}) {
    const MercerBasis basis = nystrom_decompose(brownian(), build_quadrature(kInterval, nodes), 10);
    double worst = 0.0;
    for (int k = 1; k <= 10; ++k) {
      worst = std::max(worst, std::abs(basis.eigenvalues()[k - 1] - brownian_tau(k)) / brownian_tau(k));
    }
    CHECK(worst < previous);
    previous = worst;
  }
}

TEST_CASE("nystrom extension interpolates node eigenvectors") {
  const Quadrature quad = build_quadrature(kInterval, 128);
  const MercerBasis basis = nystrom_decompose(KernelSpec::matern(1.5, 0.5), quad, 12);
  for (int q : {0, 17, 64, 127}) {
    const Eigen::VectorXd v = nystrom_extend(basis, quad.nodes[q]);
    CHECK((v.transpose() - basis.node_eigenvectors().row(q)).cwiseAbs().maxCoeff() < 1e-8);
  }
  // Batch and pointwise evaluation agree.
  const Eigen::MatrixXd batch = basis.evaluate(std::vector<Point>{Point{0.2}, Point{0.9}});
  CHECK((batch.row(1).transpose() - basis.evaluate(Point{0.9})).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("nystrom sign convention and invariants for Matern kernels") {
  for (auto kind : {DomainKind::kInterval, DomainKind::kSquare, DomainKind::kSphere}) {
    const Domain domain{kind};
    const int size = kind == DomainKind::kInterval ? 256 : 16;
    const Quadrature quad = build_quadrature(domain, size);
    const MercerBasis basis = nystrom_decompose(KernelSpec::matern(1.5, 0.5, domain), quad, 20);
    CAPTURE(domain.name());
    CHECK(max_orthonormality_error(basis) < 1e-8);
    for (int k = 0; k < basis.k0(); ++k) {
      CHECK(basis.eigenvalues()[k] > 0.0);
      if (k > 0) CHECK(basis.eigenvalues()[k] <= basis.eigenvalues()[k - 1]);
      const Eigen::VectorXd col = basis.node_eigenvectors().col(k);
      const double cutoff = 1e-10 * col.cwiseAbs().maxCoeff();
      for (Eigen::Index q = 0; q < col.size(); ++q) {
        if (std::abs(col[q]) > cutoff) {
          CHECK(col[q] > 0.0);
          break;
        }
      }
    }
    // Trace bound under unit measure: K(u,u) = 1.
    CHECK(basis.eigenvalues().sum() <= 1.0 + 1e-6);
  }
}

TEST_CASE("nystrom rejects indefinite Gram matrices and bad sizes") {
  const Quadrature torus = build_quadrature(kTorus, 16);
  CHECK_THROWS_AS(nystrom_decompose(KernelSpec::matern(1.5, 0.5, kTorus), torus, 10), NumericalError);
  CHECK_THROWS_AS(nystrom_decompose(KernelSpec::matern(0.5, 0.5, kTorus), torus, 10), NumericalError);
  const Quadrature small = build_quadrature(kInterval, 8);
  CHECK_THROWS_AS(nystrom_decompose(brownian(), small, 9), InputError);
  CHECK_THROWS_AS(nystrom_decompose(KernelSpec::matern(1.5, 1.0, kSphere), small, 3), InputError);
}

TEST_CASE("Mercer reconstruction of Matern kernels") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Quadrature quad = build_quadrature(kInterval, 512);
  for (double nu : {0.5, 1.5, 2.5}) {
    const KernelSpec spec = KernelSpec::matern(nu, 0.5);
    const MercerBasis basis = nystrom_decompose(spec, quad, 50);
    for (int trial = 0; trial < 40; ++trial) {
      const Point u{unit(rng)};
      const Point s{unit(rng)};
      CHECK(std::abs(basis.reconstruct_kernel(u, s) - kernel_eval(spec, u, s)) <= 0.05);
    }
  }
}

TEST_CASE("analytic Laplacian spectra") {
  const ManifoldSpectrum sphere = analytic_laplacian_spectrum(kSphere, 4);
  CHECK(to_vector(sphere.eigenvalues()) == std::vector<double>{0, 2, 2, 2});
  CHECK(sphere.zero_count() == 1);

  const ManifoldSpectrum interval = analytic_laplacian_spectrum(kInterval, 3);
  CHECK(interval.eigenvalues()[0] == 0.0);
  CHECK(interval.eigenvalues()[1] == doctest::Approx(kPi * kPi));
  CHECK(interval.eigenvalues()[2] == doctest::Approx(4 * kPi * kPi));

  const ManifoldSpectrum torus = analytic_laplacian_spectrum(kTorus, 5);
  CHECK(torus.eigenvalues()[0] == 0.0);
  for (int k = 1; k < 5; ++k) CHECK(torus.eigenvalues()[k] == doctest::Approx(4 * kPi * kPi));

  // Sphere multiplicities are 2l + 1.
  const ManifoldSpectrum big = analytic_laplacian_spectrum(kSphere, 100);
  for (int l = 0; l < 10; ++l) {
    const auto count = std::count(big.eigenvalues().begin(), big.eigenvalues().end(), l * (l + 1.0));
    CHECK(count == 2 * l + 1);
  }
  // Torus multiplicities match a brute-force lattice count.
  const ManifoldSpectrum lattice = analytic_laplacian_spectrum(kTorus, 400);
  for (int norm2 = 1; norm2 <= 20; ++norm2) {
    int brute = 0;
    for (int a = -10; a <= 10; ++a)
      for (int b = -10; b <= 10; ++b) brute += a * a + b * b == norm2;
    const double xi = 4 * kPi * kPi * norm2;
    const auto count = std::count_if(lattice.eigenvalues().begin(), lattice.eigenvalues().end(),
                                      [&](double v) { return std::abs(v - xi) < 1e-9; });
    CAPTURE(norm2);
    CHECK(count == brute);
  }
  for (int k = 1; k < lattice.size(); ++k) CHECK(lattice.eigenvalues()[k] >= lattice.eigenvalues()[k - 1]);

  CHECK_THROWS_AS(analytic_laplacian_spectrum(Domain{DomainKind::kSquare}, 3), InputError);
  CHECK_THROWS_AS(analytic_laplacian_spectrum(kSphere, 0), InputError);
}

TEST_CASE("Laplacian eigenfunctions are orthonormal under quadrature") {
  struct Case {
    Domain domain;
    int quad_size;
    int count;
  };
  for (const Case& c : {Case{kInterval, 256, 40}, Case{kTorus, 32, 60}, Case{kSphere, 32, 100}}) {
    const ManifoldSpectrum spectrum = analytic_laplacian_spectrum(c.domain, c.count);
    const Quadrature quad = build_quadrature(c.domain, c.quad_size);
    Eigen::MatrixXd values(quad.size(), c.count);
    for (int q = 0; q < quad.size(); ++q) values.row(q) = spectrum.eigenfunctions(quad.nodes[q], c.count);
    const Eigen::MatrixXd gram = values.transpose() * quad.weights.asDiagonal() * values;
    CAPTURE(c.domain.name());
    CHECK((gram - Eigen::MatrixXd::Identity(c.count, c.count)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("sobolev kernel from spectrum") {
  auto interval = std::make_shared<const ManifoldSpectrum>(analytic_laplacian_spectrum(kInterval, 50));
  const MercerBasis two = sobolev_kernel_from_spectrum(interval, 2.0, 2, build_quadrature(kInterval, 64));
  CHECK(two.eigenvalues()[0] == 1.0);
  CHECK(two.eigenvalues()[1] == doctest::Approx(std::pow(kPi, -4.0)).epsilon(1e-14));
  CHECK(two.analytic());

  const MercerBasis many = sobolev_kernel_from_spectrum(interval, 2.0, 50, build_quadrature(kInterval, 256));
  CHECK(max_orthonormality_error(many) < 1e-8);
  const TailDiagnostic tail = mercer_tail_diagnostic(many, many.quadrature().nodes);
  CHECK(tail.decaying);
  for (int k = 1; k < 50; ++k) {
    // |v_k| <= sqrt(2), so c_k <= 2 xi_k^(-2).
    CHECK(tail.c[k] <= 2.0 * many.eigenvalues()[k] + 1e-15);
  }

  auto sphere = std::make_shared<const ManifoldSpectrum>(analytic_laplacian_spectrum(kSphere, 200));
  const MercerBasis on_sphere = sobolev_kernel_from_spectrum(sphere, 2.0, 200);
  const std::vector<double> tau = to_vector(on_sphere.eigenvalues());
  CHECK(std::abs(decay_slope(tau, 10, 200).slope + 2.0) < 0.2);
  CHECK_THROWS_AS(sobolev_kernel_from_spectrum(sphere, 1.0, 10), InputError);
  CHECK_THROWS_AS(sobolev_kernel_from_spectrum(sphere, 2.0, 201), InputError);
}

TEST_CASE("decay_slope examples") {
  const std::vector<double> flat(30, 2.5);
  CHECK(std::abs(decay_slope(flat, 1, 30).slope) < 1e-12);

  const ManifoldSpectrum torus = analytic_laplacian_spectrum(kTorus, 400);
  CHECK(std::abs(decay_slope(to_vector(torus.eigenvalues()), 20, 400).slope - 1.0) < 0.15);

  std::vector<double> tau;
  for (int k = 1; k <= 10; ++k) tau.push_back(brownian_tau(k));
  const double slope = decay_slope(tau, 3, 10).slope;
  // (k - 1/2)^(-2) fitted on k in [3, 10] gives -2.21; the offset fades as k grows.
  CHECK(std::abs(slope + 2.0) < 0.25);
  CHECK(-slope / 2.0 == doctest::Approx(1.0).epsilon(0.15));

  std::vector<double> exact;
  for (int k = 1; k <= 20; ++k) exact.push_back(3.0 * std::pow(k, -1.7));
  const SlopeFit fit = decay_slope(exact, 1, 20);
  CHECK(fit.slope == doctest::Approx(-1.7).epsilon(1e-12));
  CHECK(fit.std_error < 1e-10);

  CHECK_THROWS_AS(decay_slope(exact, 4, 5), InputError);
  CHECK_THROWS_AS(decay_slope(exact, 1, 21), InputError);
}

TEST_CASE("Mercer tail diagnostic decays for Matern 3/2") {
  const Quadrature quad = build_quadrature(kInterval, 256);
  const MercerBasis basis = nystrom_decompose(KernelSpec::matern(1.5, 1.0), quad, 30);
  std::vector<Point> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(Point{i / 100.0});
  const TailDiagnostic tail = mercer_tail_diagnostic(basis, grid);
  CHECK(tail.c.size() == 30);
  CHECK(tail.decaying);
}
