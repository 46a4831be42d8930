#include "fosr/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <tuple>

#include "fosr/error.hpp"

namespace fosr {
namespace {

constexpr double kPi = std::numbers::pi;

struct RankedMode {
  double xi;
  LaplacianMode mode;
};

ManifoldSpectrum from_ranked(const Domain& domain, std::vector<RankedMode> ranked, int count) {
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedMode& x, const RankedMode& y) {
    return std::tie(x.xi, x.mode.a, x.mode.b, x.mode.trig) <
           std::tie(y.xi, y.mode.a, y.mode.b, y.mode.trig);
  });
  ranked.resize(static_cast<std::size_t>(count));
  Eigen::VectorXd xi(count);
  std::vector<LaplacianMode> modes;
  modes.reserve(ranked.size());
  for (int i = 0; i < count; ++i) {
    xi[i] = ranked[static_cast<std::size_t>(i)].xi;
    modes.push_back(ranked[static_cast<std::size_t>(i)].mode);
  }
  return ManifoldSpectrum(domain, std::move(xi), std::move(modes));
}

// Legendre functions normalized so that sqrt(2 - delta_m0) Q_l^m(cos t) {cos, sin}(m phi)
// is orthonormal under the unit-mass surface measure. table[l][m], 0 <= m <= l.
std::vector<std::vector<double>> normalized_legendre(int max_degree, double x) {
  const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
  std::vector<std::vector<double>> q(static_cast<std::size_t>(max_degree + 1));
  for (int l = 0; l <= max_degree; ++l) q[static_cast<std::size_t>(l)].assign(l + 1, 0.0);
  q[0][0] = 1.0;
  for (int m = 1; m <= max_degree; ++m) {
    q[m][m] = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * q[m - 1][m - 1];
  }
  for (int m = 0; m < max_degree; ++m) {
    q[m + 1][m] = std::sqrt(2.0 * m + 3.0) * x * q[m][m];
  }
  for (int m = 0; m <= max_degree; ++m) {
    for (int l = m + 2; l <= max_degree; ++l) {
      const double ll = l;
      const double a = std::sqrt((4.0 * ll * ll - 1.0) / (ll * ll - 1.0 * m * m));
      const double b = std::sqrt(((ll - 1.0) * (ll - 1.0) - 1.0 * m * m) /
                                 (4.0 * (ll - 1.0) * (ll - 1.0) - 1.0));
      q[l][m] = a * (x * q[l - 1][m] - b * q[l - 2][m]);
    }
  }
  return q;
}

}  // namespace

ManifoldSpectrum::ManifoldSpectrum(Domain domain, Eigen::VectorXd eigenvalues,
                                   std::vector<LaplacianMode> modes)
    : domain_(domain), eigenvalues_(std::move(eigenvalues)), modes_(std::move(modes)) {
  for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k) {
    if (eigenvalues_[k] == 0.0) ++zero_count_;
  }
  for (const auto& mode : modes_) max_degree_ = std::max(max_degree_, mode.a);
}

Eigen::VectorXd ManifoldSpectrum::eigenfunctions(const Point& u, int count) const {
  if (count > size()) throw InputError("requested more eigenfunctions than the spectrum holds");
  Eigen::VectorXd out(count);
  switch (domain_.kind) {
    case DomainKind::kInterval:
      for (int k = 0; k < count; ++k) {
        const int freq = modes_[static_cast<std::size_t>(k)].a;
        out[k] = freq == 0 ? 1.0 : std::numbers::sqrt2 * std::cos(kPi * freq * u[0]);
      }
      break;
    case DomainKind::kTorus:
      for (int k = 0; k < count; ++k) {
        const auto& mode = modes_[static_cast<std::size_t>(k)];
        if (mode.a == 0 && mode.b == 0) {
          out[k] = 1.0;
          continue;
        }
        const double phase = 2.0 * kPi * (mode.a * u[0] + mode.b * u[1]);
        out[k] = std::numbers::sqrt2 * (mode.trig == 0 ? std::cos(phase) : std::sin(phase));
      }
      break;
    case DomainKind::kSphere: {
      int degree = 0;
      for (int k = 0; k < count; ++k) degree = std::max(degree, modes_[static_cast<std::size_t>(k)].a);
      const auto q = normalized_legendre(degree, std::clamp(u[2], -1.0, 1.0));
      const double phi = std::atan2(u[1], u[0]);
      for (int k = 0; k < count; ++k) {
        const auto& mode = modes_[static_cast<std::size_t>(k)];
        const int m = std::abs(mode.b);
        const double legendre = q[static_cast<std::size_t>(mode.a)][static_cast<std::size_t>(m)];
        if (mode.b == 0) {
          out[k] = legendre;
        } else if (mode.b > 0) {
          out[k] = std::numbers::sqrt2 * legendre * std::cos(m * phi);
        } else {
          out[k] = std::numbers::sqrt2 * legendre * std::sin(m * phi);
        }
      }
      break;
    }
    case DomainKind::kSquare:
      throw InputError("no analytic spectrum for the square");
  }
  return out;
}

ManifoldSpectrum analytic_laplacian_spectrum(const Domain& domain, int count) {
  if (count < 1) throw InputError("spectrum count must be at least 1");
  std::vector<RankedMode> ranked;
  switch (domain.kind) {
    case DomainKind::kInterval:
      for (int k = 0; k < count; ++k) ranked.push_back({kPi * kPi * k * k, {k, 0, 0}});
      break;
    case DomainKind::kSphere: {
      for (int l = 0; static_cast<int>(ranked.size()) < count; ++l) {
        for (int m = -l; m <= l; ++m) ranked.push_back({static_cast<double>(l) * (l + 1), {l, m, 0}});
      }
      break;
    }
    case DomainKind::kTorus: {
      // Half-plane representatives of +-k, each carrying a cos and a sin mode.
      // Every lattice vector with |k| <= radius is enumerated, so the first
      // `count` modes are complete shells once the count-th norm is <= radius^2.
      int radius = static_cast<int>(std::ceil(std::sqrt(count / kPi))) + 2;
      for (;;) {
        ranked.clear();
        ranked.push_back({0.0, {0, 0, 0}});
        for (int k1 = 0; k1 <= radius; ++k1) {
          for (int k2 = -radius; k2 <= radius; ++k2) {
            if (k1 == 0 && k2 <= 0) continue;
            const int norm2 = k1 * k1 + k2 * k2;
            if (norm2 > radius * radius) continue;
            const double xi = 4.0 * kPi * kPi * norm2;
            ranked.push_back({xi, {k1, k2, 0}});
            ranked.push_back({xi, {k1, k2, 1}});
          }
        }
        if (static_cast<int>(ranked.size()) >= count) {
          std::vector<double> xis;
          for (const auto& r : ranked) xis.push_back(r.xi);
          std::nth_element(xis.begin(), xis.begin() + (count - 1), xis.end());
          if (xis[static_cast<std::size_t>(count - 1)] <= 4.0 * kPi * kPi * radius * radius) break;
        }
        radius *= 2;
      }
      break;
    }
    case DomainKind::kSquare:
      throw InputError("no analytic spectrum for the square");
  }
  return from_ranked(domain, std::move(ranked), count);
}

MercerBasis::MercerBasis(Quadrature quadrature, Eigen::VectorXd eigenvalues,
                         Eigen::MatrixXd node_vectors, KernelFunction kernel,
                         std::optional<KernelSpec> spec, int requested_k0)
    : quadrature_(std::move(quadrature)),
      eigenvalues_(std::move(eigenvalues)),
      node_vectors_(std::move(node_vectors)),
      kernel_(std::move(kernel)),
      spec_(std::move(spec)),
      requested_k0_(requested_k0) {
  extension_ = quadrature_.weights.asDiagonal() * node_vectors_ *
               eigenvalues_.cwiseInverse().asDiagonal();
}

MercerBasis::MercerBasis(Quadrature quadrature, Eigen::VectorXd eigenvalues,
                         std::shared_ptr<const ManifoldSpectrum> spectrum, KernelSpec spec)
    : quadrature_(std::move(quadrature)),
      eigenvalues_(std::move(eigenvalues)),
      spec_(spec),
      spectrum_(std::move(spectrum)),
      requested_k0_(static_cast<int>(eigenvalues_.size())) {
  node_vectors_ = evaluate(quadrature_.nodes);
}

Eigen::VectorXd MercerBasis::evaluate(const Point& u) const {
  if (spectrum_) return spectrum_->eigenfunctions(u, k0());
  Eigen::RowVectorXd kernel_row(quadrature_.size());
  for (int q = 0; q < quadrature_.size(); ++q) {
    kernel_row[q] = kernel_(u, quadrature_.nodes[static_cast<std::size_t>(q)]);
  }
  return (kernel_row * extension_).transpose();
}

Eigen::MatrixXd MercerBasis::evaluate(std::span<const Point> points) const {
  const auto count = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd out(count, k0());
  if (spectrum_) {
    for (Eigen::Index a = 0; a < count; ++a) out.row(a) = spectrum_->eigenfunctions(points[a], k0());
    return out;
  }
  Eigen::MatrixXd kernel_block(count, quadrature_.size());
  for (Eigen::Index a = 0; a < count; ++a) {
    for (int q = 0; q < quadrature_.size(); ++q) {
      kernel_block(a, q) = kernel_(points[a], quadrature_.nodes[static_cast<std::size_t>(q)]);
    }
  }
  out.noalias() = kernel_block * extension_;
  return out;
}

double MercerBasis::reconstruct_kernel(const Point& u, const Point& s) const {
  return (evaluate(u).array() * eigenvalues_.array() * evaluate(s).array()).sum();
}

MercerBasis MercerBasis::leading(int k0) const {
  if (k0 < 1 || k0 > this->k0()) throw InputError("leading: k0 out of range");
  if (spectrum_) {
    return MercerBasis(quadrature_, eigenvalues_.head(k0), spectrum_, *spec_);
  }
  return MercerBasis(quadrature_, eigenvalues_.head(k0), node_vectors_.leftCols(k0), kernel_, spec_,
                     k0);
}

MercerBasis nystrom_decompose(const KernelFunction& kernel, const Quadrature& quad, int k0,
                              std::optional<KernelSpec> spec) {
  if (k0 < 1) throw InputError("k0 must be at least 1");
  if (k0 > quad.size()) throw InputError("k0 exceeds the number of quadrature nodes");
  const Eigen::MatrixXd gram = gram_matrix(kernel, quad.nodes);
  const Eigen::VectorXd sqrt_w = quad.weights.cwiseSqrt();
  const Eigen::MatrixXd weighted = sqrt_w.asDiagonal() * gram * sqrt_w.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(weighted);
  if (solver.info() != Eigen::Success) throw NumericalError("nystrom: eigensolver failed");

  const Eigen::VectorXd& ascending = solver.eigenvalues();
  const Eigen::Index n = ascending.size();
  const double top = ascending[n - 1];
  const double scale = std::max(std::abs(ascending[0]), std::abs(top));
  if (ascending[0] < -1e-8 * scale) {
    throw NumericalError("nystrom: Gram matrix is not positive semidefinite (min eigenvalue " +
                         std::to_string(ascending[0]) + ")");
  }
  if (!(top > 0.0)) throw NumericalError("nystrom: kernel operator is zero");

  int kept = 0;
  while (kept < k0 && ascending[n - 1 - kept] > kEigenvalueFloor * top) ++kept;

  Eigen::VectorXd tau(kept);
  Eigen::MatrixXd vectors(quad.size(), kept);
  const Eigen::VectorXd inv_sqrt_w = sqrt_w.cwiseInverse();
  for (int k = 0; k < kept; ++k) {
    tau[k] = ascending[n - 1 - k];
    Eigen::VectorXd column = inv_sqrt_w.cwiseProduct(solver.eigenvectors().col(n - 1 - k));
    // Sign convention: first non-negligible node value is positive.
    const double cutoff = 1e-10 * column.cwiseAbs().maxCoeff();
    for (Eigen::Index q = 0; q < column.size(); ++q) {
      if (std::abs(column[q]) > cutoff) {
        if (column[q] < 0.0) column = -column;
        break;
      }
    }
    vectors.col(k) = column;
  }
  return MercerBasis(quad, std::move(tau), std::move(vectors), kernel, std::move(spec), k0);
}

MercerBasis nystrom_decompose(const KernelSpec& spec, const Quadrature& quad, int k0) {
  spec.validate();
  if (!(spec.domain == quad.domain)) throw InputError("kernel and quadrature domains differ");
  return nystrom_decompose(make_kernel_function(spec), quad, k0, spec);
}

Eigen::VectorXd nystrom_extend(const MercerBasis& basis, const Point& u) {
  return basis.evaluate(u);
}

MercerBasis sobolev_kernel_from_spectrum(std::shared_ptr<const ManifoldSpectrum> spectrum,
                                         double r, int count, const Quadrature& quad) {
  const KernelSpec spec = KernelSpec::sobolev(r, spectrum->domain());
  if (count < 1 || count > spectrum->size()) {
    throw InputError("sobolev kernel: count exceeds available eigenpairs");
  }
  if (!(quad.domain == spectrum->domain())) throw InputError("quadrature domain mismatch");
  Eigen::VectorXd tau(count);
  for (int k = 0; k < count; ++k) {
    const double xi = spectrum->eigenvalues()[k];
    tau[k] = k < spectrum->zero_count() ? 1.0 : std::pow(xi, -r);
  }
  return MercerBasis(quad, std::move(tau), std::move(spectrum), spec);
}

MercerBasis sobolev_kernel_from_spectrum(std::shared_ptr<const ManifoldSpectrum> spectrum,
                                         double r, int count) {
  const Quadrature quad =
      build_quadrature(spectrum->domain(), default_quadrature_size(spectrum->domain()));
  return sobolev_kernel_from_spectrum(std::move(spectrum), r, count, quad);
}

MercerBasis build_basis(const KernelSpec& spec, const Quadrature& quad, int k0) {
  if (spec.family == KernelFamily::kMatern) return nystrom_decompose(spec, quad, k0);
  auto spectrum =
      std::make_shared<const ManifoldSpectrum>(analytic_laplacian_spectrum(spec.domain, k0));
  return sobolev_kernel_from_spectrum(std::move(spectrum), spec.smoothness, k0, quad);
}

SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("slope fit: size mismatch");
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n < 3) throw InputError("slope fit needs at least 3 points");
  Eigen::VectorXd lx(n);
  Eigen::VectorXd ly(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InputError("slope fit needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = lx.mean();
  const double my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  if (!(sxx > 0.0)) throw InputError("slope fit: abscissae are all equal");
  const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
  SlopeFit fit;
  fit.slope = sxy / sxx;
  const double intercept = my - fit.slope * mx;
  const double rss = (ly.array() - intercept - fit.slope * lx.array()).square().sum();
  fit.std_error = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  return fit;
}

SlopeFit decay_slope(std::span<const double> values, int first, int last) {
  if (first < 1 || last > static_cast<int>(values.size()) || last - first + 1 < 3) {
    throw InputError("decay_slope: fit range must lie in the sequence and hold at least 3 values");
  }
  std::vector<double> index;
  std::vector<double> selected;
  for (int k = first; k <= last; ++k) {
    index.push_back(k);
    selected.push_back(values[static_cast<std::size_t>(k - 1)]);
  }
  return loglog_slope(index, selected);
}

TailDiagnostic mercer_tail_diagnostic(const MercerBasis& basis, std::span<const Point> probe_grid) {
  if (probe_grid.empty()) throw InputError("tail diagnostic: empty probe grid");
  const Eigen::MatrixXd values = basis.evaluate(probe_grid);
  TailDiagnostic out;
  out.c.resize(basis.k0());
  for (int k = 0; k < basis.k0(); ++k) {
    const double peak = values.col(k).cwiseAbs().maxCoeff();
    out.c[k] = basis.eigenvalues()[k] * peak * peak;
  }
  const int quarter = std::max(1, (basis.k0() + 3) / 4);
  const double head = out.c.head(quarter).maxCoeff();
  const double tail = out.c.tail(quarter).maxCoeff();
  out.decaying = tail < head;
  return out;
}

}  // namespace fosr
