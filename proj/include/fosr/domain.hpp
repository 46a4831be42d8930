#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <string_view>

namespace fosr {

enum class DomainKind { kInterval, kSquare, kSphere, kTorus };

/// Compact observation domain with unit total measure.
struct Domain {
  DomainKind kind = DomainKind::kInterval;

  /// Intrinsic (manifold) dimension d.
  [[nodiscard]] int intrinsic_dim() const { return kind == DomainKind::kInterval ? 1 : 2; }
  /// Number of ambient coordinates used to store a point.
  [[nodiscard]] int ambient_dim() const {
    switch (kind) {
      case DomainKind::kInterval: return 1;
      case DomainKind::kSphere: return 3;
      default: return 2;
    }
  }
  [[nodiscard]] std::string_view name() const;

  static Domain parse(std::string_view name);

  friend bool operator==(const Domain&, const Domain&) = default;
};

/// A location on a domain, stored in ambient coordinates (at most 3).
class Point {
 public:
  Point() = default;
  Point(std::initializer_list<double> coords);
  static Point from_span(const double* data, int size);

  [[nodiscard]] int size() const { return size_; }
  double operator[](int i) const { return coords_[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return coords_[static_cast<std::size_t>(i)]; }

  friend bool operator==(const Point&, const Point&) = default;

 private:
  std::array<double, 3> coords_{};
  int size_ = 0;
};

/// Throws InputError when `p` is not a valid point of `domain`.
void validate_point(const Domain& domain, const Point& p);

/// Euclidean on interval/square, wraparound on the torus, great-circle arc on the sphere.
double distance(const Domain& domain, const Point& p, const Point& q);

}  // namespace fosr
