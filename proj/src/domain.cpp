#include "fosr/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fosr/error.hpp"

namespace fosr {

std::string_view Domain::name() const {
  switch (kind) {
    case DomainKind::kInterval: return "interval";
    case DomainKind::kSquare: return "square";
    case DomainKind::kSphere: return "sphere";
    case DomainKind::kTorus: return "torus";
  }
  return "interval";
}

Domain Domain::parse(std::string_view name) {
  if (name == "interval") return {DomainKind::kInterval};
  if (name == "square") return {DomainKind::kSquare};
  if (name == "sphere") return {DomainKind::kSphere};
  if (name == "torus") return {DomainKind::kTorus};
  throw InputError("unknown domain '" + std::string(name) + "'");
}

Point::Point(std::initializer_list<double> coords) {
  if (coords.size() > coords_.size()) throw InputError("point has more than 3 coordinates");
  std::copy(coords.begin(), coords.end(), coords_.begin());
  size_ = static_cast<int>(coords.size());
}

Point Point::from_span(const double* data, int size) {
  if (size < 0 || size > 3) throw InputError("point has more than 3 coordinates");
  Point p;
  std::copy(data, data + size, p.coords_.begin());
  p.size_ = size;
  return p;
}

void validate_point(const Domain& domain, const Point& p) {
  if (p.size() != domain.ambient_dim()) {
    throw InputError("point has " + std::to_string(p.size()) + " coordinates, domain " +
                     std::string(domain.name()) + " needs " +
                     std::to_string(domain.ambient_dim()));
  }
  for (int i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i])) throw InputError("point coordinate is not finite");
  }
  switch (domain.kind) {
    case DomainKind::kInterval:
    case DomainKind::kSquare:
      for (int i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || p[i] > 1.0) throw InputError("point coordinate outside [0,1]");
      }
      break;
    case DomainKind::kTorus:
      break;  // coordinates are taken modulo 1
    case DomainKind::kSphere: {
      const double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
      if (std::abs(norm - 1.0) > 1e-9) throw InputError("point not on sphere");
      break;
    }
  }
}

double distance(const Domain& domain, const Point& p, const Point& q) {
  if (p.size() != domain.ambient_dim() || q.size() != domain.ambient_dim()) {
    throw DomainError("point dimension does not match domain " + std::string(domain.name()));
  }
  switch (domain.kind) {
    case DomainKind::kInterval: return std::abs(p[0] - q[0]);
    case DomainKind::kSquare: return std::hypot(p[0] - q[0], p[1] - q[1]);
    case DomainKind::kTorus: {
      auto wrap = [](double a, double b) {
        double delta = std::abs(a - b);
        delta -= std::floor(delta);
        return std::min(delta, 1.0 - delta);
      };
      return std::hypot(wrap(p[0], q[0]), wrap(p[1], q[1]));
    }
    case DomainKind::kSphere: {
      const double dot = p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
      return std::acos(std::clamp(dot, -1.0, 1.0));
    }
  }
  return 0.0;
}

}  // namespace fosr
