#ifndef HNMPC_GEOMETRY_HPP
#define HNMPC_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hnmpc {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (angle > -std::numbers::pi && angle <= std::numbers::pi) return angle;
  double wrapped = std::remainder(angle, kTwoPi);
  if (wrapped <= -std::numbers::pi) wrapped += kTwoPi;
  return wrapped;
}

/// Rotation by `angle`. In the (North, East) frame a positive angle turns
/// North toward East, i.e. clockwise when viewed from above.
inline Eigen::Matrix2d rotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

/// Conjugate exponent q of p, so that 1/p + 1/q = 1.
inline double dual_exponent(double p) {
  if (!(p >= 2.0) || !std::isfinite(p)) {
    throw std::invalid_argument("superellipsoid exponent must be >= 2, got " +
                                std::to_string(p));
  }
  return p / (p - 1.0);
}

inline double pnorm(const Eigen::Vector2d& v, double p) {
  if (p == 2.0) return v.norm();
  return std::pow(std::pow(std::abs(v.x()), p) + std::pow(std::abs(v.y()), p),
                  1.0 / p);
}

/// Gradient of the p-norm at `v`; zero at the origin.
inline Eigen::Vector2d pnorm_gradient(const Eigen::Vector2d& v, double p) {
  const double norm = pnorm(v, p);
  if (norm <= 0.0) return Eigen::Vector2d::Zero();
  const double scale = std::pow(norm, p - 1.0);
  auto component = [&](double w) {
    return std::copysign(std::pow(std::abs(w), p - 1.0), w) / scale;
  };
  return {component(v.x()), component(v.y())};
}

/// The set { R(heading) diag(semi_axes) x + center : ||x||_p <= 1 }.
class Superellipsoid {
 public:
  Superellipsoid(Eigen::Vector2d center, double heading,
                 Eigen::Vector2d semi_axes, double exponent)
      : center_(std::move(center)),
        heading_(wrap_angle(heading)),
        semi_axes_(std::move(semi_axes)),
        exponent_(exponent) {
    if (!center_.allFinite() || !std::isfinite(heading)) {
      throw std::invalid_argument("superellipsoid pose must be finite");
    }
    if (!(semi_axes_.x() > 0.0) || !(semi_axes_.y() > 0.0) ||
        !semi_axes_.allFinite()) {
      throw std::invalid_argument("superellipsoid semi-axes must be positive");
    }
    dual_exponent(exponent_);
  }

  const Eigen::Vector2d& center() const { return center_; }
  double heading() const { return heading_; }
  const Eigen::Vector2d& semi_axes() const { return semi_axes_; }
  double exponent() const { return exponent_; }
  double dual() const { return exponent_ / (exponent_ - 1.0); }

  Eigen::Matrix2d rotation_matrix() const { return rotation(heading_); }
  Eigen::Matrix2d scaling() const { return semi_axes_.asDiagonal(); }

  /// Same shape placed at a new pose.
  Superellipsoid moved_to(const Eigen::Vector2d& center, double heading) const {
    return {center, heading, semi_axes_, exponent_};
  }

  /// Radius of the smallest origin-centred disk containing the unit-free
  /// shape, max ||S x||_2 over ||x||_p <= 1.
  double circumradius() const {
    return semi_axes_.maxCoeff() * std::pow(2.0, 0.5 - 1.0 / exponent_);
  }

  bool operator==(const Superellipsoid&) const = default;

 private:
  Eigen::Vector2d center_;
  double heading_;
  Eigen::Vector2d semi_axes_;
  double exponent_;
};

/// Unit-norm direction used as a separating axis candidate.
class SeparatingAxis {
 public:
  explicit SeparatingAxis(const Eigen::Vector2d& direction) {
    const double n = direction.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw std::invalid_argument("separating axis needs a nonzero direction");
    }
    direction_ = direction / n;
  }
  static SeparatingAxis from_angle(double phi) {
    return SeparatingAxis(Eigen::Vector2d(std::cos(phi), std::sin(phi)));
  }
  const Eigen::Vector2d& vector() const { return direction_; }

 private:
  Eigen::Vector2d direction_;
};

inline constexpr double kContainsTolerance = 1e-9;

inline bool contains(const Superellipsoid& set, const Eigen::Vector2d& point,
                     double tol = kContainsTolerance) {
  const Eigen::Vector2d local =
      set.rotation_matrix().transpose() * (point - set.center());
  const Eigen::Vector2d unit = local.cwiseQuotient(set.semi_axes());
  return pnorm(unit, set.exponent()) <= 1.0 + tol;
}

/// Support function sup_{x in set} <a, x> = ||S R^T a||_q + <a, c>.
inline double support(const Superellipsoid& set, const Eigen::Vector2d& a) {
  const Eigen::Vector2d w =
      set.semi_axes().cwiseProduct(set.rotation_matrix().transpose() * a);
  return pnorm(w, set.dual()) + a.dot(set.center());
}

inline void require_shared_exponent(const Superellipsoid& v,
                                    const Superellipsoid& e) {
  if (v.exponent() != e.exponent()) {
    throw std::invalid_argument(
        "vehicle and obstacle must share one exponent (" +
        std::to_string(v.exponent()) + " vs " + std::to_string(e.exponent()) +
        ")");
  }
}

/// Left-hand side of the separation certificate
///   ||S^v R^vT a||_q + ||S^e R^eT a||_q + <a, c^v - c^e>.
/// A value <= 0 certifies the two sets are disjoint.
inline double separation_margin(const Superellipsoid& vehicle,
                                const Superellipsoid& obstacle,
                                const SeparatingAxis& axis) {
  require_shared_exponent(vehicle, obstacle);
  const Eigen::Vector2d& a = axis.vector();
  const double q = vehicle.dual();
  const Eigen::Vector2d wv = vehicle.semi_axes().cwiseProduct(
      vehicle.rotation_matrix().transpose() * a);
  const Eigen::Vector2d we = obstacle.semi_axes().cwiseProduct(
      obstacle.rotation_matrix().transpose() * a);
  return pnorm(wv, q) + pnorm(we, q) + a.dot(vehicle.center() - obstacle.center());
}

struct AxisSweepResult {
  SeparatingAxis axis;
  double margin;
};

/// Sweeps axis angles over [0, 2pi) and returns the minimum-margin axis,
/// refined by golden-section search inside the best bracket.
inline AxisSweepResult best_axis(const Superellipsoid& vehicle,
                                 const Superellipsoid& obstacle,
                                 double angular_resolution) {
  require_shared_exponent(vehicle, obstacle);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const auto steps =
      static_cast<std::size_t>(std::ceil(kTwoPi / angular_resolution));
  const double h = kTwoPi / static_cast<double>(steps);
  auto margin_at = [&](double phi) {
    return separation_margin(vehicle, obstacle, SeparatingAxis::from_angle(phi));
  };
  double best_phi = 0.0;
  double best = margin_at(0.0);
  for (std::size_t i = 1; i < steps; ++i) {
    const double phi = h * static_cast<double>(i);
    const double m = margin_at(phi);
    if (m < best) {
      best = m;
      best_phi = phi;
    }
  }
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best_phi - h;
  double hi = best_phi + h;
  double x1 = hi - golden * (hi - lo);
  double x2 = lo + golden * (hi - lo);
  double f1 = margin_at(x1);
  double f2 = margin_at(x2);
  for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - golden * (hi - lo);
      f1 = margin_at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + golden * (hi - lo);
      f2 = margin_at(x2);
    }
  }
  const double refined_phi = f1 < f2 ? x1 : x2;
  const double refined = std::min(f1, f2);
  if (refined < best) {
    best = refined;
    best_phi = refined_phi;
  }
  return {SeparatingAxis::from_angle(best_phi), best};
}

/// Axis of minimum margin when that margin is negative, otherwise none.
inline std::optional<SeparatingAxis> find_separating_axis(
    const Superellipsoid& vehicle, const Superellipsoid& obstacle,
    double angular_resolution) {
  if (!(angular_resolution > 0.0) || angular_resolution > 0.01) {
    throw std::invalid_argument("angular resolution must lie in (0, 0.01]");
  }
  auto result = best_axis(vehicle, obstacle, angular_resolution);
  if (result.margin < 0.0) return result.axis;
  return std::nullopt;
}

/// Maps the unit p-ball boundary by angle through the signed-power map
/// (sgn cos t |cos t|^(2/p), sgn sin t |sin t|^(2/p)), then applies R S + c.
inline std::vector<Eigen::Vector2d> sample_boundary(const Superellipsoid& set,
                                                    std::size_t count) {
  std::vector<Eigen::Vector2d> points;
  points.reserve(count);
  const Eigen::Matrix2d rs = set.rotation_matrix() * set.scaling();
  const double e = 2.0 / set.exponent();
  for (std::size_t i = 0; i < count; ++i) {
    const double t =
        2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
    const double ct = std::cos(t);
    const double st = std::sin(t);
    const Eigen::Vector2d unit(std::copysign(std::pow(std::abs(ct), e), ct),
                               std::copysign(std::pow(std::abs(st), e), st));
    points.emplace_back(rs * unit + set.center());
  }
  return points;
}

/// Boundary samples plus interior points from a square grid on the unit ball.
inline std::vector<Eigen::Vector2d> sample_set(const Superellipsoid& set,
                                               std::size_t count) {
  const std::size_t boundary_count = std::max<std::size_t>(count / 2, 8);
  auto points = sample_boundary(set, boundary_count);
  const std::size_t interior = count > boundary_count ? count - boundary_count : 0;
  // A grid on [-1,1]^2 keeps roughly (pi/4..1) of its points inside the ball.
  const auto side = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(interior) * 4.0 / std::numbers::pi)));
  const Eigen::Matrix2d rs = set.rotation_matrix() * set.scaling();
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      const Eigen::Vector2d unit(
          -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(side),
          -1.0 + 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(side));
      if (pnorm(unit, set.exponent()) <= 1.0) {
        points.emplace_back(rs * unit + set.center());
      }
    }
  }
  return points;
}

/// Ground-truth collision check by sampling: true iff a sample of either
/// set lies in the other.
inline bool intersects_oracle(const Superellipsoid& vehicle,
                              const Superellipsoid& obstacle,
                              std::size_t samples = 10000) {
  if (samples < 10000) {
    throw std::invalid_argument("collision oracle needs at least 1e4 samples");
  }
  if ((vehicle.center() - obstacle.center()).norm() >
      vehicle.circumradius() + obstacle.circumradius() + 1e-9) {
    return false;
  }
  for (const auto& x : sample_set(obstacle, samples)) {
    if (contains(vehicle, x)) return true;
  }
  for (const auto& x : sample_set(vehicle, samples)) {
    if (contains(obstacle, x)) return true;
  }
  return false;
}

}  // namespace hnmpc

#endif  // HNMPC_GEOMETRY_HPP
