#ifndef HNMPC_DYNAMICS_HPP
#define HNMPC_DYNAMICS_HPP

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "hnmpc/geometry.hpp"

namespace hnmpc {

/// Vehicle state (c, theta, v). Position is (North, East); heading 0 faces
/// North and grows clockwise.
struct VehicleState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double heading = 0.0;
  double speed = 0.0;

  Eigen::Vector4d as_vector() const {
    return {position.x(), position.y(), heading, speed};
  }
  static VehicleState from_vector(const Eigen::Vector4d& z) {
    return {{z[0], z[1]}, wrap_angle(z[2]), z[3]};
  }
  bool operator==(const VehicleState&) const = default;
};

/// Throttle and spin, each dimensionless in [-1, 1].
struct ControlInput {
  double throttle = 0.0;
  double spin = 0.0;

  bool operator==(const ControlInput&) const = default;
};

struct ModelParams {
  double alpha = 1.0;          // rad/s per unit spin
  double beta = 0.2;           // 1/s
  double v_max = 1.0;          // m/s
  double sampling_time = 0.1;  // s

  void validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(v_max >= 0.0)) {
      throw std::invalid_argument("model: alpha, beta and v_max must be >= 0");
    }
    if (!(sampling_time > 0.0)) {
      throw std::invalid_argument("model: sampling_time must be > 0");
    }
  }
};

struct StateDerivative {
  Eigen::Vector2d position_rate;
  double heading_rate;
  double speed_rate;
};

inline StateDerivative derivative(const VehicleState& z, const ControlInput& u,
                                  const ModelParams& m) {
  return {{z.speed * std::cos(z.heading), z.speed * std::sin(z.heading)},
          m.alpha * u.spin,
          m.beta * (u.throttle * m.v_max - z.speed)};
}

/// One forward-Euler step z + T zdot, heading re-wrapped.
inline VehicleState euler_step(const VehicleState& z, const ControlInput& u,
                               const ModelParams& m) {
  const auto d = derivative(z, u, m);
  const double t = m.sampling_time;
  return {z.position + t * d.position_rate, wrap_angle(z.heading + t * d.heading_rate),
          z.speed + t * d.speed_rate};
}

/// Applies `steps` Euler steps holding `u` constant.
inline VehicleState rollout(VehicleState z, const ControlInput& u,
                            const ModelParams& m, int steps) {
  if (steps < 0) throw std::invalid_argument("rollout: negative step count");
  for (int i = 0; i < steps; ++i) z = euler_step(z, u, m);
  return z;
}

namespace detail {

// Packed-state Euler step used by the transcribed problems; `c` and `s` are
// cos and sin of z[2].
inline Eigen::Vector4d euler_step(const Eigen::Vector4d& z, double c, double s,
                                  double throttle, double spin, const ModelParams& m) {
  const double t = m.sampling_time;
  Eigen::Vector4d next;
  next[0] = z[0] + t * z[3] * c;
  next[1] = z[1] + t * z[3] * s;
  next[2] = wrap_angle(z[2] + t * m.alpha * spin);
  next[3] = z[3] + t * m.beta * (throttle * m.v_max - z[3]);
  return next;
}

inline Eigen::Vector4d euler_step(const Eigen::Vector4d& z, double throttle,
                                  double spin, const ModelParams& m) {
  return euler_step(z, std::cos(z[2]), std::sin(z[2]), throttle, spin, m);
}

// Pulls the adjoint of z_{k+1} back through one Euler step taken from z
// (c, s = cos, sin of z[2]). Returns the adjoint of z and accumulates the
// input sensitivities.
inline Eigen::Vector4d euler_step_adjoint(const Eigen::Vector4d& z, double c, double s,
                                          const Eigen::Vector4d& adj_next,
                                          const ModelParams& m, double& grad_throttle,
                                          double& grad_spin) {
  const double t = m.sampling_time;
  Eigen::Vector4d adj = adj_next;
  adj[2] += t * z[3] * (c * adj_next[1] - s * adj_next[0]);
  adj[3] += t * (c * adj_next[0] + s * adj_next[1] - m.beta * adj_next[3]);
  grad_throttle += t * m.beta * m.v_max * adj_next[3];
  grad_spin += t * m.alpha * adj_next[2];
  return adj;
}

}  // namespace detail

}  // namespace hnmpc

#endif  // HNMPC_DYNAMICS_HPP
