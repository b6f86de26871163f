#ifndef HNMPC_TRAJECTORY_HPP
#define HNMPC_TRAJECTORY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hnmpc/dynamics.hpp"

namespace hnmpc {

/// Planned states z*_0..z*_H spaced `stage_period` apart. `fine_states`
/// optionally holds the intermediate Euler states every `fine_period`.
struct Trajectory {
  std::vector<VehicleState> states;
  std::vector<VehicleState> fine_states;
  // Input held over each stage interval, when known.
  std::vector<ControlInput> inputs;
  double stage_period = 1.0;
  double fine_period = 0.1;
  long id = 0;
  double created_at = 0.0;  // simulated seconds
  // Diagnostics of the run that produced the plan.
  double cost = 0.0;
  double infeasibility = 0.0;
  double runtime_ms = 0.0;
  bool emergency = false;

  std::size_t horizon() const { return states.empty() ? 0 : states.size() - 1; }

  const VehicleState& at_stage(std::size_t t) const {
    if (states.empty()) throw std::out_of_range("empty trajectory");
    return states[std::min(t, horizon())];
  }

  /// Dense polyline used for interpolation: fine states when present.
  const std::vector<VehicleState>& path() const {
    return fine_states.empty() ? states : fine_states;
  }
  double path_period() const {
    return fine_states.empty() ? stage_period : fine_period;
  }

  /// Planned position `elapsed` seconds after creation, linearly
  /// interpolated and held at the ends.
  Eigen::Vector2d position_at(double elapsed) const {
    const auto& pts = path();
    if (pts.empty()) throw std::out_of_range("empty trajectory");
    const double u = std::max(0.0, elapsed / path_period());
    const auto i = static_cast<std::size_t>(std::floor(u));
    if (i + 1 >= pts.size()) return pts.back().position;
    const double frac = u - static_cast<double>(i);
    return (1.0 - frac) * pts[i].position + frac * pts[i + 1].position;
  }

  /// Euclidean distance from `point` to the piecewise-linear planned path.
  double distance_to_path(const Eigen::Vector2d& point) const {
    const auto& pts = path();
    if (pts.empty()) throw std::out_of_range("empty trajectory");
    double best = (point - pts.front().position).norm();
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const Eigen::Vector2d a = pts[i].position;
      const Eigen::Vector2d ab = pts[i + 1].position - a;
      const double len2 = ab.squaredNorm();
      double t = len2 > 0.0 ? (point - a).dot(ab) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      best = std::min(best, (point - (a + t * ab)).norm());
    }
    return best;
  }
};

}  // namespace hnmpc

#endif  // HNMPC_TRAJECTORY_HPP
