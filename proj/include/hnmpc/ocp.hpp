#ifndef HNMPC_OCP_HPP
#define HNMPC_OCP_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hnmpc/dynamics.hpp"
#include "hnmpc/geometry.hpp"
#include "hnmpc/problem.hpp"
#include "hnmpc/trajectory.hpp"

namespace hnmpc {

struct ReferenceTarget {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double heading = 0.0;

  bool operator==(const ReferenceTarget&) const = default;
};

/// High-level (planning) weights, horizon and input bounds.
struct HcWeights {
  double q_c = 1.0;
  double q_theta = 0.0;
  double q_r = 0.01;
  double q_r_delta = 0.0;
  double q_s = 0.5;
  double q_s_delta = 0.0;
  double q_c_terminal = 20.0;
  double q_theta_terminal = 0.0;
  int horizon = 40;
  int substeps = 10;  // tau
  double r_max = 1.0;
  double s_max = 1.0;

  void validate() const {
    for (double q : {q_c, q_theta, q_r, q_r_delta, q_s, q_s_delta, q_c_terminal,
                     q_theta_terminal}) {
      if (!(q >= 0.0)) throw std::invalid_argument("hc: weights must be >= 0");
    }
    if (horizon < 2) throw std::invalid_argument("hc: horizon must be >= 2");
    if (substeps < 1) throw std::invalid_argument("hc: substeps must be >= 1");
    if (!(r_max > 0.0 && r_max <= 1.0) || !(s_max > 0.0 && s_max <= 1.0)) {
      throw std::invalid_argument("hc: r_max and s_max must lie in (0, 1]");
    }
  }
};

/// Low-level (tracking) weights, horizon, emphasised stage and bounds.
struct LcWeights {
  double q_c = 100.0;
  double q_theta = 0.0;
  double q_r = 0.01;
  double q_r_delta = 0.0;
  double q_s = 0.1;
  double q_s_delta = 0.0;
  double q_c_omega = 1000.0;
  double q_theta_omega = 0.0;
  double q_c_terminal = 100.0;
  double q_theta_terminal = 0.0;
  int horizon = 100;
  int omega = 20;
  double r_max = 1.0;
  double s_max = 1.0;

  void validate(int substeps) const {
    for (double q : {q_c, q_theta, q_r, q_r_delta, q_s, q_s_delta, q_c_omega,
                     q_theta_omega, q_c_terminal, q_theta_terminal}) {
      if (!(q >= 0.0)) throw std::invalid_argument("lc: weights must be >= 0");
    }
    if (horizon < 1) throw std::invalid_argument("lc: horizon must be >= 1");
    if (omega < 0 || omega > horizon - 1) {
      throw std::invalid_argument("lc: omega must lie in [0, horizon - 1]");
    }
    if (substeps < 1 || omega % substeps != 0) {
      throw std::invalid_argument("lc: omega must be a multiple of substeps");
    }
    if (!(r_max > 0.0 && r_max <= 1.0) || !(s_max > 0.0 && s_max <= 1.0)) {
      throw std::invalid_argument("lc: r_max and s_max must lie in (0, 1]");
    }
  }
};

/// Planning stage tracked by tracking stage k: max{1, ceil(k / tau)}.
inline int carrot_index(int k, int tau) {
  if (k < 0 || tau < 1) throw std::invalid_argument("carrot_index: k >= 0, tau >= 1");
  return std::max(1, (k + tau - 1) / tau);
}

namespace detail {

inline double input_cost(double q_r, double q_r_delta, double q_s, double q_s_delta,
                         const ControlInput& u, const ControlInput& u_prev) {
  const double dr = u.throttle - u_prev.throttle;
  const double ds = u.spin - u_prev.spin;
  return q_r * u.throttle * u.throttle + q_r_delta * dr * dr +
         q_s * u.spin * u.spin + q_s_delta * ds * ds;
}

inline double pose_cost(double q_c, double q_theta, const Eigen::Vector2d& position,
                        double heading, const Eigen::Vector2d& ref_position,
                        double ref_heading) {
  const double dtheta = wrap_angle(heading - ref_heading);
  return q_c * (position - ref_position).squaredNorm() + q_theta * dtheta * dtheta;
}

// Dual q-norm of a 2-vector and its gradient, with a fast path for q = 1.5
// (p = 3).
class DualNorm {
 public:
  explicit DualNorm(double q) : q_(q), fast_(q == 1.5) {}

  double value(const Eigen::Vector2d& w) const {
    if (fast_) {
      const double a = std::abs(w.x());
      const double b = std::abs(w.y());
      const double sum = a * std::sqrt(a) + b * std::sqrt(b);
      return std::cbrt(sum * sum);
    }
    return pnorm(w, q_);
  }

  Eigen::Vector2d gradient(const Eigen::Vector2d& w, double norm) const {
    if (!(norm > 0.0)) return Eigen::Vector2d::Zero();
    if (fast_) {
      const double inv = 1.0 / std::sqrt(norm);
      return {std::copysign(std::sqrt(std::abs(w.x())), w.x()) * inv,
              std::copysign(std::sqrt(std::abs(w.y())), w.y()) * inv};
    }
    return pnorm_gradient(w, q_);
  }

 private:
  double q_;
  bool fast_;
};

}  // namespace detail

/// Planning stage cost; zero on odd stages.
inline double hc_stage_cost(int t, const VehicleState& z, const ControlInput& u,
                            const ControlInput& u_prev, const HcWeights& w,
                            const ReferenceTarget& ref) {
  if (t < 0 || t > w.horizon - 1) throw std::invalid_argument("hc_stage_cost: bad stage");
  if (t % 2 == 1) return 0.0;
  return detail::pose_cost(w.q_c, w.q_theta, z.position, z.heading, ref.position,
                           ref.heading) +
         detail::input_cost(w.q_r, w.q_r_delta, w.q_s, w.q_s_delta, u, u_prev);
}

inline double hc_terminal_cost(const VehicleState& z, const HcWeights& w,
                               const ReferenceTarget& ref) {
  return detail::pose_cost(w.q_c_terminal, w.q_theta_terminal, z.position, z.heading,
                           ref.position, ref.heading);
}

/// Plan stage followed by tracking stage k of a plan that is `plan_age`
/// tracking periods old, clamped to the plan horizon.
inline int lc_plan_stage(int k, int tau, int plan_age, int plan_horizon) {
  return std::min(plan_horizon, carrot_index(k + plan_age, tau));
}

inline double lc_stage_cost(int k, const VehicleState& z, const ControlInput& u,
                            const ControlInput& u_prev, const Trajectory& plan,
                            const LcWeights& w, int tau, int plan_age = 0) {
  if (k < 0 || k > w.horizon - 1) throw std::invalid_argument("lc_stage_cost: bad stage");
  const auto& target = plan.at_stage(static_cast<std::size_t>(
      lc_plan_stage(k, tau, plan_age, static_cast<int>(plan.horizon()))));
  const bool emphasised = k == w.omega;
  return detail::pose_cost(emphasised ? w.q_c_omega : w.q_c,
                           emphasised ? w.q_theta_omega : w.q_theta, z.position,
                           z.heading, target.position, target.heading) +
         detail::input_cost(w.q_r, w.q_r_delta, w.q_s, w.q_s_delta, u, u_prev);
}

inline double lc_terminal_cost(const VehicleState& z, const Trajectory& plan,
                               const LcWeights& w, int tau, int plan_age = 0) {
  const auto& target = plan.at_stage(static_cast<std::size_t>(
      lc_plan_stage(w.horizon, tau, plan_age, static_cast<int>(plan.horizon()))));
  return detail::pose_cost(w.q_c_terminal, w.q_theta_terminal, z.position, z.heading,
                           target.position, target.heading);
}

/// Optional clearance reward. Each stage t >= 1 gets a variable
/// sigma_t in [0, distance] that every separation row of that stage must
/// also absorb, and the cost gains weight * (distance - sigma_t). Plans then
/// keep up to `distance` from every obstacle where there is room, centred
/// between obstacles where there is not, without changing feasibility.
struct Clearance {
  double distance = 0.0;  // m
  double weight = 100.0;  // cost per metre short of `distance`, per stage

  bool enabled() const { return distance > 0.0; }
  void validate() const {
    if (!(distance >= 0.0) || !(weight >= 0.0)) {
      throw std::invalid_argument("clearance: distance and weight must be >= 0");
    }
  }
};

/// Single-shooting planning problem. Decision layout:
///   [r_0, s_0, ..., r_{H-1}, s_{H-1}, a^(0)_0, ..., a^(0)_H, a^(1)_0, ...]
/// followed by sigma_0..sigma_H when a clearance is set. Constraint rows are
/// obstacle-major: row j (H+1) + t holds the separation margin of obstacle j
/// at stage t plus the backoff and sigma_t.
class HcModel final : public ProblemModel {
 public:
  HcModel(VehicleState initial, ReferenceTarget target,
          std::vector<Superellipsoid> obstacles, const Superellipsoid& vehicle,
          HcWeights weights, ModelParams params, ControlInput previous_input,
          double backoff = 0.0, Clearance clearance = {})
      : initial_(std::move(initial)),
        target_(std::move(target)),
        obstacles_(std::move(obstacles)),
        vehicle_axes_(vehicle.semi_axes()),
        w_(weights),
        m_(params),
        u_prev_(previous_input),
        backoff_(backoff),
        clearance_(clearance),
        norm_(vehicle.dual()) {
    for (const auto& e : obstacles_) {
      require_shared_exponent(vehicle, e);
      obstacle_rt_.push_back(e.rotation_matrix().transpose());
    }
  }

  int horizon() const { return w_.horizon; }
  std::size_t obstacle_count() const { return obstacles_.size(); }

  std::size_t dimension() const override {
    const auto h = static_cast<std::size_t>(w_.horizon);
    return 2 * h + obstacles_.size() * 2 * (h + 1) + (has_clearance() ? h + 1 : 0);
  }
  std::size_t constraint_count() const override {
    return obstacles_.size() * static_cast<std::size_t>(w_.horizon + 1);
  }

  static std::size_t input_offset(int t) { return 2 * static_cast<std::size_t>(t); }
  std::size_t axis_offset(std::size_t j, int t) const {
    const auto h = static_cast<std::size_t>(w_.horizon);
    return 2 * h + j * 2 * (h + 1) + 2 * static_cast<std::size_t>(t);
  }
  /// True when the decision vector ends with the clearance block.
  bool has_clearance() const { return clearance_.enabled() && !obstacles_.empty(); }
  std::size_t clearance_offset(int t) const {
    return axis_offset(obstacles_.size(), 0) + static_cast<std::size_t>(t);
  }
  const Clearance& clearance() const { return clearance_; }

  /// Fine Euler states, H * tau + 1 of them, for the inputs in `x`.
  std::vector<Eigen::Vector4d> fine_states(const Eigen::VectorXd& x) const {
    Rollout roll;
    forward(x, roll);
    return roll.states;
  }

  double evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double rho,
                  Eigen::VectorXd* grad) const override {
    const int h = w_.horizon;
    const int tau = w_.substeps;
    thread_local Rollout roll;
    thread_local std::vector<Eigen::Vector4d> source;
    forward(x, roll);
    auto stage = [&](int t) -> const Eigen::Vector4d& {
      return roll.states[static_cast<std::size_t>(t * tau)];
    };
    auto stage_trig = [&](int t) -> const Eigen::Vector2d& {
      return roll.trig[static_cast<std::size_t>(t * tau)];
    };
    auto input = [&](int t) {
      if (t < 0) return u_prev_;
      const auto i = static_cast<Eigen::Index>(input_offset(t));
      return ControlInput{x[i], x[i + 1]};
    };

    if (grad) {
      grad->setZero(x.size());
      source.assign(static_cast<std::size_t>(h + 1), Eigen::Vector4d::Zero());
    }

    double cost = 0.0;
    for (int t = 0; t < h; t += 2) {
      const auto& z = stage(t);
      const ControlInput u = input(t);
      const ControlInput up = input(t - 1);
      const Eigen::Vector2d dc = z.head<2>() - target_.position;
      const double dth = wrap_angle(z[2] - target_.heading);
      cost += w_.q_c * dc.squaredNorm() + w_.q_theta * dth * dth +
              detail::input_cost(w_.q_r, w_.q_r_delta, w_.q_s, w_.q_s_delta, u, up);
      if (grad) {
        auto& src = source[static_cast<std::size_t>(t)];
        src.head<2>() += 2.0 * w_.q_c * dc;
        src[2] += 2.0 * w_.q_theta * dth;
        const auto i = static_cast<Eigen::Index>(input_offset(t));
        const double dr = u.throttle - up.throttle;
        const double ds = u.spin - up.spin;
        (*grad)[i] += 2.0 * w_.q_r * u.throttle + 2.0 * w_.q_r_delta * dr;
        (*grad)[i + 1] += 2.0 * w_.q_s * u.spin + 2.0 * w_.q_s_delta * ds;
        if (t > 0) {
          (*grad)[i - 2] -= 2.0 * w_.q_r_delta * dr;
          (*grad)[i - 1] -= 2.0 * w_.q_s_delta * ds;
        }
      }
    }
    {
      const auto& z = stage(h);
      const Eigen::Vector2d dc = z.head<2>() - target_.position;
      const double dth = wrap_angle(z[2] - target_.heading);
      cost += w_.q_c_terminal * dc.squaredNorm() + w_.q_theta_terminal * dth * dth;
      if (grad) {
        auto& src = source[static_cast<std::size_t>(h)];
        src.head<2>() += 2.0 * w_.q_c_terminal * dc;
        src[2] += 2.0 * w_.q_theta_terminal * dth;
      }
    }
    if (has_clearance()) {
      for (int t = 1; t <= h; ++t) {
        const auto i = static_cast<Eigen::Index>(clearance_offset(t));
        cost += clearance_.weight * (clearance_.distance - x[i]);
        if (grad) (*grad)[i] -= clearance_.weight;
      }
    }

    if (rho > 0.0 && !obstacles_.empty()) {
      if (static_cast<std::size_t>(y.size()) != constraint_count()) {
        throw std::invalid_argument("HcModel: multiplier dimension mismatch");
      }
      for (std::size_t j = 0; j < obstacles_.size(); ++j) {
        for (int t = 0; t <= h; ++t) {
          const auto row = static_cast<Eigen::Index>(j * static_cast<std::size_t>(h + 1) +
                                                     static_cast<std::size_t>(t));
          const auto ai = static_cast<Eigen::Index>(axis_offset(j, t));
          const Eigen::Vector2d a = x.segment<2>(ai);
          Eigen::Vector4d dz;
          Eigen::Vector2d da;
          const double g = margin(stage(t), stage_trig(t), a, j,
                                  grad ? &dz : nullptr, grad ? &da : nullptr);
          const double shifted = g + padding(x, t) + y[row] / rho;
          if (shifted <= 0.0) continue;
          cost += 0.5 * rho * shifted * shifted;
          if (grad) {
            const double weight = rho * shifted;
            source[static_cast<std::size_t>(t)] += weight * dz;
            grad->segment<2>(ai) += weight * da;
            if (has_clearance()) {
              (*grad)[static_cast<Eigen::Index>(clearance_offset(t))] += weight;
            }
          }
        }
      }
    }

    if (grad) backward(roll, source, *grad);
    return cost;
  }

  Eigen::VectorXd constraints(const Eigen::VectorXd& x) const override {
    const int h = w_.horizon;
    Rollout roll;
    forward(x, roll);
    Eigen::VectorXd out(static_cast<Eigen::Index>(constraint_count()));
    for (std::size_t j = 0; j < obstacles_.size(); ++j) {
      for (int t = 0; t <= h; ++t) {
        const auto row = static_cast<Eigen::Index>(j * static_cast<std::size_t>(h + 1) +
                                                   static_cast<std::size_t>(t));
        const auto k = static_cast<std::size_t>(t * w_.substeps);
        out[row] = margin(roll.states[k], roll.trig[k],
                          x.segment<2>(static_cast<Eigen::Index>(axis_offset(j, t))), j,
                          nullptr, nullptr) +
                   padding(x, t);
      }
    }
    return out;
  }

 private:
  struct Rollout {
    std::vector<Eigen::Vector4d> states;
    std::vector<Eigen::Vector2d> trig;  // cos, sin of each state's heading
  };

  void forward(const Eigen::VectorXd& x, Rollout& roll) const {
    if (static_cast<std::size_t>(x.size()) != dimension()) {
      throw std::invalid_argument("HcModel: decision dimension mismatch");
    }
    const int h = w_.horizon;
    const int tau = w_.substeps;
    const auto count = static_cast<std::size_t>(h * tau + 1);
    roll.states.resize(count);
    roll.trig.resize(count);
    Eigen::Vector4d z = initial_.as_vector();
    std::size_t k = 0;
    for (int t = 0; t < h; ++t) {
      const auto i = static_cast<Eigen::Index>(input_offset(t));
      for (int sub = 0; sub < tau; ++sub) {
        const double c = std::cos(z[2]);
        const double s = std::sin(z[2]);
        roll.states[k] = z;
        roll.trig[k] = {c, s};
        z = detail::euler_step(z, c, s, x[i], x[i + 1], m_);
        ++k;
      }
    }
    roll.states[k] = z;
    roll.trig[k] = {std::cos(z[2]), std::sin(z[2])};
  }

  void backward(const Rollout& roll, const std::vector<Eigen::Vector4d>& source,
                Eigen::VectorXd& grad) const {
    const int h = w_.horizon;
    const int tau = w_.substeps;
    Eigen::Vector4d adj = source[static_cast<std::size_t>(h)];
    for (int t = h - 1; t >= 0; --t) {
      const auto i = static_cast<Eigen::Index>(input_offset(t));
      double gr = 0.0;
      double gs = 0.0;
      for (int sub = tau - 1; sub >= 0; --sub) {
        const auto k = static_cast<std::size_t>(t * tau + sub);
        adj = detail::euler_step_adjoint(roll.states[k], roll.trig[k].x(),
                                         roll.trig[k].y(), adj, m_, gr, gs);
      }
      grad[i] += gr;
      grad[i + 1] += gs;
      adj += source[static_cast<std::size_t>(t)];
    }
  }

  // Separation margin of the vehicle at packed state z against obstacle j.
  double margin(const Eigen::Vector4d& z, const Eigen::Vector2d& trig,
                const Eigen::Vector2d& a, std::size_t j, Eigen::Vector4d* dz,
                Eigen::Vector2d* da) const {
    const auto& e = obstacles_[j];
    const double c = trig.x();
    const double s = trig.y();
    const Eigen::Vector2d rta(c * a.x() + s * a.y(), -s * a.x() + c * a.y());
    const Eigen::Vector2d wv = vehicle_axes_.cwiseProduct(rta);
    const Eigen::Vector2d we = e.semi_axes().cwiseProduct(obstacle_rt_[j] * a);
    const double hv = norm_.value(wv);
    const double he = norm_.value(we);
    const Eigen::Vector2d offset = z.head<2>() - e.center();
    if (dz && da) {
      const Eigen::Vector2d gv = vehicle_axes_.cwiseProduct(norm_.gradient(wv, hv));
      const Eigen::Vector2d ge = e.semi_axes().cwiseProduct(norm_.gradient(we, he));
      const Eigen::Vector2d drta(-s * a.x() + c * a.y(), -c * a.x() - s * a.y());
      *dz << a.x(), a.y(), gv.dot(drta), 0.0;
      *da = Eigen::Vector2d(c * gv.x() - s * gv.y(), s * gv.x() + c * gv.y()) +
            obstacle_rt_[j].transpose() * ge + offset;
    }
    return hv + he + a.dot(offset);
  }

  VehicleState initial_;
  ReferenceTarget target_;
  std::vector<Superellipsoid> obstacles_;
  std::vector<Eigen::Matrix2d> obstacle_rt_;
  Eigen::Vector2d vehicle_axes_;
  HcWeights w_;
  ModelParams m_;
  ControlInput u_prev_;
  double backoff_;
  Clearance clearance_;
  detail::DualNorm norm_;

  // Amount added to every separation row at stage t.
  double padding(const Eigen::VectorXd& x, int t) const {
    return backoff_ +
           (has_clearance() ? x[static_cast<Eigen::Index>(clearance_offset(t))] : 0.0);
  }
};

/// Single-shooting tracking problem over [u_0 ... u_{L-1}] with no G1 rows.
class LcModel final : public ProblemModel {
 public:
  LcModel(VehicleState initial, const Trajectory& plan, LcWeights weights,
          ModelParams params, ControlInput previous_input, int tau, int plan_age)
      : initial_(std::move(initial)), w_(weights), m_(params), u_prev_(previous_input) {
    const int plan_h = static_cast<int>(plan.horizon());
    for (int k = 0; k <= w_.horizon; ++k) {
      const auto& target =
          plan.at_stage(static_cast<std::size_t>(lc_plan_stage(k, tau, plan_age, plan_h)));
      target_position_.push_back(target.position);
      target_heading_.push_back(target.heading);
    }
  }

  std::size_t dimension() const override { return 2 * static_cast<std::size_t>(w_.horizon); }
  std::size_t constraint_count() const override { return 0; }

  double evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd&, double,
                  Eigen::VectorXd* grad) const override {
    if (static_cast<std::size_t>(x.size()) != dimension()) {
      throw std::invalid_argument("LcModel: decision dimension mismatch");
    }
    const int l = w_.horizon;
    std::vector<Eigen::Vector4d> z(static_cast<std::size_t>(l + 1));
    z[0] = initial_.as_vector();
    for (int k = 0; k < l; ++k) {
      z[static_cast<std::size_t>(k + 1)] =
          detail::euler_step(z[static_cast<std::size_t>(k)], x[2 * k], x[2 * k + 1], m_);
    }
    std::vector<Eigen::Vector4d> source;
    if (grad) {
      grad->setZero(x.size());
      source.assign(static_cast<std::size_t>(l + 1), Eigen::Vector4d::Zero());
    }
    double cost = 0.0;
    for (int k = 0; k <= l; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const bool terminal = k == l;
      const bool emphasised = k == w_.omega;
      const double qc = terminal ? w_.q_c_terminal : emphasised ? w_.q_c_omega : w_.q_c;
      const double qt = terminal     ? w_.q_theta_terminal
                        : emphasised ? w_.q_theta_omega
                                     : w_.q_theta;
      const Eigen::Vector2d dc = z[ks].head<2>() - target_position_[ks];
      const double dth = wrap_angle(z[ks][2] - target_heading_[ks]);
      cost += qc * dc.squaredNorm() + qt * dth * dth;
      if (grad) {
        source[ks].head<2>() += 2.0 * qc * dc;
        source[ks][2] += 2.0 * qt * dth;
      }
      if (terminal) break;
      const ControlInput u{x[2 * k], x[2 * k + 1]};
      const ControlInput up = k == 0 ? u_prev_ : ControlInput{x[2 * k - 2], x[2 * k - 1]};
      cost += detail::input_cost(w_.q_r, w_.q_r_delta, w_.q_s, w_.q_s_delta, u, up);
      if (grad) {
        const double dr = u.throttle - up.throttle;
        const double ds = u.spin - up.spin;
        (*grad)[2 * k] += 2.0 * w_.q_r * u.throttle + 2.0 * w_.q_r_delta * dr;
        (*grad)[2 * k + 1] += 2.0 * w_.q_s * u.spin + 2.0 * w_.q_s_delta * ds;
        if (k > 0) {
          (*grad)[2 * k - 2] -= 2.0 * w_.q_r_delta * dr;
          (*grad)[2 * k - 1] -= 2.0 * w_.q_s_delta * ds;
        }
      }
    }
    if (grad) {
      Eigen::Vector4d adj = source[static_cast<std::size_t>(l)];
      for (int k = l - 1; k >= 0; --k) {
        double gr = 0.0;
        double gs = 0.0;
        const auto& zk = z[static_cast<std::size_t>(k)];
        adj = detail::euler_step_adjoint(zk, std::cos(zk[2]), std::sin(zk[2]), adj, m_,
                                         gr, gs);
        (*grad)[2 * k] += gr;
        (*grad)[2 * k + 1] += gs;
        adj += source[static_cast<std::size_t>(k)];
      }
    }
    return cost;
  }

  Eigen::VectorXd constraints(const Eigen::VectorXd&) const override {
    return Eigen::VectorXd();
  }

 private:
  VehicleState initial_;
  LcWeights w_;
  ModelParams m_;
  ControlInput u_prev_;
  std::vector<Eigen::Vector2d> target_position_;
  std::vector<double> target_heading_;
};

/// Unit vector from the vehicle centre toward the obstacle centre, (1, 0)
/// when they coincide.
inline Eigen::Vector2d center_direction(const Eigen::Vector2d& from,
                                        const Eigen::Vector2d& to) {
  return project_sphere_block(to - from, Eigen::Vector2d(1.0, 0.0));
}

/// Transcribes the planning problem. The vehicle argument supplies shape
/// only; its pose comes from `state`.
inline OcpProblem transcribe_hc(const VehicleState& state, const ReferenceTarget& target,
                                const std::vector<Superellipsoid>& obstacles,
                                const Superellipsoid& vehicle, const HcWeights& w,
                                const ModelParams& m,
                                const ControlInput& previous_input = {},
                                double backoff = 0.0, const Clearance& clearance = {}) {
  w.validate();
  m.validate();
  if (!state.position.allFinite() || !std::isfinite(state.heading) ||
      !std::isfinite(state.speed)) {
    throw std::invalid_argument("transcribe_hc: state must be finite");
  }
  if (!(backoff >= 0.0)) throw std::invalid_argument("transcribe_hc: backoff must be >= 0");
  clearance.validate();
  auto model = std::make_shared<HcModel>(state, target, obstacles, vehicle, w, m,
                                         previous_input, backoff, clearance);
  OcpProblem problem{model, FeasibleSet(model->dimension())};
  for (int t = 0; t < w.horizon; ++t) {
    const auto i = HcModel::input_offset(t);
    problem.set.set_box(i, -w.r_max, w.r_max);
    problem.set.set_box(i + 1, -w.s_max, w.s_max);
  }
  for (std::size_t j = 0; j < obstacles.size(); ++j) {
    const Eigen::Vector2d fallback = center_direction(state.position, obstacles[j].center());
    for (int t = 0; t <= w.horizon; ++t) {
      problem.set.add_sphere(model->axis_offset(j, t), fallback);
    }
  }
  if (model->has_clearance()) {
    problem.set.set_box(model->clearance_offset(0), 0.0, 0.0);
    for (int t = 1; t <= w.horizon; ++t) {
      problem.set.set_box(model->clearance_offset(t), 0.0, clearance.distance);
    }
  }
  return problem;
}

inline OcpProblem transcribe_lc(const VehicleState& state, const Trajectory& plan,
                                const LcWeights& w, const ModelParams& m,
                                const ControlInput& previous_input, int tau,
                                int plan_age = 0) {
  w.validate(tau);
  m.validate();
  if (plan.states.empty()) throw std::invalid_argument("transcribe_lc: empty plan");
  if (carrot_index(w.horizon, tau) > static_cast<int>(plan.horizon())) {
    throw std::invalid_argument("transcribe_lc: plan has " +
                                std::to_string(plan.states.size()) +
                                " states, tracking horizon needs stage " +
                                std::to_string(carrot_index(w.horizon, tau)));
  }
  auto model = std::make_shared<LcModel>(state, plan, w, m, previous_input, tau, plan_age);
  OcpProblem problem{model, FeasibleSet(model->dimension())};
  for (int k = 0; k < w.horizon; ++k) {
    problem.set.set_box(static_cast<std::size_t>(2 * k), -w.r_max, w.r_max);
    problem.set.set_box(static_cast<std::size_t>(2 * k + 1), -w.s_max, w.s_max);
  }
  return problem;
}

}  // namespace hnmpc

#endif  // HNMPC_OCP_HPP
