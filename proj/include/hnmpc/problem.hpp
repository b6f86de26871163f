#ifndef HNMPC_PROBLEM_HPP
#define HNMPC_PROBLEM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace hnmpc {

/// Elementwise clamp of `x` onto [lo, hi].
inline Eigen::VectorXd project_box(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& lo,
                                   const Eigen::VectorXd& hi) {
  if (x.size() != lo.size() || x.size() != hi.size()) {
    throw std::invalid_argument("project_box: dimension mismatch");
  }
  return x.cwiseMax(lo).cwiseMin(hi);
}

inline constexpr double kSphereDegeneracy = 1e-12;

/// Nearest point of the unit circle; `fallback` when `a` is (near) zero.
inline Eigen::Vector2d project_sphere_block(const Eigen::Vector2d& a,
                                           const Eigen::Vector2d& fallback) {
  const double n = a.norm();
  if (n > kSphereDegeneracy) return a / n;
  return fallback;
}

/// Two consecutive coordinates constrained to the unit circle.
struct SphereBlock {
  std::size_t offset;
  Eigen::Vector2d fallback;
};

/// Product set of per-coordinate boxes and unit-circle blocks. Coordinates
/// inside a sphere block carry an unbounded box.
class FeasibleSet {
 public:
  FeasibleSet() = default;
  explicit FeasibleSet(std::size_t dimension)
      : lower_(Eigen::VectorXd::Constant(
            static_cast<Eigen::Index>(dimension),
            -std::numeric_limits<double>::infinity())),
        upper_(Eigen::VectorXd::Constant(
            static_cast<Eigen::Index>(dimension),
            std::numeric_limits<double>::infinity())) {}

  std::size_t dimension() const { return static_cast<std::size_t>(lower_.size()); }

  void set_box(std::size_t index, double lo, double hi) {
    if (index >= dimension() || !(lo <= hi)) {
      throw std::invalid_argument("set_box: bad index or empty interval");
    }
    lower_[static_cast<Eigen::Index>(index)] = lo;
    upper_[static_cast<Eigen::Index>(index)] = hi;
  }

  void add_sphere(std::size_t offset, const Eigen::Vector2d& fallback) {
    if (offset + 2 > dimension()) {
      throw std::invalid_argument("add_sphere: block exceeds dimension");
    }
    if (std::abs(fallback.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("add_sphere: fallback must be a unit vector");
    }
    spheres_.push_back({offset, fallback});
  }

  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const std::vector<SphereBlock>& spheres() const { return spheres_; }

  void project_in_place(Eigen::VectorXd& x) const {
    x = x.cwiseMax(lower_).cwiseMin(upper_);
    for (const auto& block : spheres_) {
      const auto i = static_cast<Eigen::Index>(block.offset);
      const Eigen::Vector2d a = project_sphere_block(x.segment<2>(i), block.fallback);
      x.segment<2>(i) = a;
    }
  }

  Eigen::VectorXd project(Eigen::VectorXd x) const {
    project_in_place(x);
    return x;
  }

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  std::vector<SphereBlock> spheres_;
};

/// Smooth cost g with a constraint map G1 whose target set is the
/// nonpositive orthant.
class ProblemModel {
 public:
  virtual ~ProblemModel() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::size_t constraint_count() const = 0;

  /// Augmented value g(x) + (rho/2) * sum_i max(0, G_i(x) + y_i/rho)^2.
  /// With rho == 0 this is g(x) alone. Writes the gradient when `grad` is set.
  virtual double evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          double rho, Eigen::VectorXd* grad) const = 0;

  virtual Eigen::VectorXd constraints(const Eigen::VectorXd& x) const = 0;
};

/// Transcribed problem: minimize g(x) s.t. x in U, G1(x) <= 0.
struct OcpProblem {
  std::shared_ptr<const ProblemModel> model;
  FeasibleSet set;

  std::size_t dimension() const { return model->dimension(); }
  std::size_t constraint_count() const { return model->constraint_count(); }

  double cost(const Eigen::VectorXd& x) const {
    return model->evaluate(x, Eigen::VectorXd(), 0.0, nullptr);
  }
  double cost(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    return model->evaluate(x, Eigen::VectorXd(), 0.0, &grad);
  }
  Eigen::VectorXd constraints(const Eigen::VectorXd& x) const {
    return model->constraints(x);
  }
};

}  // namespace hnmpc

#endif  // HNMPC_PROBLEM_HPP
