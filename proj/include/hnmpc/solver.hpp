#ifndef HNMPC_SOLVER_HPP
#define HNMPC_SOLVER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hnmpc/problem.hpp"

namespace hnmpc {

using Clock = std::chrono::steady_clock;

enum class InnerMethod {
  kProjectedGradient,  // monotone in the cost
  kPanoc,              // monotone in the forward-backward envelope
};

struct SolverConfig {
  InnerMethod method = InnerMethod::kPanoc;
  double tolerance = 1e-4;              // inner gradient-mapping norm
  double alm_tolerance = 1e-4;          // outer: ||y+ - y||_inf <= delta * rho
  double infeasibility_factor = 1e-3;   // acceptance gate kappa
  double initial_penalty = 10.0;
  double penalty_growth = 5.0;
  double max_penalty = 1e9;
  double initial_inner_tolerance = 1e-4;  // inner tolerance of the first outer pass
  int max_inner_iterations = 5000;
  int max_outer_iterations = 20;
  int lbfgs_memory = 150;
  double time_budget_ms = 900.0;

  void validate() const {
    if (!(tolerance > 0.0) || !(alm_tolerance > 0.0) ||
        !(infeasibility_factor > 0.0)) {
      throw std::invalid_argument("solver: tolerances must be positive");
    }
    if (alm_tolerance > infeasibility_factor) {
      throw std::invalid_argument(
          "solver: alm_tolerance must not exceed infeasibility_factor");
    }
    if (!(penalty_growth > 1.0) || !(initial_penalty > 0.0) ||
        !(max_penalty >= initial_penalty)) {
      throw std::invalid_argument("solver: need penalty_growth > 1, penalties > 0");
    }
    if (!(initial_inner_tolerance >= tolerance)) {
      throw std::invalid_argument(
          "solver: initial_inner_tolerance must be >= tolerance");
    }
    if (max_inner_iterations <= 0 || max_outer_iterations <= 0 || lbfgs_memory < 0 ||
        !(time_budget_ms >= 0.0)) {
      throw std::invalid_argument("solver: budgets must be positive");
    }
  }

  Clock::time_point deadline_from(Clock::time_point start) const {
    return start + std::chrono::duration_cast<Clock::duration>(
                       std::chrono::duration<double, std::milli>(time_budget_ms));
  }
};

/// f(x) with the gradient written to `grad` when non-null.
using SmoothFunction = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct InnerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool timed_out = false;
};

struct InnerOptions {
  InnerMethod method = InnerMethod::kPanoc;
  double tolerance = 1e-4;
  int max_iterations = 5000;
  int lbfgs_memory = 150;
  std::optional<Clock::time_point> deadline;
  // Accepted merit values in order: the cost for projected gradient, the
  // forward-backward envelope for PANOC.
  std::vector<double>* trace = nullptr;
};

namespace detail {

// Local Lipschitz estimate of the gradient from a small perturbation.
inline double estimate_lipschitz(const SmoothFunction& f, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& g) {
  Eigen::VectorXd delta = (1e-6 * x.cwiseAbs()).cwiseMax(1e-6);
  Eigen::VectorXd gp(x.size());
  f(x + delta, &gp);
  const double l = (gp - g).norm() / delta.norm();
  return std::clamp(std::isfinite(l) ? l : 1.0, 1e-6, 1e12);
}

inline bool out_of_time(const InnerOptions& opt) {
  return opt.deadline && Clock::now() >= *opt.deadline;
}

// Limited-memory inverse-Hessian approximation with the usual curvature
// safeguard.
class Lbfgs {
 public:
  explicit Lbfgs(int memory) : memory_(static_cast<std::size_t>(memory)) {}

  void reset() {
    s_.clear();
    y_.clear();
    rho_.clear();
  }

  void update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    if (memory_ == 0) return;
    const double sy = s.dot(y);
    if (!(sy > 1e-12 * s.squaredNorm()) || !std::isfinite(sy)) return;
    if (s_.size() == memory_) {
      s_.erase(s_.begin());
      y_.erase(y_.begin());
      rho_.erase(rho_.begin());
    }
    s_.push_back(s);
    y_.push_back(y);
    rho_.push_back(1.0 / sy);
  }

  // Two-loop recursion; returns H q. Identity when empty.
  Eigen::VectorXd apply(Eigen::VectorXd q) const {
    const std::size_t k = s_.size();
    if (k == 0) return q;
    std::vector<double> alpha(k);
    for (std::size_t i = k; i-- > 0;) {
      alpha[i] = rho_[i] * s_[i].dot(q);
      q -= alpha[i] * y_[i];
    }
    q *= s_[k - 1].dot(y_[k - 1]) / y_[k - 1].squaredNorm();
    for (std::size_t i = 0; i < k; ++i) {
      const double beta = rho_[i] * y_[i].dot(q);
      q += (alpha[i] - beta) * s_[i];
    }
    return q;
  }

 private:
  std::size_t memory_;
  std::vector<Eigen::VectorXd> s_;
  std::vector<Eigen::VectorXd> y_;
  std::vector<double> rho_;
};

}  // namespace detail

/// Projected gradient with Barzilai-Borwein step proposals and monotone
/// backtracking on the projection arc:
///   x+ = P(x - lambda g),  accepted when f(x+) <= f(x) - sigma/lambda ||x+ - x||^2.
/// Stops when ||x - P(x - lambda g)||_inf / lambda <= tolerance.
inline InnerResult projected_gradient_solve(const SmoothFunction& f,
                                            const FeasibleSet& set,
                                            const Eigen::VectorXd& x0,
                                            const InnerOptions& opt) {
  constexpr double kSigma = 1e-4;
  constexpr int kMaxBacktracks = 60;
  InnerResult result;
  Eigen::VectorXd x = set.project(x0);
  Eigen::VectorXd g(x.size());
  double fx = f(x, &g);
  if (opt.trace) opt.trace->push_back(fx);
  double step = 0.95 / detail::estimate_lipschitz(f, x, g);

  Eigen::VectorXd x_new(x.size());
  Eigen::VectorXd g_new(x.size());
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (detail::out_of_time(opt)) {
      result.timed_out = true;
      break;
    }
    double f_new = fx;
    double d_inf = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      x_new = x - step * g;
      set.project_in_place(x_new);
      const Eigen::VectorXd d = x_new - x;
      d_inf = d.lpNorm<Eigen::Infinity>();
      if (d_inf == 0.0) {
        accepted = true;
        break;
      }
      f_new = f(x_new, nullptr);
      if (std::isfinite(f_new) && f_new <= fx - kSigma / step * d.squaredNorm()) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    result.residual = d_inf / step;
    if (!accepted) break;
    if (d_inf == 0.0) {
      result.converged = true;
      break;
    }
    f(x_new, &g_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    if (opt.trace) opt.trace->push_back(fx);
    if (result.residual <= opt.tolerance) {
      result.converged = true;
      ++it;
      break;
    }
    const double sy = s.dot(yv);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e6)
                    : std::min(step * 4.0, 1e6);
  }
  result.iterations = it;
  result.x = std::move(x);
  result.value = fx;
  return result;
}

/// Proximal averaged Newton-type method: forward-backward steps
///   xbar = P(x - gamma grad f(x))
/// safeguarded by a line search on the forward-backward envelope
///   phi(x) = f(x) - <grad f(x), x - xbar> + ||x - xbar||^2 / (2 gamma)
/// that blends the plain step with an L-BFGS step on the fixed-point
/// residual x - xbar. Returns the last forward-backward point, which lies in
/// the feasible set.
inline InnerResult panoc_solve(const SmoothFunction& f, const FeasibleSet& set,
                               const Eigen::VectorXd& x0, const InnerOptions& opt) {
  constexpr double kGammaCoeff = 0.95;
  constexpr int kMaxLineSearch = 12;
  const Eigen::Index n = x0.size();
  InnerResult result;
  detail::Lbfgs lbfgs(opt.lbfgs_memory);

  Eigen::VectorXd x = x0;
  Eigen::VectorXd g(n);
  double fx = f(x, &g);
  double lip = detail::estimate_lipschitz(f, x, g);
  double gamma = kGammaCoeff / lip;

  Eigen::VectorXd xbar(n);
  double fbar = 0.0;
  // Forward-backward step at x with the Lipschitz backtracking safeguard.
  auto half_step = [&] {
    for (int guard = 0; guard < 60; ++guard) {
      xbar = x - gamma * g;
      set.project_in_place(xbar);
      const Eigen::VectorXd r = x - xbar;
      fbar = f(xbar, nullptr);
      const double bound = fx - g.dot(r) + 0.5 * lip * r.squaredNorm() +
                           1e-12 * std::abs(fx);
      if (fbar <= bound || !std::isfinite(fx)) return false;
      lip *= 2.0;
      gamma = kGammaCoeff / lip;
      lbfgs.reset();
    }
    return true;
  };
  half_step();
  Eigen::VectorXd r = x - xbar;
  auto envelope = [&] { return fx - g.dot(r) + r.squaredNorm() / (2.0 * gamma); };
  double phi = envelope();
  if (opt.trace) opt.trace->push_back(phi);

  Eigen::VectorXd x_prev(n);
  Eigen::VectorXd r_prev(n);
  Eigen::VectorXd x_try(n);
  Eigen::VectorXd g_try(n);
  bool have_prev = false;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    result.residual = r.lpNorm<Eigen::Infinity>() / gamma;
    if (result.residual <= opt.tolerance) {
      result.converged = true;
      break;
    }
    if (detail::out_of_time(opt)) {
      result.timed_out = true;
      break;
    }
    if (have_prev) lbfgs.update(x - x_prev, r - r_prev);
    const Eigen::VectorXd direction = lbfgs.apply(r);
    const double sigma = (1.0 - kGammaCoeff) / (4.0 * gamma);
    const double required = phi - sigma * r.squaredNorm();

    x_prev = x;
    r_prev = r;
    have_prev = true;
    double tau = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < kMaxLineSearch; ++ls, tau *= 0.5) {
      x_try = x - (1.0 - tau) * r - tau * direction;
      const double f_try = f(x_try, &g_try);
      if (!std::isfinite(f_try)) continue;
      const Eigen::VectorXd xbar_try = set.project(x_try - gamma * g_try);
      const Eigen::VectorXd r_try = x_try - xbar_try;
      const double phi_try =
          f_try - g_try.dot(r_try) + r_try.squaredNorm() / (2.0 * gamma);
      if (phi_try <= required) {
        x = x_try;
        g = g_try;
        fx = f_try;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Plain forward-backward step; always decreases the envelope.
      x = xbar;
      fx = f(x, &g);
    }
    const double gamma_before = gamma;
    half_step();
    if (gamma != gamma_before) have_prev = false;
    r = x - xbar;
    phi = envelope();
    if (opt.trace) opt.trace->push_back(phi);
  }
  result.iterations = it;
  result.x = xbar;
  result.value = fbar;
  return result;
}

inline InnerResult inner_solve(const SmoothFunction& f, const FeasibleSet& set,
                               const Eigen::VectorXd& x0, const InnerOptions& opt) {
  return opt.method == InnerMethod::kPanoc ? panoc_solve(f, set, x0, opt)
                                           : projected_gradient_solve(f, set, x0, opt);
}

/// Minimizes the plain cost of `problem` over its feasible set.
inline InnerResult inner_solve(const OcpProblem& problem, const Eigen::VectorXd& x0,
                               const SolverConfig& cfg) {
  InnerOptions opt;
  opt.method = cfg.method;
  opt.tolerance = cfg.tolerance;
  opt.max_iterations = cfg.max_inner_iterations;
  opt.lbfgs_memory = cfg.lbfgs_memory;
  opt.deadline = cfg.deadline_from(Clock::now());
  const auto& model = *problem.model;
  const Eigen::VectorXd none;
  return inner_solve(
      [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        return model.evaluate(x, none, 0.0, grad);
      },
      problem.set, x0, opt);
}

struct SolverRun {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;
  double penalty = 0.0;
  int inner_iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
  bool timed_out = false;
  double infeasibility = 0.0;  // ||y+ - y||_inf at the last multiplier update
  double cost = 0.0;
  double wall_ms = 0.0;
};

/// Acceptance gate: successive multiplier estimates differ by at most
/// kappa times the current penalty.
inline bool passes_infeasibility_gate(const SolverRun& run, double kappa) {
  return std::isfinite(run.infeasibility) && run.infeasibility <= kappa * run.penalty;
}

/// Augmented Lagrangian outer loop around `inner_solve` for G1(x) <= 0.
inline SolverRun alm_solve(const OcpProblem& problem, const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& y0, const SolverConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  const auto deadline = cfg.deadline_from(start);
  const auto& model = *problem.model;
  const auto m = static_cast<Eigen::Index>(model.constraint_count());
  if (static_cast<std::size_t>(x0.size()) != model.dimension()) {
    throw std::invalid_argument("alm_solve: initial guess has wrong dimension");
  }

  SolverRun run;
  run.x = x0;
  run.multipliers = Eigen::VectorXd::Zero(m);
  if (y0.size() == m) run.multipliers = y0.cwiseMax(0.0);
  double rho = cfg.initial_penalty;
  double inner_tol = cfg.initial_inner_tolerance;

  for (int outer = 0; outer < cfg.max_outer_iterations; ++outer) {
    InnerOptions opt;
    opt.method = cfg.method;
    opt.tolerance = m == 0 ? cfg.tolerance : inner_tol;
    opt.max_iterations = cfg.max_inner_iterations;
    opt.lbfgs_memory = cfg.lbfgs_memory;
    opt.deadline = deadline;
    const Eigen::VectorXd& y = run.multipliers;
    const double penalty = m == 0 ? 0.0 : rho;
    auto inner = inner_solve(
        [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
          return model.evaluate(x, y, penalty, grad);
        },
        problem.set, run.x, opt);
    run.x = std::move(inner.x);
    run.inner_iterations += inner.iterations;
    run.outer_iterations = outer + 1;
    run.penalty = rho;
    run.timed_out = inner.timed_out;

    if (m == 0) {
      run.infeasibility = 0.0;
      run.converged = inner.converged;
      break;
    }
    const Eigen::VectorXd g1 = model.constraints(run.x);
    Eigen::VectorXd y_next = (rho * g1 + run.multipliers).cwiseMax(0.0);
    run.infeasibility = (y_next - run.multipliers).lpNorm<Eigen::Infinity>();
    run.multipliers = std::move(y_next);

    const bool inner_done = inner.converged && inner_tol <= cfg.tolerance;
    if (inner_done && run.infeasibility <= cfg.alm_tolerance * rho) {
      run.converged = true;
      break;
    }
    if (inner.timed_out || Clock::now() >= deadline) {
      run.timed_out = true;
      break;
    }
    if (run.infeasibility > cfg.alm_tolerance * rho) {
      rho = std::min(rho * cfg.penalty_growth, cfg.max_penalty);
    }
    inner_tol = std::max(cfg.tolerance, inner_tol * 0.1);
  }
  run.cost = problem.cost(run.x);
  run.wall_ms =
      std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  return run;
}

/// Largest relative gap between the exact gradient and central differences,
/// ||grad - fd||_inf / max(1, ||fd||_inf), over random feasible points. Both
/// the plain cost and the augmented cost (random y >= 0, rho = 10) are
/// checked.
inline double check_gradient(const OcpProblem& problem, int points,
                             std::uint64_t seed = 7, double step = 1e-6) {
  if (points < 1) throw std::invalid_argument("check_gradient: points >= 1");
  const auto& model = *problem.model;
  const auto n = static_cast<Eigen::Index>(model.dimension());
  const auto m = static_cast<Eigen::Index>(model.constraint_count());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> positive(0.0, 1.0);
  const auto& lo = problem.set.lower();
  const auto& hi = problem.set.upper();

  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isfinite(lo[i]) && std::isfinite(hi[i])) {
        x[i] = lo[i] + (hi[i] - lo[i]) * 0.5 * (unit(rng) + 1.0);
      } else {
        x[i] = unit(rng);
      }
    }
    x = problem.set.project(x);
    for (int variant = 0; variant < (m > 0 ? 2 : 1); ++variant) {
      Eigen::VectorXd y;
      double rho = 0.0;
      if (variant == 1) {
        y = Eigen::VectorXd::NullaryExpr(m, [&] { return positive(rng); });
        rho = 10.0;
      }
      Eigen::VectorXd grad(n);
      model.evaluate(x, y, rho, &grad);
      Eigen::VectorXd fd(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd xp = x;
        Eigen::VectorXd xm = x;
        xp[i] += step;
        xm[i] -= step;
        fd[i] = (model.evaluate(xp, y, rho, nullptr) -
                 model.evaluate(xm, y, rho, nullptr)) /
                (2.0 * step);
      }
      const double err = (grad - fd).lpNorm<Eigen::Infinity>() /
                         std::max(1.0, fd.lpNorm<Eigen::Infinity>());
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace hnmpc

#endif  // HNMPC_SOLVER_HPP
