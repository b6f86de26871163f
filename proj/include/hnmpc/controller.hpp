#ifndef HNMPC_CONTROLLER_HPP
#define HNMPC_CONTROLLER_HPP

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hnmpc/dynamics.hpp"
#include "hnmpc/geometry.hpp"
#include "hnmpc/ocp.hpp"
#include "hnmpc/problem.hpp"
#include "hnmpc/solver.hpp"
#include "hnmpc/trajectory.hpp"

namespace hnmpc {

/// Tracking period T, planning ratio tau (planning period tau T) and the
/// emphasised tracking stage omega.
struct ControllerTiming {
  double lc_period = 0.1;
  int ratio = 10;
  int omega = 20;

  double hc_period() const { return ratio * lc_period; }

  void validate(int hc_horizon, int lc_horizon) const {
    if (!(lc_period > 0.0)) throw std::invalid_argument("timing: lc_period must be > 0");
    if (ratio < 1) throw std::invalid_argument("timing: ratio must be >= 1");
    if (!(lc_horizon * lc_period < hc_horizon * hc_period())) {
      throw std::invalid_argument(
          "timing: tracking horizon must be shorter than the planning horizon");
    }
  }
};

/// Everything the controller needs besides the current state.
struct PlanningSetup {
  Superellipsoid vehicle{{0.0, 0.0}, 0.0, {2.0, 1.1}, 3.0};
  std::vector<Superellipsoid> obstacles;
  ReferenceTarget target;
  ModelParams model;
  HcWeights hc;
  LcWeights lc;
  ControllerTiming timing;
  // HC stops at a loose inner tolerance; the plan only needs to be feasible
  // and roughly optimal before LC refines it.
  SolverConfig hc_solver = [] {
    SolverConfig c;
    c.tolerance = 1.0;
    c.initial_inner_tolerance = 10.0;
    return c;
  }();
  SolverConfig lc_solver = [] {
    SolverConfig c;
    c.time_budget_ms = 90.0;
    return c;
  }();
  // Added to every separation row so that gate-passing plans keep a true
  // margin <= 0.
  double backoff = 1e-3;
  Clearance clearance{0.9, 100.0};
  double arrival_radius = 1.0;
  // Relative perturbation of alpha, beta and v_max in the simulated plant.
  double plant_mismatch = 0.0;

  /// Copy with the timing pushed into the model and weights.
  PlanningSetup synchronized() const {
    PlanningSetup s = *this;
    s.model.sampling_time = timing.lc_period;
    s.hc.substeps = timing.ratio;
    s.lc.omega = timing.omega;
    return s;
  }

  void validate() const {
    model.validate();
    hc.validate();
    lc.validate(hc.substeps);
    timing.validate(hc.horizon, lc.horizon);
    if (std::abs(model.sampling_time - timing.lc_period) > 1e-12 ||
        hc.substeps != timing.ratio || lc.omega != timing.omega) {
      throw std::invalid_argument("setup: timing disagrees with model or weights");
    }
    hc_solver.validate();
    lc_solver.validate();
    for (const auto& e : obstacles) require_shared_exponent(vehicle, e);
    if (!(backoff >= 0.0)) throw std::invalid_argument("setup: backoff must be >= 0");
    clearance.validate();
    if (!(arrival_radius > 0.0)) {
      throw std::invalid_argument("setup: arrival_radius must be > 0");
    }
    if (!(plant_mismatch >= 0.0 && plant_mismatch < 1.0)) {
      throw std::invalid_argument("setup: plant_mismatch must lie in [0, 1)");
    }
  }
};

/// Decision vector and multipliers of the last accepted planning run.
struct HcWarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;
};

struct HcDiagnostics {
  SolverRun a;
  std::optional<SolverRun> b;
  bool accepted = false;
  char winner = '-';  // 'A', 'B' or '-'
  bool emergency = false;
  double wall_ms = 0.0;
};

struct HcOutcome {
  // Active plan after this call: the new plan, the previous one on
  // rejection, or an emergency plan when there was none.
  Trajectory plan;
  std::optional<HcWarmStart> warm_start;
  HcDiagnostics diagnostics;
};

/// Index of the gate-passing run with the lowest cost, if any.
inline std::optional<std::size_t> select_run(const std::vector<const SolverRun*>& runs,
                                             double kappa) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i] || !passes_infeasibility_gate(*runs[i], kappa)) continue;
    if (!best || runs[i]->cost < runs[*best]->cost) best = i;
  }
  return best;
}

/// Receding-horizon shift of a planning solution: drop stage 0, repeat the
/// last stage, re-normalise the axes.
inline HcWarmStart shift_hc_solution(const HcWarmStart& prev, const HcModel& model,
                                     const FeasibleSet& set) {
  const int h = model.horizon();
  HcWarmStart out;
  out.x = prev.x;
  for (int t = 0; t + 1 < h; ++t) {
    out.x.segment<2>(HcModel::input_offset(t)) =
        prev.x.segment<2>(HcModel::input_offset(t + 1));
  }
  for (std::size_t j = 0; j < model.obstacle_count(); ++j) {
    for (int t = 0; t < h; ++t) {
      out.x.segment<2>(model.axis_offset(j, t)) =
          prev.x.segment<2>(model.axis_offset(j, t + 1));
    }
  }
  if (model.has_clearance()) {
    for (int t = 0; t < h; ++t) {
      out.x[static_cast<Eigen::Index>(model.clearance_offset(t))] =
          prev.x[static_cast<Eigen::Index>(model.clearance_offset(t + 1))];
    }
  }
  set.project_in_place(out.x);
  out.multipliers = prev.multipliers;
  if (out.multipliers.size() > 0) {
    const auto stages = static_cast<Eigen::Index>(h + 1);
    for (std::size_t j = 0; j < model.obstacle_count(); ++j) {
      const auto base = static_cast<Eigen::Index>(j) * stages;
      for (Eigen::Index t = 0; t + 1 < stages; ++t) {
        out.multipliers[base + t] = prev.multipliers[base + t + 1];
      }
    }
  }
  return out;
}

inline Trajectory trajectory_from_fine(const std::vector<Eigen::Vector4d>& fine, int tau,
                                       double fine_period) {
  Trajectory plan;
  plan.fine_period = fine_period;
  plan.stage_period = tau * fine_period;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const auto s = VehicleState::from_vector(fine[i]);
    plan.fine_states.push_back(s);
    if (i % static_cast<std::size_t>(tau) == 0) plan.states.push_back(s);
  }
  return plan;
}

/// Zero-input rollout over the planning horizon.
inline Trajectory emergency_plan(const VehicleState& state, const PlanningSetup& setup) {
  const int steps = setup.hc.horizon * setup.hc.substeps;
  std::vector<Eigen::Vector4d> fine;
  fine.reserve(static_cast<std::size_t>(steps + 1));
  VehicleState z = state;
  fine.push_back(z.as_vector());
  for (int i = 0; i < steps; ++i) {
    z = euler_step(z, ControlInput{}, setup.model);
    fine.push_back(z.as_vector());
  }
  auto plan = trajectory_from_fine(fine, setup.hc.substeps, setup.model.sampling_time);
  plan.emergency = true;
  return plan;
}

/// One planning cycle. Solver A starts cold with the axes pointing at each
/// obstacle; solver B, when `prev` is set, starts from its shifted solution.
inline HcOutcome hc_plan(const VehicleState& state, const PlanningSetup& setup,
                         const HcWarmStart* prev, const Trajectory* last_plan,
                         const ControlInput& previous_input = {}) {
  const auto start = Clock::now();
  const auto problem =
      transcribe_hc(state, setup.target, setup.obstacles, setup.vehicle, setup.hc,
                    setup.model, previous_input, setup.backoff, setup.clearance);
  const auto& model = static_cast<const HcModel&>(*problem.model);

  Eigen::VectorXd x_a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.dimension()));
  for (std::size_t j = 0; j < setup.obstacles.size(); ++j) {
    const Eigen::Vector2d axis = center_direction(state.position, setup.obstacles[j].center());
    for (int t = 0; t <= setup.hc.horizon; ++t) {
      x_a.segment<2>(model.axis_offset(j, t)) = axis;
    }
  }

  std::future<SolverRun> b_future;
  const bool run_b = prev && static_cast<std::size_t>(prev->x.size()) == problem.dimension();
  if (run_b) {
    const auto shifted = shift_hc_solution(*prev, model, problem.set);
    b_future = std::async(std::launch::async, [&problem, shifted, &setup] {
      return alm_solve(problem, shifted.x, shifted.multipliers, setup.hc_solver);
    });
  }
  HcOutcome out;
  out.diagnostics.a = alm_solve(problem, x_a, Eigen::VectorXd(), setup.hc_solver);
  if (run_b) out.diagnostics.b = b_future.get();

  const double kappa = setup.hc_solver.infeasibility_factor;
  const auto pick = select_run(
      {&out.diagnostics.a, out.diagnostics.b ? &*out.diagnostics.b : nullptr}, kappa);
  if (pick) {
    const SolverRun& run = *pick == 0 ? out.diagnostics.a : *out.diagnostics.b;
    out.diagnostics.winner = *pick == 0 ? 'A' : 'B';
    out.plan = trajectory_from_fine(model.fine_states(run.x), setup.hc.substeps,
                                    setup.model.sampling_time);
    for (int t = 0; t < setup.hc.horizon; ++t) {
      const auto i = static_cast<Eigen::Index>(HcModel::input_offset(t));
      out.plan.inputs.push_back({run.x[i], run.x[i + 1]});
    }
    out.plan.cost = run.cost;
    out.plan.infeasibility = run.infeasibility;
    out.warm_start = HcWarmStart{run.x, run.multipliers};
    out.diagnostics.accepted = true;
  } else if (last_plan) {
    out.plan = *last_plan;
  } else {
    out.plan = emergency_plan(state, setup);
    out.diagnostics.emergency = true;
  }
  out.diagnostics.wall_ms =
      std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  if (out.diagnostics.accepted) out.plan.runtime_ms = out.diagnostics.wall_ms;
  return out;
}

struct LcOutcome {
  ControlInput input;
  Eigen::VectorXd solution;  // for the next warm start
  bool timed_out = false;
  double wall_ms = 0.0;
  SolverRun run;
};

/// Tracking step: solves from `warm` shifted by one stage and returns the
/// first input, or (0, 0) when the solve overruns its budget.
inline LcOutcome lc_control(const VehicleState& state, const Trajectory& plan,
                            int plan_age, const PlanningSetup& setup,
                            const Eigen::VectorXd& warm,
                            const ControlInput& previous_input) {
  const auto problem = transcribe_lc(state, plan, setup.lc, setup.model, previous_input,
                                     setup.hc.substeps, plan_age);
  const auto n = static_cast<Eigen::Index>(problem.dimension());
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  if (warm.size() == n && n >= 2) {
    x0.head(n - 2) = warm.tail(n - 2);
    x0.tail(2) = warm.tail(2);
  }
  x0 = problem.set.project(x0);

  LcOutcome out;
  out.run = alm_solve(problem, x0, Eigen::VectorXd(), setup.lc_solver);
  out.wall_ms = out.run.wall_ms;
  out.timed_out = out.run.timed_out || out.run.wall_ms > setup.lc_solver.time_budget_ms;
  out.solution = out.run.x;
  if (!out.timed_out) out.input = {out.run.x[0], out.run.x[1]};
  return out;
}

struct TickRecord {
  double time = 0.0;
  VehicleState state;
  ControlInput input;
  long plan_id = 0;
  double lc_ms = 0.0;
  int lc_iterations = 0;
  std::optional<double> hc_ms;  // set on ticks that launch a replan
  bool lc_timed_out = false;
  // Largest separation over axes per obstacle (the set distance; > 0 when
  // disjoint) and the sampled collision verdict.
  std::vector<double> margins;
  std::vector<bool> collisions;
};

struct ReplanRecord {
  long launch_tick = 0;
  double launch_time = 0.0;
  double swap_time = 0.0;  // when the result became available to LC
  long plan_id = 0;        // active plan after the swap
  bool accepted = false;
  bool emergency = false;
  char winner = '-';
  bool ran_b = false;
  double hc_ms = 0.0;
  double cost = std::numeric_limits<double>::quiet_NaN();
  double infeasibility = std::numeric_limits<double>::quiet_NaN();
  double cost_a = 0.0;
  double infeasibility_a = 0.0;
  double penalty_a = 0.0;
  double cost_b = std::numeric_limits<double>::quiet_NaN();
  double infeasibility_b = std::numeric_limits<double>::quiet_NaN();
  double penalty_b = std::numeric_limits<double>::quiet_NaN();
};

struct SimLog {
  std::vector<TickRecord> ticks;
  std::vector<ReplanRecord> replans;
  std::vector<Trajectory> plans;  // every plan that became active
  bool reached = false;
  double time_to_target = std::numeric_limits<double>::quiet_NaN();
  VehicleState final_state;
  std::uint64_t seed = 0;
  ModelParams plant;
};

struct ClosedLoopOptions {
  std::uint64_t seed = 0;
  // Per-tick oracle: samples for the collision check and sweep resolution
  // for the margin.
  int oracle_samples = 10000;
  double margin_resolution = 0.01;
  // When false the replan is solved at the swap tick instead of alongside
  // the tracking loop. Simulated behaviour is identical; only wall-clock
  // contention differs.
  bool overlap_planning = true;
};

/// Plant parameters, perturbed by up to `plant_mismatch` (relative) using
/// `seed`.
inline ModelParams plant_params(const PlanningSetup& setup, std::uint64_t seed) {
  ModelParams p = setup.model;
  if (setup.plant_mismatch <= 0.0) return p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-setup.plant_mismatch, setup.plant_mismatch);
  p.alpha *= 1.0 + d(rng);
  p.beta *= 1.0 + d(rng);
  p.v_max *= 1.0 + d(rng);
  return p;
}

/// Runs the hierarchy for `duration` simulated seconds. Tick 0 plans
/// synchronously; afterwards a replan is launched every tau ticks from the
/// measured state and its result is swapped in tau ticks later.
inline SimLog closed_loop_run(const VehicleState& initial, const PlanningSetup& setup_in,
                              double duration, const ClosedLoopOptions& options = {}) {
  if (!(duration >= 0.0)) throw std::invalid_argument("closed_loop_run: duration >= 0");
  const PlanningSetup setup = setup_in.synchronized();
  setup.validate();
  const double period = setup.timing.lc_period;
  const int tau = setup.timing.ratio;
  const long ticks = static_cast<long>(std::floor(duration / period + 1e-9));

  SimLog log;
  log.seed = options.seed;
  log.plant = plant_params(setup, options.seed);
  log.final_state = initial;
  if (ticks == 0) return log;

  VehicleState z = initial;
  ControlInput applied{};
  Eigen::VectorXd lc_warm;
  long next_id = 1;
  Trajectory active;
  long active_tick = 0;
  std::optional<HcWarmStart> warm;

  struct Pending {
    std::future<HcOutcome> result;
    long tick;
    std::size_t record;
  };
  std::optional<Pending> pending;

  auto adopt = [&](HcOutcome& outcome, long launch_tick, ReplanRecord& rec) {
    const auto& d = outcome.diagnostics;
    rec.accepted = d.accepted;
    rec.emergency = d.emergency;
    rec.winner = d.winner;
    rec.ran_b = d.b.has_value();
    rec.hc_ms = d.wall_ms;
    rec.cost_a = d.a.cost;
    rec.infeasibility_a = d.a.infeasibility;
    rec.penalty_a = d.a.penalty;
    if (d.b) {
      rec.cost_b = d.b->cost;
      rec.infeasibility_b = d.b->infeasibility;
      rec.penalty_b = d.b->penalty;
    }
    if (d.accepted || d.emergency) {
      outcome.plan.id = next_id++;
      outcome.plan.created_at = static_cast<double>(launch_tick) * period;
      active = std::move(outcome.plan);
      active_tick = launch_tick;
      log.plans.push_back(active);
      rec.cost = active.cost;
      rec.infeasibility = active.infeasibility;
    }
    if (outcome.warm_start) warm = std::move(outcome.warm_start);
    rec.plan_id = active.id;
  };

  for (long n = 0; n < ticks; ++n) {
    const double now = static_cast<double>(n) * period;
    if ((z.position - setup.target.position).norm() <= setup.arrival_radius) {
      log.reached = true;
      log.time_to_target = now;
      break;
    }
    TickRecord row;
    row.time = now;
    row.state = z;

    if (n == 0) {
      ReplanRecord rec;
      auto outcome = hc_plan(z, setup, nullptr, nullptr, applied);
      adopt(outcome, 0, rec);
      log.replans.push_back(rec);
      row.hc_ms = rec.hc_ms;
    } else if (n % tau == 0) {
      if (pending) {
        auto outcome = pending->result.get();
        auto& rec = log.replans[pending->record];
        rec.swap_time = now;
        adopt(outcome, pending->tick, rec);
        log.ticks[static_cast<std::size_t>(pending->tick)].hc_ms = rec.hc_ms;
        pending.reset();
      }
      ReplanRecord rec;
      rec.launch_tick = n;
      rec.launch_time = now;
      log.replans.push_back(rec);
      std::optional<HcWarmStart> warm_copy = warm;
      Trajectory last = active;
      const VehicleState snapshot = z;
      const ControlInput u_prev = applied;
      pending = Pending{
          std::async(options.overlap_planning ? std::launch::async : std::launch::deferred,
                     [&setup, snapshot, warm_copy, last, u_prev] {
                       return hc_plan(snapshot, setup, warm_copy ? &*warm_copy : nullptr,
                                      &last, u_prev);
                     }),
          n, log.replans.size() - 1};
    }

    const int age = static_cast<int>(n - active_tick);
    auto lc = lc_control(z, active, age, setup, lc_warm, applied);
    applied = lc.input;
    lc_warm = std::move(lc.solution);
    row.input = applied;
    row.plan_id = active.id;
    row.lc_ms = lc.wall_ms;
    row.lc_timed_out = lc.timed_out;
    row.lc_iterations = lc.run.inner_iterations;

    const auto body = setup.vehicle.moved_to(z.position, z.heading);
    for (const auto& e : setup.obstacles) {
      row.margins.push_back(-best_axis(body, e, options.margin_resolution).margin);
      row.collisions.push_back(intersects_oracle(body, e, options.oracle_samples));
    }
    log.ticks.push_back(std::move(row));
    z = euler_step(z, applied, log.plant);
  }
  if (pending) {
    // The result never reaches the vehicle; keep its runtime only.
    auto outcome = pending->result.get();
    auto& rec = log.replans[pending->record];
    rec.hc_ms = outcome.diagnostics.wall_ms;
    rec.accepted = outcome.diagnostics.accepted;
    rec.winner = outcome.diagnostics.winner;
    rec.ran_b = outcome.diagnostics.b.has_value();
    rec.plan_id = active.id;
    rec.swap_time = std::numeric_limits<double>::quiet_NaN();
    log.ticks[static_cast<std::size_t>(pending->tick)].hc_ms = rec.hc_ms;
  }
  if (!log.reached && (z.position - setup.target.position).norm() <= setup.arrival_radius) {
    log.reached = true;
    log.time_to_target = static_cast<double>(log.ticks.size()) * period;
  }
  log.final_state = z;
  return log;
}

}  // namespace hnmpc

#endif  // HNMPC_CONTROLLER_HPP
