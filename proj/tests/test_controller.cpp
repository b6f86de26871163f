#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hnmpc/controller.hpp"

using namespace hnmpc;
using Eigen::Vector2d;

namespace {

const Superellipsoid kSouth({-11, 3}, -0.79, {2, 1}, 3.0);

PlanningSetup open_field(Vector2d target) {
  PlanningSetup s;
  s.target = {target, 0.0};
  return s;
}

SolverRun run_with(double cost, double infeasibility, double penalty = 10.0) {
  SolverRun r;
  r.cost = cost;
  r.infeasibility = infeasibility;
  r.penalty = penalty;
  return r;
}

// Planned positions one metre ahead of the origin, facing North.
Trajectory ahead_plan(double distance) {
  Trajectory p;
  for (int t = 0; t <= 40; ++t) p.states.push_back({{distance, 0.0}, 0.0, 0.0});
  return p;
}

}  // namespace

TEST(SelectRun, LowestCostAmongGatePassing) {
  const auto a = run_with(10.0, 0.0);
  const auto b = run_with(9.5, 0.0);
  EXPECT_EQ(select_run({&a, &b}, 1e-3), 1u);
  EXPECT_EQ(select_run({&b, &a}, 1e-3), 0u);
  const auto b_bad = run_with(9.5, 1.0);
  EXPECT_EQ(select_run({&a, &b_bad}, 1e-3), 0u);
  const auto a_bad = run_with(10.0, 1.0);
  EXPECT_FALSE(select_run({&a_bad, &b_bad}, 1e-3).has_value());
  EXPECT_EQ(select_run({&a, nullptr}, 1e-3), 0u);
  const auto nan_run = run_with(1.0, std::nan(""));
  EXPECT_EQ(select_run({&nan_run, &a}, 1e-3), 1u);
}

TEST(HcPlan, OnlySolverAWithoutPrevious) {
  const auto setup = open_field({5, 0});
  const auto out = hc_plan({{0, 0}, 0.0, 0.0}, setup, nullptr, nullptr);
  EXPECT_FALSE(out.diagnostics.b.has_value());
  EXPECT_TRUE(out.diagnostics.accepted);
  EXPECT_EQ(out.diagnostics.winner, 'A');
  ASSERT_TRUE(out.warm_start.has_value());

  const auto again = hc_plan({{0.1, 0}, 0.0, 0.1}, setup, &*out.warm_start, &out.plan);
  EXPECT_TRUE(again.diagnostics.b.has_value());
  EXPECT_TRUE(again.diagnostics.accepted);
}

TEST(HcPlan, OpenFieldApproachesTarget) {
  const auto setup = open_field({5, 0});
  const VehicleState start{{0, 0}, 0.0, 0.0};
  const auto out = hc_plan(start, setup, nullptr, nullptr);
  ASSERT_TRUE(out.diagnostics.accepted);
  EXPECT_EQ(out.plan.states.size(), 41u);
  EXPECT_EQ(out.plan.fine_states.size(), 401u);
  EXPECT_EQ(out.plan.inputs.size(), 40u);
  const double d0 = (start.position - setup.target.position).norm();
  const double dh = (out.plan.states.back().position - setup.target.position).norm();
  EXPECT_LT(dh, 0.5 * d0);
  EXPECT_LT(dh, 1.0);
}

TEST(HcPlan, AcceptedPlansAreSeparated) {
  PlanningSetup setup = open_field({-20, 6});
  setup.obstacles = {kSouth};
  const VehicleState start{{-5, 2.5}, 3.14, 0.5};
  const auto out = hc_plan(start, setup, nullptr, nullptr);
  ASSERT_TRUE(out.diagnostics.accepted);
  const auto& x = out.warm_start->x;
  const auto problem = transcribe_hc(start, setup.target, setup.obstacles, setup.vehicle,
                                     setup.hc, setup.model, {}, setup.backoff,
                                     setup.clearance);
  const auto& model = static_cast<const HcModel&>(*problem.model);
  for (int t = 0; t <= setup.hc.horizon; ++t) {
    const auto& s = out.plan.states[static_cast<std::size_t>(t)];
    const SeparatingAxis a(x.segment<2>(model.axis_offset(0, t)));
    const double m = separation_margin(setup.vehicle.moved_to(s.position, s.heading), kSouth, a);
    EXPECT_LE(m, 1e-6) << "stage " << t;
  }
}

TEST(HcPlan, RejectionKeepsLastPlan) {
  PlanningSetup setup = open_field({-20, 6});
  setup.obstacles = {kSouth};
  // Starting inside the obstacle leaves no feasible plan.
  const VehicleState inside{kSouth.center(), 0.0, 0.0};
  Trajectory last = ahead_plan(1.0);
  last.id = 17;
  setup.hc_solver.time_budget_ms = 200;
  const auto out = hc_plan(inside, setup, nullptr, &last);
  EXPECT_FALSE(out.diagnostics.accepted);
  EXPECT_FALSE(out.diagnostics.emergency);
  EXPECT_EQ(out.diagnostics.winner, '-');
  EXPECT_EQ(out.plan.id, 17);
  EXPECT_EQ(out.plan.states.size(), last.states.size());
  EXPECT_FALSE(out.warm_start.has_value());
}

TEST(HcPlan, RejectionWithoutPlanHoldsPosition) {
  PlanningSetup setup = open_field({-20, 6});
  setup.obstacles = {kSouth};
  setup.hc_solver.time_budget_ms = 200;
  const VehicleState inside{kSouth.center(), 0.3, 0.0};
  const auto out = hc_plan(inside, setup, nullptr, nullptr);
  EXPECT_FALSE(out.diagnostics.accepted);
  EXPECT_TRUE(out.diagnostics.emergency);
  EXPECT_TRUE(out.plan.emergency);
  for (const auto& s : out.plan.fine_states) EXPECT_EQ(s.position, inside.position);
}

TEST(EmergencyPlan, ZeroInputRollout) {
  const PlanningSetup setup;
  const VehicleState moving{{1, 2}, 0.5, 0.8};
  const auto plan = emergency_plan(moving, setup);
  EXPECT_EQ(plan.states.size(), 41u);
  EXPECT_EQ(plan.fine_states.size(), 401u);
  EXPECT_EQ(plan.fine_states[7], rollout(moving, {}, setup.model, 7));
  EXPECT_LT(plan.states.back().speed, moving.speed);
}

TEST(ShiftHcSolution, DropsStageZero) {
  PlanningSetup setup = open_field({-20, 6});
  setup.obstacles = {kSouth};
  setup.hc.horizon = 4;
  const auto problem = transcribe_hc({{0, 0}, 0, 0}, setup.target, setup.obstacles,
                                     setup.vehicle, setup.hc, setup.model, {}, 0.0,
                                     Clearance{0.9, 100.0});
  const auto& model = static_cast<const HcModel&>(*problem.model);
  HcWarmStart prev;
  prev.x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.dimension()));
  for (int t = 0; t < 4; ++t) prev.x[2 * t] = 0.1 * (t + 1);
  for (int t = 0; t <= 4; ++t) {
    prev.x.segment<2>(model.axis_offset(0, t)) = 2.0 * Vector2d(std::cos(t), std::sin(t));
    prev.x[static_cast<Eigen::Index>(model.clearance_offset(t))] = 0.1 * t;
  }
  prev.multipliers = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
  const auto out = shift_hc_solution(prev, model, problem.set);
  EXPECT_NEAR(out.x[0], 0.2, 1e-15);
  EXPECT_NEAR(out.x[4], 0.4, 1e-15);
  EXPECT_NEAR(out.x[6], 0.4, 1e-15);
  for (int t = 0; t <= 4; ++t) {
    const Vector2d a = out.x.segment<2>(model.axis_offset(0, t));
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
    const int src = std::min(t + 1, 4);
    EXPECT_NEAR(a.x(), std::cos(src), 1e-12);
  }
  EXPECT_EQ(out.x[static_cast<Eigen::Index>(model.clearance_offset(0))], 0.0);
  EXPECT_NEAR(out.x[static_cast<Eigen::Index>(model.clearance_offset(2))], 0.3, 1e-15);
  EXPECT_EQ(out.multipliers[0], 2.0);
  EXPECT_EQ(out.multipliers[4], 5.0);
}

TEST(LcControl, ZeroBudgetStops) {
  PlanningSetup setup;
  setup.lc_solver.time_budget_ms = 0.0;
  const auto out = lc_control({{0, 0}, 0.0, 0.5}, ahead_plan(3.0), 0, setup, {}, {0.7, 0.2});
  EXPECT_TRUE(out.timed_out);
  EXPECT_EQ(out.input, (ControlInput{0.0, 0.0}));
}

TEST(LcControl, StationaryPlanNoInput) {
  const PlanningSetup setup;
  const auto out = lc_control({{0, 0}, 0.0, 0.0}, ahead_plan(0.0), 0, setup, {}, {});
  EXPECT_FALSE(out.timed_out);
  EXPECT_LT(std::abs(out.input.throttle), 1e-3);
  EXPECT_LT(std::abs(out.input.spin), 1e-3);
}

TEST(LcControl, PlanAheadGivesThrottle) {
  const PlanningSetup setup;
  const auto out = lc_control({{0, 0}, 0.0, 0.0}, ahead_plan(1.0), 0, setup, {}, {});
  EXPECT_FALSE(out.timed_out);
  EXPECT_GT(out.input.throttle, 0.0);
  EXPECT_EQ(out.solution.size(), 200);
}

TEST(ClosedLoop, ZeroDurationEmptyLog) {
  const auto log = closed_loop_run({{0, 0}, 0, 0}, open_field({5, 0}), 0.0);
  EXPECT_TRUE(log.ticks.empty());
  EXPECT_TRUE(log.replans.empty());
  EXPECT_FALSE(log.reached);
  EXPECT_THROW(closed_loop_run({{0, 0}, 0, 0}, open_field({5, 0}), -1.0),
               std::invalid_argument);
}

TEST(ClosedLoop, OpenFieldReachesTarget) {
  ClosedLoopOptions o;
  o.overlap_planning = false;
  const auto setup = open_field({5, 0});
  const auto log = closed_loop_run({{0, 0}, 0, 0}, setup, 30.0, o);
  ASSERT_TRUE(log.reached);
  EXPECT_LE((log.final_state.position - setup.target.position).norm(), 1.0);
  EXPECT_LT(log.time_to_target, 30.0);
  // After the first second the distance to the target never grows.
  double last = INFINITY;
  for (const auto& t : log.ticks) {
    const double d = (t.state.position - setup.target.position).norm();
    if (t.time >= 1.0) {
      EXPECT_LE(d, last + 1e-9) << "t = " << t.time;
    }
    last = d;
  }
  for (const auto& t : log.ticks) {
    EXPECT_LE(std::abs(t.input.throttle), setup.lc.r_max);
    EXPECT_LE(std::abs(t.input.spin), setup.lc.s_max);
  }
}

TEST(ClosedLoop, ReplanBookkeeping) {
  ClosedLoopOptions o;
  o.overlap_planning = false;
  PlanningSetup setup = open_field({-20, 6});
  setup.obstacles = {kSouth};
  const auto log = closed_loop_run({{-4, 3}, 3.14, 0.0}, setup, 5.0, o);
  ASSERT_EQ(log.ticks.size(), 50u);
  EXPECT_EQ(log.replans.size(), 5u);
  EXPECT_TRUE(log.ticks[0].hc_ms.has_value());
  EXPECT_FALSE(log.ticks[1].hc_ms.has_value());
  EXPECT_TRUE(log.ticks[10].hc_ms.has_value());
  long previous = log.replans.front().plan_id;
  for (std::size_t i = 1; i < log.replans.size(); ++i) {
    const auto& r = log.replans[i];
    if (std::isnan(r.swap_time)) continue;
    if (!r.accepted) {
      EXPECT_EQ(r.plan_id, previous);
    }
    previous = r.plan_id;
  }
  for (std::size_t i = 1; i < log.ticks.size(); ++i) {
    EXPECT_GT(log.ticks[i].time, log.ticks[i - 1].time);
    EXPECT_GE(log.ticks[i].plan_id, log.ticks[i - 1].plan_id);
    if (i % 10 != 0) {
      EXPECT_EQ(log.ticks[i].plan_id, log.ticks[i - 1].plan_id);
    }
    EXPECT_EQ(log.ticks[i].margins.size(), 1u);
  }
}

TEST(ClosedLoop, ConcurrentPlanningMatchesTickLayout) {
  ClosedLoopOptions o;
  o.overlap_planning = true;
  const auto log = closed_loop_run({{0, 0}, 0, 0}, open_field({5, 0}), 2.5, o);
  EXPECT_EQ(log.ticks.size(), 25u);
  EXPECT_EQ(log.replans.size(), 3u);
  EXPECT_TRUE(std::isnan(log.replans.back().swap_time));
}

TEST(Clearance, KeepsPlansAwayFromObstacles) {
  // Passing close by the South obstacle: the reward pushes the plan out.
  PlanningSetup plain = open_field({-20, 3.5});
  plain.obstacles = {kSouth};
  plain.clearance = Clearance{};
  PlanningSetup padded = plain;
  padded.clearance = Clearance{0.9, 100.0};
  const VehicleState start{{-3, 3.5}, 3.14, 0.0};
  auto min_gap = [&](const PlanningSetup& s) {
    const auto out = hc_plan(start, s, nullptr, nullptr);
    EXPECT_TRUE(out.diagnostics.accepted);
    double gap = INFINITY;
    for (const auto& z : out.plan.fine_states) {
      const auto body = s.vehicle.moved_to(z.position, z.heading);
      gap = std::min(gap, -best_axis(body, kSouth, 5e-3).margin);
    }
    return gap;
  };
  const double g_plain = min_gap(plain);
  const double g_padded = min_gap(padded);
  EXPECT_GT(g_plain, 0.0);
  EXPECT_GT(g_padded, g_plain + 0.3);
}

TEST(PlanningSetup, Validation) {
  PlanningSetup s;
  EXPECT_NO_THROW(s.validate());
  s.hc.substeps = 5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_NO_THROW(s.synchronized().validate());
  s = PlanningSetup{};
  s.lc.horizon = 400;
  s.lc.omega = 20;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = PlanningSetup{};
  s.obstacles = {Superellipsoid({0, 0}, 0, {1, 1}, 2.0)};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = PlanningSetup{};
  s.clearance.weight = -1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Trajectory, DistanceAndInterpolation) {
  Trajectory p;
  p.states = {{{0, 0}, 0, 0}, {{1, 0}, 0, 0}, {{1, 1}, 0, 0}};
  EXPECT_NEAR(p.distance_to_path({0.5, 0.3}), 0.3, 1e-15);
  EXPECT_NEAR(p.distance_to_path({2, 0.5}), 1.0, 1e-15);
  EXPECT_NEAR(p.distance_to_path({-3, -4}), 5.0, 1e-15);
  EXPECT_EQ(p.position_at(0.5), Vector2d(0.5, 0));
  EXPECT_EQ(p.position_at(10.0), Vector2d(1, 1));
  EXPECT_EQ(p.horizon(), 2u);
  EXPECT_THROW(Trajectory{}.distance_to_path({0, 0}), std::out_of_range);
}
