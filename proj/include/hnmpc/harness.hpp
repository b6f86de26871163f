#ifndef HNMPC_HARNESS_HPP
#define HNMPC_HARNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hnmpc/controller.hpp"

namespace hnmpc {

using Json = nlohmann::json;

/// A simulation case: setup, start state and run length.
struct Scenario {
  std::string name = "scenario";
  VehicleState initial;
  PlanningSetup setup;
  double duration = 120.0;  // simulated seconds
  std::uint64_t seed = 0;

  void validate() const {
    setup.validate();
    if (!initial.position.allFinite() || !std::isfinite(initial.heading) ||
        !std::isfinite(initial.speed)) {
      throw std::invalid_argument("scenario: initial state must be finite");
    }
    if (!(duration >= 0.0)) throw std::invalid_argument("scenario: duration must be >= 0");
  }
};

/// Schema violation; `field` is the dotted path of the offending entry.
class ScenarioError : public std::invalid_argument {
 public:
  ScenarioError(const std::string& field, const std::string& what)
      : std::invalid_argument("scenario field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

namespace detail {

// Reads fields out of one JSON object and reports the dotted path on failure.
class Reader {
 public:
  Reader(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ScenarioError(where(), "expected an object");
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string& key) const { return node_.contains(key); }

  double number(const std::string& key, std::optional<double> fallback = {}) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ScenarioError(where(key), "missing");
    }
    const auto& v = node_.at(key);
    if (!v.is_number()) throw ScenarioError(where(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ScenarioError(where(key), "must be finite");
    return x;
  }
  double nonnegative(const std::string& key, double fallback) const {
    const double x = number(key, fallback);
    if (!(x >= 0.0)) throw ScenarioError(where(key), "must be >= 0");
    return x;
  }
  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_number_integer()) throw ScenarioError(where(key), "expected an integer");
    return v.get<int>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_string()) throw ScenarioError(where(key), "expected a string");
    return v.get<std::string>();
  }
  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_boolean()) throw ScenarioError(where(key), "expected true or false");
    return v.get<bool>();
  }
  Eigen::Vector2d pair(const std::string& key,
                       std::optional<Eigen::Vector2d> fallback = {}) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ScenarioError(where(key), "missing");
    }
    const auto& v = node_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ScenarioError(where(key), "expected [North, East] numbers");
    }
    Eigen::Vector2d out(v[0].get<double>(), v[1].get<double>());
    if (!out.allFinite()) throw ScenarioError(where(key), "must be finite");
    return out;
  }
  std::optional<Reader> child(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return Reader(node_.at(key), where(key));
  }
  const Json& raw(const std::string& key) const { return node_.at(key); }

 private:
  const Json& node_;
  std::string path_;
};

inline Json to_json(const Eigen::Vector2d& v) { return Json::array({v.x(), v.y()}); }

inline Superellipsoid read_shape(const Reader& r, std::optional<double> exponent) {
  const double p = r.number("exponent", exponent);
  if (!(p >= 2.0)) throw ScenarioError(r.where("exponent"), "must be >= 2");
  const Eigen::Vector2d axes = r.pair("semi_axes");
  if (!(axes.x() > 0.0) || !(axes.y() > 0.0)) {
    throw ScenarioError(r.where("semi_axes"), "must be positive");
  }
  return {r.pair("center", Eigen::Vector2d::Zero()), r.number("heading", 0.0), axes, p};
}

inline Json shape_json(const Superellipsoid& s, bool with_pose) {
  Json j = {{"semi_axes", to_json(s.semi_axes())}, {"exponent", s.exponent()}};
  if (with_pose) {
    j["center"] = to_json(s.center());
    j["heading"] = s.heading();
  }
  return j;
}

inline SolverConfig read_solver(const Reader& r, SolverConfig c) {
  const std::string method = r.text("method", c.method == InnerMethod::kPanoc
                                                  ? "panoc"
                                                  : "projected_gradient");
  if (method == "panoc") {
    c.method = InnerMethod::kPanoc;
  } else if (method == "projected_gradient") {
    c.method = InnerMethod::kProjectedGradient;
  } else {
    throw ScenarioError(r.where("method"), "expected 'panoc' or 'projected_gradient'");
  }
  c.tolerance = r.number("tolerance", c.tolerance);
  c.alm_tolerance = r.number("alm_tolerance", c.alm_tolerance);
  c.infeasibility_factor = r.number("infeasibility_factor", c.infeasibility_factor);
  c.initial_penalty = r.number("initial_penalty", c.initial_penalty);
  c.penalty_growth = r.number("penalty_growth", c.penalty_growth);
  c.max_penalty = r.number("max_penalty", c.max_penalty);
  c.initial_inner_tolerance = r.number("initial_inner_tolerance", c.initial_inner_tolerance);
  c.max_inner_iterations = r.integer("max_inner_iterations", c.max_inner_iterations);
  c.max_outer_iterations = r.integer("max_outer_iterations", c.max_outer_iterations);
  c.lbfgs_memory = r.integer("lbfgs_memory", c.lbfgs_memory);
  c.time_budget_ms = r.number("time_budget_ms", c.time_budget_ms);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(r.where(), e.what());
  }
  return c;
}

inline Json solver_json(const SolverConfig& c) {
  return {{"method", c.method == InnerMethod::kPanoc ? "panoc" : "projected_gradient"},
          {"tolerance", c.tolerance},
          {"alm_tolerance", c.alm_tolerance},
          {"infeasibility_factor", c.infeasibility_factor},
          {"initial_penalty", c.initial_penalty},
          {"penalty_growth", c.penalty_growth},
          {"max_penalty", c.max_penalty},
          {"initial_inner_tolerance", c.initial_inner_tolerance},
          {"max_inner_iterations", c.max_inner_iterations},
          {"max_outer_iterations", c.max_outer_iterations},
          {"lbfgs_memory", c.lbfgs_memory},
          {"time_budget_ms", c.time_budget_ms}};
}

template <class F>
void rethrow_as(const Reader& r, F&& f) {
  try {
    f();
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(r.where(), e.what());
  }
}

}  // namespace detail

/// Parses and validates a scenario document. Only `vehicle`, `initial_state`
/// and `target` are required; every other section falls back to defaults.
inline Scenario scenario_from_json(const Json& doc) {
  using detail::Reader;
  const Reader root(doc, "");
  Scenario sc;
  sc.name = root.text("name", sc.name);
  sc.duration = root.nonnegative("duration_s", sc.duration);
  if (root.has("seed")) {
    const auto& v = root.raw("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ScenarioError("seed", "expected a nonnegative integer");
    }
    sc.seed = v.get<std::uint64_t>();
  }
  auto& s = sc.setup;

  const auto vehicle = root.child("vehicle");
  if (!vehicle) throw ScenarioError("vehicle", "missing");
  s.vehicle = detail::read_shape(*vehicle, std::nullopt);
  const double p = s.vehicle.exponent();

  const auto start = root.child("initial_state");
  if (!start) throw ScenarioError("initial_state", "missing");
  sc.initial = {start->pair("position"), wrap_angle(start->number("heading", 0.0)),
                start->number("speed", 0.0)};

  const auto target = root.child("target");
  if (!target) throw ScenarioError("target", "missing");
  s.target = {target->pair("position"), wrap_angle(target->number("heading", 0.0))};

  if (root.has("obstacles")) {
    const auto& list = root.raw("obstacles");
    if (!list.is_array()) throw ScenarioError("obstacles", "expected an array");
    for (std::size_t j = 0; j < list.size(); ++j) {
      const Reader o(list[j], "obstacles[" + std::to_string(j) + "]");
      auto shape = detail::read_shape(o, p);
      if (shape.exponent() != p) {
        throw ScenarioError(o.where("exponent"), "must equal the vehicle exponent");
      }
      s.obstacles.push_back(std::move(shape));
    }
  }

  if (const auto m = root.child("model")) {
    s.model.alpha = m->nonnegative("alpha", s.model.alpha);
    s.model.beta = m->nonnegative("beta", s.model.beta);
    s.model.v_max = m->nonnegative("v_max", s.model.v_max);
  }
  if (const auto t = root.child("timing")) {
    s.timing.lc_period = t->number("lc_period_s", s.timing.lc_period);
    s.timing.ratio = t->integer("ratio", s.timing.ratio);
    s.timing.omega = t->integer("omega", s.timing.omega);
    if (!(s.timing.lc_period > 0.0)) throw ScenarioError(t->where("lc_period_s"), "must be > 0");
    if (s.timing.ratio < 1) throw ScenarioError(t->where("ratio"), "must be >= 1");
  }
  if (const auto h = root.child("hc")) {
    auto& w = s.hc;
    w.q_c = h->nonnegative("q_c", w.q_c);
    w.q_theta = h->nonnegative("q_theta", w.q_theta);
    w.q_r = h->nonnegative("q_r", w.q_r);
    w.q_r_delta = h->nonnegative("q_r_delta", w.q_r_delta);
    w.q_s = h->nonnegative("q_s", w.q_s);
    w.q_s_delta = h->nonnegative("q_s_delta", w.q_s_delta);
    w.q_c_terminal = h->nonnegative("q_c_terminal", w.q_c_terminal);
    w.q_theta_terminal = h->nonnegative("q_theta_terminal", w.q_theta_terminal);
    w.horizon = h->integer("horizon", w.horizon);
    w.r_max = h->number("r_max", w.r_max);
    w.s_max = h->number("s_max", w.s_max);
    detail::rethrow_as(*h, [&] { w.validate(); });
  }
  if (const auto l = root.child("lc")) {
    auto& w = s.lc;
    w.q_c = l->nonnegative("q_c", w.q_c);
    w.q_theta = l->nonnegative("q_theta", w.q_theta);
    w.q_r = l->nonnegative("q_r", w.q_r);
    w.q_r_delta = l->nonnegative("q_r_delta", w.q_r_delta);
    w.q_s = l->nonnegative("q_s", w.q_s);
    w.q_s_delta = l->nonnegative("q_s_delta", w.q_s_delta);
    w.q_c_omega = l->nonnegative("q_c_omega", w.q_c_omega);
    w.q_theta_omega = l->nonnegative("q_theta_omega", w.q_theta_omega);
    w.q_c_terminal = l->nonnegative("q_c_terminal", w.q_c_terminal);
    w.q_theta_terminal = l->nonnegative("q_theta_terminal", w.q_theta_terminal);
    w.horizon = l->integer("horizon", w.horizon);
    w.r_max = l->number("r_max", w.r_max);
    w.s_max = l->number("s_max", w.s_max);
  }
  if (const auto c = root.child("hc_solver")) s.hc_solver = detail::read_solver(*c, s.hc_solver);
  if (const auto c = root.child("lc_solver")) s.lc_solver = detail::read_solver(*c, s.lc_solver);
  s.backoff = root.nonnegative("backoff_m", s.backoff);
  if (const auto c = root.child("clearance")) {
    s.clearance.distance = c->nonnegative("distance_m", s.clearance.distance);
    s.clearance.weight = c->nonnegative("weight", s.clearance.weight);
  }
  s.arrival_radius = root.number("arrival_radius_m", s.arrival_radius);
  if (!(s.arrival_radius > 0.0)) throw ScenarioError("arrival_radius_m", "must be > 0");
  s.plant_mismatch = root.nonnegative("plant_mismatch", s.plant_mismatch);
  if (!(s.plant_mismatch < 1.0)) throw ScenarioError("plant_mismatch", "must be < 1");

  // Timing feeds the model step, HC substeps and LC omega.
  s = s.synchronized();
  detail::rethrow_as(root, [&] { sc.validate(); });
  return sc;
}

inline Json scenario_to_json(const Scenario& sc) {
  const auto& s = sc.setup;
  Json obstacles = Json::array();
  for (const auto& e : s.obstacles) obstacles.push_back(detail::shape_json(e, true));
  const auto& h = s.hc;
  const auto& l = s.lc;
  return {
      {"name", sc.name},
      {"duration_s", sc.duration},
      {"seed", sc.seed},
      {"vehicle", detail::shape_json(s.vehicle, false)},
      {"initial_state",
       {{"position", detail::to_json(sc.initial.position)},
        {"heading", sc.initial.heading},
        {"speed", sc.initial.speed}}},
      {"target",
       {{"position", detail::to_json(s.target.position)}, {"heading", s.target.heading}}},
      {"obstacles", obstacles},
      {"model", {{"alpha", s.model.alpha}, {"beta", s.model.beta}, {"v_max", s.model.v_max}}},
      {"timing",
       {{"lc_period_s", s.timing.lc_period},
        {"ratio", s.timing.ratio},
        {"omega", s.timing.omega}}},
      {"hc",
       {{"q_c", h.q_c},
        {"q_theta", h.q_theta},
        {"q_r", h.q_r},
        {"q_r_delta", h.q_r_delta},
        {"q_s", h.q_s},
        {"q_s_delta", h.q_s_delta},
        {"q_c_terminal", h.q_c_terminal},
        {"q_theta_terminal", h.q_theta_terminal},
        {"horizon", h.horizon},
        {"r_max", h.r_max},
        {"s_max", h.s_max}}},
      {"lc",
       {{"q_c", l.q_c},
        {"q_theta", l.q_theta},
        {"q_r", l.q_r},
        {"q_r_delta", l.q_r_delta},
        {"q_s", l.q_s},
        {"q_s_delta", l.q_s_delta},
        {"q_c_omega", l.q_c_omega},
        {"q_theta_omega", l.q_theta_omega},
        {"q_c_terminal", l.q_c_terminal},
        {"q_theta_terminal", l.q_theta_terminal},
        {"horizon", l.horizon},
        {"r_max", l.r_max},
        {"s_max", l.s_max}}},
      {"hc_solver", detail::solver_json(s.hc_solver)},
      {"lc_solver", detail::solver_json(s.lc_solver)},
      {"backoff_m", s.backoff},
      {"clearance", {{"distance_m", s.clearance.distance}, {"weight", s.clearance.weight}}},
      {"arrival_radius_m", s.arrival_radius},
      {"plant_mismatch", s.plant_mismatch},
  };
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": not valid JSON: " + e.what());
  }
  auto sc = scenario_from_json(doc);
  if (!doc.contains("name")) sc.name = path.stem().string();
  return sc;
}

inline void save_scenario(const Scenario& sc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setw(2) << scenario_to_json(sc) << "\n";
}

/// Percentile with linear interpolation between order statistics (the
/// numpy default). Requires a nonempty sample.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile: q in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Spread {
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;

  static Spread of(const std::vector<double>& v) {
    if (v.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return {nan, nan, nan};
    }
    return {percentile(v, 50.0), percentile(v, 95.0), *std::max_element(v.begin(), v.end())};
  }
};

struct Metrics {
  std::vector<double> tracking_error;  // m, one per tick
  Spread tracking;
  Spread hc_ms;
  Spread lc_ms;
  double min_margin = std::numeric_limits<double>::infinity();
  long collision_ticks = 0;
  long lc_timeouts = 0;
  long replans = 0;
  long accepted = 0;
};

/// Tracking error of tick i: distance from the vehicle to the polyline of
/// the plan it was tracking.
inline Metrics compute_metrics(const SimLog& log) {
  if (log.ticks.empty()) throw std::invalid_argument("compute_metrics: empty log");
  std::map<long, const Trajectory*> by_id;
  for (const auto& p : log.plans) by_id[p.id] = &p;

  Metrics m;
  std::vector<double> lc;
  for (const auto& t : log.ticks) {
    const auto it = by_id.find(t.plan_id);
    if (it == by_id.end()) {
      throw std::invalid_argument("compute_metrics: tick refers to unknown plan " +
                                  std::to_string(t.plan_id));
    }
    m.tracking_error.push_back(it->second->distance_to_path(t.state.position));
    lc.push_back(t.lc_ms);
    m.lc_timeouts += t.lc_timed_out;
    bool hit = false;
    for (std::size_t j = 0; j < t.margins.size(); ++j) {
      m.min_margin = std::min(m.min_margin, t.margins[j]);
      hit = hit || t.collisions[j];
    }
    m.collision_ticks += hit;
  }
  std::vector<double> hc;
  for (const auto& r : log.replans) {
    hc.push_back(r.hc_ms);
    m.accepted += r.accepted;
  }
  m.replans = static_cast<long>(log.replans.size());
  m.tracking = Spread::of(m.tracking_error);
  m.hc_ms = Spread::of(hc);
  m.lc_ms = Spread::of(lc);
  return m;
}

/// Replans overlap the tracking loop only when a second hardware thread
/// exists; on one core the overlap just steals LC time.
inline bool overlap_by_default() { return std::thread::hardware_concurrency() > 1; }

inline ClosedLoopOptions default_run_options(std::uint64_t seed) {
  ClosedLoopOptions o;
  o.seed = seed;
  o.overlap_planning = overlap_by_default();
  return o;
}

inline SimLog simulate(const Scenario& sc, std::optional<ClosedLoopOptions> options = {}) {
  sc.validate();
  return closed_loop_run(sc.initial, sc.setup, sc.duration,
                         options.value_or(default_run_options(sc.seed)));
}

namespace detail {

inline std::string csv_number(double x) {
  if (!std::isfinite(x)) return "";
  std::ostringstream s;
  s << std::setprecision(10) << x;
  return s.str();
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace detail

/// Per-tick log, one row per tracking step.
inline void write_tick_csv(const SimLog& log, std::size_t obstacles, std::ostream& out) {
  out << "time_s,c1_m,c2_m,theta_rad,v_mps,r,s,plan_id,lc_ms,hc_ms";
  for (std::size_t j = 0; j < obstacles; ++j) out << ",margin_obs_" << j;
  out << "\n";
  using detail::csv_number;
  for (const auto& t : log.ticks) {
    out << csv_number(t.time) << ',' << csv_number(t.state.position.x()) << ','
        << csv_number(t.state.position.y()) << ',' << csv_number(t.state.heading) << ','
        << csv_number(t.state.speed) << ',' << csv_number(t.input.throttle) << ','
        << csv_number(t.input.spin) << ',' << t.plan_id << ',' << csv_number(t.lc_ms) << ','
        << (t.hc_ms ? csv_number(*t.hc_ms) : "");
    for (std::size_t j = 0; j < obstacles; ++j) {
      out << ',' << (j < t.margins.size() ? csv_number(t.margins[j]) : "");
    }
    out << "\n";
  }
}

/// Fine states of every plan that became active.
inline void write_plans_csv(const SimLog& log, std::ostream& out) {
  out << "plan_id,created_s,index,time_s,c1_m,c2_m,theta_rad,v_mps,emergency\n";
  using detail::csv_number;
  for (const auto& p : log.plans) {
    const auto& pts = p.path();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out << p.id << ',' << csv_number(p.created_at) << ',' << i << ','
          << csv_number(p.created_at + static_cast<double>(i) * p.path_period()) << ','
          << csv_number(pts[i].position.x()) << ',' << csv_number(pts[i].position.y()) << ','
          << csv_number(pts[i].heading) << ',' << csv_number(pts[i].speed) << ','
          << (p.emergency ? 1 : 0) << "\n";
    }
  }
}

inline void write_replans_csv(const SimLog& log, std::ostream& out) {
  out << "launch_s,swap_s,plan_id,accepted,emergency,winner,ran_b,hc_ms,cost,infeasibility\n";
  using detail::csv_number;
  for (const auto& r : log.replans) {
    out << csv_number(r.launch_time) << ',' << csv_number(r.swap_time) << ',' << r.plan_id
        << ',' << (r.accepted ? 1 : 0) << ',' << (r.emergency ? 1 : 0) << ',' << r.winner
        << ',' << (r.ran_b ? 1 : 0) << ',' << csv_number(r.hc_ms) << ','
        << csv_number(r.cost) << ',' << csv_number(r.infeasibility) << "\n";
  }
}

inline void write_tracking_csv(const SimLog& log, const Metrics& m, std::ostream& out) {
  out << "time_s,plan_id,error_m\n";
  for (std::size_t i = 0; i < log.ticks.size(); ++i) {
    out << detail::csv_number(log.ticks[i].time) << ',' << log.ticks[i].plan_id << ','
        << detail::csv_number(m.tracking_error[i]) << "\n";
  }
}

namespace detail {

inline Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json spread_json(const Spread& s) {
  return {{"median", number_or_null(s.median)},
          {"p95", number_or_null(s.p95)},
          {"max", number_or_null(s.max)}};
}

}  // namespace detail

/// Outcome of one scenario inside a batch.
struct RunSummary {
  std::string name;
  std::string output_stem;
  bool ok = false;
  std::string error;
  bool reached = false;
  double time_to_target = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  long ticks = 0;
  std::optional<Metrics> metrics;
};

inline Json summary_json(const RunSummary& r) {
  using detail::number_or_null;
  Json j = {{"name", r.name},
            {"output", r.output_stem},
            {"ok", r.ok},
            {"error", r.ok ? Json(nullptr) : Json(r.error)},
            {"reached_target", r.reached},
            {"time_to_target_s", number_or_null(r.time_to_target)},
            {"seed", r.seed},
            {"ticks", r.ticks}};
  if (r.metrics) {
    const auto& m = *r.metrics;
    j["min_margin_m"] = number_or_null(m.min_margin);
    j["collision_ticks"] = m.collision_ticks;
    j["lc_timeouts"] = m.lc_timeouts;
    j["replans"] = m.replans;
    j["accepted_replans"] = m.accepted;
    j["tracking_error_m"] = detail::spread_json(m.tracking);
    j["hc_ms"] = detail::spread_json(m.hc_ms);
    j["lc_ms"] = detail::spread_json(m.lc_ms);
  }
  return j;
}

struct BatchSummary {
  std::vector<RunSummary> runs;

  std::size_t reached() const {
    return static_cast<std::size_t>(
        std::count_if(runs.begin(), runs.end(), [](const auto& r) { return r.reached; }));
  }
  Json to_json() const {
    Json list = Json::array();
    for (const auto& r : runs) list.push_back(summary_json(r));
    return {{"count", runs.size()}, {"reached", reached()}, {"scenarios", list}};
  }
};

/// Runs one scenario and writes <stem>.csv, <stem>_plans.csv,
/// <stem>_replans.csv and <stem>_tracking.csv into `out_dir`.
inline RunSummary run_and_write(const Scenario& sc, const std::filesystem::path& out_dir,
                                const std::string& stem,
                                std::optional<ClosedLoopOptions> options = {}) {
  RunSummary r;
  r.name = sc.name;
  r.output_stem = stem;
  r.seed = options ? options->seed : sc.seed;
  const auto log = simulate(sc, options);
  r.reached = log.reached;
  r.time_to_target = log.time_to_target;
  r.ticks = static_cast<long>(log.ticks.size());

  std::filesystem::create_directories(out_dir);
  {
    auto out = detail::open_for_write(out_dir / (stem + ".csv"));
    write_tick_csv(log, sc.setup.obstacles.size(), out);
  }
  {
    auto out = detail::open_for_write(out_dir / (stem + "_plans.csv"));
    write_plans_csv(log, out);
  }
  {
    auto out = detail::open_for_write(out_dir / (stem + "_replans.csv"));
    write_replans_csv(log, out);
  }
  if (!log.ticks.empty()) {
    r.metrics = compute_metrics(log);
    auto out = detail::open_for_write(out_dir / (stem + "_tracking.csv"));
    write_tracking_csv(log, *r.metrics, out);
  }
  r.ok = true;
  return r;
}

/// Output stems for `names`: repeats get _2, _3, ... appended.
inline std::vector<std::string> unique_stems(const std::vector<std::string>& names) {
  std::map<std::string, int> seen;
  std::vector<std::string> used;
  std::vector<std::string> out;
  for (const auto& name : names) {
    std::string stem = name.empty() ? "scenario" : name;
    int& count = seen[stem];
    ++count;
    std::string candidate = count == 1 ? stem : stem + "_" + std::to_string(count);
    while (std::find(used.begin(), used.end(), candidate) != used.end()) {
      candidate = stem + "_" + std::to_string(++count);
    }
    used.push_back(candidate);
    out.push_back(candidate);
  }
  return out;
}

/// Runs every scenario in order, writes their logs and summary.json. A
/// failing scenario is recorded and the batch goes on.
inline BatchSummary run_batch(const std::vector<Scenario>& scenarios,
                              const std::filesystem::path& out_dir) {
  std::vector<std::string> names;
  for (const auto& s : scenarios) names.push_back(s.name);
  const auto stems = unique_stems(names);

  BatchSummary summary;
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    try {
      summary.runs.push_back(run_and_write(scenarios[i], out_dir, stems[i]));
    } catch (const std::exception& e) {
      RunSummary failed;
      failed.name = scenarios[i].name;
      failed.output_stem = stems[i];
      failed.seed = scenarios[i].seed;
      failed.error = e.what();
      summary.runs.push_back(std::move(failed));
    }
  }
  auto out = detail::open_for_write(out_dir / "summary.json");
  out << std::setw(2) << summary.to_json() << "\n";
  return summary;
}

/// Every *.json in `dir`, sorted by file name.
inline std::vector<std::filesystem::path> scenario_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace hnmpc

#endif  // HNMPC_HARNESS_HPP
