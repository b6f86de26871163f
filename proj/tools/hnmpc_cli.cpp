// Command-line front end: simulate, batch, check, gradcheck, bench.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hnmpc/hnmpc.hpp"

namespace fs = std::filesystem;
using namespace hnmpc;

namespace {

void print_run(const RunSummary& r) {
  std::cout << r.name << ": ";
  if (!r.ok) {
    std::cout << "FAILED " << r.error << "\n";
    return;
  }
  std::cout << (r.reached ? "reached" : "not reached");
  if (r.reached) std::cout << " at " << r.time_to_target << " s";
  if (r.metrics) {
    const auto& m = *r.metrics;
    std::cout << ", min margin " << m.min_margin << " m, collision ticks "
              << m.collision_ticks << ", tracking p95 " << m.tracking.p95
              << " m, HC median " << m.hc_ms.median << " ms, LC median " << m.lc_ms.median
              << " ms";
  }
  std::cout << "\n";
}

Superellipsoid read_shape_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto doc = Json::parse(in);
  const detail::Reader r(doc, path);
  return detail::read_shape(r, std::nullopt);
}

// Plan for the tracking problem: the rollout of a half-throttle input.
Trajectory cruise_plan(const Scenario& sc) {
  auto problem = transcribe_hc(sc.initial, sc.setup.target, {}, sc.setup.vehicle,
                               sc.setup.hc, sc.setup.model);
  const auto& model = static_cast<const HcModel&>(*problem.model);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.dimension()));
  for (int t = 0; t < sc.setup.hc.horizon; ++t) x[2 * t] = 0.5;
  return trajectory_from_fine(model.fine_states(x), sc.setup.hc.substeps,
                              sc.setup.model.sampling_time);
}

int simulate_cmd(const std::string& scenario, const std::string& out,
                 std::optional<double> duration, std::optional<std::uint64_t> seed) {
  auto sc = load_scenario(scenario);
  if (duration) sc.duration = *duration;
  if (seed) sc.seed = *seed;
  BatchSummary summary;
  summary.runs.push_back(run_and_write(sc, out, unique_stems({sc.name}).front()));
  std::ofstream(fs::path(out) / "summary.json") << std::setw(2) << summary.to_json() << "\n";
  print_run(summary.runs.front());
  return summary.runs.front().reached ? 0 : 1;
}

int batch_cmd(const std::string& dir, const std::string& out) {
  std::vector<Scenario> scenarios;
  BatchSummary load_failures;
  for (const auto& file : scenario_files(dir)) {
    try {
      scenarios.push_back(load_scenario(file));
    } catch (const std::exception& e) {
      std::cerr << file.string() << ": " << e.what() << "\n";
      RunSummary r;
      r.name = file.stem().string();
      r.error = e.what();
      load_failures.runs.push_back(r);
    }
  }
  auto summary = run_batch(scenarios, out);
  for (const auto& r : summary.runs) print_run(r);
  for (const auto& r : load_failures.runs) print_run(r);
  std::cout << summary.reached() << "/" << summary.runs.size() + load_failures.runs.size()
            << " reached the target\n";
  return summary.reached() == summary.runs.size() && load_failures.runs.empty() ? 0 : 1;
}

int check_cmd(const std::string& vehicle_path, const std::string& obstacle_path,
              double resolution, int samples) {
  const auto vehicle = read_shape_file(vehicle_path);
  const auto obstacle = read_shape_file(obstacle_path);
  require_shared_exponent(vehicle, obstacle);
  const auto sweep = best_axis(vehicle, obstacle, resolution);
  const bool hit = intersects_oracle(vehicle, obstacle, static_cast<std::size_t>(samples));
  std::cout << std::setprecision(9) << "margin " << sweep.margin << "\n"
            << "best axis " << sweep.axis.vector().x() << " " << sweep.axis.vector().y()
            << "\n"
            << "certified disjoint " << (sweep.margin <= 0.0 ? "yes" : "no") << "\n"
            << "oracle " << (hit ? "intersect" : "disjoint") << "\n";
  return 0;
}

int gradcheck_cmd(const std::string& scenario, int points) {
  const auto sc = load_scenario(scenario);
  const auto& s = sc.setup;
  const auto hc = transcribe_hc(sc.initial, s.target, s.obstacles, s.vehicle, s.hc, s.model,
                                {}, s.backoff, s.clearance);
  const auto lc =
      transcribe_lc(sc.initial, cruise_plan(sc), s.lc, s.model, {}, s.hc.substeps, 0);
  const double e_hc = check_gradient(hc, points);
  const double e_lc = check_gradient(lc, points);
  std::cout << std::setprecision(3) << "HC n=" << hc.dimension() << " max relative error "
            << e_hc << "\nLC n=" << lc.dimension() << " max relative error " << e_lc << "\n";
  return e_hc <= 1e-5 && e_lc <= 1e-5 ? 0 : 1;
}

int bench_cmd(const std::string& scenario, int repeats) {
  const auto sc = load_scenario(scenario);
  std::vector<double> hc_ms;
  std::vector<double> lc_ms;
  std::optional<Trajectory> plan;
  for (int i = 0; i < repeats; ++i) {
    const auto out = hc_plan(sc.initial, sc.setup, nullptr, nullptr);
    hc_ms.push_back(out.diagnostics.wall_ms);
    if (out.diagnostics.accepted) plan = out.plan;
  }
  if (!plan) plan = cruise_plan(sc);
  for (int i = 0; i < repeats; ++i) {
    lc_ms.push_back(lc_control(sc.initial, *plan, 0, sc.setup, {}, {}).wall_ms);
  }
  auto show = [](const char* label, const std::vector<double>& v) {
    const auto s = Spread::of(v);
    std::cout << label << " ms: median " << s.median << " p95 " << s.p95 << " max " << s.max
              << "\n";
  };
  show("HC", hc_ms);
  show("LC", lc_ms);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical NMPC with superellipsoid separation"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
  auto* sim = app.add_subcommand("simulate", "Run one scenario and write its logs");
  sim->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out, "Output directory")->required();
  sim->add_option("--duration", duration, "Simulated seconds");
  sim->add_option("--seed", seed, "Seed for the plant perturbation");

  std::string dir;
  auto* batch = app.add_subcommand("batch", "Run every scenario in a directory");
  batch->add_option("--dir", dir, "Scenario directory")->required()->check(CLI::ExistingDirectory);
  batch->add_option("--out", out, "Output directory")->required();

  std::string vehicle;
  std::string obstacle;
  double resolution = 1e-3;
  int samples = 10000;
  auto* check = app.add_subcommand("check", "Separation margin of two shapes");
  check->add_option("--vehicle", vehicle, "Shape JSON")->required()->check(CLI::ExistingFile);
  check->add_option("--obstacle", obstacle, "Shape JSON")->required()->check(CLI::ExistingFile);
  check->add_option("--resolution", resolution, "Axis sweep step (rad)")
      ->check(CLI::Range(1e-6, 0.01));
  check->add_option("--samples", samples, "Oracle samples")->check(CLI::Range(10000, 100000000));

  int points = 100;
  auto* grad = app.add_subcommand("gradcheck", "Exact vs finite-difference gradients");
  grad->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  grad->add_option("--points", points, "Random points")->check(CLI::PositiveNumber);

  int repeats = 10;
  auto* bench = app.add_subcommand("bench", "Cold-start solver runtimes");
  bench->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  bench->add_option("--repeats", repeats, "Solves per level")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return simulate_cmd(scenario, out, duration, seed);
    if (*batch) return batch_cmd(dir, out);
    if (*check) return check_cmd(vehicle, obstacle, resolution, samples);
    if (*grad) return gradcheck_cmd(scenario, points);
    if (*bench) return bench_cmd(scenario, repeats);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
