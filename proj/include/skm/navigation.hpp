#pragma once

// Closed mapping / planning / acting loop: sense, build a batch, train,
// replan, execute one primitive, repeat.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "skm/errors.hpp"
#include "skm/fastron.hpp"
#include "skm/kernel_model.hpp"
#include "skm/model_io.hpp"
#include "skm/planner.hpp"
#include "skm/scan_pipeline.hpp"
#include "skm/sim_env.hpp"

namespace skm {

struct NavigationConfig {
  KernelParams kernel;
  std::optional<ApproxK> score_k = ApproxK{100, 100};
  TrainingConfig training;
  AugmentationConfig augmentation;
  double grid_resolution = 0.25;
  RobotGeometry robot;
  SimConfig sim;
  MotionModel motion = MotionModel::first_order();
  PlannerConfig planner;
  /// Consecutive NoPath cycles before the episode is aborted.
  std::size_t nopath_abort = 10;
  /// Second order: keep the executed terminal velocity for the next plan.
  bool carry_velocity = true;
  /// Spacing of the ground-truth safety samples along executed motion.
  double safety_step = 0.01;
  bool keep_model_snapshots = false;
  std::uint64_t seed = 1;

  void validate() const {
    kernel.validate();
    if (score_k) score_k->validate();
    training.validate();
    augmentation.validate(grid_resolution);
    robot.validate();
    sim.validate();
    motion.validate();
    if (!(grid_resolution > 0.0)) throw InvalidArgumentError("grid resolution must be > 0");
    if (nopath_abort < 1) throw InvalidArgumentError("nopath_abort must be >= 1");
    if (!(safety_step > 0.0)) throw InvalidArgumentError("safety_step must be > 0");
  }
};

struct CycleRecord {
  std::size_t k = 0;
  double t = 0.0;
  Pose2 pose;
  std::size_t scan_ref = 0;
  std::size_t batch_size = 0;
  bool train_converged = true;
  std::size_t sv_count = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  bool plan_found = false;
  std::optional<double> plan_cost;
  std::size_t plan_length = 0;
  std::size_t expanded = 0;
  std::optional<std::size_t> primitive;
  double train_ms = 0.0;
  double plan_ms = 0.0;
  bool violation = false;
};

struct EpisodeLog {
  bool reached = false;
  bool aborted = false;
  std::string diagnostic;
  std::size_t violations = 0;
  double path_length = 0.0;
  std::vector<CycleRecord> cycles;
  std::vector<Point2> trajectory;  // executed states, start first
  std::vector<RangeScan> scans;
  std::vector<std::string> model_snapshots;  // serialized, when requested
  std::vector<std::int64_t> observed_cells;  // union over all scans, sorted
};

struct NavigationResult {
  EpisodeLog log;
  SupportVectorModel<2> model;
};

/// Sampling grid for training: the world extents at the training resolution.
inline SampleGrid<2> training_grid(const GroundTruthGrid& world, double resolution) {
  SampleGrid<2> g;
  g.origin = world.min_corner();
  g.resolution = resolution;
  const Vector2 size = world.max_corner() - world.min_corner();
  g.extents = Cell2(static_cast<std::int64_t>(std::ceil(size.x() / resolution - 1e-9)),
                    static_cast<std::int64_t>(std::ceil(size.y() / resolution - 1e-9)));
  return g;
}

/// Samples executed motion against the ground truth; true on any overlap of
/// the robot disc with an occupied cell.
inline bool motion_violates(const Trajectory& tr, const GroundTruthGrid& world, double radius, double step) {
  if (const auto* seg = std::get_if<Segment<2>>(&tr)) {
    const double len = (seg->b - seg->a).norm();
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step)));
    for (std::size_t i = 0; i <= n; ++i)
      if (world.disc_collides(seg->a + (seg->b - seg->a) * (static_cast<double>(i) / n), radius)) return true;
    return false;
  }
  const auto& c = std::get<PolyCurve<2>>(tr);
  const double len = c.max_speed() * c.horizon;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step)));
  for (std::size_t i = 0; i <= n; ++i)
    if (world.disc_collides(c(c.horizon * static_cast<double>(i) / n), radius)) return true;
  return false;
}

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Runs one episode until the goal is entered, the time limit passes, or the
/// planner fails `nopath_abort` times in a row.
inline NavigationResult run_navigation(const GroundTruthGrid& world, const PlannerState& start, const GoalRegion& goal,
                                       const NavigationConfig& cfg) {
  cfg.validate();
  goal.validate();
  if (!world.geometry().contains(start.position)) throw OutOfRangeError("start lies outside the world");
  if (world.disc_collides(start.position, cfg.robot.radius))
    throw InvalidArgumentError("start is not in ground-truth free space");

  NavigationResult res{EpisodeLog{}, SupportVectorModel<2>(cfg.kernel, cfg.score_k)};
  auto& log = res.log;
  auto& model = res.model;
  const SampleGrid<2> grid = training_grid(world, cfg.grid_resolution);
  PlannerConfig pcfg = cfg.planner;
  if (!pcfg.bounds) pcfg.bounds = Box2{world.min_corner(), world.max_corner()};
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::uint8_t> observed(static_cast<std::size_t>(grid.cell_count()), 0);

  PlannerState state = start;
  state.k = 0;
  log.trajectory.push_back(state.position);
  if (goal.contains(state.position)) {
    log.reached = true;
    return res;
  }

  std::size_t nopath_streak = 0;
  double t = 0.0;
  for (std::size_t k = 0; t < cfg.sim.time_limit; ++k, t += cfg.motion.tau) {
    CycleRecord rec;
    rec.k = k;
    rec.t = t;
    rec.pose = {state.position, state.heading};

    // Sense.
    const RangeScan scan = raycast(world, rec.pose, cfg.sim, &rng, t);
    rec.scan_ref = log.scans.size();
    log.scans.push_back(scan);

    // Map.
    auto t0 = std::chrono::steady_clock::now();
    const GeneratedBatch gb = generate_batch(scan, grid, model, cfg.augmentation, cfg.robot.radius);
    for (auto id : gb.observed_cells) observed[static_cast<std::size_t>(id)] = 1;
    rec.batch_size = gb.batch.size();
    if (!gb.batch.empty()) {
      const auto rep = train_increment(model, gb.batch, cfg.training, std::optional<Point2>(scan.pose.position));
      rec.train_converged = rep.converged;
    }
    rec.train_ms = detail::ms_since(t0);
    rec.sv_count = model.size();
    rec.positives = model.positives().size();
    rec.negatives = model.negatives().size();
    if (cfg.keep_model_snapshots) log.model_snapshots.push_back(serialize(model));

    // Plan.
    t0 = std::chrono::steady_clock::now();
    Plan p;
    std::string failure;
    try {
      p = plan(state, goal, cfg.motion, model, pcfg);
    } catch (const ResourceError& e) {
      failure = e.what();
    }
    rec.plan_ms = detail::ms_since(t0);
    rec.expanded = p.expanded;
    rec.plan_found = p.found;

    if (!p.found || p.primitives.empty()) {
      ++nopath_streak;
      if (cfg.motion.order == MotionOrder::SecondOrder) state.velocity = Vector2::Zero();
      log.cycles.push_back(rec);
      if (nopath_streak >= cfg.nopath_abort) {
        log.aborted = true;
        log.diagnostic = "NoPath for " + std::to_string(nopath_streak) + " consecutive cycles at (" +
                         std::to_string(state.position.x()) + ", " + std::to_string(state.position.y()) + ")" +
                         (failure.empty() ? "" : ": " + failure);
        break;
      }
      continue;
    }
    nopath_streak = 0;
    rec.plan_cost = p.cost;
    rec.plan_length = p.primitives.size();

    // Act: execute the first primitive and validate it against the ground truth.
    const std::size_t ui = p.primitives.front();
    const Vector2& u = cfg.motion.primitives[ui];
    rec.primitive = ui;
    const Trajectory tr = primitive_trajectory(state, u, cfg.motion);
    rec.violation = motion_violates(tr, world, cfg.robot.radius, cfg.safety_step);
    if (rec.violation) ++log.violations;
    const PlannerState next = step_dynamics(state, u, cfg.motion);
    log.path_length += (next.position - state.position).norm();
    state = next;
    if (!cfg.carry_velocity) state.velocity = Vector2::Zero();
    log.trajectory.push_back(state.position);
    log.cycles.push_back(rec);

    if (goal.contains(state.position)) {
      log.reached = true;
      break;
    }
  }
  if (!log.reached && !log.aborted && log.diagnostic.empty()) log.diagnostic = "time limit reached";

  for (std::size_t i = 0; i < observed.size(); ++i)
    if (observed[i]) log.observed_cells.push_back(static_cast<std::int64_t>(i));
  return res;
}

inline nlohmann::json cycle_to_json(const CycleRecord& r) {
  nlohmann::json j{{"k", r.k},
                   {"t", r.t},
                   {"pose", {r.pose.position.x(), r.pose.position.y(), r.pose.heading}},
                   {"scan_ref", r.scan_ref},
                   {"batch_size", r.batch_size},
                   {"train_converged", r.train_converged},
                   {"sv_count", r.sv_count},
                   {"positives", r.positives},
                   {"negatives", r.negatives},
                   {"plan_found", r.plan_found},
                   {"plan_cost", nullptr},
                   {"plan_length", r.plan_length},
                   {"expanded", r.expanded},
                   {"primitive", nullptr},
                   {"train_ms", r.train_ms},
                   {"plan_ms", r.plan_ms},
                   {"violation", r.violation}};
  if (r.plan_cost) j["plan_cost"] = *r.plan_cost;
  if (r.primitive) j["primitive"] = *r.primitive;
  return j;
}

/// One JSON object per cycle.
inline void write_episode_log(std::ostream& out, const EpisodeLog& log) {
  for (const auto& c : log.cycles) out << cycle_to_json(c).dump() << '\n';
}

inline nlohmann::json episode_summary(const EpisodeLog& log) {
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& p : log.trajectory) traj.push_back({p.x(), p.y()});
  return {{"reached", log.reached},   {"aborted", log.aborted},         {"diagnostic", log.diagnostic},
          {"cycles", log.cycles.size()}, {"violations", log.violations}, {"path_length", log.path_length},
          {"trajectory", traj}};
}

}  // namespace skm
