#pragma once

// Run configuration: one JSON document covering every component. Missing
// keys take the library defaults; unknown keys are rejected.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skm/collision.hpp"
#include "skm/errors.hpp"
#include "skm/eval.hpp"
#include "skm/navigation.hpp"

namespace skm {

inline constexpr int kConfigVersion = 1;

struct GridConfig {
  double resolution = 0.25;
  /// Unset: derived from the world (simulate) or the scan log (train).
  std::optional<Point2> origin;
  std::optional<Cell2> extents;
};

struct RunPaths {
  std::optional<std::string> scene;
  std::optional<std::string> scan_log;
  std::optional<std::string> model;
  std::optional<std::string> out;
};

struct RunConfig {
  KernelParams kernel;
  std::optional<ApproxK> approx_k = ApproxK{100, 100};
  TrainingConfig training;
  AugmentationConfig augmentation;
  GridConfig grid;
  RobotGeometry robot;
  SimConfig sim;
  MotionModel motion = MotionModel::second_order();
  CheckConfig check;
  PlannerConfig planner;
  std::size_t nopath_abort = 10;
  bool carry_velocity = true;
  double safety_step = 0.01;
  std::uint64_t seed = 1;
  RunPaths paths;

  void validate() const { navigation().validate(); }

  NavigationConfig navigation() const {
    NavigationConfig n;
    n.kernel = kernel;
    n.score_k = approx_k;
    n.training = training;
    n.augmentation = augmentation;
    n.grid_resolution = grid.resolution;
    n.robot = robot;
    n.sim = sim;
    n.motion = motion;
    n.planner = planner;
    n.planner.check = check;
    n.nopath_abort = nopath_abort;
    n.carry_velocity = carry_velocity;
    n.safety_step = safety_step;
    n.seed = seed;
    return n;
  }
};

namespace detail {

inline nlohmann::json approx_to_json(const std::optional<ApproxK>& k) {
  if (!k) return nullptr;
  return {{"positives", k->positives}, {"negatives", k->negatives}};
}

inline std::optional<ApproxK> approx_from_json(const nlohmann::json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  reject_unknown_keys(j, {"positives", "negatives"}, where);
  ApproxK k;
  k.positives = j.value("positives", k.positives);
  k.negatives = j.value("negatives", k.negatives);
  return k;
}

inline const char* bound_kind_name(BoundKind k) {
  switch (k) {
    case BoundKind::SingleJ:
      return "single-j";
    case BoundKind::MinIMaxJ:
      return "minimax";
    case BoundKind::MaxJMinI:
      return "maximin";
  }
  return "minimax";
}

inline BoundKind bound_kind_from(const std::string& s) {
  if (s == "single-j") return BoundKind::SingleJ;
  if (s == "minimax") return BoundKind::MinIMaxJ;
  if (s == "maximin") return BoundKind::MaxJMinI;
  throw ParseError("unknown bound kind '" + s + "' (single-j, minimax, maximin)");
}

inline nlohmann::json bound_to_json(const BoundMode& b) {
  nlohmann::json knn = nullptr;
  if (b.knn_limit) knn = {{"positives", b.knn_limit->positives}, {"negatives", b.knn_limit->negatives}};
  return {{"kind", bound_kind_name(b.kind)},
          {"knn", knn},
          {"positive_sum", b.positive_sum == PositiveSum::Local ? "local" : "global"}};
}

inline BoundMode bound_from_json(const nlohmann::json& j, BoundMode b, const std::string& where) {
  reject_unknown_keys(j, {"kind", "knn", "positive_sum"}, where);
  if (j.contains("kind")) b.kind = bound_kind_from(j["kind"].get<std::string>());
  if (j.contains("knn")) {
    if (j["knn"].is_null()) {
      b.knn_limit.reset();
    } else {
      reject_unknown_keys(j["knn"], {"positives", "negatives"}, where + ".knn");
      KnnLimit k;
      k.positives = j["knn"].value("positives", k.positives);
      k.negatives = j["knn"].value("negatives", k.negatives);
      b.knn_limit = k;
    }
  }
  if (j.contains("positive_sum")) {
    const auto s = j["positive_sum"].get<std::string>();
    if (s == "local")
      b.positive_sum = PositiveSum::Local;
    else if (s == "global")
      b.positive_sum = PositiveSum::Global;
    else
      throw ParseError("positive_sum must be 'local' or 'global'");
  }
  return b;
}

}  // namespace detail

inline nlohmann::json config_to_json(const RunConfig& c) {
  using nlohmann::json;
  json prims = json::array();
  for (const auto& u : c.motion.primitives) prims.push_back({u.x(), u.y()});
  json bounds = nullptr;
  if (c.planner.bounds)
    bounds = {{c.planner.bounds->min.x(), c.planner.bounds->min.y()},
              {c.planner.bounds->max.x(), c.planner.bounds->max.y()}};
  json grid{{"resolution", c.grid.resolution}};
  if (c.grid.origin) grid["origin"] = {c.grid.origin->x(), c.grid.origin->y()};
  if (c.grid.extents) grid["extents"] = {c.grid.extents->x(), c.grid.extents->y()};
  json paths = json::object();
  auto put = [&](const char* k, const std::optional<std::string>& v) {
    if (v) paths[k] = *v;
  };
  put("scene", c.paths.scene);
  put("scan_log", c.paths.scan_log);
  put("model", c.paths.model);
  put("out", c.paths.out);
  return {
      {"version", kConfigVersion},
      {"kernel", {{"eta", c.kernel.eta}, {"gamma", c.kernel.gamma}}},
      {"approx_k", detail::approx_to_json(c.approx_k)},
      {"training",
       {{"xi_plus", c.training.xi_plus},
        {"xi_minus", c.training.xi_minus},
        {"n_max", c.training.n_max ? json(*c.training.n_max) : json(nullptr)},
        {"init_k", detail::approx_to_json(c.training.init_k)},
        {"anchor", c.training.anchor == InitAnchor::PerSample ? "per_sample" : "robot_position"}}},
      {"augmentation",
       {{"neighbor_threshold", c.augmentation.neighbor_threshold},
        {"free_ratio", c.augmentation.free_ratio},
        {"free_min", c.augmentation.free_min},
        {"skip_model_occupied", c.augmentation.skip_model_occupied}}},
      {"grid", grid},
      {"robot", {{"radius", c.robot.radius}, {"wheelbase", c.robot.wheelbase}}},
      {"sim",
       {{"beam_count", c.sim.beam_count},
        {"fov", c.sim.fov},
        {"max_range", c.sim.max_range},
        {"range_noise_sigma", c.sim.range_noise_sigma},
        {"pose_noise_sigma", c.sim.pose_noise_sigma},
        {"scan_period", c.sim.scan_period},
        {"time_limit", c.sim.time_limit}}},
      {"motion",
       {{"order", c.motion.order == MotionOrder::FirstOrder ? "first" : "second"},
        {"tau", c.motion.tau},
        {"max_speed", c.motion.max_speed},
        {"primitives", prims}}},
      {"check",
       {{"segment", detail::bound_to_json(c.check.segment_mode)},
        {"curve", detail::bound_to_json(c.check.curve_mode)},
        {"epsilon", c.check.epsilon}}},
      {"planner",
       {{"bounds", bounds},
        {"position_quantum", c.planner.position_quantum},
        {"velocity_quantum", c.planner.velocity_quantum},
        {"visited_cap", c.planner.visited_cap}}},
      {"navigation",
       {{"nopath_abort", c.nopath_abort}, {"carry_velocity", c.carry_velocity}, {"safety_step", c.safety_step}}},
      {"seed", c.seed},
      {"paths", paths},
  };
}

/// Parses and validates a config document. Throws ParseError on unknown keys,
/// wrong types, a missing or unsupported version, or invalid values.
inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::reject_unknown_keys;
  reject_unknown_keys(j,
                      {"version", "kernel", "approx_k", "training", "augmentation", "grid", "robot", "sim", "motion",
                       "check", "planner", "navigation", "seed", "paths"},
                      "config");
  RunConfig c;
  try {
    if (!j.contains("version")) throw ParseError("config is missing 'version'");
    if (j["version"].get<int>() != kConfigVersion)
      throw ParseError("unsupported config version " + j["version"].dump());

    if (j.contains("kernel")) {
      const auto& k = j["kernel"];
      reject_unknown_keys(k, {"eta", "gamma"}, "kernel");
      c.kernel.eta = k.value("eta", c.kernel.eta);
      c.kernel.gamma = k.value("gamma", c.kernel.gamma);
    }
    if (j.contains("approx_k")) c.approx_k = detail::approx_from_json(j["approx_k"], "approx_k");

    if (j.contains("training")) {
      const auto& t = j["training"];
      reject_unknown_keys(t, {"xi_plus", "xi_minus", "n_max", "init_k", "anchor"}, "training");
      c.training.xi_plus = t.value("xi_plus", c.training.xi_plus);
      c.training.xi_minus = t.value("xi_minus", c.training.xi_minus);
      if (t.contains("n_max"))
        c.training.n_max = t["n_max"].is_null() ? std::nullopt : std::optional(t["n_max"].get<std::size_t>());
      if (t.contains("init_k")) c.training.init_k = detail::approx_from_json(t["init_k"], "training.init_k");
      if (t.contains("anchor")) {
        const auto a = t["anchor"].get<std::string>();
        if (a == "per_sample")
          c.training.anchor = InitAnchor::PerSample;
        else if (a == "robot_position")
          c.training.anchor = InitAnchor::RobotPosition;
        else
          throw ParseError("training.anchor must be 'per_sample' or 'robot_position'");
      }
    }

    if (j.contains("augmentation")) {
      const auto& a = j["augmentation"];
      reject_unknown_keys(a, {"neighbor_threshold", "free_ratio", "free_min", "skip_model_occupied"}, "augmentation");
      auto& g = c.augmentation;
      g.neighbor_threshold = a.value("neighbor_threshold", g.neighbor_threshold);
      g.free_ratio = a.value("free_ratio", g.free_ratio);
      g.free_min = a.value("free_min", g.free_min);
      g.skip_model_occupied = a.value("skip_model_occupied", g.skip_model_occupied);
    }

    if (j.contains("grid")) {
      const auto& g = j["grid"];
      reject_unknown_keys(g, {"resolution", "origin", "extents"}, "grid");
      c.grid.resolution = g.value("resolution", c.grid.resolution);
      if (g.contains("origin")) c.grid.origin = detail::json_point(g["origin"], "grid.origin");
      if (g.contains("extents")) {
        const auto& e = g["extents"];
        if (!e.is_array() || e.size() != 2) throw ParseError("grid.extents must be [nx, ny]");
        c.grid.extents = Cell2(e[0].get<std::int64_t>(), e[1].get<std::int64_t>());
      }
    }

    if (j.contains("robot")) {
      const auto& r = j["robot"];
      reject_unknown_keys(r, {"radius", "wheelbase"}, "robot");
      c.robot.radius = r.value("radius", c.robot.radius);
      c.robot.wheelbase = r.value("wheelbase", c.robot.wheelbase);
    }

    if (j.contains("sim")) {
      const auto& s = j["sim"];
      reject_unknown_keys(s,
                          {"beam_count", "fov", "max_range", "range_noise_sigma", "pose_noise_sigma", "scan_period",
                           "time_limit"},
                          "sim");
      auto& m = c.sim;
      m.beam_count = s.value("beam_count", m.beam_count);
      m.fov = s.value("fov", m.fov);
      m.max_range = s.value("max_range", m.max_range);
      m.range_noise_sigma = s.value("range_noise_sigma", m.range_noise_sigma);
      m.pose_noise_sigma = s.value("pose_noise_sigma", m.pose_noise_sigma);
      m.scan_period = s.value("scan_period", m.scan_period);
      m.time_limit = s.value("time_limit", m.time_limit);
    }

    if (j.contains("motion")) {
      const auto& m = j["motion"];
      reject_unknown_keys(m, {"order", "tau", "max_speed", "primitives"}, "motion");
      const auto order = m.value("order", std::string("second"));
      if (order != "first" && order != "second") throw ParseError("motion.order must be 'first' or 'second'");
      const double tau = m.value("tau", 1.0);
      c.motion = order == "first" ? MotionModel::first_order(tau)
                                  : MotionModel::second_order(tau, m.value("max_speed", 2.0));
      if (m.contains("primitives")) {
        c.motion.primitives.clear();
        for (const auto& u : m["primitives"]) c.motion.primitives.push_back(detail::json_point(u, "motion primitive"));
      }
    }

    if (j.contains("check")) {
      const auto& k = j["check"];
      reject_unknown_keys(k, {"segment", "curve", "epsilon"}, "check");
      if (k.contains("segment")) c.check.segment_mode = detail::bound_from_json(k["segment"], c.check.segment_mode, "check.segment");
      if (k.contains("curve")) c.check.curve_mode = detail::bound_from_json(k["curve"], c.check.curve_mode, "check.curve");
      c.check.epsilon = k.value("epsilon", c.check.epsilon);
    }

    if (j.contains("planner")) {
      const auto& p = j["planner"];
      reject_unknown_keys(p, {"bounds", "position_quantum", "velocity_quantum", "visited_cap"}, "planner");
      if (p.contains("bounds") && !p["bounds"].is_null()) {
        const auto& b = p["bounds"];
        if (!b.is_array() || b.size() != 2) throw ParseError("planner.bounds must be [[xmin, ymin], [xmax, ymax]]");
        c.planner.bounds = Box2{detail::json_point(b[0], "planner.bounds"), detail::json_point(b[1], "planner.bounds")};
      }
      c.planner.position_quantum = p.value("position_quantum", c.planner.position_quantum);
      c.planner.velocity_quantum = p.value("velocity_quantum", c.planner.velocity_quantum);
      c.planner.visited_cap = p.value("visited_cap", c.planner.visited_cap);
    }

    if (j.contains("navigation")) {
      const auto& n = j["navigation"];
      reject_unknown_keys(n, {"nopath_abort", "carry_velocity", "safety_step"}, "navigation");
      c.nopath_abort = n.value("nopath_abort", c.nopath_abort);
      c.carry_velocity = n.value("carry_velocity", c.carry_velocity);
      c.safety_step = n.value("safety_step", c.safety_step);
    }

    c.seed = j.value("seed", c.seed);

    if (j.contains("paths")) {
      const auto& p = j["paths"];
      reject_unknown_keys(p, {"scene", "scan_log", "model", "out"}, "paths");
      auto get = [&](const char* k, std::optional<std::string>& dst) {
        if (p.contains(k)) dst = p[k].get<std::string>();
      };
      get("scene", c.paths.scene);
      get("scan_log", c.paths.scan_log);
      get("model", c.paths.model);
      get("out", c.paths.out);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed config: ") + e.what());
  }
  try {
    c.validate();
    c.check.segment_mode.validate();
    c.check.curve_mode.validate();
    if (!(c.check.epsilon > 0.0)) throw InvalidArgumentError("check.epsilon must be > 0");
    if (c.grid.extents && (c.grid.extents->array() < 1).any())
      throw InvalidArgumentError("grid.extents must be >= 1");
  } catch (const InvalidArgumentError& e) {
    throw ParseError(std::string("invalid config: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

/// Sampling grid for replaying a scan log: the configured grid if complete,
/// otherwise the box around all poses grown by each scan's max range, snapped
/// to the resolution.
inline SampleGrid<2> grid_for_scans(const GridConfig& cfg, const std::vector<RangeScan>& scans) {
  SampleGrid<2> g;
  g.resolution = cfg.resolution;
  if (cfg.origin && cfg.extents) {
    g.origin = *cfg.origin;
    g.extents = *cfg.extents;
    g.validate();
    return g;
  }
  if (scans.empty()) {
    g.origin = cfg.origin.value_or(Point2::Zero());
    g.extents = cfg.extents.value_or(Cell2::Ones());
    g.validate();
    return g;
  }
  Point2 lo = Point2::Constant(std::numeric_limits<double>::infinity());
  Point2 hi = -lo;
  for (const auto& s : scans) {
    lo = lo.cwiseMin(s.pose.position - Vector2::Constant(s.max_range));
    hi = hi.cwiseMax(s.pose.position + Vector2::Constant(s.max_range));
  }
  const double r = cfg.resolution;
  g.origin = cfg.origin.value_or(Point2((lo / r).array().floor() * r));
  const Vector2 span = hi - g.origin;
  g.extents = cfg.extents.value_or(
      Cell2(static_cast<std::int64_t>(std::ceil(span.x() / r)) + 1, static_cast<std::int64_t>(std::ceil(span.y() / r)) + 1));
  g.validate();
  return g;
}

}  // namespace skm
