#pragma once

// Synthetic 2-D world: a binary ground-truth grid, scene files, and lidar
// ray casting by exact cell traversal.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skm/core_types.hpp"
#include "skm/errors.hpp"
#include "skm/planner.hpp"

namespace skm {

/// Binary occupancy over a regular grid; cells outside the extents are free.
class GroundTruthGrid {
 public:
  GroundTruthGrid() = default;
  explicit GroundTruthGrid(const SampleGrid<2>& geometry) : geometry_(geometry) {
    geometry_.validate();
    cells_.assign(static_cast<std::size_t>(geometry_.cell_count()), 0);
  }

  const SampleGrid<2>& geometry() const { return geometry_; }
  double resolution() const { return geometry_.resolution; }
  std::int64_t width() const { return geometry_.extents.x(); }
  std::int64_t height() const { return geometry_.extents.y(); }

  Point2 min_corner() const { return geometry_.origin; }
  Point2 max_corner() const {
    return geometry_.origin + geometry_.extents.cast<double>() * geometry_.resolution;
  }

  bool occupied(const Cell2& c) const {
    if (!geometry_.contains(c)) return false;
    return cells_[static_cast<std::size_t>(geometry_.linear(c))] != 0;
  }

  bool occupied_at(const Point2& p) const { return occupied(geometry_.raw_cell(p)); }

  void set(const Cell2& c, bool occ) {
    if (!geometry_.contains(c)) throw OutOfRangeError("cell outside the world grid");
    cells_[static_cast<std::size_t>(geometry_.linear(c))] = occ ? 1 : 0;
  }

  std::size_t occupied_count() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
  }

  /// Distance from p to the closed square of cell c.
  double distance_to_cell(const Point2& p, const Cell2& c) const {
    const Point2 lo = geometry_.origin + c.cast<double>() * geometry_.resolution;
    const Point2 hi = lo + Vector2::Constant(geometry_.resolution);
    const Vector2 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vector2::Zero());
    return d.norm();
  }

  /// True if a disc of radius r at p overlaps an occupied cell (r = 0: p
  /// lies in an occupied cell).
  bool disc_collides(const Point2& p, double r) const {
    if (occupied_at(p)) return true;
    if (r <= 0.0) return false;
    const Cell2 lo = geometry_.raw_cell(p - Vector2::Constant(r));
    const Cell2 hi = geometry_.raw_cell(p + Vector2::Constant(r));
    for (std::int64_t y = lo.y(); y <= hi.y(); ++y)
      for (std::int64_t x = lo.x(); x <= hi.x(); ++x) {
        const Cell2 c(x, y);
        if (occupied(c) && distance_to_cell(p, c) < r) return true;
      }
    return false;
  }

  /// Whether p lies within distance r (inclusive) of an occupied cell.
  bool cspace_occupied_at(const Point2& p, double r) const {
    if (occupied_at(p)) return true;
    if (r <= 0.0) return false;
    // One extra cell below: a face exactly at distance r still counts.
    const Cell2 lo = geometry_.raw_cell(p - Vector2::Constant(r)) - Cell2::Ones();
    const Cell2 hi = geometry_.raw_cell(p + Vector2::Constant(r));
    for (std::int64_t y = lo.y(); y <= hi.y(); ++y)
      for (std::int64_t x = lo.x(); x <= hi.x(); ++x)
        if (occupied(Cell2(x, y)) && distance_to_cell(p, Cell2(x, y)) <= r) return true;
    return false;
  }

  /// C-space ground truth at a cell center.
  bool cspace_occupied(const Cell2& c, double r) const { return cspace_occupied_at(cell_center(c, geometry_), r); }

  bool operator==(const GroundTruthGrid& o) const {
    return geometry_.origin == o.geometry_.origin && geometry_.resolution == o.geometry_.resolution &&
           geometry_.extents == o.geometry_.extents && cells_ == o.cells_;
  }

 private:
  SampleGrid<2> geometry_;
  std::vector<std::uint8_t> cells_;
};

/// Text grid format:
///   skm-grid 1
///   <width> <height> <resolution> <origin_x> <origin_y>
///   <height lines of width '0'/'1' characters, row y = 0 first>
inline void write_grid(std::ostream& out, const GroundTruthGrid& g) {
  out << "skm-grid 1\n";
  out.precision(17);
  out << g.width() << ' ' << g.height() << ' ' << g.resolution() << ' ' << g.geometry().origin.x() << ' '
      << g.geometry().origin.y() << '\n';
  for (std::int64_t y = 0; y < g.height(); ++y) {
    for (std::int64_t x = 0; x < g.width(); ++x) out << (g.occupied(Cell2(x, y)) ? '1' : '0');
    out << '\n';
  }
}

inline GroundTruthGrid read_grid(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "skm-grid" || version != 1) throw ParseError("not an skm-grid v1 file");
  SampleGrid<2> geom;
  std::int64_t w = 0, h = 0;
  double ox = 0, oy = 0;
  if (!(in >> w >> h >> geom.resolution >> ox >> oy)) throw ParseError("malformed grid header");
  geom.extents = Cell2(w, h);
  geom.origin = Point2(ox, oy);
  try {
    geom.validate();
  } catch (const InvalidArgumentError& e) {
    throw ParseError(std::string("invalid grid header: ") + e.what());
  }
  GroundTruthGrid g(geom);
  for (std::int64_t y = 0; y < h; ++y) {
    std::string row;
    if (!(in >> row) || static_cast<std::int64_t>(row.size()) != w)
      throw ParseError("grid row " + std::to_string(y) + " has the wrong length");
    for (std::int64_t x = 0; x < w; ++x) {
      if (row[static_cast<std::size_t>(x)] != '0' && row[static_cast<std::size_t>(x)] != '1')
        throw ParseError("grid cells must be '0' or '1'");
      g.set(Cell2(x, y), row[static_cast<std::size_t>(x)] == '1');
    }
  }
  return g;
}

struct SimConfig {
  std::size_t beam_count = 360;
  double fov = 2.0 * std::numbers::pi;
  double max_range = 10.0;
  double range_noise_sigma = 0.0;
  /// Standard deviation of the pose error reported with each scan (0 = exact).
  double pose_noise_sigma = 0.0;
  double scan_period = 1.0;
  double time_limit = 200.0;

  void validate() const {
    if (beam_count < 2) throw InvalidArgumentError("beam_count must be >= 2");
    if (!(fov > 0.0) || fov > 2.0 * std::numbers::pi + 1e-12) throw InvalidArgumentError("fov must be in (0, 2pi]");
    if (!(max_range > 0.0)) throw InvalidArgumentError("max_range must be > 0");
    if (!(range_noise_sigma >= 0.0) || !(pose_noise_sigma >= 0.0))
      throw InvalidArgumentError("noise sigmas must be >= 0");
    if (!(scan_period > 0.0)) throw InvalidArgumentError("scan_period must be > 0");
    if (!(time_limit >= 0.0)) throw InvalidArgumentError("time_limit must be >= 0");
  }
};

/// Beam angles relative to the heading, centered on 0. A full circle does not
/// repeat its first beam.
inline std::vector<double> beam_angles(const SimConfig& cfg) {
  std::vector<double> a(cfg.beam_count);
  const bool full = cfg.fov >= 2.0 * std::numbers::pi - 1e-12;
  const double step = full ? cfg.fov / static_cast<double>(cfg.beam_count)
                           : cfg.fov / static_cast<double>(cfg.beam_count - 1);
  for (std::size_t i = 0; i < cfg.beam_count; ++i) a[i] = -cfg.fov / 2.0 + step * static_cast<double>(i);
  return a;
}

/// Distance along a ray to the first occupied cell, by cell-boundary
/// stepping. Returns max_range when nothing is hit within range or the ray
/// leaves the grid.
inline double cast_ray(const GroundTruthGrid& world, const Point2& origin, double angle, double max_range) {
  const auto& g = world.geometry();
  const double res = g.resolution;
  const Vector2 dir(std::cos(angle), std::sin(angle));
  Cell2 c = g.raw_cell(origin);
  std::array<std::int64_t, 2> step{};
  std::array<double, 2> t_max{}, t_delta{};
  for (int i = 0; i < 2; ++i) {
    const double lo = g.origin[i] + static_cast<double>(c[i]) * res;
    if (dir[i] > 0.0) {
      step[i] = 1;
      t_max[i] = (lo + res - origin[i]) / dir[i];
      t_delta[i] = res / dir[i];
    } else if (dir[i] < 0.0) {
      step[i] = -1;
      t_max[i] = (lo - origin[i]) / dir[i];
      t_delta[i] = -res / dir[i];
    } else {
      step[i] = 0;
      t_max[i] = std::numeric_limits<double>::infinity();
      t_delta[i] = std::numeric_limits<double>::infinity();
    }
  }
  while (true) {
    const int axis = t_max[0] <= t_max[1] ? 0 : 1;
    const double t = t_max[axis];
    if (t >= max_range) return max_range;
    c[axis] += step[axis];
    t_max[axis] += t_delta[axis];
    if (!g.contains(c)) return max_range;
    if (world.occupied(c)) return std::max(0.0, t);
  }
}

/// Simulated scan from `pose`. `rng` is only used when a noise sigma is set.
inline RangeScan raycast(const GroundTruthGrid& world, const Pose2& pose, const SimConfig& cfg,
                         std::mt19937_64* rng = nullptr, double t = 0.0) {
  cfg.validate();
  if (!world.geometry().contains(pose.position)) throw OutOfRangeError("sensor pose lies outside the world");
  if (world.occupied_at(pose.position)) throw InvalidArgumentError("sensor pose lies inside an obstacle");
  const bool noisy = cfg.range_noise_sigma > 0.0 || cfg.pose_noise_sigma > 0.0;
  if (noisy && rng == nullptr) throw InvalidArgumentError("noisy ray casting needs a random generator");

  RangeScan scan;
  scan.t = t;
  scan.pose = pose;
  scan.max_range = cfg.max_range;
  scan.angles = beam_angles(cfg);
  scan.ranges.reserve(cfg.beam_count);
  std::normal_distribution<double> range_noise(0.0, cfg.range_noise_sigma > 0.0 ? cfg.range_noise_sigma : 1.0);
  for (double a : scan.angles) {
    double r = cast_ray(world, pose.position, pose.heading + a, cfg.max_range);
    if (cfg.range_noise_sigma > 0.0 && r < cfg.max_range) r = std::clamp(r + range_noise(*rng), 0.0, cfg.max_range);
    scan.ranges.push_back(r);
  }
  if (cfg.pose_noise_sigma > 0.0) {
    std::normal_distribution<double> pose_noise(0.0, cfg.pose_noise_sigma);
    scan.pose.position += Vector2(pose_noise(*rng), pose_noise(*rng));
    scan.pose.heading = normalize_angle(scan.pose.heading + pose_noise(*rng));
  }
  return scan;
}

/// A world plus the navigation task it was authored for.
struct Scene {
  GroundTruthGrid world;
  std::optional<Point2> start;
  std::optional<GoalRegion> goal;
  std::uint64_t seed = 0;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ParseError("unknown key '" + it.key() + "' in " + where);
  }
}

inline Point2 json_point(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError(what + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

// Marks every cell whose center satisfies `inside`.
template <typename Pred>
void paint(GroundTruthGrid& g, const Point2& lo, const Point2& hi, Pred&& inside) {
  const auto& geom = g.geometry();
  const Cell2 a = geom.raw_cell(lo).cwiseMax(Cell2::Zero());
  const Cell2 b = geom.raw_cell(hi).cwiseMin(geom.extents - Cell2::Ones());
  for (std::int64_t y = a.y(); y <= b.y(); ++y)
    for (std::int64_t x = a.x(); x <= b.x(); ++x)
      if (inside(cell_center(Cell2(x, y), geom))) g.set(Cell2(x, y), true);
}

inline void paint_rect(GroundTruthGrid& g, const Point2& lo, const Point2& hi) {
  paint(g, lo, hi, [&](const Point2& c) {
    return (c.array() >= lo.array()).all() && (c.array() <= hi.array()).all();
  });
}

}  // namespace detail

/// Builds a world from a scene description:
///   {"resolution": 0.25, "extents": [nx, ny], "origin": [x, y],
///    "shapes": [{"type": "rect", "min": [x, y], "max": [x, y]},
///               {"type": "rect", "cells": [x0, y0, x1, y1]},
///               {"type": "circle", "center": [x, y], "radius": r}],
///    "border": true,
///    "clutter": {"count": n, "min_size": a, "max_size": b, "keep_clear": [[x, y, r], ...]},
///    "seed": 1, "start": [x, y], "goal": {"center": [x, y], "radius": r}}
/// A cell is occupied iff its center lies inside a shape (boundary included).
inline Scene build_world(const nlohmann::json& j) {
  using detail::json_point;
  detail::reject_unknown_keys(j, {"resolution", "extents", "origin", "shapes", "border", "clutter", "seed", "start",
                                  "goal", "name"},
                              "scene");
  Scene scene;
  try {
    SampleGrid<2> geom;
    geom.resolution = j.at("resolution").get<double>();
    const auto& ext = j.at("extents");
    if (!ext.is_array() || ext.size() != 2) throw ParseError("scene extents must be [nx, ny]");
    geom.extents = Cell2(ext[0].get<std::int64_t>(), ext[1].get<std::int64_t>());
    if (j.contains("origin")) geom.origin = json_point(j["origin"], "scene origin");
    try {
      geom.validate();
    } catch (const InvalidArgumentError& e) {
      throw ParseError(std::string("invalid scene grid: ") + e.what());
    }
    scene.world = GroundTruthGrid(geom);
    scene.seed = j.value("seed", std::uint64_t{0});
    auto& world = scene.world;

    for (const auto& s : j.value("shapes", nlohmann::json::array())) {
      const std::string type = s.at("type").get<std::string>();
      if (type == "rect") {
        if (s.contains("cells")) {
          detail::reject_unknown_keys(s, {"type", "cells"}, "rect shape");
          const auto c = s["cells"].get<std::vector<std::int64_t>>();
          if (c.size() != 4) throw ParseError("rect cells must be [x0, y0, x1, y1]");
          for (std::int64_t y = std::max<std::int64_t>(0, c[1]); y <= std::min(c[3], geom.extents.y() - 1); ++y)
            for (std::int64_t x = std::max<std::int64_t>(0, c[0]); x <= std::min(c[2], geom.extents.x() - 1); ++x)
              world.set(Cell2(x, y), true);
        } else {
          detail::reject_unknown_keys(s, {"type", "min", "max"}, "rect shape");
          detail::paint_rect(world, json_point(s.at("min"), "rect min"), json_point(s.at("max"), "rect max"));
        }
      } else if (type == "circle") {
        detail::reject_unknown_keys(s, {"type", "center", "radius"}, "circle shape");
        const Point2 c = json_point(s.at("center"), "circle center");
        const double r = s.at("radius").get<double>();
        if (!(r >= 0.0)) throw ParseError("circle radius must be >= 0");
        detail::paint(world, c - Vector2::Constant(r), c + Vector2::Constant(r),
                      [&](const Point2& p) { return (p - c).norm() <= r; });
      } else {
        throw ParseError("unknown shape type '" + type + "'");
      }
    }

    if (j.value("border", false)) {
      for (std::int64_t x = 0; x < geom.extents.x(); ++x) {
        world.set(Cell2(x, 0), true);
        world.set(Cell2(x, geom.extents.y() - 1), true);
      }
      for (std::int64_t y = 0; y < geom.extents.y(); ++y) {
        world.set(Cell2(0, y), true);
        world.set(Cell2(geom.extents.x() - 1, y), true);
      }
    }

    if (j.contains("start")) scene.start = json_point(j["start"], "scene start");
    if (j.contains("goal")) {
      const auto& gj = j["goal"];
      detail::reject_unknown_keys(gj, {"center", "radius"}, "scene goal");
      scene.goal = GoalRegion{json_point(gj.at("center"), "goal center"), gj.value("radius", 0.5)};
    }

    if (j.contains("clutter")) {
      const auto& cj = j["clutter"];
      detail::reject_unknown_keys(cj, {"count", "min_size", "max_size", "keep_clear"}, "clutter");
      const auto count = cj.at("count").get<std::size_t>();
      const double lo = cj.value("min_size", 0.5), hi = cj.value("max_size", 1.5);
      if (!(lo > 0.0) || hi < lo) throw ParseError("clutter sizes must satisfy 0 < min_size <= max_size");
      std::vector<std::array<double, 3>> keep;
      for (const auto& k : cj.value("keep_clear", nlohmann::json::array())) {
        const auto v = k.get<std::vector<double>>();
        if (v.size() != 3) throw ParseError("keep_clear entries must be [x, y, r]");
        keep.push_back({v[0], v[1], v[2]});
      }
      if (scene.start) keep.push_back({scene.start->x(), scene.start->y(), 1.0});
      if (scene.goal) keep.push_back({scene.goal->center.x(), scene.goal->center.y(), scene.goal->radius + 0.5});

      std::mt19937_64 rng(scene.seed);
      const Point2 wmin = world.min_corner(), wmax = world.max_corner();
      std::uniform_real_distribution<double> ux(wmin.x(), wmax.x()), uy(wmin.y(), wmax.y()), us(lo, hi);
      std::size_t placed = 0;
      for (std::size_t attempt = 0; placed < count && attempt < 100 * count + 100; ++attempt) {
        const Point2 c(ux(rng), uy(rng));
        const Vector2 half(us(rng) / 2, us(rng) / 2);
        bool clear = true;
        for (const auto& k : keep) {
          // distance from the keep-clear center to the rectangle
          const Vector2 d = ((c - half) - Point2(k[0], k[1])).cwiseMax(Point2(k[0], k[1]) - (c + half)).cwiseMax(
              Vector2::Zero());
          if (d.norm() < k[2]) clear = false;
        }
        if (!clear) continue;
        detail::paint_rect(world, c - half, c + half);
        ++placed;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed scene: ") + e.what());
  }
  return scene;
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scene file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("scene file " + path + ": " + e.what());
  }
  return build_world(j);
}

}  // namespace skm
