#pragma once

// Turns one planar range scan into a labeled C-space training batch:
// occupied balls around beam endpoints, observed free space, and a free
// collar around the occupied samples.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <unordered_set>
#include <vector>

#include "skm/core_types.hpp"
#include "skm/errors.hpp"
#include "skm/fastron.hpp"
#include "skm/kernel_model.hpp"

namespace skm {

struct CSpaceObstacle {
  Point2 center;
  double radius = 0.0;
  Vector2 direction = Vector2::Zero();  // unit beam direction at the hit
};

struct AugmentationConfig {
  /// l-infinity collar radius (strict), meters.
  double neighbor_threshold = 0.5;
  /// Observed-free samples are capped at max(free_min, free_ratio * #occupied).
  double free_ratio = 4.0;
  std::size_t free_min = 64;
  /// Skip collar points the current model already classifies occupied.
  bool skip_model_occupied = false;

  void validate(double grid_resolution) const {
    if (!(neighbor_threshold > 0.0)) throw InvalidArgumentError("neighbor threshold must be > 0");
    if (neighbor_threshold < grid_resolution)
      throw InvalidArgumentError("neighbor threshold must be >= grid resolution");
    if (!(free_ratio >= 0.0)) throw InvalidArgumentError("free ratio must be >= 0");
  }
};

inline std::vector<CSpaceObstacle> scan_to_obstacles(const RangeScan& scan, double robot_radius) {
  std::vector<CSpaceObstacle> out;
  for (std::size_t i = 0; i < scan.size(); ++i)
    if (scan.is_hit(i)) {
      const double a = scan.pose.heading + scan.angles[i];
      out.push_back({scan.endpoint(i), robot_radius, Vector2(std::cos(a), std::sin(a))});
    }
  return out;
}

/// Bearing lookup over a scan's beams, sorted by normalized angle.
class BeamTable {
 public:
  explicit BeamTable(const RangeScan& scan) : pose_(scan.pose), max_range_(scan.max_range) {
    beams_.reserve(scan.size());
    for (std::size_t i = 0; i < scan.size(); ++i)
      beams_.push_back({normalize_angle(scan.angles[i]), scan.ranges[i], scan.is_hit(i)});
    std::sort(beams_.begin(), beams_.end(), [](const Beam& a, const Beam& b) { return a.angle < b.angle; });
    if (beams_.size() >= 2) {
      std::vector<double> gaps;
      for (std::size_t i = 1; i < beams_.size(); ++i) gaps.push_back(beams_[i].angle - beams_[i - 1].angle);
      std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
      spacing_ = gaps[gaps.size() / 2];
    }
  }

  /// True iff p lies in the observed region at C-space-free distance.
  bool is_free(const Point2& p, double robot_radius) const {
    const Vector2 d = p - pose_.position;
    const double dist = d.norm();
    if (dist <= 1e-12) return true;
    if (beams_.empty()) return false;
    const double bearing = normalize_angle(std::atan2(d.y(), d.x()) - pose_.heading);
    double limit = 0.0;
    if (!bracket_limit(bearing, robot_radius, limit)) return false;
    return dist < limit;
  }

 private:
  struct Beam {
    double angle;
    double range;
    bool hit;
  };

  double free_limit(const Beam& b, double robot_radius) const {
    return b.hit ? b.range - robot_radius : max_range_;
  }

  // Conservative free distance along `bearing`: the smaller limit of the two
  // bracketing beams, unless they are more than two spacings apart.
  bool bracket_limit(double bearing, double robot_radius, double& limit) const {
    constexpr double kExact = 1e-12;
    auto upper = std::lower_bound(beams_.begin(), beams_.end(), bearing,
                                  [](const Beam& b, double a) { return b.angle < a; });
    if (upper != beams_.end() && std::abs(upper->angle - bearing) <= kExact) {
      limit = free_limit(*upper, robot_radius);
      return true;
    }
    if (upper != beams_.begin() && std::abs(std::prev(upper)->angle - bearing) <= kExact) {
      limit = free_limit(*std::prev(upper), robot_radius);
      return true;
    }
    if (beams_.size() < 2) return false;
    const Beam* lo;
    const Beam* hi;
    double gap;
    if (upper == beams_.begin() || upper == beams_.end()) {
      lo = &beams_.back();
      hi = &beams_.front();
      gap = hi->angle + 2.0 * std::numbers::pi - lo->angle;
    } else {
      hi = &*upper;
      lo = &*std::prev(upper);
      gap = hi->angle - lo->angle;
    }
    if (gap > 2.0 * spacing_ + 1e-12) return false;
    limit = std::min(free_limit(*lo, robot_radius), free_limit(*hi, robot_radius));
    return true;
  }

  Pose2 pose_;
  double max_range_;
  std::vector<Beam> beams_;
  double spacing_ = 0.0;
};

inline bool free_space_test(const Point2& p, const RangeScan& scan, double robot_radius) {
  return BeamTable(scan).is_free(p, robot_radius);
}

struct GeneratedBatch {
  TrainingBatch<2> batch;
  std::size_t occupied = 0;
  std::size_t observed_free = 0;
  std::size_t augmented = 0;
  /// Linear grid indices of every cell this scan observed (occupied or free),
  /// before subsampling.
  std::vector<std::int64_t> observed_cells;
};

/// Cell the beam enters at its endpoint. The endpoint usually sits on a
/// face of the hit cell, so step just past it along the beam.
inline Cell2 hit_cell(const CSpaceObstacle& ob, const SampleGrid<2>& g) {
  return g.raw_cell(ob.center + 1e-6 * g.resolution * ob.direction);
}

namespace detail {

// Cells labeled occupied by a scan: centers within r of an endpoint, plus the
// cell each beam enters at its endpoint so that r = 0 still yields samples.
inline std::vector<std::int64_t> occupied_cells(const std::vector<CSpaceObstacle>& obstacles,
                                                const SampleGrid<2>& g) {
  std::unordered_set<std::int64_t> seen;
  std::vector<std::int64_t> out;
  auto push = [&](const Cell2& c) {
    if (!g.contains(c)) return;
    const auto id = g.linear(c);
    if (seen.insert(id).second) out.push_back(id);
  };
  for (const auto& ob : obstacles) {
    push(hit_cell(ob, g));
    if (ob.radius <= 0.0) continue;
    const Cell2 lo = g.raw_cell(ob.center - Vector2::Constant(ob.radius));
    const Cell2 hi = g.raw_cell(ob.center + Vector2::Constant(ob.radius));
    for (std::int64_t y = lo.y(); y <= hi.y(); ++y)
      for (std::int64_t x = lo.x(); x <= hi.x(); ++x) {
        const Cell2 c(x, y);
        if (!g.contains(c)) continue;
        if ((cell_center(c, g) - ob.center).norm() <= ob.radius) push(c);
      }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Grid cells one scan observes: occupied cells (ball centers within r of an
/// endpoint) and free cells passing the bearing test, both sorted.
struct ObservedCells {
  std::vector<std::int64_t> occupied;
  std::vector<std::int64_t> free;
};

inline ObservedCells observe_cells(const RangeScan& scan, const SampleGrid<2>& g, double robot_radius) {
  scan.validate();
  g.validate();
  ObservedCells out;
  out.occupied = detail::occupied_cells(scan_to_obstacles(scan, robot_radius), g);
  const std::unordered_set<std::int64_t> occupied_set(out.occupied.begin(), out.occupied.end());

  const BeamTable beams(scan);
  const double reach = scan.max_range + robot_radius + g.resolution;
  const Cell2 lo = g.raw_cell(scan.pose.position - Vector2::Constant(reach)).cwiseMax(Cell2::Zero());
  const Cell2 hi = g.raw_cell(scan.pose.position + Vector2::Constant(reach)).cwiseMin(g.extents - Cell2::Ones());
  for (std::int64_t y = lo.y(); y <= hi.y(); ++y)
    for (std::int64_t x = lo.x(); x <= hi.x(); ++x) {
      const Cell2 c(x, y);
      const auto id = g.linear(c);
      if (occupied_set.count(id)) continue;
      if (beams.is_free(cell_center(c, g), robot_radius)) out.free.push_back(id);
    }
  return out;
}

/// Builds D = D_bar (occupied + observed free) followed by the free collar.
/// An empty `batch` means the scan produced nothing to train on.
inline GeneratedBatch generate_batch(const RangeScan& scan, const SampleGrid<2>& g, const SupportVectorModel<2>& m,
                              const AugmentationConfig& cfg, double robot_radius) {
  scan.validate();
  g.validate();
  cfg.validate(g.resolution);
  if (!g.contains(scan.pose.position)) throw OutOfRangeError("scan pose lies outside the sampling grid");

  GeneratedBatch out;
  auto [occupied, free_candidates] = observe_cells(scan, g, robot_radius);

  out.observed_cells = occupied;
  out.observed_cells.insert(out.observed_cells.end(), free_candidates.begin(), free_candidates.end());
  std::sort(out.observed_cells.begin(), out.observed_cells.end());

  const auto cap = std::max<std::size_t>(
      cfg.free_min, static_cast<std::size_t>(std::ceil(cfg.free_ratio * static_cast<double>(occupied.size()))));
  std::vector<std::int64_t> free_cells;
  if (free_candidates.size() > cap && cap > 0) {
    const std::size_t stride = (free_candidates.size() + cap - 1) / cap;
    for (std::size_t i = 0; i < free_candidates.size(); i += stride) free_cells.push_back(free_candidates[i]);
  } else if (cap > 0) {
    free_cells = std::move(free_candidates);
  }

  auto& samples = out.batch.samples;
  std::unordered_set<std::int64_t> emitted;
  for (auto id : occupied) {
    samples.push_back({cell_center(g.unlinear(id), g), Label::Occupied});
    emitted.insert(id);
  }
  for (auto id : free_cells) {
    samples.push_back({cell_center(g.unlinear(id), g), Label::Free});
    emitted.insert(id);
  }
  out.occupied = occupied.size();
  out.observed_free = free_cells.size();

  // Collar: grid points strictly within l-inf distance delta of an occupied sample.
  const auto reach_cells = static_cast<std::int64_t>(std::ceil(cfg.neighbor_threshold / g.resolution - 1e-9)) - 1;
  std::vector<std::int64_t> collar;
  for (auto id : occupied) {
    const Cell2 c = g.unlinear(id);
    for (std::int64_t dy = -reach_cells; dy <= reach_cells; ++dy)
      for (std::int64_t dx = -reach_cells; dx <= reach_cells; ++dx) {
        const Cell2 nc(c.x() + dx, c.y() + dy);
        if (!g.contains(nc)) continue;
        const auto nid = g.linear(nc);
        if (emitted.count(nid)) continue;
        const Point2 p = cell_center(nc, g);
        if (m.positives().contains(p) || m.negatives().contains(p)) continue;
        if (cfg.skip_model_occupied && m.classify(p) == Label::Occupied) continue;
        emitted.insert(nid);
        collar.push_back(nid);
      }
  }
  std::sort(collar.begin(), collar.end());
  for (auto id : collar) samples.push_back({cell_center(g.unlinear(id), g), Label::Free});
  out.augmented = collar.size();
  return out;
}

}  // namespace skm
