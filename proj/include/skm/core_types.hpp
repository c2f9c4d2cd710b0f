#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "skm/errors.hpp"

namespace skm {

/// A configuration-space point in meters.
template <int Dim>
using Point = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Vector = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using CellIndex = Eigen::Matrix<std::int64_t, Dim, 1>;

using Point2 = Point<2>;
using Vector2 = Vector<2>;
using Cell2 = CellIndex<2>;

/// Occupancy label. Occupied samples and positive support vectors carry +1.
enum class Label : int { Free = -1, Occupied = 1 };

inline int sign_of(Label l) { return static_cast<int>(l); }

inline Label label_from_int(int q) {
  if (q == 1) return Label::Occupied;
  if (q == -1) return Label::Free;
  throw InvalidArgumentError("label must be +1 or -1, got " + std::to_string(q));
}

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

template <int Dim>
bool is_finite(const Point<Dim>& p) {
  return p.allFinite();
}

/// RBF kernel parameters: k(x, y) = eta * exp(-gamma * |x - y|^2).
struct KernelParams {
  double eta = 1.0;
  double gamma = 2.5;

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgumentError("kernel eta must be > 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgumentError("kernel gamma must be > 0");
  }
  bool operator==(const KernelParams&) const = default;
};

struct RobotGeometry {
  double radius = 0.25;
  double wheelbase = 0.3;  // Ackermann model only

  void validate() const {
    if (!(radius >= 0.0)) throw InvalidArgumentError("robot radius must be >= 0");
    if (!(wheelbase > 0.0)) throw InvalidArgumentError("wheelbase must be > 0");
  }
};

/// Regular sampling grid over C-space. Cell c covers
/// [origin + c*res, origin + (c+1)*res) per axis.
template <int Dim>
struct SampleGrid {
  Point<Dim> origin = Point<Dim>::Zero();
  double resolution = 0.25;
  CellIndex<Dim> extents = CellIndex<Dim>::Ones();

  void validate() const {
    if (!(resolution > 0.0) || !std::isfinite(resolution))
      throw InvalidArgumentError("grid resolution must be > 0");
    if ((extents.array() < 1).any()) throw InvalidArgumentError("grid extents must be >= 1 per axis");
    if (!origin.allFinite()) throw InvalidArgumentError("grid origin must be finite");
  }

  std::int64_t cell_count() const { return extents.prod(); }

  bool contains(const CellIndex<Dim>& c) const {
    return (c.array() >= 0).all() && (c.array() < extents.array()).all();
  }

  bool contains(const Point<Dim>& p) const {
    if (!p.allFinite()) return false;
    for (int i = 0; i < Dim; ++i) {
      const double f = std::floor((p[i] - origin[i]) / resolution);
      if (f < 0.0 || f >= static_cast<double>(extents[i])) return false;
    }
    return true;
  }

  /// Unchecked floor division; may produce indices outside the extents.
  CellIndex<Dim> raw_cell(const Point<Dim>& p) const {
    CellIndex<Dim> c;
    for (int i = 0; i < Dim; ++i)
      c[i] = static_cast<std::int64_t>(std::floor((p[i] - origin[i]) / resolution));
    return c;
  }

  /// Row-major linear index, axis 0 fastest.
  std::int64_t linear(const CellIndex<Dim>& c) const {
    std::int64_t idx = 0;
    for (int i = Dim - 1; i >= 0; --i) idx = idx * extents[i] + c[i];
    return idx;
  }

  CellIndex<Dim> unlinear(std::int64_t idx) const {
    CellIndex<Dim> c;
    for (int i = 0; i < Dim; ++i) {
      c[i] = idx % extents[i];
      idx /= extents[i];
    }
    return c;
  }
};

template <int Dim>
CellIndex<Dim> point_to_cell(const Point<Dim>& p, const SampleGrid<Dim>& g) {
  if (!p.allFinite()) throw OutOfRangeError("point has non-finite coordinates");
  const CellIndex<Dim> c = g.raw_cell(p);
  if (!g.contains(c)) throw OutOfRangeError("point lies outside the grid extents");
  return c;
}

template <int Dim>
Point<Dim> cell_center(const CellIndex<Dim>& c, const SampleGrid<Dim>& g) {
  if (!g.contains(c)) throw OutOfRangeError("cell index outside the grid extents");
  return g.origin + (c.template cast<double>().array() + 0.5).matrix() * g.resolution;
}

struct Pose2 {
  Point2 position = Point2::Zero();
  double heading = 0.0;
};

/// One planar lidar observation. A beam with range == max_range saw nothing.
struct RangeScan {
  double t = 0.0;
  Pose2 pose;
  std::vector<double> angles;
  std::vector<double> ranges;
  double max_range = 10.0;

  std::size_t size() const { return ranges.size(); }

  bool is_hit(std::size_t i) const { return ranges[i] < max_range; }

  Point2 endpoint(std::size_t i) const {
    const double a = pose.heading + angles[i];
    return pose.position + ranges[i] * Vector2(std::cos(a), std::sin(a));
  }

  void validate() const {
    if (angles.size() != ranges.size()) throw InvalidArgumentError("scan angles/ranges length mismatch");
    if (!(max_range > 0.0) || !std::isfinite(max_range)) throw InvalidArgumentError("scan max_range must be > 0");
    if (!pose.position.allFinite() || !std::isfinite(pose.heading))
      throw InvalidArgumentError("scan pose must be finite");
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      if (!std::isfinite(angles[i])) throw InvalidArgumentError("scan beam angle must be finite");
      if (!(ranges[i] >= 0.0) || ranges[i] > max_range)
        throw InvalidArgumentError("scan range outside [0, max_range]");
    }
  }
};

}  // namespace skm
