#pragma once

// A* over motion-primitive lattices. Edges are validated with the
// sampling-free segment / curve checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <unordered_map>
#include <variant>
#include <vector>

#include "skm/collision.hpp"
#include "skm/core_types.hpp"
#include "skm/errors.hpp"
#include "skm/kernel_model.hpp"

namespace skm {

enum class MotionOrder { FirstOrder, SecondOrder };

/// Finite primitive set: velocities (first order) or accelerations (second
/// order), each held for tau seconds.
struct MotionModel {
  MotionOrder order = MotionOrder::FirstOrder;
  std::vector<Vector2> primitives;
  double tau = 1.0;
  double max_speed = 2.0;  // second order only

  static MotionModel first_order(double tau = 1.0) {
    MotionModel m;
    m.order = MotionOrder::FirstOrder;
    m.tau = tau;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) m.primitives.emplace_back(dx, dy);
    return m;
  }

  static MotionModel second_order(double tau = 1.0, double max_speed = 2.0) {
    MotionModel m = first_order(tau);
    m.order = MotionOrder::SecondOrder;
    m.max_speed = max_speed;
    return m;
  }

  void validate() const {
    if (!(tau > 0.0)) throw InvalidArgumentError("motion step tau must be > 0");
    if (primitives.empty()) throw InvalidArgumentError("primitive set must be nonempty");
    for (const auto& u : primitives)
      if (!u.allFinite()) throw InvalidArgumentError("primitives must be finite");
    if (order == MotionOrder::SecondOrder && !(max_speed > 0.0))
      throw InvalidArgumentError("max speed must be > 0");
  }
};

struct PlannerState {
  Point2 position = Point2::Zero();
  Vector2 velocity = Vector2::Zero();  // second order only
  double heading = 0.0;
  std::int64_t k = 0;

  static PlannerState with_speed(const Point2& p, double speed, double heading) {
    return {p, speed * Vector2(std::cos(heading), std::sin(heading)), heading, 0};
  }
};

struct GoalRegion {
  Point2 center = Point2::Zero();
  double radius = 0.5;

  void validate() const {
    if (!(radius > 0.0)) throw InvalidArgumentError("goal radius must be > 0");
  }
  bool contains(const Point2& p) const { return (p - center).norm() <= radius; }
};

using Trajectory = std::variant<Segment<2>, PolyCurve<2>>;

/// First order: segment s -> s + tau v (a constant curve when v = 0).
/// Second order: s + t v_k + t^2/2 a over [0, tau].
inline Trajectory primitive_trajectory(const PlannerState& s, const Vector2& u, const MotionModel& model) {
  if (model.order == MotionOrder::FirstOrder) {
    if (u.squaredNorm() == 0.0) return PolyCurve<2>{{s.position, Vector2::Zero()}, model.tau};
    return Segment<2>{s.position, s.position + model.tau * u};
  }
  return PolyCurve<2>{{s.position, s.velocity, 0.5 * u}, model.tau};
}

inline double motion_cost(const Vector2& u, const MotionModel& model) { return (u.squaredNorm() + 2.0) * model.tau; }

/// Exact closed-form propagation over one step.
inline PlannerState step_dynamics(const PlannerState& s, const Vector2& u, const MotionModel& model) {
  PlannerState n = s;
  n.k = s.k + 1;
  if (model.order == MotionOrder::FirstOrder) {
    n.position = s.position + model.tau * u;
    return n;
  }
  n.position = s.position + model.tau * s.velocity + 0.5 * model.tau * model.tau * u;
  n.velocity = s.velocity + model.tau * u;
  if (n.velocity.norm() > 1e-6) n.heading = std::atan2(n.velocity.y(), n.velocity.x());
  return n;
}

inline Point2 trajectory_end(const Trajectory& tr) {
  if (const auto* seg = std::get_if<Segment<2>>(&tr)) return seg->b;
  const auto& c = std::get<PolyCurve<2>>(tr);
  return c(c.horizon);
}

struct CheckConfig {
  BoundMode segment_mode = BoundMode::segment_default();
  BoundMode curve_mode = BoundMode::curve_default();
  double epsilon = 0.2;
};

/// Collision verdict for one primitive trajectory.
inline Verdict check_trajectory(const Trajectory& tr, const SupportVectorModel<2>& m, const CheckConfig& cc) {
  if (const auto* seg = std::get_if<Segment<2>>(&tr)) return check_segment(*seg, m, cc.segment_mode).verdict;
  const auto& c = std::get<PolyCurve<2>>(tr);
  return check_curve(c, cc.epsilon, m, cc.curve_mode).verdict;
}

struct Box2 {
  Point2 min;
  Point2 max;
  bool contains(const Point2& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }
};

struct PlannerConfig {
  CheckConfig check;
  std::optional<Box2> bounds;
  double position_quantum = 0.125;
  double velocity_quantum = 0.25;
  std::size_t visited_cap = 2'000'000;
};

struct Successor {
  PlannerState state;
  double cost;
  std::size_t primitive;
};

inline std::vector<Successor> successors(const PlannerState& s, const MotionModel& model,
                                         const SupportVectorModel<2>& m, const PlannerConfig& cfg) {
  std::vector<Successor> out;
  for (std::size_t i = 0; i < model.primitives.size(); ++i) {
    const Vector2& u = model.primitives[i];
    PlannerState next = step_dynamics(s, u, model);
    if (model.order == MotionOrder::SecondOrder && next.velocity.norm() > model.max_speed + 1e-9) continue;
    if (cfg.bounds && !cfg.bounds->contains(next.position)) continue;
    if (check_trajectory(primitive_trajectory(s, u, model), m, cfg.check) != Verdict::Free) continue;
    out.push_back({next, motion_cost(u, model), i});
  }
  return out;
}

/// Cost-to-go lower bound: remaining distance times the cheapest cost per meter.
inline double heuristic_rate(const MotionModel& model) {
  double rate = kInf;
  if (model.order == MotionOrder::FirstOrder) {
    for (const auto& u : model.primitives) {
      const double disp = u.norm() * model.tau;
      if (disp > 0.0) rate = std::min(rate, motion_cost(u, model) / disp);
    }
  } else {
    double per_second = kInf;
    for (const auto& u : model.primitives) per_second = std::min(per_second, u.squaredNorm() + 2.0);
    rate = per_second / model.max_speed;
  }
  return std::isfinite(rate) ? rate : 0.0;
}

inline double heuristic(const PlannerState& s, const GoalRegion& goal, const MotionModel& model) {
  return std::max(0.0, (s.position - goal.center).norm() - goal.radius) * heuristic_rate(model);
}

struct Plan {
  bool found = false;
  std::vector<std::size_t> primitives;
  std::vector<PlannerState> states;  // states[0] = start
  double cost = 0.0;
  std::size_t expanded = 0;
};

namespace detail {

struct LatticeKey {
  std::int64_t x, y, vx, vy;
  bool operator==(const LatticeKey&) const = default;
};

struct LatticeKeyHash {
  std::size_t operator()(const LatticeKey& k) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (auto v : {k.x, k.y, k.vx, k.vy}) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ULL;
    return h;
  }
};

inline LatticeKey lattice_key(const PlannerState& s, const MotionModel& model, const PlannerConfig& cfg) {
  LatticeKey k{std::llround(s.position.x() / cfg.position_quantum), std::llround(s.position.y() / cfg.position_quantum),
               0, 0};
  if (model.order == MotionOrder::SecondOrder) {
    k.vx = std::llround(s.velocity.x() / cfg.velocity_quantum);
    k.vy = std::llround(s.velocity.y() / cfg.velocity_quantum);
  }
  return k;
}

}  // namespace detail

/// A* from `start` to any state inside `goal`. Returns found = false when the
/// bounded lattice is exhausted; throws ResourceError past the visited cap.
inline Plan plan(const PlannerState& start, const GoalRegion& goal, const MotionModel& model,
                 const SupportVectorModel<2>& m, const PlannerConfig& cfg) {
  model.validate();
  goal.validate();
  Plan result;
  result.states.push_back(start);
  if (goal.contains(start.position)) {
    result.found = true;
    return result;
  }

  struct Node {
    PlannerState state;
    double g;
    std::int64_t parent;
    std::size_t primitive;
  };
  struct Entry {
    double f, g;
    std::uint64_t seq;
    std::int64_t node;
  };
  // Lowest f first; ties prefer larger g, then insertion order.
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g < b.g;
    return a.seq > b.seq;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> open(worse);
  std::vector<Node> nodes;
  std::unordered_map<detail::LatticeKey, double, detail::LatticeKeyHash> best_g;
  std::unordered_map<detail::LatticeKey, bool, detail::LatticeKeyHash> closed;
  std::uint64_t seq = 0;

  nodes.push_back({start, 0.0, -1, 0});
  best_g[detail::lattice_key(start, model, cfg)] = 0.0;
  open.push({heuristic(start, goal, model), 0.0, seq++, 0});

  while (!open.empty()) {
    const Entry top = open.top();
    open.pop();
    const Node cur = nodes[static_cast<std::size_t>(top.node)];
    const auto key = detail::lattice_key(cur.state, model, cfg);
    if (closed.count(key)) continue;
    closed[key] = true;
    ++result.expanded;
    if (closed.size() > cfg.visited_cap)
      throw ResourceError("planner visited-set cap exceeded (" + std::to_string(cfg.visited_cap) + " states)");

    if (goal.contains(cur.state.position)) {
      result.found = true;
      result.cost = cur.g;
      std::vector<std::size_t> prims;
      std::vector<PlannerState> states;
      for (std::int64_t n = top.node; n >= 0; n = nodes[static_cast<std::size_t>(n)].parent) {
        states.push_back(nodes[static_cast<std::size_t>(n)].state);
        if (nodes[static_cast<std::size_t>(n)].parent >= 0) prims.push_back(nodes[static_cast<std::size_t>(n)].primitive);
      }
      std::reverse(prims.begin(), prims.end());
      std::reverse(states.begin(), states.end());
      result.primitives = std::move(prims);
      result.states = std::move(states);
      return result;
    }

    for (const auto& succ : successors(cur.state, model, m, cfg)) {
      const auto skey = detail::lattice_key(succ.state, model, cfg);
      if (closed.count(skey)) continue;
      const double g = cur.g + succ.cost;
      auto it = best_g.find(skey);
      if (it != best_g.end() && it->second <= g) continue;
      best_g[skey] = g;
      nodes.push_back({succ.state, g, top.node, succ.primitive});
      open.push({g + heuristic(succ.state, goal, model), g, seq++, static_cast<std::int64_t>(nodes.size() - 1)});
    }
  }
  return result;
}

}  // namespace skm
