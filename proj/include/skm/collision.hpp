#pragma once

// Sampling-free collision checking against a support vector model.
//
// For a negative support vector j with weight a_j and S = sum of positive
// weights, the score is bounded by
//   U_j(x) = k(x, x*) S - k(x, x_j) a_j,   x* = nearest positive to x,
// and U_j(x) < 0 exactly when, for every positive i,
//   g_ij(x) = beta_j - |x - x_j|^2 + |x - x_i|^2 > 0,  beta_j = log(a_j / S) / gamma.
// g_ij is affine along a ray, which yields closed-form free-time and
// free-ball bounds. All sign decisions use g (log domain) so that kernel
// underflow far from the support vectors cannot flip a verdict.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "skm/core_types.hpp"
#include "skm/errors.hpp"
#include "skm/kernel_model.hpp"
#include "skm/polynomial.hpp"

namespace skm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class BoundKind {
  SingleJ,   // j = nearest negative support vector to the anchor
  MinIMaxJ,  // min over positives of max over negatives
  MaxJMinI,  // max over negatives of min over positives (weaker cross-check)
};

enum class PositiveSum {
  Global,  // sum over every positive support vector (formally sound)
  Local,   // sum over the k-NN positives only
};

struct KnnLimit {
  std::size_t positives = 10;
  std::size_t negatives = 10;
};

struct BoundMode {
  BoundKind kind = BoundKind::MinIMaxJ;
  std::optional<KnnLimit> knn_limit;
  PositiveSum positive_sum = PositiveSum::Local;

  void validate() const {
    if (knn_limit && (knn_limit->positives < 1 || knn_limit->negatives < 1))
      throw InvalidArgumentError("knn_limit must be >= 1 per class");
  }

  static BoundMode exact(BoundKind k) { return {k, std::nullopt, PositiveSum::Global}; }
  static BoundMode segment_default() { return {BoundKind::MinIMaxJ, KnnLimit{10, 10}, PositiveSum::Local}; }
  static BoundMode curve_default() { return {BoundKind::MinIMaxJ, KnnLimit{2, 2}, PositiveSum::Local}; }
};

enum class BoundStatus {
  Ok,
  StartInCollision,  // U >= 0 at the anchor point
  NoNegatives,       // bound undefined; callers treat as colliding
};

struct FreeBound {
  BoundStatus status = BoundStatus::Ok;
  double value = 0.0;

  bool ok() const { return status == BoundStatus::Ok; }
};

enum class Verdict { Free, Colliding };

inline const char* to_string(Verdict v) { return v == Verdict::Free ? "FREE" : "COLLIDING"; }

template <int Dim>
struct Segment {
  Point<Dim> a;
  Point<Dim> b;
};

/// s(t) = sum_k coeffs[k] t^k for t in [0, horizon].
template <int Dim>
struct PolyCurve {
  std::vector<Vector<Dim>> coeffs;
  double horizon = 1.0;

  void validate() const {
    if (coeffs.size() < 2) throw InvalidArgumentError("polynomial curve needs degree >= 1");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgumentError("curve horizon must be > 0");
    for (const auto& c : coeffs)
      if (!c.allFinite()) throw InvalidArgumentError("curve coefficients must be finite");
  }

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }

  Point<Dim> operator()(double t) const {
    Point<Dim> p = Point<Dim>::Zero();
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) p = p * t + *it;
    return p;
  }

  /// Upper bound on |s'(t)| over [0, horizon].
  double max_speed() const {
    double v = 0.0;
    for (std::size_t k = 1; k < coeffs.size(); ++k)
      v += static_cast<double>(k) * coeffs[k].norm() * std::pow(horizon, static_cast<double>(k - 1));
    return v;
  }
};

/// Support vectors consulted for one anchor point.
template <int Dim>
struct Neighborhood {
  std::vector<IndexedVector<Dim>> positives;  // ascending distance to the anchor
  std::vector<IndexedVector<Dim>> negatives;  // ascending distance to the anchor
  double positive_sum = 0.0;
  std::vector<double> beta;                   // per negative
};

template <int Dim>
Neighborhood<Dim> gather_neighborhood(const Point<Dim>& anchor, const SupportVectorModel<Dim>& m,
                                      const BoundMode& mode) {
  Neighborhood<Dim> nb;
  if (mode.knn_limit) {
    nb.positives = m.positives().knn(anchor, mode.knn_limit->positives);
    nb.negatives = m.negatives().knn(anchor, mode.knn_limit->negatives);
  } else {
    auto by_distance = [&](std::vector<IndexedVector<Dim>>& v) {
      std::sort(v.begin(), v.end(), [&](const auto& a, const auto& b) {
        const double da = (a.position - anchor).squaredNorm(), db = (b.position - anchor).squaredNorm();
        if (da != db) return da < db;
        return lex_less<Dim>(a.position, b.position);
      });
    };
    m.positives().for_each([&](const IndexedVector<Dim>& v) { nb.positives.push_back(v); });
    m.negatives().for_each([&](const IndexedVector<Dim>& v) { nb.negatives.push_back(v); });
    by_distance(nb.positives);
    by_distance(nb.negatives);
  }
  if (mode.positive_sum == PositiveSum::Global || !mode.knn_limit) {
    nb.positive_sum = m.positives().weight_sum();
  } else {
    for (const auto& v : nb.positives) nb.positive_sum += v.weight;
  }
  const double log_sum = std::log(nb.positive_sum);
  const double gamma = m.kernel_params().gamma;
  nb.beta.reserve(nb.negatives.size());
  for (const auto& v : nb.negatives) nb.beta.push_back((std::log(v.weight) - log_sum) / gamma);
  return nb;
}

/// U(x) with an explicit negative support vector.
template <int Dim>
double upper_bound(const Point<Dim>& x, const SupportVectorModel<Dim>& m, const IndexedVector<Dim>& negative) {
  const auto nearest = m.positives().nearest(x);
  if (!nearest) throw InvalidArgumentError("upper bound needs at least one positive support vector");
  if (m.negatives().empty()) throw InvalidArgumentError("upper bound needs at least one negative support vector");
  const auto& kp = m.kernel_params();
  return kernel(x, nearest->position, kp) * m.positives().weight_sum() -
         kernel(x, negative.position, kp) * negative.weight;
}

/// U(x) with j = nearest negative support vector to x.
template <int Dim>
double upper_bound(const Point<Dim>& x, const SupportVectorModel<Dim>& m) {
  const auto neg = m.negatives().nearest(x);
  if (!neg) throw InvalidArgumentError("upper bound needs at least one negative support vector");
  return upper_bound(x, m, *neg);
}

namespace detail {

// g_ij(x) > 0 for a given pair.
template <int Dim>
double pair_margin(const Point<Dim>& x, const IndexedVector<Dim>& pos, const IndexedVector<Dim>& neg,
                   double beta) {
  return beta - (x - neg.position).squaredNorm() + (x - pos.position).squaredNorm();
}

// Log-domain sign test of U_j at x: negative margin <=> U_j(x) >= 0.
template <int Dim>
double bound_margin(const Point<Dim>& x, const Point<Dim>& nearest_positive, const IndexedVector<Dim>& neg,
                    double beta) {
  return beta - (x - neg.position).squaredNorm() + (x - nearest_positive).squaredNorm();
}

// Largest free parameter along a single pair's constraint.
template <int Dim>
double ray_pair(const Point<Dim>& s0, const Vector<Dim>& v, const IndexedVector<Dim>& pos,
                const IndexedVector<Dim>& neg, double beta) {
  const double num = pair_margin(s0, pos, neg, beta);
  if (!(num > 0.0)) return 0.0;
  const double den = 2.0 * v.dot(pos.position - neg.position);
  if (den <= 0.0) return kInf;
  return num / den;
}

template <int Dim>
double ball_pair(const Point<Dim>& s0, const IndexedVector<Dim>& pos, const IndexedVector<Dim>& neg, double beta) {
  const double num = pair_margin(s0, pos, neg, beta);
  if (!(num > 0.0)) return 0.0;
  const double den = 2.0 * (neg.position - pos.position).norm();
  if (den == 0.0) return kInf;
  return num / den;
}

// Combines per-pair values according to the bound kind. `pair(i, j)` returns
// the pair bound; SingleJ uses the nearest negative (index 0).
template <int Dim, typename PairFn>
double combine(const Neighborhood<Dim>& nb, BoundKind kind, PairFn&& pair) {
  const std::size_t np = nb.positives.size(), nn = nb.negatives.size();
  switch (kind) {
    case BoundKind::SingleJ: {
      double t = kInf;
      for (std::size_t i = 0; i < np; ++i) t = std::min(t, pair(i, 0));
      return t;
    }
    case BoundKind::MinIMaxJ: {
      double t = kInf;
      for (std::size_t i = 0; i < np; ++i) {
        double best = 0.0;
        for (std::size_t j = 0; j < nn && best < t; ++j) best = std::max(best, pair(i, j));
        t = std::min(t, best);
        if (t <= 0.0) break;
      }
      return t;
    }
    case BoundKind::MaxJMinI: {
      double t = 0.0;
      for (std::size_t j = 0; j < nn; ++j) {
        double worst = kInf;
        for (std::size_t i = 0; i < np && worst > t; ++i) worst = std::min(worst, pair(i, j));
        t = std::max(t, worst);
      }
      return t;
    }
  }
  return 0.0;
}

// Whether the anchor satisfies U_j < 0 for the j the mode relies on.
template <int Dim>
bool anchor_free(const Point<Dim>& s0, const Neighborhood<Dim>& nb, BoundKind kind) {
  const Point<Dim>& nearest_pos = nb.positives.front().position;
  if (kind == BoundKind::SingleJ) return bound_margin(s0, nearest_pos, nb.negatives.front(), nb.beta.front()) > 0.0;
  for (std::size_t j = 0; j < nb.negatives.size(); ++j)
    if (bound_margin(s0, nearest_pos, nb.negatives[j], nb.beta[j]) > 0.0) return true;
  return false;
}

}  // namespace detail

/// Free-time bound along s0 + t v: U < 0 for all 0 <= t < value.
template <int Dim>
FreeBound ray_free_time(const Point<Dim>& s0, const Vector<Dim>& v, const SupportVectorModel<Dim>& m,
                        const BoundMode& mode) {
  mode.validate();
  if (m.positives().empty()) return {BoundStatus::Ok, kInf};
  if (m.negatives().empty()) return {BoundStatus::NoNegatives, 0.0};
  if (!(v.squaredNorm() > 0.0)) throw InvalidArgumentError("ray direction must be nonzero");
  const auto nb = gather_neighborhood(s0, m, mode);
  if (!detail::anchor_free(s0, nb, mode.kind)) return {BoundStatus::StartInCollision, 0.0};
  const double t = detail::combine(nb, mode.kind, [&](std::size_t i, std::size_t j) {
    return detail::ray_pair(s0, v, nb.positives[i], nb.negatives[j], nb.beta[j]);
  });
  return {BoundStatus::Ok, std::max(0.0, t)};
}

/// Radius of a ball around s0 whose interior satisfies U < 0.
template <int Dim>
FreeBound free_ball_radius(const Point<Dim>& s0, const SupportVectorModel<Dim>& m, const BoundMode& mode) {
  mode.validate();
  if (m.positives().empty()) return {BoundStatus::Ok, kInf};
  if (m.negatives().empty()) return {BoundStatus::NoNegatives, 0.0};
  const auto nb = gather_neighborhood(s0, m, mode);
  if (!detail::anchor_free(s0, nb, mode.kind)) return {BoundStatus::StartInCollision, 0.0};
  const double r = detail::combine(nb, mode.kind, [&](std::size_t i, std::size_t j) {
    return detail::ball_pair(s0, nb.positives[i], nb.negatives[j], nb.beta[j]);
  });
  return {BoundStatus::Ok, std::max(0.0, r)};
}

struct SegmentResult {
  Verdict verdict = Verdict::Colliding;
  FreeBound from_a;
  FreeBound from_b;
};

/// Free iff the free-time bounds from both endpoints overlap (t_A + t_B > 1).
template <int Dim>
SegmentResult check_segment(const Segment<Dim>& seg, const SupportVectorModel<Dim>& m, const BoundMode& mode) {
  if (!seg.a.allFinite() || !seg.b.allFinite()) throw InvalidArgumentError("segment endpoints must be finite");
  if (seg.a == seg.b) throw InvalidArgumentError("degenerate segment: endpoints coincide");
  SegmentResult res;
  if (m.positives().empty()) {
    res.verdict = Verdict::Free;
    res.from_a = res.from_b = {BoundStatus::Ok, kInf};
    return res;
  }
  res.from_a = ray_free_time(seg.a, Vector<Dim>(seg.b - seg.a), m, mode);
  res.from_b = ray_free_time(seg.b, Vector<Dim>(seg.a - seg.b), m, mode);
  if (res.from_a.ok() && res.from_b.ok() && res.from_a.value + res.from_b.value > 1.0) res.verdict = Verdict::Free;
  return res;
}

/// Smallest t in [t_k, t_f] with |s(t) - s(t_k)| = r (rounded toward t_k);
/// nullopt if the curve stays inside the ball through the horizon.
template <int Dim>
std::optional<double> curve_ball_exit_time(const PolyCurve<Dim>& c, double t_k, double r) {
  if (!(r > 0.0)) throw InvalidArgumentError("ball radius must be > 0");
  if (!(t_k >= 0.0 && t_k <= c.horizon)) throw InvalidArgumentError("t_k outside [0, horizon]");
  const int d = c.degree();
  // Taylor coefficients of s(t_k + tau) - s(t_k).
  std::vector<Vector<Dim>> b(static_cast<std::size_t>(d) + 1, Vector<Dim>::Zero());
  for (int m = 1; m <= d; ++m) {
    double binom = 1.0;  // C(j, m) starting at j = m
    for (int j = m; j <= d; ++j) {
      b[m] += binom * std::pow(t_k, j - m) * c.coeffs[j];
      binom = binom * (j + 1) / (j + 1 - m);
    }
  }
  Polynomial g({-r * r});
  for (int axis = 0; axis < Dim; ++axis) {
    std::vector<double> h(static_cast<std::size_t>(d) + 1, 0.0);
    for (int m = 1; m <= d; ++m) h[m] = b[m][axis];
    Polynomial hp(h);
    g = g + hp * hp;
  }
  const double span = c.horizon - t_k;
  if (span <= 0.0) return std::nullopt;
  if (d == 1) {
    // |b1| tau = r
    const double speed = b[1].norm();
    if (speed == 0.0) return std::nullopt;
    const double tau = r / speed;
    if (tau > span) return std::nullopt;
    return t_k + tau;
  }
  const auto tau = g.first_crossing_from_below(0.0, span);
  if (!tau) return std::nullopt;
  return t_k + *tau;
}

struct BallStep {
  double t;
  double radius;
};

struct CurveResult {
  Verdict verdict = Verdict::Colliding;
  std::vector<BallStep> balls;
};

/// Covers the curve with free balls; Colliding as soon as a ball is smaller
/// than epsilon.
template <int Dim>
CurveResult check_curve(const PolyCurve<Dim>& c, double epsilon, const SupportVectorModel<Dim>& m,
                        const BoundMode& mode) {
  c.validate();
  if (!(epsilon > 0.0)) throw InvalidArgumentError("epsilon must be > 0");
  CurveResult res;
  if (m.positives().empty()) {
    res.verdict = Verdict::Free;
    return res;
  }
  if (m.negatives().empty()) return res;

  const double speed = c.max_speed();
  const std::size_t cap = 10 * static_cast<std::size_t>(std::ceil(c.horizon * speed / epsilon)) + 10;
  double t = 0.0;
  for (std::size_t k = 0; k < cap; ++k) {
    const FreeBound r = free_ball_radius(c(t), m, mode);
    res.balls.push_back({t, r.value});
    if (!r.ok() || r.value < epsilon) return res;
    if (std::isinf(r.value)) {
      res.verdict = Verdict::Free;
      return res;
    }
    // Shrink slightly so the next center stays strictly inside this ball.
    const auto next = curve_ball_exit_time(c, t, r.value * (1.0 - 1e-9));
    if (!next || *next >= c.horizon) {
      res.verdict = Verdict::Free;
      return res;
    }
    if (!(*next > t)) throw NumericalError("curve check stalled at t = " + std::to_string(t));
    t = *next;
  }
  throw ResourceError("curve check exceeded " + std::to_string(cap) + " iterations (t = " + std::to_string(t) +
                      ", horizon = " + std::to_string(c.horizon) + ")");
}

}  // namespace skm
