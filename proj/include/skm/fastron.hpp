#pragma once

// Incremental Fastron training on a local batch: margin-prioritized one-step
// weight corrections followed by redundant support vector removal.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <unordered_set>
#include <vector>

#include "skm/core_types.hpp"
#include "skm/errors.hpp"
#include "skm/kernel_model.hpp"

namespace skm {

/// Where the k-NN query that initializes the batch scores is anchored.
enum class InitAnchor {
  PerSample,      // one k-NN query per training point
  RobotPosition,  // a single query at the sensor position
};

struct TrainingConfig {
  double xi_plus = 1.0;
  double xi_minus = 1.0;
  /// Iteration cap; unset means 5 x batch size.
  std::optional<std::size_t> n_max;
  /// Neighbors used for the initial batch scores; unset means the exact score.
  std::optional<ApproxK> init_k = ApproxK{100, 100};
  InitAnchor anchor = InitAnchor::PerSample;

  void validate() const {
    if (!(xi_plus > 0.0) || !(xi_minus > 0.0)) throw InvalidArgumentError("xi+ and xi- must be > 0");
    if (n_max && *n_max < 1) throw InvalidArgumentError("n_max must be >= 1");
    if (init_k) init_k->validate();
  }

  std::size_t iteration_cap(std::size_t batch_size) const { return n_max ? *n_max : 5 * batch_size; }
};

template <int Dim>
struct TrainingSample {
  Point<Dim> position;
  Label label;
};

template <int Dim>
struct TrainingBatch {
  std::vector<TrainingSample<Dim>> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }

  void validate() const {
    if (samples.empty()) throw InvalidArgumentError("training batch is empty");
    std::unordered_set<PositionKey<Dim>, PositionKeyHash<Dim>> seen;
    seen.reserve(samples.size());
    for (const auto& s : samples) {
      if (!s.position.allFinite()) throw InvalidArgumentError("training sample has non-finite coordinates");
      if (!seen.insert(PositionKey<Dim>(s.position)).second)
        throw InvalidArgumentError("training batch contains duplicate positions");
    }
  }
};

struct TrainingReport {
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t added = 0;
  std::size_t removed = 0;
};

namespace detail {

enum class SvState : std::int8_t { None = 0, Positive = 1, Negative = -1 };

}  // namespace detail

/// Initial batch scores from the nearest support vectors.
template <int Dim>
std::vector<double> initial_batch_scores(const SupportVectorModel<Dim>& m, const TrainingBatch<Dim>& batch,
                                         const TrainingConfig& cfg,
                                         const std::optional<Point<Dim>>& robot_position = std::nullopt) {
  std::vector<double> f(batch.size(), 0.0);
  const auto& kp = m.kernel_params();
  if (cfg.anchor == InitAnchor::RobotPosition) {
    if (!robot_position) throw InvalidArgumentError("robot-position anchoring requires the sensor position");
    if (!cfg.init_k) {
      for (std::size_t l = 0; l < batch.size(); ++l) f[l] = m.exact_score(batch.samples[l].position);
      return f;
    }
    const auto pos = m.positives().knn(*robot_position, cfg.init_k->positives);
    const auto neg = m.negatives().knn(*robot_position, cfg.init_k->negatives);
    for (std::size_t l = 0; l < batch.size(); ++l) {
      const auto& p = batch.samples[l].position;
      for (const auto& v : pos) f[l] += v.weight * kernel(v.position, p, kp);
      for (const auto& v : neg) f[l] -= v.weight * kernel(v.position, p, kp);
    }
  } else {
    for (std::size_t l = 0; l < batch.size(); ++l)
      f[l] = cfg.init_k ? m.approximate_score(batch.samples[l].position, *cfg.init_k)
                        : m.exact_score(batch.samples[l].position);
  }
  return f;
}

/// Called after every training iteration with the model and the tracked
/// batch scores.
template <int Dim>
using TrainingObserver = std::function<void(const SupportVectorModel<Dim>&, const std::vector<double>&)>;

/// Updates `m` in place from one local batch. Throws NumericalError if the
/// tracked scores become non-finite.
template <int Dim>
TrainingReport train_increment(SupportVectorModel<Dim>& m, const TrainingBatch<Dim>& batch,
                               const TrainingConfig& cfg,
                               const std::optional<Point<Dim>>& robot_position = std::nullopt,
                               const TrainingObserver<Dim>& observer = {}) {
  using detail::SvState;
  cfg.validate();
  batch.validate();

  const std::size_t n = batch.size();
  const auto& kp = m.kernel_params();
  const auto& pts = batch.samples;
  std::vector<double> f = initial_batch_scores(m, batch, cfg, robot_position);
  std::vector<int> q(n);
  std::vector<SvState> state(n, SvState::None);
  for (std::size_t l = 0; l < n; ++l) {
    q[l] = sign_of(pts[l].label);
    if (m.positives().contains(pts[l].position))
      state[l] = SvState::Positive;
    else if (m.negatives().contains(pts[l].position))
      state[l] = SvState::Negative;
  }

  // f[l] += scale * k(p_l, p_src) for every batch point
  auto propagate = [&](std::size_t src, double scale) {
    const Point<Dim>& ps = pts[src].position;
    for (std::size_t l = 0; l < n; ++l) f[l] += scale * kernel(pts[l].position, ps, kp);
  };

  TrainingReport report;
  const std::size_t cap = cfg.iteration_cap(n);
  for (std::size_t it = 0; it < cap; ++it) {
    std::size_t worst = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < n; ++l) {
      const double margin = q[l] * f[l];
      if (!std::isfinite(margin)) throw NumericalError("non-finite training score; model weights are corrupted");
      if (margin < worst_margin) {
        worst_margin = margin;
        worst = l;
      }
    }
    if (worst_margin > 0.0) {
      report.converged = true;
      return report;
    }
    ++report.iterations;

    const std::size_t mi = worst;
    const Point<Dim>& pm = pts[mi].position;
    const double xi = q[mi] > 0 ? cfg.xi_plus : cfg.xi_minus;
    const double delta = xi * q[mi] - f[mi];

    if (state[mi] == SvState::Positive) {
      const double old = *m.weight(Label::Occupied, pm);
      const double updated = old + delta;
      if (updated > 0.0) {
        m.set_weight(Label::Occupied, pm, updated);
        propagate(mi, delta);
      } else {
        m.remove(Label::Occupied, pm);
        state[mi] = SvState::None;
        ++report.removed;
        propagate(mi, -old);
      }
    } else if (state[mi] == SvState::Negative) {
      const double old = *m.weight(Label::Free, pm);
      const double updated = old - delta;
      if (updated > 0.0) {
        m.set_weight(Label::Free, pm, updated);
        propagate(mi, delta);
      } else {
        m.remove(Label::Free, pm);
        state[mi] = SvState::None;
        ++report.removed;
        propagate(mi, old);
      }
    } else if (q[mi] > 0) {
      m.add(Label::Occupied, pm, delta);
      state[mi] = SvState::Positive;
      ++report.added;
      propagate(mi, delta);
    } else {
      m.add(Label::Free, pm, -delta);
      state[mi] = SvState::Negative;
      ++report.added;
      propagate(mi, delta);
    }

    // Drop support vectors whose own point stays correct without them.
    for (std::size_t l = 0; l < n; ++l) {
      if (state[l] == SvState::None) continue;
      const Point<Dim>& pl = pts[l].position;
      if (state[l] == SvState::Positive) {
        const double a = *m.weight(Label::Occupied, pl);
        if (q[l] * (f[l] - kp.eta * a) > 0.0) {
          m.remove(Label::Occupied, pl);
          state[l] = SvState::None;
          ++report.removed;
          propagate(l, -a);
        }
      } else {
        const double a = *m.weight(Label::Free, pl);
        if (q[l] * (f[l] + kp.eta * a) > 0.0) {
          m.remove(Label::Free, pl);
          state[l] = SvState::None;
          ++report.removed;
          propagate(l, a);
        }
      }
    }
    if (observer) observer(m, f);
  }

  // The cap may be reached exactly when the last correction fixed everything.
  report.converged = std::all_of(f.begin(), f.end(), [&, l = std::size_t{0}](double v) mutable {
    return q[l++] * v > 0.0;
  });
  return report;
}

}  // namespace skm
