#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <utility>
#include <vector>

#include "skm/core_types.hpp"
#include "skm/errors.hpp"
#include "skm/spatial_index.hpp"

namespace skm {

/// eta * exp(-gamma * |x - y|^2)
template <int Dim>
double kernel(const Point<Dim>& x, const Point<Dim>& y, const KernelParams& params) {
  return params.eta * std::exp(-params.gamma * (x - y).squaredNorm());
}

/// Runtime-dimension variant for callers holding raw coordinate arrays.
inline double kernel(std::span<const double> x, std::span<const double> y, const KernelParams& params) {
  if (x.size() != y.size()) throw InvalidArgumentError("kernel arguments differ in dimension");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
  return params.eta * std::exp(-params.gamma * d2);
}

/// Number of nearest support vectors per class used for score approximation.
struct ApproxK {
  std::size_t positives = 100;
  std::size_t negatives = 100;

  void validate() const {
    if (positives < 1 || negatives < 1) throw InvalidArgumentError("approximation K must be >= 1 per class");
  }
  bool operator==(const ApproxK&) const = default;
};

enum class ScoreMode { Exact, Approximate };

/// Sparse kernel perceptron occupancy map: two weighted point sets whose
/// signed kernel sum separates occupied (+) from free (-) space.
template <int Dim>
class SupportVectorModel {
 public:
  explicit SupportVectorModel(KernelParams kernel = {}, std::optional<ApproxK> approx = ApproxK{})
      : kernel_(kernel), approx_(approx) {
    kernel_.validate();
    if (approx_) approx_->validate();
  }

  static constexpr int dim() { return Dim; }

  const KernelParams& kernel_params() const { return kernel_; }
  const std::optional<ApproxK>& approx_k() const { return approx_; }
  void set_approx_k(std::optional<ApproxK> a) {
    if (a) a->validate();
    approx_ = a;
  }

  const ClassIndex<Dim>& positives() const { return index_.of(Label::Occupied); }
  const ClassIndex<Dim>& negatives() const { return index_.of(Label::Free); }
  const ClassIndex<Dim>& of(Label l) const { return index_.of(l); }

  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.size() == 0; }

  void add(Label l, const Point<Dim>& p, double w) {
    check_weight(w);
    if (index_.of(other(l)).contains(p))
      throw DuplicateEntryError("position already holds a support vector of the opposite class");
    index_.insert({p, w, l});
  }

  double remove(Label l, const Point<Dim>& p) { return index_.remove(p, l); }

  void set_weight(Label l, const Point<Dim>& p, double w) {
    check_weight(w);
    index_.of(l).set_weight(p, w);
  }

  std::optional<double> weight(Label l, const Point<Dim>& p) const { return index_.of(l).weight_at(p); }

  double exact_score(const Point<Dim>& x) const {
    double f = 0.0;
    positives().for_each([&](const IndexedVector<Dim>& v) { f += v.weight * kernel(v.position, x, kernel_); });
    negatives().for_each([&](const IndexedVector<Dim>& v) { f -= v.weight * kernel(v.position, x, kernel_); });
    return f;
  }

  double approximate_score(const Point<Dim>& x, const ApproxK& k) const {
    double f = 0.0;
    for (const auto& v : positives().knn(x, k.positives)) f += v.weight * kernel(v.position, x, kernel_);
    for (const auto& v : negatives().knn(x, k.negatives)) f -= v.weight * kernel(v.position, x, kernel_);
    return f;
  }

  /// Score in the requested mode. Approximate mode without configured K
  /// falls back to the exact sum.
  double score(const Point<Dim>& x, ScoreMode mode) const {
    if (mode == ScoreMode::Approximate && approx_) return approximate_score(x, *approx_);
    return exact_score(x);
  }

  /// Default-mode score: approximate when K is configured.
  double score(const Point<Dim>& x) const {
    return score(x, approx_ ? ScoreMode::Approximate : ScoreMode::Exact);
  }

  /// -1 (free) iff score < 0. An empty model is entirely free. Far from all
  /// support vectors every kernel term underflows to 0; the sign is then taken
  /// from the terms rescaled by the largest one.
  Label classify(const Point<Dim>& x, ScoreMode mode) const {
    if (empty()) return Label::Free;
    const double f = score(x, mode);
    if (f != 0.0) return f < 0.0 ? Label::Free : Label::Occupied;
    return rescaled_score(x, mode) < 0.0 ? Label::Free : Label::Occupied;
  }

  Label classify(const Point<Dim>& x) const { return classify(x, approx_ ? ScoreMode::Approximate : ScoreMode::Exact); }

 private:
  // Score divided by its largest term magnitude, computed in the log domain.
  double rescaled_score(const Point<Dim>& x, ScoreMode mode) const {
    std::vector<std::pair<double, double>> terms;  // (sign, log magnitude)
    auto add = [&](const IndexedVector<Dim>& v, double sign) {
      terms.emplace_back(sign, std::log(kernel_.eta * v.weight) - kernel_.gamma * (v.position - x).squaredNorm());
    };
    if (mode == ScoreMode::Approximate && approx_) {
      for (const auto& v : positives().knn(x, approx_->positives)) add(v, 1.0);
      for (const auto& v : negatives().knn(x, approx_->negatives)) add(v, -1.0);
    } else {
      positives().for_each([&](const IndexedVector<Dim>& v) { add(v, 1.0); });
      negatives().for_each([&](const IndexedVector<Dim>& v) { add(v, -1.0); });
    }
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms) top = std::max(top, t.second);
    double f = 0.0;
    for (const auto& t : terms) f += t.first * std::exp(t.second - top);
    return f;
  }

  static Label other(Label l) { return l == Label::Occupied ? Label::Free : Label::Occupied; }
  static void check_weight(double w) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgumentError("support vector weights must be finite and > 0");
  }

  KernelParams kernel_;
  std::optional<ApproxK> approx_;
  SpatialIndex<Dim> index_;
};

/// Idealized footprint: a grid-cell integer plus a float weight per vector.
template <int Dim>
std::uint64_t storage_estimate(const SupportVectorModel<Dim>& m) {
  return 8u * static_cast<std::uint64_t>(m.size());
}

inline std::uint64_t storage_estimate_for(std::uint64_t support_vectors) { return 8u * support_vectors; }

/// Readers-writer wrapper: any number of concurrent scorers, exclusive training.
template <int Dim>
class SharedModel {
 public:
  explicit SharedModel(SupportVectorModel<Dim> m) : model_(std::move(m)) {}

  template <typename Fn>
  decltype(auto) read(Fn&& fn) const {
    std::shared_lock lock(mutex_);
    return std::forward<Fn>(fn)(static_cast<const SupportVectorModel<Dim>&>(model_));
  }

  template <typename Fn>
  decltype(auto) write(Fn&& fn) {
    std::unique_lock lock(mutex_);
    return std::forward<Fn>(fn)(model_);
  }

  SupportVectorModel<Dim> snapshot() const {
    std::shared_lock lock(mutex_);
    return model_;
  }

 private:
  mutable std::shared_mutex mutex_;
  SupportVectorModel<Dim> model_;
};

}  // namespace skm
