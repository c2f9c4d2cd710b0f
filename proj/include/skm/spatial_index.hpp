#pragma once

// k-nearest-neighbour index over weighted support vectors, one R*-tree per
// label class. Weights live beside the tree and never affect geometry.

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iterator>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "skm/core_types.hpp"
#include "skm/errors.hpp"

namespace skm {

template <int Dim>
struct IndexedVector {
  Point<Dim> position;
  double weight = 0.0;
  Label label = Label::Occupied;
};

/// Quantized coordinates used for exact-position membership tests.
template <int Dim>
struct PositionKey {
  static constexpr double kQuantum = 1e-9;
  std::array<std::int64_t, Dim> q{};

  explicit PositionKey(const Point<Dim>& p) {
    for (int i = 0; i < Dim; ++i) q[i] = std::llround(p[i] / kQuantum);
  }
  bool operator==(const PositionKey&) const = default;
};

template <int Dim>
struct PositionKeyHash {
  std::size_t operator()(const PositionKey<Dim>& k) const noexcept {
    std::size_t h = 0x9e3779b97f4a7c15ULL;
    for (auto v : k.q) h ^= std::hash<std::int64_t>{}(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

/// Lexicographic comparison, used to break distance ties deterministically.
template <int Dim>
bool lex_less(const Point<Dim>& a, const Point<Dim>& b) {
  for (int i = 0; i < Dim; ++i) {
    if (a[i] < b[i]) return true;
    if (b[i] < a[i]) return false;
  }
  return false;
}

/// Points of a single label class with kNN, exact lookup, insert and remove.
template <int Dim>
class ClassIndex {
  using BPoint = boost::geometry::model::point<double, Dim, boost::geometry::cs::cartesian>;
  using BBox = boost::geometry::model::box<BPoint>;
  using Value = std::pair<BPoint, std::uint32_t>;
  using Tree = boost::geometry::index::rtree<Value, boost::geometry::index::rstar<16>>;

  struct Slot {
    Point<Dim> position;
    double weight = 0.0;
    bool live = false;
  };

 public:
  explicit ClassIndex(Label label = Label::Occupied) : label_(label) {}

  Label label() const { return label_; }
  std::size_t size() const { return tree_.size(); }
  bool empty() const { return tree_.empty(); }

  void insert(const Point<Dim>& position, double weight) {
    if (!position.allFinite()) throw InvalidArgumentError("support vector position must be finite");
    PositionKey<Dim> key(position);
    if (by_key_.count(key)) throw DuplicateEntryError("a support vector already exists at this position");
    std::uint32_t id;
    if (!free_.empty()) {
      id = free_.back();
      free_.pop_back();
    } else {
      id = static_cast<std::uint32_t>(slots_.size());
      slots_.emplace_back();
    }
    slots_[id] = Slot{position, weight, true};
    by_key_.emplace(key, id);
    tree_.insert(Value(to_boost(position), id));
    weight_sum_add(weight);
  }

  /// Removes the entry at `position` and returns its weight.
  double remove(const Point<Dim>& position) {
    auto it = by_key_.find(PositionKey<Dim>(position));
    if (it == by_key_.end()) throw NotFoundError("no support vector at this position");
    const std::uint32_t id = it->second;
    Slot& s = slots_[id];
    tree_.remove(Value(to_boost(s.position), id));
    by_key_.erase(it);
    const double w = s.weight;
    weight_sum_add(-w);
    s.live = false;
    free_.push_back(id);
    return w;
  }

  bool contains(const Point<Dim>& position) const { return by_key_.count(PositionKey<Dim>(position)) != 0; }

  std::optional<double> weight_at(const Point<Dim>& position) const {
    auto it = by_key_.find(PositionKey<Dim>(position));
    if (it == by_key_.end()) return std::nullopt;
    return slots_[it->second].weight;
  }

  void set_weight(const Point<Dim>& position, double weight) {
    auto it = by_key_.find(PositionKey<Dim>(position));
    if (it == by_key_.end()) throw NotFoundError("no support vector at this position");
    Slot& s = slots_[it->second];
    weight_sum_add(weight - s.weight);
    s.weight = weight;
  }

  /// Sum of all weights, maintained with compensated summation.
  double weight_sum() const { return sum_ + sum_comp_; }

  /// Up to k entries sorted by (distance, lexicographic position).
  std::vector<IndexedVector<Dim>> knn(const Point<Dim>& query, std::size_t k) const {
    if (k == 0) throw InvalidArgumentError("knn requires k >= 1");
    std::vector<IndexedVector<Dim>> out;
    if (tree_.empty()) return out;
    k = std::min(k, tree_.size());

    // Boost's k nearest bound the true k-th distance from above; gather every
    // point within that bound and resolve ordering with our own metric.
    double bound = 0.0;
    std::size_t got = 0;
    for (auto it = tree_.qbegin(boost::geometry::index::nearest(to_boost(query), static_cast<unsigned>(k)));
         it != tree_.qend(); ++it) {
      bound = std::max(bound, (slots_[it->second].position - query).squaredNorm());
      ++got;
    }
    if (got < k) k = got;

    std::vector<std::pair<double, std::uint32_t>> cand;
    const double half = std::sqrt(bound) * (1.0 + 1e-9) + 1e-12;
    BPoint lo, hi;
    assign(lo, query.array() - half);
    assign(hi, query.array() + half);
    std::vector<Value> hits;
    tree_.query(boost::geometry::index::intersects(BBox(lo, hi)), std::back_inserter(hits));
    cand.reserve(hits.size());
    for (const auto& v : hits) {
      const double d2 = (slots_[v.second].position - query).squaredNorm();
      if (d2 <= bound) cand.emplace_back(d2, v.second);
    }
    auto less = [this](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return lex_less<Dim>(slots_[a.second].position, slots_[b.second].position);
    };
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), less);
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      const Slot& s = slots_[cand[i].second];
      out.push_back({s.position, s.weight, label_});
    }
    return out;
  }

  /// Nearest entry, if any.
  std::optional<IndexedVector<Dim>> nearest(const Point<Dim>& query) const {
    auto v = knn(query, 1);
    if (v.empty()) return std::nullopt;
    return v.front();
  }

  /// Visits live entries in slot order (deterministic for a given history).
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const Slot& s : slots_)
      if (s.live) fn(IndexedVector<Dim>{s.position, s.weight, label_});
  }

  /// All entries sorted lexicographically by position.
  std::vector<IndexedVector<Dim>> sorted_entries() const {
    std::vector<IndexedVector<Dim>> out;
    out.reserve(size());
    for_each([&](const IndexedVector<Dim>& v) { out.push_back(v); });
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return lex_less<Dim>(a.position, b.position); });
    return out;
  }

 private:
  static BPoint to_boost(const Point<Dim>& p) {
    BPoint b;
    assign(b, p.array());
    return b;
  }

  template <typename Arr>
  static void assign(BPoint& b, const Arr& a) {
    assign_impl(b, a, std::make_integer_sequence<int, Dim>{});
  }

  template <typename Arr, int... I>
  static void assign_impl(BPoint& b, const Arr& a, std::integer_sequence<int, I...>) {
    (boost::geometry::set<I>(b, a[I]), ...);
  }

  void weight_sum_add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      sum_comp_ += (sum_ - t) + x;
    else
      sum_comp_ += (x - t) + sum_;
    sum_ = t;
    if (tree_.empty()) sum_ = sum_comp_ = 0.0;
  }

  Label label_;
  Tree tree_;
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> free_;
  std::unordered_map<PositionKey<Dim>, std::uint32_t, PositionKeyHash<Dim>> by_key_;
  double sum_ = 0.0;
  double sum_comp_ = 0.0;
};

/// Two per-class indices addressed by label.
template <int Dim>
class SpatialIndex {
 public:
  SpatialIndex() : positives_(Label::Occupied), negatives_(Label::Free) {}

  ClassIndex<Dim>& of(Label l) { return l == Label::Occupied ? positives_ : negatives_; }
  const ClassIndex<Dim>& of(Label l) const { return l == Label::Occupied ? positives_ : negatives_; }

  void insert(const IndexedVector<Dim>& v) { of(v.label).insert(v.position, v.weight); }
  double remove(const Point<Dim>& position, Label l) { return of(l).remove(position); }
  std::vector<IndexedVector<Dim>> knn(const Point<Dim>& q, std::size_t k, Label l) const {
    return of(l).knn(q, k);
  }
  std::size_t size() const { return positives_.size() + negatives_.size(); }

 private:
  ClassIndex<Dim> positives_;
  ClassIndex<Dim> negatives_;
};

}  // namespace skm
