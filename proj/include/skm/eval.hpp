#pragma once

// Map quality against ground truth, dense sampling oracles for the collision
// checks, and timing / training benchmarks with CSV output.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skm/collision.hpp"
#include "skm/core_types.hpp"
#include "skm/fastron.hpp"
#include "skm/kernel_model.hpp"
#include "skm/planner.hpp"
#include "skm/scan_pipeline.hpp"
#include "skm/sim_env.hpp"

namespace skm {

// ---------------------------------------------------------------- map quality

/// Cells of a sampling grid covered by at least one scan.
class ObservedMask {
 public:
  ObservedMask() = default;
  explicit ObservedMask(const SampleGrid<2>& grid)
      : grid_(grid), bits_(static_cast<std::size_t>(grid.cell_count()), 0) {}

  const SampleGrid<2>& grid() const { return grid_; }

  void mark(std::int64_t id) { bits_.at(static_cast<std::size_t>(id)) = 1; }

  void add_scan(const RangeScan& scan, double robot_radius) {
    const auto obs = observe_cells(scan, grid_, robot_radius);
    for (auto id : obs.occupied) mark(id);
    for (auto id : obs.free) mark(id);
  }

  bool contains(const Point2& p) const {
    if (!grid_.contains(p)) return false;
    return bits_[static_cast<std::size_t>(grid_.linear(grid_.raw_cell(p)))] != 0;
  }

  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

 private:
  SampleGrid<2> grid_;
  std::vector<std::uint8_t> bits_;
};

struct MapMetrics {
  double accuracy = 0.0;
  double recall = 0.0;
  std::size_t cells = 0;
  std::size_t truth_occupied = 0;
  std::size_t true_positive = 0;
  std::size_t matches = 0;
};

struct MapReport {
  double accuracy = 0.0;
  double recall = 0.0;
  std::size_t sv_count = 0;
  std::uint64_t storage_bytes = 0;
  std::size_t cells_evaluated = 0;
  MapMetrics all;
  std::optional<MapMetrics> observed;  // restricted to observed cells
};

struct MapEvalOptions {
  /// Score used by the kernel-map predictor.
  ScoreMode score_mode = ScoreMode::Exact;
  /// Inflated-map predictor: sum only the k nearest positive weights.
  std::optional<std::size_t> upper_local_k;
  const ObservedMask* observed = nullptr;
};

/// Inflated-map prediction: U(x) >= 0 with j = nearest negative, compared in
/// the log domain so that far-field underflow cannot flip the sign.
inline bool upper_bound_occupied(const Point2& x, const SupportVectorModel<2>& m,
                                 std::optional<std::size_t> local_k = std::nullopt) {
  if (m.positives().empty()) return false;
  const auto neg = m.negatives().nearest(x);
  if (!neg) return true;
  const auto pos = m.positives().nearest(x);
  double s = 0.0;
  if (local_k) {
    for (const auto& v : m.positives().knn(x, *local_k)) s += v.weight;
  } else {
    s = m.positives().weight_sum();
  }
  const double gamma = m.kernel_params().gamma;
  const double lhs = std::log(s) - gamma * (x - pos->position).squaredNorm();
  const double rhs = std::log(neg->weight) - gamma * (x - neg->position).squaredNorm();
  return lhs >= rhs;
}

namespace detail {

inline MapMetrics finish(MapMetrics m) {
  m.accuracy = m.cells ? static_cast<double>(m.matches) / static_cast<double>(m.cells) : 1.0;
  m.recall = m.truth_occupied ? static_cast<double>(m.true_positive) / static_cast<double>(m.truth_occupied) : 1.0;
  return m;
}

inline void tally(MapMetrics& m, bool truth, bool predicted) {
  ++m.cells;
  if (truth == predicted) ++m.matches;
  if (truth) {
    ++m.truth_occupied;
    if (predicted) ++m.true_positive;
  }
}

}  // namespace detail

/// Scores a per-point predictor against the C-space ground truth of every
/// world cell center. Recall is 1 when no cell is truly occupied.
template <typename Predict>
MapReport evaluate_predictor(const GroundTruthGrid& world, double robot_radius, Predict&& predict_occupied,
                             const ObservedMask* observed = nullptr) {
  MapMetrics all, obs;
  const auto& g = world.geometry();
  for (std::int64_t y = 0; y < g.extents.y(); ++y)
    for (std::int64_t x = 0; x < g.extents.x(); ++x) {
      const Cell2 c(x, y);
      const Point2 p = cell_center(c, g);
      const bool truth = world.cspace_occupied(c, robot_radius);
      const bool pred = predict_occupied(p);
      detail::tally(all, truth, pred);
      if (observed && observed->contains(p)) detail::tally(obs, truth, pred);
    }
  MapReport r;
  r.all = detail::finish(all);
  r.accuracy = r.all.accuracy;
  r.recall = r.all.recall;
  r.cells_evaluated = r.all.cells;
  if (observed) r.observed = detail::finish(obs);
  return r;
}

/// Kernel map (sign of F) or inflated map (sign of U) against ground truth.
inline MapReport map_accuracy(const SupportVectorModel<2>& m, const GroundTruthGrid& world, double robot_radius,
                              bool use_upper_bound, const MapEvalOptions& opt = {}) {
  MapReport r;
  if (use_upper_bound) {
    r = evaluate_predictor(
        world, robot_radius, [&](const Point2& p) { return upper_bound_occupied(p, m, opt.upper_local_k); },
        opt.observed);
  } else {
    r = evaluate_predictor(
        world, robot_radius,
        [&](const Point2& p) { return m.classify(p, opt.score_mode) == Label::Occupied; }, opt.observed);
  }
  r.sv_count = m.size();
  r.storage_bytes = storage_estimate(m);
  return r;
}

// ------------------------------------------------------------ grid baseline

/// Raw binary grid from endpoint marking: the cell holding each beam hit is
/// occupied; cells inside the observed free region are known.
struct BaselineGrid {
  GroundTruthGrid marks;
  ObservedMask known;
  std::size_t occupied_cells = 0;
  std::size_t known_cells = 0;

  MapReport evaluate(const GroundTruthGrid& world, double robot_radius, const ObservedMask* observed = nullptr) const {
    auto r = evaluate_predictor(
        world, robot_radius, [&](const Point2& p) { return marks.cspace_occupied_at(p, robot_radius); }, observed);
    r.sv_count = known_cells;
    r.storage_bytes = (known_cells + 7) / 8;
    return r;
  }
};

inline BaselineGrid build_baseline_grid(const std::vector<RangeScan>& scans, const SampleGrid<2>& grid) {
  BaselineGrid b{GroundTruthGrid(grid), ObservedMask(grid), 0, 0};
  for (const auto& scan : scans) {
    for (const auto& ob : scan_to_obstacles(scan, 0.0)) {
      const Cell2 c = hit_cell(ob, grid);
      if (grid.contains(c)) b.marks.set(c, true);
    }
    b.known.add_scan(scan, 0.0);
  }
  b.occupied_cells = b.marks.occupied_count();
  b.known_cells = b.known.count();
  return b;
}

// -------------------------------------------------------------- oracles

enum class OracleJ {
  Nearest,  // U with j = nearest negative
  Any,      // free iff some negative j gives U_j < 0 (tightest form of the bound)
};

/// Whether the dense oracle sees x as occupied.
inline bool oracle_occupied(const Point2& x, const SupportVectorModel<2>& m, bool use_upper_bound, OracleJ j_policy,
                            ScoreMode score_mode = ScoreMode::Exact) {
  if (m.positives().empty()) return false;
  if (!use_upper_bound) return m.classify(x, score_mode) == Label::Occupied;
  if (j_policy == OracleJ::Nearest) return upper_bound_occupied(x, m);
  const auto pos = m.positives().nearest(x);
  const double gamma = m.kernel_params().gamma;
  const double lhs = std::log(m.positives().weight_sum()) - gamma * (x - pos->position).squaredNorm();
  bool free = false;
  m.negatives().for_each([&](const IndexedVector<2>& v) {
    if (!free && std::log(v.weight) - gamma * (x - v.position).squaredNorm() > lhs) free = true;
  });
  return !free;
}

/// Samples the segment at arc length i * delta from a, plus b. Halving delta
/// keeps every earlier sample.
inline Verdict brute_force_segment_oracle(const Segment<2>& seg, const SupportVectorModel<2>& m, double delta,
                                          bool use_upper_bound, OracleJ j_policy = OracleJ::Nearest,
                                          ScoreMode score_mode = ScoreMode::Exact) {
  if (!(delta > 0.0)) throw InvalidArgumentError("oracle step must be > 0");
  const double len = (seg.b - seg.a).norm();
  const Vector2 dir = len > 0.0 ? Vector2((seg.b - seg.a) / len) : Vector2::Zero();
  for (std::size_t i = 0; static_cast<double>(i) * delta < len; ++i)
    if (oracle_occupied(seg.a + (static_cast<double>(i) * delta) * dir, m, use_upper_bound, j_policy, score_mode))
      return Verdict::Colliding;
  return oracle_occupied(seg.b, m, use_upper_bound, j_policy, score_mode) ? Verdict::Colliding : Verdict::Free;
}

/// Samples the curve at times i * dt, plus the horizon.
inline Verdict brute_force_curve_oracle(const PolyCurve<2>& c, const SupportVectorModel<2>& m, double dt,
                                        bool use_upper_bound, OracleJ j_policy = OracleJ::Nearest,
                                        ScoreMode score_mode = ScoreMode::Exact) {
  if (!(dt > 0.0)) throw InvalidArgumentError("oracle step must be > 0");
  for (std::size_t i = 0; static_cast<double>(i) * dt < c.horizon; ++i)
    if (oracle_occupied(c(static_cast<double>(i) * dt), m, use_upper_bound, j_policy, score_mode))
      return Verdict::Colliding;
  return oracle_occupied(c(c.horizon), m, use_upper_bound, j_policy, score_mode) ? Verdict::Colliding
                                                                                  : Verdict::Free;
}

// -------------------------------------------------------------- CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

inline void write_csv(std::ostream& out, const CsvTable& t) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

// -------------------------------------------------------------- timing

struct TimingRow {
  std::string method;  // "complete" or "sampling"
  double length = 0.0;
  std::optional<double> delta;
  std::size_t trials = 0;
  double mean_us = 0.0;
  double p95_us = 0.0;
};

struct TimingSetup {
  Box2 region{Point2(0, 0), Point2(1, 1)};
  std::uint64_t seed = 1;
  /// Keep only segments the dense score oracle finds free, so that both
  /// methods traverse the whole segment.
  bool free_segments_only = true;
  std::size_t attempts_per_trial = 200;
  ScoreMode sampling_score = ScoreMode::Approximate;
};

namespace detail {

inline std::pair<double, double> mean_p95(std::vector<double> v) {
  if (v.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : v) sum += x;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
  return {sum / static_cast<double>(v.size()), v[std::min(idx, v.size() - 1)]};
}

template <typename F>
double time_us(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Segments of the given length inside `region`, deterministic in the seed.
inline std::vector<Segment<2>> bench_segments(const SupportVectorModel<2>& m, double length, std::size_t count,
                                              const TimingSetup& setup) {
  std::mt19937_64 rng(setup.seed ^ static_cast<std::uint64_t>(std::llround(length * 1000.0)));
  std::uniform_real_distribution<double> ux(setup.region.min.x(), setup.region.max.x());
  std::uniform_real_distribution<double> uy(setup.region.min.y(), setup.region.max.y());
  std::uniform_real_distribution<double> ua(-std::numbers::pi, std::numbers::pi);
  std::vector<Segment<2>> out, fallback;
  const std::size_t attempts = count * setup.attempts_per_trial;
  for (std::size_t a = 0; a < attempts && out.size() < count; ++a) {
    const Point2 s(ux(rng), uy(rng));
    const double ang = ua(rng);
    const Point2 e = s + length * Vector2(std::cos(ang), std::sin(ang));
    if (!setup.region.contains(e)) continue;
    const Segment<2> seg{s, e};
    if (!setup.free_segments_only ||
        brute_force_segment_oracle(seg, m, 0.05, false, OracleJ::Nearest, ScoreMode::Approximate) == Verdict::Free)
      out.push_back(seg);
    else if (fallback.size() < count)
      fallback.push_back(seg);
  }
  for (std::size_t i = 0; out.size() < count && i < fallback.size(); ++i) out.push_back(fallback[i]);
  return out;
}

/// Wall-clock cost of the complete segment check and of the sampling check
/// at each delta, per segment length. trials = 0 gives an empty table.
inline std::vector<TimingRow> timing_bench(const SupportVectorModel<2>& m, const std::vector<double>& lengths,
                                           std::size_t trials, const BoundMode& mode, const std::vector<double>& deltas,
                                           const TimingSetup& setup) {
  std::vector<TimingRow> rows;
  if (trials == 0) return rows;
  volatile int sink = 0;
  for (double len : lengths) {
    const auto segs = bench_segments(m, len, trials, setup);
    if (segs.empty()) continue;
    // Warm-up pass over the same inputs.
    for (const auto& s : segs) sink = sink + static_cast<int>(check_segment(s, m, mode).verdict);
    std::vector<double> t;
    for (const auto& s : segs)
      t.push_back(detail::time_us([&] { sink = sink + static_cast<int>(check_segment(s, m, mode).verdict); }));
    auto [mean, p95] = detail::mean_p95(t);
    rows.push_back({"complete", len, std::nullopt, segs.size(), mean, p95});
    for (double d : deltas) {
      t.clear();
      for (const auto& s : segs)
        t.push_back(detail::time_us([&] {
          sink = sink + static_cast<int>(
                            brute_force_segment_oracle(s, m, d, false, OracleJ::Nearest, setup.sampling_score));
        }));
      std::tie(mean, p95) = detail::mean_p95(t);
      rows.push_back({"sampling", len, d, segs.size(), mean, p95});
    }
  }
  return rows;
}

inline CsvTable timing_table(const std::vector<TimingRow>& rows) {
  CsvTable t{{"method", "length_m", "delta_m", "trials", "mean_us", "p95_us"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({r.method, csv_number(r.length), r.delta ? csv_number(*r.delta) : "", std::to_string(r.trials),
                      csv_number(r.mean_us), csv_number(r.p95_us)});
  return t;
}

// -------------------------------------------------------------- training

struct TrainingBenchConfig {
  SampleGrid<2> grid;
  KernelParams kernel;
  std::optional<ApproxK> score_k = ApproxK{100, 100};
  TrainingConfig training;
  AugmentationConfig augmentation;
  double robot_radius = 0.25;
};

struct TrainingRow {
  std::size_t index = 0;
  double t = 0.0;
  std::size_t batch_size = 0;
  std::size_t occupied = 0;
  std::size_t observed_free = 0;
  std::size_t augmented = 0;
  bool converged = true;
  double update_ms = 0.0;
  std::size_t sv_count = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

struct TrainingBenchResult {
  std::vector<TrainingRow> rows;
  SupportVectorModel<2> model;
};

/// Replays a scan log through batch generation and incremental training.
/// Scans whose pose lies outside the grid are rejected with OutOfRangeError.
inline TrainingBenchResult training_bench(const std::vector<RangeScan>& scans, const TrainingBenchConfig& cfg) {
  TrainingBenchResult res{{}, SupportVectorModel<2>(cfg.kernel, cfg.score_k)};
  for (std::size_t i = 0; i < scans.size(); ++i) {
    TrainingRow row;
    row.index = i;
    row.t = scans[i].t;
    const auto t0 = std::chrono::steady_clock::now();
    const auto gb = generate_batch(scans[i], cfg.grid, res.model, cfg.augmentation, cfg.robot_radius);
    if (!gb.batch.empty())
      row.converged = train_increment(res.model, gb.batch, cfg.training, std::optional<Point2>(scans[i].pose.position))
                          .converged;
    row.update_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    row.batch_size = gb.batch.size();
    row.occupied = gb.occupied;
    row.observed_free = gb.observed_free;
    row.augmented = gb.augmented;
    row.sv_count = res.model.size();
    row.positives = res.model.positives().size();
    row.negatives = res.model.negatives().size();
    res.rows.push_back(row);
  }
  return res;
}

inline CsvTable training_table(const std::vector<TrainingRow>& rows) {
  CsvTable t{{"scan", "t", "batch_size", "occupied", "observed_free", "augmented", "converged", "update_ms",
              "sv_count", "positives", "negatives"},
             {}};
  for (const auto& r : rows)
    t.rows.push_back({std::to_string(r.index), csv_number(r.t), std::to_string(r.batch_size),
                      std::to_string(r.occupied), std::to_string(r.observed_free), std::to_string(r.augmented),
                      r.converged ? "1" : "0", csv_number(r.update_ms), std::to_string(r.sv_count),
                      std::to_string(r.positives), std::to_string(r.negatives)});
  return t;
}

// -------------------------------------------------------------- summary

struct SummaryRow {
  std::string variant;
  double accuracy = 0.0;
  double recall = 0.0;
  std::size_t vectors = 0;
  std::uint64_t storage = 0;
};

inline nlohmann::json summary_rows_json(const std::vector<SummaryRow>& rows) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rows)
    a.push_back({{"variant", r.variant},
                 {"accuracy", r.accuracy},
                 {"recall", r.recall},
                 {"vectors", r.vectors},
                 {"storage", r.storage}});
  return a;
}

struct MapSummary {
  std::vector<SummaryRow> all_cells;
  std::vector<SummaryRow> observed_cells;
};

/// Kernel map and inflated map for a model trained with exact scores (KM, IM)
/// and one trained with score approximation (KM-SA, IM-SA), plus the grid
/// baseline, over all cells and over observed cells.
inline MapSummary summarize_maps(const SupportVectorModel<2>& exact, const SupportVectorModel<2>& approx,
                                 const GroundTruthGrid& world, double robot_radius,
                                 const std::vector<RangeScan>& scans, const SampleGrid<2>& grid) {
  ObservedMask observed(grid);
  for (const auto& s : scans) observed.add_scan(s, robot_radius);
  const auto baseline = build_baseline_grid(scans, grid);
  const std::size_t local_k = approx.approx_k() ? approx.approx_k()->positives : 100;

  struct Variant {
    const char* name;
    MapReport report;
  };
  std::vector<Variant> v;
  v.push_back({"KM", map_accuracy(exact, world, robot_radius, false, {ScoreMode::Exact, std::nullopt, &observed})});
  v.push_back(
      {"KM-SA", map_accuracy(approx, world, robot_radius, false, {ScoreMode::Approximate, std::nullopt, &observed})});
  v.push_back({"IM", map_accuracy(exact, world, robot_radius, true, {ScoreMode::Exact, std::nullopt, &observed})});
  v.push_back({"IM-SA", map_accuracy(approx, world, robot_radius, true, {ScoreMode::Exact, local_k, &observed})});
  v.push_back({"GRID", baseline.evaluate(world, robot_radius, &observed)});

  MapSummary s;
  for (const auto& x : v) {
    s.all_cells.push_back({x.name, x.report.all.accuracy, x.report.all.recall, x.report.sv_count,
                           x.report.storage_bytes});
    s.observed_cells.push_back({x.name, x.report.observed->accuracy, x.report.observed->recall, x.report.sv_count,
                                x.report.storage_bytes});
  }
  return s;
}

inline nlohmann::json summary_json(const MapSummary& s) {
  return {{"all_cells", summary_rows_json(s.all_cells)}, {"observed_cells", summary_rows_json(s.observed_cells)}};
}

}  // namespace skm
