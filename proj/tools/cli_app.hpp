#pragma once

// Subcommands of the skm tool. Verdicts go to `out`, logs to `err`,
// artifacts to files. Exit codes: 0 success / free, 1 colliding / not
// reached, 2 usage or input error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skm/config.hpp"
#include "skm/eval.hpp"
#include "skm/model_io.hpp"
#include "skm/navigation.hpp"
#include "skm/scan_log.hpp"

namespace skm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNegative = 1;
inline constexpr int kExitUsage = 2;

struct Options {
  std::string config;
  std::string scene;
  std::string scan_log;
  std::string model;
  std::string out;
  std::string report;
  std::string geometry;
  std::string bench_kind = "timing";
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<std::size_t> approx_k;
  std::optional<double> epsilon;
  bool no_approx = false;
  std::size_t trials = 200;
  std::vector<double> lengths{0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> deltas{0.01};
};

/// Config file (or defaults) with the command-line overrides applied.
inline RunConfig resolve_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.mode.empty()) {
    const BoundKind k = detail::bound_kind_from(o.mode);
    c.check.segment_mode.kind = k;
    c.check.curve_mode.kind = k;
  }
  if (o.approx_k) {
    if (*o.approx_k < 1) throw ParseError("--approx-k must be >= 1");
    c.approx_k = ApproxK{*o.approx_k, *o.approx_k};
    c.check.segment_mode.knn_limit = KnnLimit{*o.approx_k, *o.approx_k};
    c.check.curve_mode.knn_limit = KnnLimit{*o.approx_k, *o.approx_k};
  }
  if (o.no_approx) {
    c.approx_k.reset();
    c.training.init_k.reset();
    c.check.segment_mode = BoundMode::exact(c.check.segment_mode.kind);
    c.check.curve_mode = BoundMode::exact(c.check.curve_mode.kind);
  }
  if (o.epsilon) {
    if (!(*o.epsilon > 0.0)) throw ParseError("--epsilon must be > 0");
    c.check.epsilon = *o.epsilon;
  }
  return c;
}

inline std::string pick(const std::string& flag, const std::optional<std::string>& from_config, const char* name) {
  if (!flag.empty()) return flag;
  if (from_config) return *from_config;
  throw ParseError(std::string("missing ") + name);
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) { open_out(p) << s; }

// ---------------------------------------------------------------- simulate

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(o);
  const Scene scene = load_scene(pick(o.scene, c.paths.scene, "--scene"));
  const std::filesystem::path dir = pick(o.out, c.paths.out, "--out");
  if (!scene.start || !scene.goal) throw ParseError("scene needs a start and a goal for simulate");
  std::filesystem::create_directories(dir);

  auto nav = c.navigation();
  nav.grid_resolution = c.grid.resolution;
  const auto start = PlannerState{*scene.start, Vector2::Zero(), 0.0, 0};
  err << "simulate: start (" << start.position.x() << ", " << start.position.y() << ") goal ("
      << scene.goal->center.x() << ", " << scene.goal->center.y() << ")\n";
  const auto res = run_navigation(scene.world, start, *scene.goal, nav);
  const auto& log = res.log;

  {
    auto f = open_out(dir / "episode.jsonl");
    write_episode_log(f, log);
  }
  save_model(res.model, (dir / "model.json").string());
  write_scan_log((dir / "scans.jsonl").string(), log.scans);
  write_text(dir / "summary.json", episode_summary(log).dump(2) + "\n");

  err << "simulate: " << log.cycles.size() << " cycles, reached=" << log.reached << " violations=" << log.violations
      << (log.diagnostic.empty() ? "" : " (" + log.diagnostic + ")") << "\n";
  const bool ok = log.reached && log.violations == 0;
  out << (ok ? "REACHED" : "NOT_REACHED") << "\n";
  return ok ? kExitOk : kExitNegative;
}

// ---------------------------------------------------------------- train

inline TrainingBenchConfig training_setup(const RunConfig& c, const SampleGrid<2>& grid) {
  TrainingBenchConfig t;
  t.grid = grid;
  t.kernel = c.kernel;
  t.score_k = c.approx_k;
  t.training = c.training;
  t.augmentation = c.augmentation;
  t.robot_radius = c.robot.radius;
  return t;
}

inline SampleGrid<2> grid_for(const RunConfig& c, const std::optional<Scene>& scene,
                              const std::vector<RangeScan>& scans) {
  if (scene && !(c.grid.origin && c.grid.extents)) return training_grid(scene->world, c.grid.resolution);
  return grid_for_scans(c.grid, scans);
}

inline int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(o);
  const auto scans = read_scan_log(pick(o.scan_log, c.paths.scan_log, "--scan-log"));
  const std::string model_path = pick(o.model, c.paths.model, "--model");
  std::optional<Scene> scene;
  if (!o.scene.empty() || c.paths.scene) scene = load_scene(pick(o.scene, c.paths.scene, "--scene"));

  const auto grid = grid_for(c, scene, scans);
  const auto res = training_bench(scans, training_setup(c, grid));
  save_model(res.model, model_path);
  const std::string report = o.report.empty() ? model_path + ".report.csv" : o.report;
  {
    auto f = open_out(report);
    write_csv(f, training_table(res.rows));
  }
  err << "train: " << scans.size() << " scans, " << res.model.positives().size() << " positive / "
      << res.model.negatives().size() << " negative support vectors\n";
  out << model_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- check

inline nlohmann::json bound_json(const FreeBound& b) {
  switch (b.status) {
    case BoundStatus::Ok:
      // JSON has no infinity.
      return std::isfinite(b.value) ? nlohmann::json(b.value) : nlohmann::json("inf");
    case BoundStatus::StartInCollision:
      return "start_in_collision";
    case BoundStatus::NoNegatives:
      return "no_negatives";
  }
  return nullptr;
}

/// Geometry argument: inline JSON or a path to a JSON file.
inline nlohmann::json read_geometry(const std::string& arg) {
  try {
    if (!arg.empty() && arg.find_first_not_of(" \t\r\n") != std::string::npos &&
        arg[arg.find_first_not_of(" \t\r\n")] == '{')
      return nlohmann::json::parse(arg);
    std::ifstream in(arg);
    if (!in) throw ParseError("cannot open geometry file: " + arg);
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("geometry is not valid JSON: ") + e.what());
  }
}

/// {"type":"segment","a":[x,y],"b":[x,y]} or
/// {"type":"curve","coeffs":[[x,y],...],"horizon":T}
inline std::variant<Segment<2>, PolyCurve<2>> parse_geometry(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) throw ParseError("geometry needs a 'type'");
  try {
    const auto type = j["type"].get<std::string>();
    if (type == "segment") {
      detail::reject_unknown_keys(j, {"type", "a", "b"}, "segment");
      return Segment<2>{detail::json_point(j.at("a"), "segment.a"), detail::json_point(j.at("b"), "segment.b")};
    }
    if (type == "curve") {
      detail::reject_unknown_keys(j, {"type", "coeffs", "horizon"}, "curve");
      PolyCurve<2> c;
      for (const auto& v : j.at("coeffs")) c.coeffs.push_back(detail::json_point(v, "curve coefficient"));
      c.horizon = j.value("horizon", 1.0);
      return c;
    }
    throw ParseError("geometry type must be 'segment' or 'curve'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed geometry: ") + e.what());
  }
}

inline int cmd_check(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(o);
  const auto m = load_model<2>(pick(o.model, c.paths.model, "--model"), c.approx_k);
  const auto geom = parse_geometry(read_geometry(o.geometry));
  Verdict v;
  nlohmann::json bounds;
  try {
    if (const auto* seg = std::get_if<Segment<2>>(&geom)) {
      const auto r = check_segment(*seg, m, c.check.segment_mode);
      v = r.verdict;
      bounds = {{"t_uA", bound_json(r.from_a)}, {"t_uB", bound_json(r.from_b)}};
    } else {
      const auto r = check_curve(std::get<PolyCurve<2>>(geom), c.check.epsilon, m, c.check.curve_mode);
      v = r.verdict;
      nlohmann::json balls = nlohmann::json::array();
      for (const auto& b : r.balls) balls.push_back({{"t", b.t}, {"radius", b.radius}});
      bounds = {{"balls", balls}};
    }
  } catch (const InvalidArgumentError& e) {
    throw ParseError(std::string("invalid geometry: ") + e.what());
  }
  out << to_string(v) << "\n" << bounds.dump() << "\n";
  err << "check: " << to_string(v) << "\n";
  return v == Verdict::Free ? kExitOk : kExitNegative;
}

// ---------------------------------------------------------------- eval

inline int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(o);
  const Scene scene = load_scene(pick(o.scene, c.paths.scene, "--scene"));
  std::vector<RangeScan> scans;
  if (!o.scan_log.empty() || c.paths.scan_log) scans = read_scan_log(pick(o.scan_log, c.paths.scan_log, "--scan-log"));
  const std::string model_path = o.model.empty() ? c.paths.model.value_or("") : o.model;
  if (model_path.empty() && scans.empty()) throw ParseError("eval needs --model or a non-empty --scan-log");

  const auto grid = grid_for(c, scene, scans);
  const double r = c.robot.radius;
  MapSummary s;
  if (!model_path.empty()) {
    const auto exact = load_model<2>(model_path, std::nullopt);
    const auto approx = load_model<2>(model_path, c.approx_k.value_or(ApproxK{}));
    s = summarize_maps(exact, approx, scene.world, r, scans, grid);
  } else {
    auto setup = training_setup(c, grid);
    setup.training.init_k.reset();
    const auto exact = training_bench(scans, setup).model;
    setup.training.init_k = c.approx_k.value_or(ApproxK{});
    setup.score_k = c.approx_k.value_or(ApproxK{});
    const auto approx = training_bench(scans, setup).model;
    s = summarize_maps(exact, approx, scene.world, r, scans, grid);
  }
  const std::string doc = summary_json(s).dump(2) + "\n";
  if (o.out.empty() && !c.paths.out)
    out << doc;
  else
    write_text(pick(o.out, c.paths.out, "--out"), doc);
  for (const auto& row : s.observed_cells)
    err << "eval: " << row.variant << " accuracy " << row.accuracy << " recall " << row.recall << " vectors "
        << row.vectors << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- bench

inline int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(o);
  CsvTable table;
  if (o.bench_kind == "timing") {
    const auto m = load_model<2>(pick(o.model, c.paths.model, "--model"), c.approx_k);
    TimingSetup setup;
    setup.seed = c.seed;
    if (!m.empty()) {
      Point2 lo = Point2::Constant(kInf), hi = -lo;
      for (const auto* set : {&m.positives(), &m.negatives()})
        for (const auto& v : set->sorted_entries()) {
          lo = lo.cwiseMin(v.position);
          hi = hi.cwiseMax(v.position);
        }
      setup.region = Box2{lo, hi};
    }
    setup.sampling_score = c.approx_k ? ScoreMode::Approximate : ScoreMode::Exact;
    table = timing_table(timing_bench(m, o.lengths, o.trials, c.check.segment_mode, o.deltas, setup));
  } else if (o.bench_kind == "training") {
    const auto scans = read_scan_log(pick(o.scan_log, c.paths.scan_log, "--scan-log"));
    std::optional<Scene> scene;
    if (!o.scene.empty() || c.paths.scene) scene = load_scene(pick(o.scene, c.paths.scene, "--scene"));
    table = training_table(training_bench(scans, training_setup(c, grid_for(c, scene, scans))).rows);
  } else {
    throw ParseError("bench kind must be 'timing' or 'training'");
  }
  if (o.out.empty() && !c.paths.out) {
    write_csv(out, table);
  } else {
    auto f = open_out(pick(o.out, c.paths.out, "--out"));
    write_csv(f, table);
  }
  err << "bench: " << table.rows.size() << " rows\n";
  return kExitOk;
}

// ---------------------------------------------------------------- entry

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sparse kernel occupancy maps: simulate, train, check, eval, bench"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "run configuration JSON");
    s->add_option("--seed", o.seed, "random seed (overrides the config)");
    s->add_option("--mode", o.mode, "bound combination")->check(CLI::IsMember({"single-j", "minimax", "maximin"}));
    s->add_option("--approx-k", o.approx_k, "neighbors per class for scores and bounds");
    s->add_option("--epsilon", o.epsilon, "minimum ball radius for curve checks");
    s->add_flag("--no-approx", o.no_approx, "exact scores and bounds");
  };

  auto* sim = app.add_subcommand("simulate", "run one navigation episode");
  common(sim);
  sim->add_option("--scene", o.scene, "scene JSON");
  sim->add_option("--out", o.out, "output directory");

  auto* train = app.add_subcommand("train", "build a model from a scan log");
  common(train);
  train->add_option("--scan-log", o.scan_log, "scan log (JSON lines)");
  train->add_option("--model", o.model, "output model file");
  train->add_option("--scene", o.scene, "scene JSON (sets the sampling grid)");
  train->add_option("--report", o.report, "per-scan CSV report (default <model>.report.csv)");

  auto* check = app.add_subcommand("check", "check a segment or curve against a model");
  common(check);
  check->add_option("--model", o.model, "model file");
  check->add_option("geometry", o.geometry, "segment or curve JSON, inline or a file")->required();

  auto* eval = app.add_subcommand("eval", "map accuracy summary against a scene");
  common(eval);
  eval->add_option("--scene", o.scene, "scene JSON (ground truth)");
  eval->add_option("--scan-log", o.scan_log, "scan log used for training and the grid baseline");
  eval->add_option("--model", o.model, "model file; trains from the scan log when omitted");
  eval->add_option("--out", o.out, "summary JSON path (default stdout)");

  auto* bench = app.add_subcommand("bench", "timing or training benchmark CSV");
  common(bench);
  bench->add_option("kind", o.bench_kind, "timing or training")->check(CLI::IsMember({"timing", "training"}));
  bench->add_option("--model", o.model, "model file (timing)");
  bench->add_option("--scan-log", o.scan_log, "scan log (training)");
  bench->add_option("--scene", o.scene, "scene JSON (training grid)");
  bench->add_option("--trials", o.trials, "segments per length (timing)");
  bench->add_option("--lengths", o.lengths, "segment lengths in meters (timing)");
  bench->add_option("--deltas", o.deltas, "sampling steps in meters (timing)");
  bench->add_option("--out", o.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o, out, err);
    if (train->parsed()) return cmd_train(o, out, err);
    if (check->parsed()) return cmd_check(o, out, err);
    if (eval->parsed()) return cmd_eval(o, out, err);
    return cmd_bench(o, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace skm::cli
