#include "extrinsiq/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "extrinsiq/calibration.hpp"
#include "extrinsiq/io.hpp"
#include "extrinsiq/metrics.hpp"

namespace extrinsiq {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInsufficientViews:
    case ErrorCode::kDisconnectedGraph:
      return kExitInsufficient;
    case ErrorCode::kDidNotConverge:
    case ErrorCode::kNumericalFailure:
      return kExitNotConverged;
    case ErrorCode::kInvalidArgument:
      return kExitUsage;
    default:
      return kExitIo;
  }
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* v = std::getenv("EXTRINSIQ_SEED");
  if (v == nullptr || *v == '\0') return fallback;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  return (end != nullptr && *end == '\0') ? static_cast<std::uint64_t>(s) : fallback;
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::pair<std::string, std::string> split_pair(const std::string& s, char sep) {
  const auto at = s.find(sep);
  if (at == std::string::npos || at == 0 || at + 1 == s.size()) {
    throw UsageError("expected 'a" + std::string(1, sep) + "b', got '" + s + "'");
  }
  return {s.substr(0, at), s.substr(at + 1)};
}

void require_sensor(const SensorRig& rig, const std::string& name) {
  if (!rig.has(name)) throw UsageError("unknown sensor '" + name + "'");
}

SensorRig rig_for(const std::string& source) {
  if (source == "default") return default_rig();
  return load_rig(source);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
}

Method method_arg(const std::string& name) {
  try {
    return parse_method(name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

// --------------------------------------------------------------------- gen

struct GenFlags {
  std::vector<std::string> noise;
  std::vector<std::string> clutter;
  bool benchmark = false;
};

int cmd_gen(const ExperimentConfig& cfg, const GenFlags& flags, std::ostream& out) {
  const SensorRig rig = rig_for(cfg.rig);
  std::map<std::string, NoiseModel> noise = cfg.noise;
  if (flags.benchmark) noise = benchmark_noise(rig);
  for (const std::string& item : flags.noise) {
    const auto [name, value] = split_pair(item, '=');
    require_sensor(rig, name);
    const double sigma = std::stod(value);
    if (rig.sensor(name).is_lidar()) {
      noise[name].lidar_range_sigma = sigma;
    } else {
      noise[name].pixel_sigma = sigma;
    }
  }
  for (const std::string& item : flags.clutter) {
    const auto [name, value] = split_pair(item, '=');
    require_sensor(rig, name);
    if (!rig.sensor(name).is_lidar()) throw UsageError("clutter applies to LIDARs only: " + name);
    noise[name].clutter_fraction = std::stod(value);
  }
  for (auto& [name, n] : noise) {
    try {
      n.validate();
    } catch (const Error& e) {
      throw UsageError(name + ": " + e.what());
    }
  }

  const std::uint64_t seed = seed_from_env(cfg.seed);
  const Dataset ds = build_dataset(rig, cfg.poses, noise, seed);
  ensure_dir(cfg.out_dir);
  save_dataset(cfg.out_dir / "dataset.json", ds);

  out << "views " << ds.observations.size() << "  seed " << seed << "\n";
  out << "co-visibility";
  const std::vector<std::string> names = rig.names();
  for (const std::string& n : names) out << "," << n;
  out << "\n";
  for (const std::string& a : names) {
    out << a;
    for (const std::string& b : names) out << "," << ds.covisible(a, b);
    out << "\n";
  }
  return kExitOk;
}

// --------------------------------------------------------------- calibrate

std::optional<Pose> pose_from_results(const std::vector<PairCalibration>& results, const std::string& a,
                                      const std::string& b) {
  for (const PairCalibration& r : results) {
    if (r.sensor_a == a && r.sensor_b == b) return r.a_from_b;
    if (r.sensor_a == b && r.sensor_b == a) return invert(r.a_from_b);
  }
  return std::nullopt;
}

struct CalibrateFlags {
  fs::path dataset;
  std::string method;
  std::string pair;
  bool all_pairs = false;
  std::string init = "identity";
};

int cmd_calibrate(const ExperimentConfig& cfg, const CalibrateFlags& flags, std::ostream& out) {
  const Method method = method_arg(flags.method);
  if (flags.all_pairs == !flags.pair.empty()) throw UsageError("give exactly one of --pair or --all-pairs");
  const Dataset ds = load_dataset(flags.dataset.empty() ? cfg.out_dir / "dataset.json" : flags.dataset);

  std::vector<std::pair<std::string, std::string>> pairs;
  if (!flags.all_pairs) {
    const auto p = split_pair(flags.pair, ',');
    require_sensor(ds.rig, p.first);
    require_sensor(ds.rig, p.second);
    if (method != Method::kMsg && !(ds.rig.sensor(p.first).is_camera() && ds.rig.sensor(p.second).is_lidar())) {
      throw UsageError(std::string(to_string(method)) + " expects --pair camera,lidar");
    }
    pairs.push_back(p);
  } else if (method != Method::kMsg) {
    for (const std::string& c : ds.rig.cameras()) {
      for (const std::string& l : ds.rig.lidars()) pairs.emplace_back(c, l);
    }
  }

  std::vector<PairCalibration> init_results;
  const bool from_file = flags.init != "identity" && flags.init != "random";
  if (from_file) init_results = load_results(flags.init);
  SweepOptions so;
  so.seed = seed_from_env(cfg.seed);
  so.sigma_rot_deg = cfg.sigma_rot_deg;
  so.sigma_t = cfg.sigma_t;
  auto init_for = [&](const std::string& a, const std::string& b) {
    if (flags.init == "identity") return Pose::identity();
    if (flags.init == "random") return sweep_initial_pose(so, 0);
    const std::optional<Pose> p = pose_from_results(init_results, a, b);
    if (!p) throw Error(ErrorCode::kUnknownSensor, flags.init + " has no pose for " + a + "," + b);
    return *p;
  };

  CalibrationOptions options;
  std::vector<PairCalibration> results;
  if (method == Method::kMsg && flags.all_pairs) {
    const std::vector<std::string> names = ds.rig.names();
    const GlobalCalibration g = calibrate_msg_global(ds, names, options);
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t j = i + 1; j < names.size(); ++j) {
        results.push_back({names[i], names[j], Method::kMsg, g.extrinsic(names[i], names[j]), g.report,
                           ds.covisible(names[i], names[j])});
      }
    }
  } else if (method == Method::kMsg) {
    results.push_back(calibrate_msg_pairwise(ds, pairs[0].first, pairs[0].second,
                                             init_for(pairs[0].first, pairs[0].second), options));
  } else {
    const DatasetFeatures f = extract_features(ds, options.features);
    for (const auto& [a, b] : pairs) results.push_back(calibrate_pair(f, method, a, b, init_for(a, b), options));
  }

  ensure_dir(cfg.out_dir);
  save_results(cfg.out_dir / ("calib_" + std::string(to_string(method)) + ".json"), results);
  bool all_converged = true;
  for (const PairCalibration& r : results) {
    out << r.sensor_a << "," << r.sensor_b << " " << to_string(r.method) << " views " << r.views << " iterations "
        << r.report.iterations << " cost " << num(r.report.final_cost) << " "
        << (r.report.converged ? "converged" : "NOT converged") << "\n";
    all_converged = all_converged && r.report.converged;
  }
  return all_converged ? kExitOk : kExitNotConverged;
}

// -------------------------------------------------------------------- eval

struct EvalFlags {
  fs::path dataset;
  std::vector<std::string> results;
  bool json = false;
};

// Method label -> (a, b) -> a_from_b, in file order.
using ResultTable = std::vector<std::pair<std::string, std::vector<PairCalibration>>>;

const PairCalibration* find_pair(const std::vector<PairCalibration>& rs, const std::string& a, const std::string& b) {
  for (const PairCalibration& r : rs) {
    if ((r.sensor_a == a && r.sensor_b == b) || (r.sensor_a == b && r.sensor_b == a)) return &r;
  }
  return nullptr;
}

Pose oriented(const PairCalibration& r, const std::string& a) { return r.sensor_a == a ? r.a_from_b : invert(r.a_from_b); }

std::string csv_row(const std::string& head, const std::vector<std::optional<double>>& cells) {
  std::string row = head;
  for (const auto& c : cells) row += "," + (c ? num(*c) : std::string());
  return row + "\n";
}

int cmd_eval(const ExperimentConfig& cfg, const EvalFlags& flags, std::ostream& out, std::ostream& err) {
  const fs::path dataset_path = flags.dataset.empty() ? cfg.out_dir / "dataset.json" : flags.dataset;
  const Dataset ds = load_dataset(dataset_path);
  std::vector<std::string> files = flags.results;
  if (files.empty()) {
    for (const char* m : {"ppc", "pbpc", "msg"}) {
      const fs::path p = dataset_path.parent_path() / ("calib_" + std::string(m) + ".json");
      if (fs::exists(p)) files.push_back(p.string());
    }
  }
  if (files.empty()) throw UsageError("no result files given and none found next to the dataset");

  ResultTable table;
  for (const std::string& file : files) {
    std::vector<PairCalibration> rs = load_results(file);
    if (rs.empty()) continue;
    for (const PairCalibration& r : rs) {
      if (!ds.rig.has(r.sensor_a) || !ds.rig.has(r.sensor_b)) {
        throw Error(ErrorCode::kUnknownSensor, file + " references sensors missing from the dataset rig");
      }
    }
    const std::string label(to_string(rs.front().method));
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == label; });
    if (it == table.end()) {
      table.emplace_back(label, std::move(rs));
    } else {
      it->second.insert(it->second.end(), rs.begin(), rs.end());
    }
  }
  ensure_dir(cfg.out_dir);
  std::string header = "pair";
  for (const auto& [label, rs] : table) header += "," + label;
  header += "\n";
  json mirror = json::object();

  // MLRE, one row per camera/LIDAR pair.
  std::string mlre_csv = header;
  std::vector<std::vector<double>> per_method(table.size());
  for (const std::string& cam : ds.rig.cameras()) {
    for (const std::string& lid : ds.rig.lidars()) {
      std::vector<std::optional<double>> cells;
      bool any = false;
      const std::vector<MlreFrame> frames = mlre_frames(ds, cam, lid);
      for (std::size_t m = 0; m < table.size(); ++m) {
        const PairCalibration* r = find_pair(table[m].second, cam, lid);
        if (r == nullptr || frames.empty()) {
          cells.emplace_back();
          continue;
        }
        const MlreReport rep = mlre(oriented(*r, cam), ds.rig.sensor(cam).intrinsics, frames);
        cells.emplace_back(rep.mean_px);
        per_method[m].push_back(rep.mean_px);
        any = true;
        json jf = json::array();
        for (const FrameError& f : rep.frames) jf.push_back({{"observation", f.observation}, {"mean_px", f.mean_px}});
        mirror["mlre"][table[m].first][cam + "/" + lid] = {{"mean_px", rep.mean_px},
                                                          {"point_weighted_px", rep.point_weighted_px},
                                                          {"points", rep.points},
                                                          {"skipped", rep.skipped},
                                                          {"frames", std::move(jf)}};
      }
      if (any) mlre_csv += csv_row(cam + "/" + lid, cells);
    }
  }
  std::vector<std::optional<double>> stds;
  for (std::size_t m = 0; m < table.size(); ++m) {
    stds.emplace_back(per_method[m].empty() ? std::nullopt : std::optional<double>(standard_deviation(per_method[m])));
    if (stds.back()) mirror["mlre"][table[m].first]["standard_deviation"] = *stds.back();
  }
  mlre_csv += csv_row("Standard Deviation", stds);
  write_text_file(cfg.out_dir / "mlre.csv", mlre_csv);
  out << "MLRE (px)\n" << mlre_csv;

  // Factory stereo consistency.
  if (ds.rig.stereo_pairs.empty()) {
    err << "warning: rig has no stereo pair; stereo table skipped\n";
  } else {
    std::string stereo_csv = "stereo_pair,lidar,metric";
    for (const auto& [label, rs] : table) stereo_csv += "," + label;
    stereo_csv += "\n";
    for (const StereoPair& sp : ds.rig.stereo_pairs) {
      for (const std::string& lid : ds.rig.lidars()) {
        std::vector<std::optional<StereoConsistencyError>> errs;
        bool any = false;
        for (const auto& [label, rs] : table) {
          const PairCalibration* l = find_pair(rs, sp.left, lid);
          const PairCalibration* r = find_pair(rs, sp.right, lid);
          if (l == nullptr || r == nullptr) {
            errs.emplace_back();
            continue;
          }
          errs.emplace_back(stereo_consistency(oriented(*l, sp.left), oriented(*r, sp.right), sp.factory_left_from_right));
          any = true;
        }
        if (!any) continue;
        const std::string key = sp.left + "/" + sp.right;
        const char* names[] = {"alpha_deg", "beta_deg", "gamma_deg", "x_m", "y_m", "z_m"};
        for (int k = 0; k < 6; ++k) {
          std::vector<std::optional<double>> cells;
          for (std::size_t m = 0; m < errs.size(); ++m) {
            if (!errs[m]) {
              cells.emplace_back();
              continue;
            }
            const StereoConsistencyError& e = *errs[m];
            const double v[] = {e.alpha_deg, e.beta_deg, e.gamma_deg, e.x, e.y, e.z};
            cells.emplace_back(v[k]);
            mirror["stereo"][table[m].first][key + "/" + lid][names[k]] = v[k];
          }
          stereo_csv += csv_row(key + "," + lid + "," + names[k], cells);
        }
      }
    }
    write_text_file(cfg.out_dir / "stereo.csv", stereo_csv);
    out << "stereo consistency\n" << stereo_csv;
  }

  // Pose error against the simulator's ground truth.
  std::string pose_csv = "pair,metric";
  for (const auto& [label, rs] : table) pose_csv += "," + label;
  pose_csv += "\n";
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [label, rs] : table) {
    for (const PairCalibration& r : rs) {
      if (seen.count({r.sensor_b, r.sensor_a}) || !seen.insert({r.sensor_a, r.sensor_b}).second) continue;
      std::vector<std::optional<double>> rot;
      std::vector<std::optional<double>> trans;
      for (const auto& [label2, rs2] : table) {
        const PairCalibration* q = find_pair(rs2, r.sensor_a, r.sensor_b);
        if (q == nullptr) {
          rot.emplace_back();
          trans.emplace_back();
          continue;
        }
        const PoseError e = pose_error(oriented(*q, r.sensor_a), ds.rig.extrinsic(r.sensor_a, r.sensor_b));
        rot.emplace_back(e.rotation_deg);
        trans.emplace_back(e.translation_m);
        mirror["pose_error"][label2][r.sensor_a + "/" + r.sensor_b] = {{"rotation_deg", e.rotation_deg},
                                                                       {"translation_m", e.translation_m}};
      }
      const std::string key = r.sensor_a + "/" + r.sensor_b;
      pose_csv += csv_row(key + ",rotation_deg", rot);
      pose_csv += csv_row(key + ",translation_m", trans);
    }
  }
  write_text_file(cfg.out_dir / "pose_error.csv", pose_csv);
  if (flags.json) write_text_file(cfg.out_dir / "eval.json", mirror.dump(2) + "\n");
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepFlags {
  fs::path dataset;
  std::string method;
  std::string pair;
  int threads = 0;
  bool json = false;
};

int cmd_sweep(const ExperimentConfig& cfg, const SweepFlags& flags, std::ostream& out) {
  const Method method = method_arg(flags.method);
  if (cfg.trials < 1) throw UsageError("--trials must be at least 1");
  if (flags.pair.empty()) throw UsageError("--pair is required");
  const Dataset ds = load_dataset(flags.dataset.empty() ? cfg.out_dir / "dataset.json" : flags.dataset);
  const auto [a, b] = split_pair(flags.pair, ',');
  require_sensor(ds.rig, a);
  require_sensor(ds.rig, b);

  CalibrationOptions options;
  FeatureOptions fo = options.features;
  if (method == Method::kMsg) {
    const double scale = confidence_threshold_scale(ds.rig, a, b);
    for (const std::string& s : {a, b}) {
      if (ds.rig.sensor(s).is_lidar()) fo.threshold_scale[s] = scale;
    }
  }
  const DatasetFeatures f = extract_features(ds, fo, {a, b});
  SweepOptions so;
  so.trials = cfg.trials;
  so.sigma_rot_deg = cfg.sigma_rot_deg;
  so.sigma_t = cfg.sigma_t;
  so.seed = seed_from_env(cfg.seed);
  so.threads = flags.threads;
  const SweepResult res = random_init_sweep(f, method, a, b, so, options);

  std::string csv =
      "trial,init_w0,init_w1,init_w2,init_t0,init_t1,init_t2,final_w0,final_w1,final_w2,final_t0,final_t1,final_t2,"
      "final_cost,iterations,converged,cluster,failure\n";
  json trials = json::array();
  for (const SweepTrial& t : res.trials) {
    csv += std::to_string(t.index);
    for (int i = 0; i < 6; ++i) csv += "," + num(t.init(i));
    for (int i = 0; i < 6; ++i) csv += "," + num(t.final(i));
    csv += "," + num(t.final_cost) + "," + std::to_string(t.iterations) + "," + (t.converged ? "1" : "0") + "," +
           std::to_string(t.cluster) + "," + t.failure + "\n";
    trials.push_back({{"trial", t.index}, {"cluster", t.cluster}, {"converged", t.converged}, {"final_cost", t.final_cost}});
  }
  ensure_dir(cfg.out_dir);
  const std::string stem = "sweep_" + std::string(to_string(method));
  write_text_file(cfg.out_dir / (stem + ".csv"), csv);

  out << "clusters " << res.clusters.size() << "\n";
  json clusters = json::array();
  for (std::size_t c = 0; c < res.clusters.size(); ++c) {
    const Pose& p = res.clusters[c].representative;
    const PoseError e = pose_error(p, ds.rig.extrinsic(a, b));
    out << "  cluster " << c << ": " << res.clusters[c].members << " trials, error vs truth " << num(e.rotation_deg)
        << " deg / " << num(e.translation_m) << " m\n";
    clusters.push_back({{"members", res.clusters[c].members},
                        {"rotation_error_deg", e.rotation_deg},
                        {"translation_error_m", e.translation_m}});
  }
  int failed = 0;
  for (const SweepTrial& t : res.trials) failed += t.failure.empty() ? 0 : 1;
  out << "modal cluster " << res.modal_cluster << " with " << res.modal_count << "/" << cfg.trials << " trials; "
      << (cfg.trials - res.modal_count) << " outside it (" << failed << " failed)\n";
  if (flags.json) {
    json j{{"method", std::string(to_string(method))},
           {"pair", {a, b}},
           {"modal_cluster", res.modal_cluster},
           {"modal_count", res.modal_count},
           {"clusters", std::move(clusters)},
           {"trials", std::move(trials)}};
    write_text_file(cfg.out_dir / (stem + ".json"), j.dump(2) + "\n");
  }
  return kExitOk;
}

// ------------------------------------------------------------------ ablate

struct AblateFlags {
  fs::path dataset;
  std::string drop;
  bool json = false;
};

int cmd_ablate(const ExperimentConfig& cfg, const AblateFlags& flags, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_dataset(flags.dataset.empty() ? cfg.out_dir / "dataset.json" : flags.dataset);
  require_sensor(ds.rig, flags.drop);
  std::vector<std::string> all = ds.rig.names();
  std::vector<std::string> kept;
  for (const std::string& s : all) {
    if (s != flags.drop) kept.push_back(s);
  }
  bool linked = false;
  for (const std::string& s : kept) linked = linked || ds.covisible(flags.drop, s) > 0;
  if (!linked) {
    err << "warning: " << flags.drop << " shares no view with any sensor; dropping it changes nothing\n";
    all = kept;
  }
  CalibrationOptions options;
  const GlobalCalibration with = calibrate_msg_global(ds, all, options);
  const GlobalCalibration without = calibrate_msg_global(ds, kept, options);

  std::string csv = "pair,with_" + flags.drop + ",without_" + flags.drop + ",delta\n";
  json rows = json::array();
  for (const std::string& cam : ds.rig.cameras()) {
    for (const std::string& lid : ds.rig.lidars()) {
      if (cam == flags.drop || lid == flags.drop) continue;
      const std::vector<MlreFrame> frames = mlre_frames(ds, cam, lid);
      if (frames.empty()) continue;
      const CameraIntrinsics& k = ds.rig.sensor(cam).intrinsics;
      const double before = mlre(with.extrinsic(cam, lid), k, frames).mean_px;
      const double after = mlre(without.extrinsic(cam, lid), k, frames).mean_px;
      csv += cam + "/" + lid + "," + num(before) + "," + num(after) + "," + num(after - before) + "\n";
      rows.push_back({{"pair", cam + "/" + lid}, {"with", before}, {"without", after}, {"delta", after - before}});
    }
  }
  ensure_dir(cfg.out_dir);
  write_text_file(cfg.out_dir / "ablation.csv", csv);
  out << csv;
  if (flags.json) write_text_file(cfg.out_dir / "ablation.json", json{{"drop", flags.drop}, {"pairs", rows}}.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Target-based LIDAR/camera extrinsic calibration on simulated rigs", "extrinsiq"};
  app.require_subcommand(1);
  ExperimentConfig cfg;
  std::string out_dir = ".";
  auto common = [&](CLI::App* sub) { sub->add_option("-o,--out", out_dir, "Output directory"); };

  GenFlags gen;
  CLI::App* c_gen = app.add_subcommand("gen", "Simulate a dataset");
  c_gen->add_option("--rig", cfg.rig, "'default' or a rig JSON file");
  c_gen->add_option("--poses", cfg.poses, "Number of target poses")->check(CLI::Range(1, 100000));
  c_gen->add_option("--seed", cfg.seed, "RNG seed (EXTRINSIQ_SEED overrides)");
  c_gen->add_option("--noise", gen.noise, "sensor=sigma (meters for LIDARs, pixels for cameras)");
  c_gen->add_option("--clutter", gen.clutter, "lidar=fraction of off-target returns");
  c_gen->add_flag("--benchmark", gen.benchmark, "Noise of the seeded benchmark (explicit --noise wins)");
  common(c_gen);

  CalibrateFlags cal;
  CLI::App* c_cal = app.add_subcommand("calibrate", "Estimate extrinsics");
  c_cal->add_option("--dataset", cal.dataset, "Dataset JSON (default <out>/dataset.json)");
  c_cal->add_option("-m,--method", cal.method, "ppc, pbpc or msg")->required();
  c_cal->add_option("--pair", cal.pair, "a,b (camera,lidar for ppc/pbpc)");
  c_cal->add_flag("--all-pairs", cal.all_pairs, "Every camera/LIDAR pair; msg: global graph over all sensors");
  c_cal->add_option("--init", cal.init, "identity, random or a result JSON file");
  c_cal->add_option("--seed", cfg.seed, "Seed for --init random");
  common(c_cal);

  EvalFlags ev;
  CLI::App* c_eval = app.add_subcommand("eval", "MLRE, stereo consistency and pose error tables");
  c_eval->add_option("--dataset", ev.dataset, "Dataset JSON (default <out>/dataset.json)");
  c_eval->add_option("--results", ev.results, "Result JSON files (default calib_*.json beside the dataset)");
  c_eval->add_flag("--json", ev.json, "Also write eval.json");
  common(c_eval);

  SweepFlags sw;
  CLI::App* c_sweep = app.add_subcommand("sweep", "Random-initialisation sweep");
  c_sweep->add_option("--dataset", sw.dataset, "Dataset JSON (default <out>/dataset.json)");
  c_sweep->add_option("-m,--method", sw.method, "ppc, pbpc or msg")->required();
  c_sweep->add_option("--pair", sw.pair, "a,b")->required();
  c_sweep->add_option("--trials", cfg.trials, "Number of trials");
  c_sweep->add_option("--sigma-rot", cfg.sigma_rot_deg, "Rotation sigma, degrees");
  c_sweep->add_option("--sigma-t", cfg.sigma_t, "Translation sigma, meters");
  c_sweep->add_option("--seed", cfg.seed, "RNG seed (EXTRINSIQ_SEED overrides)");
  c_sweep->add_option("--threads", sw.threads, "Worker threads (0: all cores)");
  c_sweep->add_flag("--json", sw.json, "Also write sweep_<method>.json");
  common(c_sweep);

  AblateFlags ab;
  CLI::App* c_ab = app.add_subcommand("ablate", "Global MSG with and without one sensor");
  c_ab->add_option("--dataset", ab.dataset, "Dataset JSON (default <out>/dataset.json)");
  c_ab->add_option("--drop", ab.drop, "Sensor to remove")->required();
  c_ab->add_flag("--json", ab.json, "Also write ablation.json");
  common(c_ab);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }
  cfg.out_dir = out_dir;

  try {
    if (c_gen->parsed()) return cmd_gen(cfg, gen, out);
    if (c_cal->parsed()) return cmd_calibrate(cfg, cal, out);
    if (c_eval->parsed()) return cmd_eval(cfg, ev, out, err);
    if (c_sweep->parsed()) return cmd_sweep(cfg, sw, out);
    if (c_ab->parsed()) return cmd_ablate(cfg, ab, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::logic_error& e) {
    err << "error: bad number (" << e.what() << ")\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace extrinsiq
