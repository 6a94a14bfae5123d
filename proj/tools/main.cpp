// Command line front end: simulate, build-maps, join, eval, oracle,
// complexity, convert. Exit codes: 0 ok, 2 usage, 3 unreadable input,
// 4 numeric failure, 5 maps not joinable.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mapjoin/build.hpp"
#include "mapjoin/complexity.hpp"
#include "mapjoin/errors.hpp"
#include "mapjoin/io.hpp"
#include "mapjoin/marginalize.hpp"
#include "mapjoin/metrics.hpp"
#include "mapjoin/oracle.hpp"
#include "mapjoin/sim.hpp"
#include "mapjoin/strategy.hpp"
#include "mapjoin/transform.hpp"

namespace fs = std::filesystem;
using namespace mapjoin;

namespace {

std::string fmtd(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Expands positional map arguments: directories become their sorted *.lmap
/// contents.
std::vector<std::string> expand_map_paths(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (const auto& a : args) {
    if (fs::is_directory(a)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().extension() == ".lmap") {
          found.push_back(e.path().string());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(a);
    }
  }
  if (out.empty()) {
    throw InvalidInputError("no map files given");
  }
  return out;
}

std::vector<LocalMap> load_maps(const std::vector<std::string>& args) {
  std::vector<LocalMap> maps;
  for (const auto& p : expand_map_paths(args)) {
    maps.push_back(read_map_file(p));
  }
  return maps;
}

struct SimulateArgs {
  std::string out_dir;
  std::string config_file;
  int dim = 0;  // 0 = unset
  std::string trajectory;
  int poses = -1;
  double density = -1;
  double range = -1;
  double step = -1;
  double odom_trans_sigma = -1;
  double odom_rot_sigma = -1;
  double obs_sigma = -1;
  double noise_scale = -1;
  long long seed = -1;
  int chunk_size = -1;
  bool translation_only = false;
};

ScenarioConfig resolve_scenario(const SimulateArgs& a) {
  ScenarioConfig cfg;
  // config file first, then flags override
  if (!a.config_file.empty()) {
    std::ifstream in(a.config_file);
    if (!in) {
      throw InvalidInputError("cannot open config " + a.config_file);
    }
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (line.empty() || line[0] == '#') {
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ParseError(a.config_file, ln, "expected key=value");
      }
      const std::string key = line.substr(0, eq);
      const std::string val = line.substr(eq + 1);
      try {
        if (key == "dim") {
          cfg.dim = std::stoi(val) == 3 ? Dimension::D3 : Dimension::D2;
        } else if (key == "trajectory") {
          cfg.trajectory = val == "grid"     ? ScenarioConfig::Trajectory::Grid
                           : val == "sphere" ? ScenarioConfig::Trajectory::SphereLike
                                             : ScenarioConfig::Trajectory::Loop;
        } else if (key == "poses") {
          cfg.pose_count = std::stoi(val);
        } else if (key == "density") {
          cfg.feature_density = std::stod(val);
        } else if (key == "range") {
          cfg.sensor_range = std::stod(val);
        } else if (key == "step") {
          cfg.step_length = std::stod(val);
        } else if (key == "odom_trans_sigma") {
          cfg.odom_trans_sigma = std::stod(val);
        } else if (key == "odom_rot_sigma") {
          cfg.odom_rot_sigma = std::stod(val);
        } else if (key == "obs_sigma") {
          cfg.obs_sigma = std::stod(val);
        } else if (key == "noise_scale") {
          cfg.noise_scale = std::stod(val);
        } else if (key == "seed") {
          cfg.seed = std::stoull(val);
        } else if (key == "chunk_size") {
          cfg.chunk_size = std::stoi(val);
        } else if (key == "translation_only") {
          cfg.translation_only = val == "1" || val == "true";
        } else {
          throw ParseError(a.config_file, ln, "unknown key '" + key + "'");
        }
      } catch (const std::invalid_argument&) {
        throw ParseError(a.config_file, ln, "bad value for '" + key + "'");
      }
    }
  }
  if (a.dim != 0) {
    cfg.dim = a.dim == 3 ? Dimension::D3 : Dimension::D2;
  }
  if (!a.trajectory.empty()) {
    cfg.trajectory = a.trajectory == "grid"     ? ScenarioConfig::Trajectory::Grid
                     : a.trajectory == "sphere" ? ScenarioConfig::Trajectory::SphereLike
                                                : ScenarioConfig::Trajectory::Loop;
  }
  if (a.poses > 0) cfg.pose_count = a.poses;
  if (a.density > 0) cfg.feature_density = a.density;
  if (a.range > 0) cfg.sensor_range = a.range;
  if (a.step > 0) cfg.step_length = a.step;
  if (a.odom_trans_sigma > 0) cfg.odom_trans_sigma = a.odom_trans_sigma;
  if (a.odom_rot_sigma > 0) cfg.odom_rot_sigma = a.odom_rot_sigma;
  if (a.obs_sigma > 0) cfg.obs_sigma = a.obs_sigma;
  if (a.noise_scale >= 0) cfg.noise_scale = a.noise_scale;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (a.chunk_size > 0) cfg.chunk_size = a.chunk_size;
  if (a.translation_only) cfg.translation_only = true;
  return cfg;
}

int cmd_simulate(const SimulateArgs& a) {
  const ScenarioConfig cfg = resolve_scenario(a);
  const Scenario sc = generate(cfg);
  fs::create_directories(a.out_dir);

  write_pose_graph(graph_from_truth(sc.truth, sc.dim, sc.translation_only),
                   (fs::path(a.out_dir) / "truth.g2o").string());
  for (std::size_t c = 0; c < sc.chunks.size(); ++c) {
    char name[32];
    std::snprintf(name, sizeof(name), "chunk_%03zu.g2o", c);
    write_pose_graph(graph_from_raw(sc.chunks[c]), (fs::path(a.out_dir) / name).string());
  }
  {
    std::ofstream out(fs::path(a.out_dir) / "scenario.txt");
    out << "dim=" << (cfg.dim == Dimension::D2 ? 2 : 3) << "\n"
        << "trajectory="
        << (cfg.trajectory == ScenarioConfig::Trajectory::Grid         ? "grid"
            : cfg.trajectory == ScenarioConfig::Trajectory::SphereLike ? "sphere"
                                                                       : "loop")
        << "\n"
        << "poses=" << cfg.pose_count << "\n"
        << "density=" << fmtd(cfg.feature_density) << "\n"
        << "range=" << fmtd(cfg.sensor_range) << "\n"
        << "step=" << fmtd(cfg.step_length) << "\n"
        << "odom_trans_sigma=" << fmtd(cfg.odom_trans_sigma) << "\n"
        << "odom_rot_sigma=" << fmtd(cfg.odom_rot_sigma) << "\n"
        << "obs_sigma=" << fmtd(cfg.obs_sigma) << "\n"
        << "noise_scale=" << fmtd(cfg.noise_scale) << "\n"
        << "seed=" << cfg.seed << "\n"
        << "chunk_size=" << cfg.chunk_size << "\n"
        << "translation_only=" << (cfg.translation_only ? 1 : 0) << "\n";
  }
  for (const auto& w : sc.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  std::cout << "wrote " << sc.chunks.size() << " chunks and truth to " << a.out_dir << "\n";
  return 0;
}

int cmd_build_maps(const std::vector<std::string>& chunks, const std::string& out_dir,
                   const std::string& frame_mode, const GaussNewtonConfig& gn) {
  fs::create_directories(out_dir);
  for (const auto& path : chunks) {
    const PoseGraph g = read_pose_graph(path);
    for (const auto& w : g.warnings) {
      std::cerr << "warning: " << path << ": " << w << "\n";
    }
    const RawLocalData raw = raw_from_graph(g);
    const int frame_pose = frame_mode == "end" ? raw.pose_ids.back() : raw.pose_ids.front();
    const BuildResult res = build_local_map(raw, PoseFrame{frame_pose}, gn);
    if (!res.converged) {
      std::cerr << "warning: " << path << ": not converged after " << res.iterations
                << " iterations\n";
    }
    const fs::path out = fs::path(out_dir) / (fs::path(path).stem().string() + ".lmap");
    write_map_file(res.map, out.string());
    std::cout << "built " << out.string() << ": " << res.map.estimate.size() << " entries, "
              << res.iterations << " iterations, objective " << fmtd(res.objective) << "\n";
  }
  return 0;
}

int cmd_join(const std::vector<std::string>& map_args, const std::string& strategy, int threads,
             const std::string& out_file, bool json) {
  const auto t_load0 = std::chrono::steady_clock::now();
  const std::vector<LocalMap> maps = load_maps(map_args);
  const double load_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_load0).count();

  JoinTimings t;
  const LocalMap global = strategy == "seq" ? join_sequential(maps, &t)
                                            : join_divide_conquer(maps, threads, &t);
  const double chi = chi2(global, maps);

  if (!out_file.empty()) {
    write_map_file(global, out_file);
  }
  if (json) {
    std::cout << "{\"maps\": " << maps.size() << ", \"joins\": " << t.joins
              << ", \"load_seconds\": " << fmtd(load_s)
              << ", \"join_seconds\": " << fmtd(t.join_seconds) << ", \"chi2\": " << fmtd(chi)
              << ", \"state_dim\": " << global.state_dim() << "}\n";
  } else {
    std::cout << "maps " << maps.size() << "\n"
              << "joins " << t.joins << "\n"
              << "load_seconds " << fmtd(load_s) << "\n"
              << "join_seconds " << fmtd(t.join_seconds) << "\n"
              << "chi2 " << fmtd(chi) << "\n"
              << "state_dim " << global.state_dim() << "\n";
    if (!out_file.empty()) {
      std::cout << "wrote " << out_file << "\n";
    }
  }
  return 0;
}

int cmd_eval(const std::string& solution_file, const std::vector<std::string>& map_args,
             const std::string& truth_file, const std::string& reference_file, bool want_chi2,
             bool want_rmse, bool want_nees, bool json, const std::string& plot_csv) {
  const LocalMap solution = read_map_file(solution_file);
  const bool all = !want_chi2 && !want_rmse && !want_nees;

  MetricReport rep;
  if ((want_chi2 || all) && !map_args.empty()) {
    rep.chi2 = chi2(solution, load_maps(map_args));
  } else if (want_chi2 && map_args.empty()) {
    std::cerr << "error: --chi2 needs --maps\n";
    return 2;
  }

  LocalMap reference;
  bool have_reference = false;
  if (!reference_file.empty()) {
    reference = read_map_file(reference_file);
    have_reference = true;
  } else if (!truth_file.empty()) {
    const PoseGraph tg = read_pose_graph(truth_file);
    reference = truth_as_map(truth_from_graph(tg), tg.dim, tg.translation_only);
    have_reference = true;
  }

  if ((want_rmse || all) && have_reference) {
    const RmseResult r = rmse(solution, reference, default_alignment_frame(solution, reference));
    rep.rmse_abs_pose = r.abs_pose;
    rep.rmse_abs_feature = r.abs_feature;
    rep.rmse_rel_pose = r.rel_pose;
    rep.rmse_rel_rot = r.rel_rot;
  } else if (want_rmse && !have_reference) {
    std::cerr << "error: --rmse needs --truth or --reference\n";
    return 2;
  }

  if ((want_nees || all) && !truth_file.empty()) {
    const PoseGraph tg = read_pose_graph(truth_file);
    const LocalMap truth_map = truth_as_map(truth_from_graph(tg), tg.dim, tg.translation_only);
    const LocalMap aligned = reframe_map(solution, truth_map.frame);
    const LocalMap feat = marginalize_poses(aligned);
    rep.nees = nees(feat.estimate, feat.info, truth_map.estimate);
    rep.dims = feat.estimate.dim();
    rep.nees_bound_95 = chi2_quantile(0.95, rep.dims);
  } else if (want_nees && truth_file.empty()) {
    std::cerr << "error: --nees needs --truth\n";
    return 2;
  }

  if (!plot_csv.empty()) {
    write_plot_data(solution, plot_csv);
  }
  std::cout << (json ? metric_report_json(rep) + "\n" : metric_report_text(rep));
  return 0;
}

int cmd_oracle(const std::vector<std::string>& map_args, const std::string& mode,
               const std::string& out_file, bool json) {
  const std::vector<LocalMap> maps = load_maps(map_args);
  OracleReport rep;
  if (mode == "join") {
    if (maps.size() != 2) {
      std::cerr << "error: --mode join needs exactly two maps\n";
      return 2;
    }
    auto [a, b] = prepare_pair(maps[0], maps[1]);
    const LocalMap lin = join_two_maps(a, b);
    rep = nonlinear_join(a, b, lin.estimate, lin.frame);
  } else {
    const LocalMap init = join_divide_conquer(maps);
    rep = full_nonlinear_ls(maps, init);
  }
  if (!out_file.empty()) {
    write_map_file(rep.solution, out_file);
  }
  if (json) {
    std::cout << "{\"chi2\": " << fmtd(rep.final_objective)
              << ", \"iterations\": " << rep.iterations
              << ", \"converged\": " << (rep.converged ? "true" : "false") << "}\n";
  } else {
    std::cout << "chi2 " << fmtd(rep.final_objective) << "\n"
              << "iterations " << rep.iterations << "\n"
              << "converged " << (rep.converged ? 1 : 0) << "\n";
  }
  return rep.converged ? 0 : 4;
}

int cmd_complexity(double og, double sg, int m, const std::vector<int>& ns, bool json) {
  bool first = true;
  for (int n : ns) {
    ComplexityParams p;
    p.total_observations = og;
    p.total_state_size = sg;
    p.iterations = m;
    p.map_count = n;
    const ComplexityRatios r = complexity_model(p);
    auto val = [](double v) {
      char buf[32];
      if (v >= 1e-3) {
        std::snprintf(buf, sizeof(buf), "%.4f", v);
      } else {
        std::snprintf(buf, sizeof(buf), "%.4e", v);
      }
      return std::string(buf);
    };
    if (json) {
      std::cout << (first ? "[" : ",\n") << "{\"n\": " << n << ", \"local_build\": "
                << val(r.local_build) << ", \"seq_join\": " << val(r.seq_join)
                << ", \"seq_total\": " << val(r.seq_total) << ", \"dc_join\": " << val(r.dc_join)
                << ", \"dc_total\": " << val(r.dc_total) << ", \"nl_seq_join\": "
                << val(r.nl_seq_join) << ", \"nl_seq_total\": " << val(r.nl_seq_total)
                << ", \"nl_dc_join\": " << val(r.nl_dc_join) << ", \"nl_dc_total\": "
                << val(r.nl_dc_total) << "}";
      first = false;
    } else {
      std::cout << "n " << n << "\n"
                << "local_build " << val(r.local_build) << "\n"
                << "seq_join " << val(r.seq_join) << "\n"
                << "seq_total " << val(r.seq_total) << "\n"
                << "dc_join " << val(r.dc_join) << "\n"
                << "dc_total " << val(r.dc_total) << "\n"
                << "nl_seq_join " << val(r.nl_seq_join) << "\n"
                << "nl_seq_total " << val(r.nl_seq_total) << "\n"
                << "nl_dc_join " << val(r.nl_dc_join) << "\n"
                << "nl_dc_total " << val(r.nl_dc_total) << "\n";
    }
  }
  if (json) {
    std::cout << "]\n";
  }
  return 0;
}

int cmd_convert(const std::string& graph_file, int chunk_size, const std::string& out_dir,
                bool build, const std::string& frame_mode, const GaussNewtonConfig& gn) {
  const PoseGraph g = read_pose_graph(graph_file);
  for (const auto& w : g.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  const std::vector<RawLocalData> chunks = partition_pose_graph(g, chunk_size);
  fs::create_directories(out_dir);
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    char name[32];
    std::snprintf(name, sizeof(name), "chunk_%03zu.g2o", c);
    PoseGraph cg = graph_from_raw(chunks[c]);
    write_pose_graph(cg, (fs::path(out_dir) / name).string());
    if (build) {
      const int frame_pose =
          frame_mode == "end" ? chunks[c].pose_ids.back() : chunks[c].pose_ids.front();
      const BuildResult res = build_local_map(chunks[c], PoseFrame{frame_pose}, gn);
      char mname[32];
      std::snprintf(mname, sizeof(mname), "chunk_%03zu.lmap", c);
      write_map_file(res.map, (fs::path(out_dir) / mname).string());
    }
  }
  std::cout << "wrote " << chunks.size() << " chunks to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Submap joining toolkit: linear least-squares map fusion"};
  app.require_subcommand(1);

  // simulate
  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim_cmd->add_option("--out", sim_args.out_dir, "Output directory")->required();
  sim_cmd->add_option("--config", sim_args.config_file, "key=value config file (flags win)");
  sim_cmd->add_option("--dim", sim_args.dim, "2 or 3")->check(CLI::IsMember({0, 2, 3}));
  sim_cmd->add_option("--trajectory", sim_args.trajectory, "loop|grid|sphere")
      ->check(CLI::IsMember({"", "loop", "grid", "sphere"}));
  sim_cmd->add_option("--poses", sim_args.poses, "Pose count");
  sim_cmd->add_option("--density", sim_args.density, "Features per unit area/volume");
  sim_cmd->add_option("--range", sim_args.range, "Sensor range (m)");
  sim_cmd->add_option("--step", sim_args.step, "Step length (m)");
  sim_cmd->add_option("--odom-trans-sigma", sim_args.odom_trans_sigma, "Odometry sigma (m)");
  sim_cmd->add_option("--odom-rot-sigma", sim_args.odom_rot_sigma, "Odometry sigma (rad)");
  sim_cmd->add_option("--obs-sigma", sim_args.obs_sigma, "Observation sigma (m)");
  sim_cmd->add_option("--noise-scale", sim_args.noise_scale, "Noise multiplier (0 = exact)");
  sim_cmd->add_option("--seed", sim_args.seed, "RNG seed");
  sim_cmd->add_option("--chunk-size", sim_args.chunk_size, "New poses per chunk");
  sim_cmd->add_flag("--translation-only", sim_args.translation_only,
                    "Known headings, linear models");

  // build-maps
  std::vector<std::string> build_inputs;
  std::string build_out;
  std::string build_frame = "start";
  GaussNewtonConfig gn;
  auto* build_cmd = app.add_subcommand("build-maps", "Optimize raw chunks into local maps");
  build_cmd->add_option("chunks", build_inputs, "Chunk files (.g2o)")->required();
  build_cmd->add_option("--out", build_out, "Output directory")->required();
  build_cmd->add_option("--frame", build_frame, "start|end pose frame")
      ->check(CLI::IsMember({"start", "end"}));
  build_cmd->add_option("--max-iters", gn.max_iters, "Gauss-Newton iteration cap");
  build_cmd->add_option("--rel-tol", gn.rel_tol, "Relative objective decrease tolerance");
  build_cmd->add_option("--step-tol", gn.step_tol, "Step tolerance");

  // join
  std::vector<std::string> join_inputs;
  std::string join_strategy = "dc";
  std::string join_out;
  int join_threads = 1;
  bool join_json = false;
  auto* join_cmd = app.add_subcommand("join", "Fuse local maps into a global map");
  join_cmd->add_option("maps", join_inputs, "Map files or directories (.lmap)")->required();
  join_cmd->add_option("--strategy", join_strategy, "seq|dc")
      ->check(CLI::IsMember({"seq", "dc"}));
  join_cmd->add_option("--threads", join_threads, "Worker threads for dc")->check(CLI::Range(1, 256));
  join_cmd->add_option("--out", join_out, "Write the joined map here");
  join_cmd->add_flag("--json", join_json, "Machine-readable output");

  // eval
  std::string eval_solution, eval_truth, eval_reference, eval_plot;
  std::vector<std::string> eval_maps;
  bool eval_chi2 = false, eval_rmse = false, eval_nees = false, eval_json = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a solution map");
  eval_cmd->add_option("--solution", eval_solution, "Solution map (.lmap)")->required();
  eval_cmd->add_option("--maps", eval_maps, "Local maps for the chi-square");
  eval_cmd->add_option("--truth", eval_truth, "Ground-truth vertices file (.g2o)");
  eval_cmd->add_option("--reference", eval_reference, "Reference map (.lmap)");
  eval_cmd->add_flag("--chi2", eval_chi2, "Report the chi-square");
  eval_cmd->add_flag("--rmse", eval_rmse, "Report RMSE against truth/reference");
  eval_cmd->add_flag("--nees", eval_nees, "Report feature NEES against truth");
  eval_cmd->add_flag("--json", eval_json, "Machine-readable output");
  eval_cmd->add_option("--plot-csv", eval_plot, "Also write plot data CSV");

  // oracle
  std::vector<std::string> oracle_inputs;
  std::string oracle_mode = "full";
  std::string oracle_out;
  bool oracle_json = false;
  auto* oracle_cmd = app.add_subcommand("oracle", "Reference nonlinear solver");
  oracle_cmd->add_option("maps", oracle_inputs, "Map files or directories")->required();
  oracle_cmd->add_option("--mode", oracle_mode, "join|full")
      ->check(CLI::IsMember({"join", "full"}));
  oracle_cmd->add_option("--out", oracle_out, "Write the solution here");
  oracle_cmd->add_flag("--json", oracle_json, "Machine-readable output");

  // complexity
  double cx_og = 0, cx_sg = 0;
  int cx_m = 1;
  std::vector<int> cx_n;
  bool cx_json = false;
  auto* cx_cmd = app.add_subcommand("complexity", "Evaluate the cost model");
  cx_cmd->add_option("--og", cx_og, "Total observation count")->required();
  cx_cmd->add_option("--sg", cx_sg, "Total state entity count")->required();
  cx_cmd->add_option("--m", cx_m, "Solver iteration count")->required();
  cx_cmd->add_option("--n", cx_n, "Local map counts")->required();
  cx_cmd->add_flag("--json", cx_json, "Machine-readable output");

  // convert
  std::string cv_graph, cv_out;
  int cv_chunk = 10;
  bool cv_build = false;
  std::string cv_frame = "start";
  GaussNewtonConfig cv_gn;
  auto* cv_cmd = app.add_subcommand("convert", "Partition a pose graph into chunks");
  cv_cmd->add_option("--graph", cv_graph, "Pose graph file")->required();
  cv_cmd->add_option("--chunk-size", cv_chunk, "New poses per chunk")->required();
  cv_cmd->add_option("--out", cv_out, "Output directory")->required();
  cv_cmd->add_flag("--build", cv_build, "Also build .lmap files");
  cv_cmd->add_option("--frame", cv_frame, "start|end pose frame for --build")
      ->check(CLI::IsMember({"start", "end"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim_cmd->parsed()) {
      return cmd_simulate(sim_args);
    }
    if (build_cmd->parsed()) {
      return cmd_build_maps(build_inputs, build_out, build_frame, gn);
    }
    if (join_cmd->parsed()) {
      return cmd_join(join_inputs, join_strategy, join_threads, join_out, join_json);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_solution, eval_maps, eval_truth, eval_reference, eval_chi2, eval_rmse,
                      eval_nees, eval_json, eval_plot);
    }
    if (oracle_cmd->parsed()) {
      return cmd_oracle(oracle_inputs, oracle_mode, oracle_out, oracle_json);
    }
    if (cx_cmd->parsed()) {
      return cmd_complexity(cx_og, cx_sg, cx_m, cx_n, cx_json);
    }
    if (cv_cmd->parsed()) {
      return cmd_convert(cv_graph, cv_chunk, cv_out, cv_build, cv_frame, cv_gn);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const MissingEntityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NotJoinableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const FrameMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const Error& e) {
    // numeric failures: singular systems, degenerate frames and rotations
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
