#include "cli.hpp"

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "droneview/cost_map.hpp"
#include "droneview/drone_sim.hpp"
#include "droneview/scene_io.hpp"
#include "droneview/server.hpp"
#include "droneview/session.hpp"

namespace droneview {

namespace {

Vec3 parse_bounds(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--noise", "not a number: '" + item + "'");
    }
  }
  if (v.size() != 3) throw CLI::ValidationError("--noise", "expected three comma-separated values bx,by,bz");
  return {v[0], v[1], v[2]};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

struct RunArgs {
  std::string scene, script, out;
  std::uint64_t seed{0};
};

int cmd_run(const RunArgs& a, std::ostream& out) {
  auto cfg = SessionConfig::for_scene(load_scene(a.scene));
  cfg.seed = a.seed;
  const auto script = load_script(a.script);
  auto log = open_out(a.out);
  const auto r = run_episode(cfg, script, &log);
  auto j = r.summary.to_json();
  j["scene_digest"] = r.scene_digest;
  j["seed"] = a.seed;
  out << j.dump() << '\n';
  return 0;
}

struct CostmapArgs {
  std::string scene, out;
  std::optional<double> z;
  double res{0.05};
};

int cmd_costmap(const CostmapArgs& a, std::ostream& out) {
  const auto file = load_scene(a.scene);
  GridSpec grid{file.workspace.min, file.workspace.max, a.res};
  if (a.z) {
    if (*a.z < grid.min.z() || *a.z > grid.max.z()) throw std::invalid_argument("--z lies outside the workspace");
    grid.min.z() = grid.max.z() = *a.z;
  }
  const auto map = export_cost_map(file.initial_snapshot(), file.constants, grid);
  auto f = open_out(a.out);
  write_cost_map(map, f);
  const auto basins = find_basins(map);
  out << nlohmann::json{{"cells", map.values.size()},
                        {"dims", map.dims},
                        {"basins", basins.count},
                        {"basin_threshold", basins.threshold}}
                .dump()
      << '\n';
  return 0;
}

struct CharacterizeArgs {
  std::string noise{"0.05,0.05,0.02"};
  double duration{120.0};
  std::uint64_t seed{0};
};

int cmd_characterize(const CharacterizeArgs& a, std::ostream& out) {
  DisturbanceParams dist{parse_bounds(a.noise)};
  dist.validate();
  const DroneState hover{0.0, 0.0, 1.0, 0.0};
  const auto log = record_tracking([&](double) { return hover; }, a.duration, dist, a.seed);
  const auto u = characterize_uncertainty(log);
  nlohmann::json ratio = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) ratio.push_back(dist.bound[i] > 0.0 ? nlohmann::json(u.dp[i] / dist.bound[i]) : nlohmann::json(nullptr));
  out << nlohmann::json{{"injected", {dist.bound.x(), dist.bound.y(), dist.bound.z()}},
                        {"measured", {u.dp.x(), u.dp.y(), u.dp.z()}},
                        {"ratio", ratio},
                        {"samples", log.size()}}
                .dump()
      << '\n';
  return 0;
}

struct ServeArgs {
  std::string scene, address{"127.0.0.1"};
  std::uint16_t port{8765};
  std::uint64_t seed{0};
  double speed{1.0};
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  auto cfg = SessionConfig::for_scene(load_scene(a.scene));
  cfg.seed = a.seed;
  cfg.log_ticks = false;
  ServerOptions opts;
  opts.address = a.address;
  opts.port = a.port;
  opts.realtime_factor = a.speed;
  opts.handle_signals = true;
  Server server(cfg, opts);
  out << "listening on ws://" << a.address << ':' << server.port() << std::endl;
  server.run();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Drone viewpoint planning for teleoperated manipulation"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scripted episode and write its event log");
  run_cmd->add_option("--scene", run.scene, "Scene file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--script", run.script, "Episode script")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", run.seed, "Random seed");
  run_cmd->add_option("--out", run.out, "Event log (NDJSON)")->required();

  CostmapArgs cm;
  auto* cm_cmd = app.add_subcommand("costmap", "Export the view cost over the workspace");
  cm_cmd->add_option("--scene", cm.scene, "Scene file")->required()->check(CLI::ExistingFile);
  cm_cmd->add_option("--z", cm.z, "Export a single layer at this height (m)");
  cm_cmd->add_option("--res", cm.res, "Grid resolution (m)")->check(CLI::PositiveNumber);
  cm_cmd->add_option("--out", cm.out, "Cost map file")->required();

  CharacterizeArgs ch;
  auto* ch_cmd = app.add_subcommand("characterize", "Measure tracking deviation under injected disturbance");
  ch_cmd->add_option("--noise", ch.noise, "Disturbance bounds bx,by,bz (m)");
  ch_cmd->add_option("--duration", ch.duration, "Simulated hover time (s)")->check(CLI::PositiveNumber);
  ch_cmd->add_option("--seed", ch.seed, "Random seed");

  ServeArgs sv;
  auto* sv_cmd = app.add_subcommand("serve", "Interactive WebSocket session");
  sv_cmd->add_option("--scene", sv.scene, "Scene file")->required()->check(CLI::ExistingFile);
  sv_cmd->add_option("--port", sv.port, "TCP port (0 picks one)");
  sv_cmd->add_option("--address", sv.address, "Bind address");
  sv_cmd->add_option("--seed", sv.seed, "Random seed");
  sv_cmd->add_option("--speed", sv.speed, "Simulated seconds per wall second")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return cmd_run(run, out);
    if (*cm_cmd) return cmd_costmap(cm, out);
    if (*ch_cmd) return cmd_characterize(ch, out);
    if (*sv_cmd) return cmd_serve(sv, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace droneview
