#include "crowdnav/scenario.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace crowdnav {

namespace {

std::string resolve_relative(const std::string& base_file,
                             const std::string& path) {
  if (path.empty() || path[0] == '/') return path;
  const auto slash = base_file.find_last_of('/');
  if (slash == std::string::npos) return path;
  return base_file.substr(0, slash + 1) + path;
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("malformed scenario file " + path + ": " + e.what());
  }

  Scenario s;
  s.name = j.value("name", std::string("unnamed"));
  s.map_path = resolve_relative(path, j.at("map").get<std::string>());
  if (j.contains("recovery_points"))
    s.recovery_points_path =
        resolve_relative(path, j["recovery_points"].get<std::string>());

  const auto& robot = j.at("robot");
  const auto start = robot.at("start");
  s.robot_start = {start[0], start[1], start.size() > 2 ? double(start[2]) : 0.0};
  const auto goal = robot.at("goal");
  s.goal = {goal[0], goal[1]};
  s.robot_radius = robot.value("radius", s.robot_radius);
  s.world.v_max = robot.value("v_max", s.world.v_max);
  s.world.w_max = robot.value("w_max", s.world.w_max);

  if (j.contains("pedestrians")) {
    const auto& peds = j["pedestrians"];
    s.ped_count = peds.value("count", 0);
    s.ped_radius = peds.value("radius", s.ped_radius);
    if (peds.contains("speed_range")) {
      s.ped_speed_min = peds["speed_range"][0];
      s.ped_speed_max = peds["speed_range"][1];
    }
    for (const auto& r : peds.value("routes", nlohmann::json::array())) {
      PedRoute route;
      route.loop = r.value("loop", false);
      for (const auto& wp : r.at("waypoints"))
        route.waypoints.push_back({wp[0], wp[1]});
      if (route.waypoints.size() < 2)
        throw std::runtime_error("scenario route needs at least 2 waypoints");
      s.routes.push_back(route);
      if (r.contains("spawn_zone")) {
        const auto& z = r["spawn_zone"];
        s.spawn_zones.push_back({z[0], z[1], z[2], z[3]});
      } else {
        s.spawn_zones.push_back({route.waypoints[0].x - 1.0,
                                 route.waypoints[0].y - 1.0,
                                 route.waypoints[0].x + 1.0,
                                 route.waypoints[0].y + 1.0});
      }
    }
  }

  if (j.contains("noise")) {
    const auto& noise = j["noise"];
    if (noise.contains("odom_alpha")) {
      for (int i = 0; i < 4; ++i) s.world.odom_alpha[i] = noise["odom_alpha"][i];
    }
    s.world.scan_sigma = noise.value("scan_sigma", s.world.scan_sigma);
  }
  if (j.contains("thresholds")) {
    const auto& th = j["thresholds"];
    s.thresholds.d_lost = th.value("d_lost", s.thresholds.d_lost);
    s.thresholds.dt_lost = th.value("dt_lost", s.thresholds.dt_lost);
    s.thresholds.v_frozen = th.value("v_frozen", s.thresholds.v_frozen);
    s.thresholds.dt_frozen = th.value("dt_frozen", s.thresholds.dt_frozen);
    s.thresholds.r_arrive = th.value("r_arrive", s.thresholds.r_arrive);
  }
  s.timeout = j.value("timeout", s.timeout);
  s.mcl_spread_init = j.value("mcl_spread_init", s.mcl_spread_init);
  s.free_area_m2 = j.value("free_area_m2", 0.0);
  s.density_note = j.value("density_note", std::string());
  return s;
}

ScenarioAssets ScenarioAssets::load(const std::string& path) {
  ScenarioAssets assets;
  assets.scenario = load_scenario(path);
  assets.grid = load_map(assets.scenario.map_path);
  assets.clearance = distance_transform(assets.grid);
  return assets;
}

void spawn_crowd(World& world, const Scenario& scenario, Rng& rng) {
  world.routes = scenario.routes;
  world.pedestrians.clear();
  if (scenario.routes.empty() || scenario.ped_count == 0) return;

  for (int i = 0; i < scenario.ped_count; ++i) {
    const int route_idx = i % static_cast<int>(scenario.routes.size());
    const auto& zone = scenario.spawn_zones[route_idx];
    Pedestrian ped;
    ped.route = route_idx;
    ped.radius = scenario.ped_radius;
    ped.preferred_speed = rng.uniform(scenario.ped_speed_min, scenario.ped_speed_max);

    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      ped.position = {rng.uniform(zone[0], zone[2]), rng.uniform(zone[1], zone[3])};
      int ix, iy;
      if (!world.grid->world_to_grid(ped.position, ix, iy) ||
          world.grid->blocked(ix, iy))
        continue;
      if (world.clearance->at(ix, iy) < ped.radius) continue;
      if (std::hypot(ped.position.x - world.robot.pose.x,
                     ped.position.y - world.robot.pose.y) < 1.5)
        continue;
      placed = true;
    }
    if (!placed) ped.position = scenario.routes[route_idx].waypoints[0];

    // head toward the nearest route waypoint first
    const auto& wps = scenario.routes[route_idx].waypoints;
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < wps.size(); ++k) {
      const double d = distance(wps[k], ped.position);
      if (d < best) {
        best = d;
        nearest = static_cast<int>(k);
      }
    }
    ped.waypoint_index = nearest;
    ped.direction = nearest + 1 < static_cast<int>(wps.size()) ? 1 : -1;
    world.pedestrians.push_back(ped);
  }
}

}  // namespace crowdnav
