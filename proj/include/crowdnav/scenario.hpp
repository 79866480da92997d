#pragma once

#include <memory>
#include <string>
#include <vector>

#include "crowdnav/grid_map.hpp"
#include "crowdnav/metrics.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

/// A benchmark scenario: map, crowd layout, robot task, noise, and limits.
/// Loaded from a JSON file; paths are resolved relative to the file.
struct Scenario {
  std::string name;
  std::string map_path;
  std::string recovery_points_path;  // optional; required for rl2 runs
  Pose robot_start;
  WorldPoint goal;
  double robot_radius = 0.17;
  int ped_count = 0;
  double ped_radius = 0.3;
  double ped_speed_min = 0.6;
  double ped_speed_max = 1.4;
  std::vector<PedRoute> routes;
  std::vector<std::array<double, 4>> spawn_zones;  // x0,y0,x1,y1 per route
  WorldParams world;
  MetricThresholds thresholds;
  double timeout = 180.0;
  double mcl_spread_init = 0.3;

  // informational: free area and the density note required by the fixtures
  double free_area_m2 = 0.0;
  std::string density_note;
};

Scenario load_scenario(const std::string& path);

/// Owns the immutable per-map data shared by all episodes of a scenario.
struct ScenarioAssets {
  Scenario scenario;
  OccupancyGrid grid;
  ClearanceField clearance;

  static ScenarioAssets load(const std::string& path);
};

/// Deterministically populate a world with the scenario's crowd for a seed.
void spawn_crowd(World& world, const Scenario& scenario, Rng& rng);

}  // namespace crowdnav
