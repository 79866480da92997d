#pragma once

#include <vector>

#include "crowdnav/geometry.hpp"
#include "crowdnav/grid_map.hpp"
#include "crowdnav/rng.hpp"

namespace crowdnav {

struct VelocityCmd {
  double v = 0.0;  // forward speed, m/s
  double w = 0.0;  // angular speed, rad/s
};

struct RobotState {
  Pose pose;
  double v = 0.0;
  double w = 0.0;
  double radius = 0.17;
};

struct PedRoute {
  std::vector<WorldPoint> waypoints;
  bool loop = true;  // loop the cycle; false = ping-pong back and forth
};

struct Pedestrian {
  WorldPoint position;
  double vx = 0.0;
  double vy = 0.0;
  double radius = 0.3;
  double preferred_speed = 1.0;
  int route = -1;
  int waypoint_index = 0;
  int direction = 1;  // ping-pong travel direction
};

struct LaserScan {
  std::vector<double> ranges;  // 360 beams, meters
  double angle_increment = deg2rad(1.0);
  double max_range = 6.0;
  double timestamp = 0.0;
};

constexpr int kScanBeams = 360;

/// Social-force crowd parameters plus robot limits and noise coefficients.
struct WorldParams {
  double v_max = 1.0;
  double w_max = M_PI / 2.0;
  double scan_sigma = 0.05;
  double scan_max_range = 6.0;
  // odometry drift: trans std = a1*|dtrans| + a2*|drot|, rot std = a3*|drot| + a4*|dtrans|
  double odom_alpha[4] = {0.05, 0.01, 0.05, 0.01};
  // social force
  double sf_tau = 0.5;            // relaxation time, s
  double sf_repulse_gain = 2.0;   // A, m/s^2
  double sf_repulse_range = 0.35; // B, m
  double sf_speed_cap = 1.3;      // cap factor on preferred speed
  double sf_capture_radius = 0.5; // waypoint advance radius, m
};

enum class CollisionKind { None, Pedestrian, Static };

struct CollisionReport {
  CollisionKind kind = CollisionKind::None;
  int pedestrian = -1;
};

/// Deterministic 2D world: unicycle robot, social-force pedestrians, LiDAR,
/// drifting odometry. Owns exactly one seeded RNG; identical seed and command
/// sequence give identical state sequences.
class World {
 public:
  World(const OccupancyGrid* grid, const ClearanceField* clearance,
        WorldParams params, uint64_t seed);

  /// Advance the world by dt under the given velocity command.
  void step(const VelocityCmd& cmd, double dt);

  /// 360-beam scan from `pose` including pedestrian bodies, with additive
  /// Gaussian range noise (sigma); ranges clamped to [0, max_range].
  LaserScan cast_scan(const Pose& pose, double noise_sigma);
  LaserScan cast_scan() { return cast_scan(robot.pose, params.scan_sigma); }

  Pose read_odometry() const { return odom_pose; }

  CollisionReport check_collision() const;

  /// Distance from a point to the nearest Occupied/Unknown cell region (not
  /// cell centers), scanning a window of +-window_cells around the point.
  double static_distance(const WorldPoint& p, int window_cells) const;

  RobotState robot;
  std::vector<Pedestrian> pedestrians;
  std::vector<PedRoute> routes;
  const OccupancyGrid* grid = nullptr;
  const ClearanceField* clearance = nullptr;
  double clock = 0.0;
  Pose odom_pose;
  WorldParams params;
  Rng rng;

 private:
  void advance_pedestrians(double dt);
  void resolve_overlaps();
};

/// One social-force step for a single pedestrian against a fixed snapshot of
/// its neighbors (positions + radii) and the static map.
struct NeighborBody {
  WorldPoint position;
  double radius;
};
Pedestrian social_force_step(const Pedestrian& ped,
                             const std::vector<NeighborBody>& neighbors,
                             const std::vector<PedRoute>& routes,
                             const OccupancyGrid& grid,
                             const ClearanceField& clearance,
                             const WorldParams& params, double dt);

/// Exact-arc unicycle integration (straight line when w == 0).
Pose integrate_unicycle(const Pose& pose, double v, double w, double dt);

}  // namespace crowdnav
