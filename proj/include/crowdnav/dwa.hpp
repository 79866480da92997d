#pragma once

#include "crowdnav/geometry.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

struct DwaParams {
  double v_max = 1.0;
  double w_max = M_PI / 2.0;
  double accel_v = 1.0;   // m/s^2
  double accel_w = 3.0;   // rad/s^2
  int v_samples = 7;
  int w_samples = 15;
  double horizon = 1.5;   // s
  double sim_dt = 0.1;
  double robot_radius = 0.17;
  double safety_margin = 0.05;
  double heading_weight = 1.0;
  double clearance_weight = 0.4;
  double velocity_weight = 0.6;
  double clearance_cap = 1.0;  // m, clearance beyond this scores flat
};

/// Classic dynamic-window local planner scored against the current scan.
/// When every sampled trajectory collides, it stops and turns in place
/// toward the goal (the conservative behavior that freezes in dense crowds).
class DwaPlanner {
 public:
  explicit DwaPlanner(DwaParams params = {}) : params_(params) {}

  /// goal is in the robot frame; scan beams start at the robot heading.
  VelocityCmd plan(const LaserScan& scan, double current_v, double current_w,
                   const WorldPoint& goal_in_robot) const;

 private:
  DwaParams params_;
};

}  // namespace crowdnav
