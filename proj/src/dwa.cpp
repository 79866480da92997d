#include "crowdnav/dwa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace crowdnav {

VelocityCmd DwaPlanner::plan(const LaserScan& scan, double current_v,
                             double current_w,
                             const WorldPoint& goal_in_robot) const {
  // Scan points as obstacles in the robot frame.
  std::vector<WorldPoint> obstacles;
  obstacles.reserve(scan.ranges.size());
  for (size_t i = 0; i < scan.ranges.size(); ++i) {
    const double r = scan.ranges[i];
    if (r <= 1e-6 || r >= scan.max_range - 1e-6) continue;
    const double a = i * scan.angle_increment;
    obstacles.push_back({r * std::cos(a), r * std::sin(a)});
  }

  const double dtw = params_.sim_dt;  // window spans one control period
  const double v_lo = std::clamp(current_v - params_.accel_v * dtw, 0.0, params_.v_max);
  const double v_hi = std::clamp(current_v + params_.accel_v * dtw, 0.0, params_.v_max);
  const double w_lo = std::clamp(current_w - params_.accel_w * dtw, -params_.w_max, params_.w_max);
  const double w_hi = std::clamp(current_w + params_.accel_w * dtw, -params_.w_max, params_.w_max);

  const double collision_dist = params_.robot_radius + params_.safety_margin;
  const double goal_bearing = std::atan2(goal_in_robot.y, goal_in_robot.x);

  double best_score = -std::numeric_limits<double>::infinity();
  VelocityCmd best{-1.0, 0.0};

  for (int vi = 0; vi < params_.v_samples; ++vi) {
    const double v = params_.v_samples == 1
                         ? v_lo
                         : v_lo + (v_hi - v_lo) * vi / (params_.v_samples - 1);
    for (int wi = 0; wi < params_.w_samples; ++wi) {
      const double w = params_.w_samples == 1
                           ? w_lo
                           : w_lo + (w_hi - w_lo) * wi / (params_.w_samples - 1);

      // forward-simulate in the robot frame
      Pose p{0.0, 0.0, 0.0};
      double min_clear = std::numeric_limits<double>::infinity();
      bool collides = false;
      const int steps = static_cast<int>(params_.horizon / params_.sim_dt);
      for (int s = 0; s < steps && !collides; ++s) {
        p = integrate_unicycle(p, v, w, params_.sim_dt);
        for (const auto& ob : obstacles) {
          const double d = std::hypot(ob.x - p.x, ob.y - p.y);
          min_clear = std::min(min_clear, d);
          if (d < collision_dist) {
            collides = true;
            break;
          }
        }
      }
      if (collides) continue;  // inadmissible

      // heading term: how well the end pose points at the goal
      const double end_bearing =
          std::atan2(goal_in_robot.y - p.y, goal_in_robot.x - p.x);
      const double align = M_PI - std::abs(wrap_angle(end_bearing - p.theta));
      const double clearance =
          std::min(std::isfinite(min_clear) ? min_clear : params_.clearance_cap,
                   params_.clearance_cap);
      const double score = params_.heading_weight * align / M_PI +
                           params_.clearance_weight * clearance / params_.clearance_cap +
                           params_.velocity_weight * v / params_.v_max;
      if (score > best_score) {
        best_score = score;
        best = {v, w};
      }
    }
  }

  if (best.v < 0.0) {
    // all trajectories collide: stop and rotate in place toward the goal
    return {0.0, goal_bearing >= 0.0 ? 0.5 * params_.w_max : -0.5 * params_.w_max};
  }
  return best;
}

}  // namespace crowdnav
