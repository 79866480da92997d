#include "crowdnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crowdnav {

Pose integrate_unicycle(const Pose& pose, double v, double w, double dt) {
  Pose out = pose;
  if (std::abs(w) < 1e-12) {
    out.x += v * std::cos(pose.theta) * dt;
    out.y += v * std::sin(pose.theta) * dt;
  } else {
    const double r = v / w;
    out.x += r * (std::sin(pose.theta + w * dt) - std::sin(pose.theta));
    out.y += r * (std::cos(pose.theta) - std::cos(pose.theta + w * dt));
  }
  out.theta = wrap_angle(pose.theta + w * dt);
  return out;
}

World::World(const OccupancyGrid* grid_, const ClearanceField* clearance_,
             WorldParams params_, uint64_t seed)
    : grid(grid_), clearance(clearance_), params(params_), rng(seed) {}

void World::step(const VelocityCmd& cmd, double dt) {
  if (!std::isfinite(cmd.v) || !std::isfinite(cmd.w))
    throw std::runtime_error("world step: non-finite velocity command");
  if (dt <= 0.0) throw std::runtime_error("world step: dt must be positive");

  const double v = std::clamp(cmd.v, 0.0, params.v_max);
  const double w = std::clamp(cmd.w, -params.w_max, params.w_max);

  robot.pose = integrate_unicycle(robot.pose, v, w, dt);
  robot.v = v;
  robot.w = w;

  advance_pedestrians(dt);
  resolve_overlaps();

  // Dead-reckoned odometry: the commanded motion corrupted by noise that
  // scales with the motion magnitude, integrated with the same arc model.
  const double dtrans = std::abs(v) * dt;
  const double drot = std::abs(w) * dt;
  const double trans_std = params.odom_alpha[0] * dtrans + params.odom_alpha[1] * drot;
  const double rot_std = params.odom_alpha[2] * drot + params.odom_alpha[3] * dtrans;
  double noisy_trans = v * dt;
  double noisy_rot = w * dt;
  if (trans_std > 0.0) noisy_trans += rng.normal() * trans_std;
  if (rot_std > 0.0) noisy_rot += rng.normal() * rot_std;
  odom_pose = integrate_unicycle(odom_pose, noisy_trans / dt, noisy_rot / dt, dt);

  clock += dt;
}

void World::advance_pedestrians(double dt) {
  // Two-phase update from a common snapshot keeps the dynamics symmetric.
  std::vector<NeighborBody> bodies;
  bodies.reserve(pedestrians.size() + 1);
  for (const auto& p : pedestrians) bodies.push_back({p.position, p.radius});
  bodies.push_back({{robot.pose.x, robot.pose.y}, robot.radius});

  std::vector<Pedestrian> next;
  next.reserve(pedestrians.size());
  for (size_t i = 0; i < pedestrians.size(); ++i) {
    std::vector<NeighborBody> neighbors;
    neighbors.reserve(bodies.size() - 1);
    for (size_t j = 0; j < bodies.size(); ++j)
      if (j != i) neighbors.push_back(bodies[j]);
    next.push_back(social_force_step(pedestrians[i], neighbors, routes, *grid,
                                     *clearance, params, dt));
  }
  pedestrians = std::move(next);
}

Pedestrian social_force_step(const Pedestrian& ped,
                             const std::vector<NeighborBody>& neighbors,
                             const std::vector<PedRoute>& routes,
                             const OccupancyGrid& grid,
                             const ClearanceField& clearance,
                             const WorldParams& params, double dt) {
  if (dt <= 0.0) throw std::runtime_error("social_force_step: dt must be positive");
  Pedestrian out = ped;

  double ax = 0.0, ay = 0.0;

  // Goal attraction with relaxation toward preferred speed.
  if (ped.route >= 0 && ped.route < static_cast<int>(routes.size()) &&
      !routes[ped.route].waypoints.empty()) {
    const auto& wp = routes[ped.route].waypoints[ped.waypoint_index];
    const double dx = wp.x - ped.position.x, dy = wp.y - ped.position.y;
    const double d = std::hypot(dx, dy);
    double des_vx = 0.0, des_vy = 0.0;
    if (d > 1e-9) {
      des_vx = ped.preferred_speed * dx / d;
      des_vy = ped.preferred_speed * dy / d;
    }
    ax += (des_vx - ped.vx) / params.sf_tau;
    ay += (des_vy - ped.vy) / params.sf_tau;
  } else {
    ax += (0.0 - ped.vx) / params.sf_tau;
    ay += (0.0 - ped.vy) / params.sf_tau;
  }

  // Pairwise exponential repulsion.
  for (const auto& nb : neighbors) {
    const double dx = ped.position.x - nb.position.x;
    const double dy = ped.position.y - nb.position.y;
    const double d = std::hypot(dx, dy);
    if (d < 1e-9) continue;
    const double mag = params.sf_repulse_gain *
                       std::exp((ped.radius + nb.radius - d) / params.sf_repulse_range);
    ax += mag * dx / d;
    ay += mag * dy / d;
  }

  // Obstacle repulsion along the clearance-field gradient.
  int ix, iy;
  if (grid.world_to_grid(ped.position, ix, iy)) {
    const double d_obs = clearance.at(ix, iy);
    const int xm = std::max(ix - 1, 0), xp = std::min(ix + 1, grid.width - 1);
    const int ym = std::max(iy - 1, 0), yp = std::min(iy + 1, grid.height - 1);
    double gx = clearance.at(xp, iy) - clearance.at(xm, iy);
    double gy = clearance.at(ix, yp) - clearance.at(ix, ym);
    const double gn = std::hypot(gx, gy);
    if (gn > 1e-9) {
      const double mag = params.sf_repulse_gain *
                         std::exp((ped.radius - d_obs) / params.sf_repulse_range);
      ax += mag * gx / gn;
      ay += mag * gy / gn;
    }
  }

  out.vx = ped.vx + ax * dt;
  out.vy = ped.vy + ay * dt;
  const double speed = std::hypot(out.vx, out.vy);
  const double cap = params.sf_speed_cap * ped.preferred_speed;
  if (speed > cap && speed > 0.0) {
    out.vx *= cap / speed;
    out.vy *= cap / speed;
  }
  out.position.x = ped.position.x + out.vx * dt;
  out.position.y = ped.position.y + out.vy * dt;

  // Waypoint bookkeeping: loop wraps around, ping-pong reverses at the ends.
  if (ped.route >= 0 && ped.route < static_cast<int>(routes.size())) {
    const auto& route = routes[ped.route];
    const int n = static_cast<int>(route.waypoints.size());
    if (n > 0 &&
        distance(out.position, route.waypoints[out.waypoint_index]) <
            params.sf_capture_radius) {
      if (route.loop) {
        out.waypoint_index = (out.waypoint_index + 1) % n;
      } else {
        int next = out.waypoint_index + out.direction;
        if (next < 0 || next >= n) {
          out.direction = -out.direction;
          next = out.waypoint_index + out.direction;
        }
        out.waypoint_index = std::clamp(next, 0, n - 1);
      }
    }
  }
  return out;
}

void World::resolve_overlaps() {
  // Minimal-translation separation; pedestrians split ped-ped overlap evenly,
  // the robot pushes pedestrians, walls push everyone.
  const size_t n = pedestrians.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      auto& a = pedestrians[i];
      auto& b = pedestrians[j];
      const double dx = b.position.x - a.position.x;
      const double dy = b.position.y - a.position.y;
      const double d = std::hypot(dx, dy);
      const double overlap = a.radius + b.radius - d;
      if (overlap <= 0.0 || d < 1e-9) continue;
      const double ux = dx / d, uy = dy / d;
      a.position.x -= 0.5 * overlap * ux;
      a.position.y -= 0.5 * overlap * uy;
      b.position.x += 0.5 * overlap * ux;
      b.position.y += 0.5 * overlap * uy;
    }
  }
  for (auto& p : pedestrians) {
    const double dx = p.position.x - robot.pose.x;
    const double dy = p.position.y - robot.pose.y;
    const double d = std::hypot(dx, dy);
    const double overlap = p.radius + robot.radius - d;
    if (overlap > 0.0 && d > 1e-9) {
      p.position.x += overlap * dx / d;
      p.position.y += overlap * dy / d;
    }
  }
  // Keep the robot out of walls so episodes stay alive; the contact is still
  // reported by check_collision before separation next tick.
  const int window = static_cast<int>(std::ceil(robot.radius / grid->resolution)) + 1;
  const double d_wall = static_distance({robot.pose.x, robot.pose.y}, window);
  if (d_wall < robot.radius) {
    int ix, iy;
    if (grid->world_to_grid({robot.pose.x, robot.pose.y}, ix, iy)) {
      const int xm = std::max(ix - 1, 0), xp = std::min(ix + 1, grid->width - 1);
      const int ym = std::max(iy - 1, 0), yp = std::min(iy + 1, grid->height - 1);
      double gx = clearance->at(xp, iy) - clearance->at(xm, iy);
      double gy = clearance->at(ix, yp) - clearance->at(ix, ym);
      const double gn = std::hypot(gx, gy);
      if (gn > 1e-9) {
        robot.pose.x += (robot.radius - d_wall) * gx / gn;
        robot.pose.y += (robot.radius - d_wall) * gy / gn;
      }
    }
  }
}

double World::static_distance(const WorldPoint& p, int window_cells) const {
  int cx, cy;
  grid->world_to_grid(p, cx, cy);
  const double res = grid->resolution;
  double best = std::numeric_limits<double>::infinity();
  for (int iy = cy - window_cells; iy <= cy + window_cells; ++iy) {
    for (int ix = cx - window_cells; ix <= cx + window_cells; ++ix) {
      if (!grid->in_bounds(ix, iy) || !grid->blocked(ix, iy)) continue;
      // distance from p to the cell's rectangular region
      const double x0 = grid->origin.x + ix * res, x1 = x0 + res;
      const double y0 = grid->origin.y + iy * res, y1 = y0 + res;
      const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
      const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
      best = std::min(best, std::hypot(dx, dy));
    }
  }
  return best;
}

namespace {

// Nearest positive intersection of a ray with a circle, or +inf.
double ray_circle(double ox, double oy, double dx, double dy,
                  const WorldPoint& center, double radius) {
  const double mx = ox - center.x, my = oy - center.y;
  const double b = mx * dx + my * dy;
  const double c = mx * mx + my * my - radius * radius;
  if (c <= 0.0) return 0.0;  // origin inside the body
  const double disc = b * b - c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double t = -b - std::sqrt(disc);
  return t >= 0.0 ? t : std::numeric_limits<double>::infinity();
}

}  // namespace

LaserScan World::cast_scan(const Pose& pose, double noise_sigma) {
  LaserScan scan;
  scan.max_range = params.scan_max_range;
  scan.timestamp = clock;
  scan.ranges.resize(kScanBeams);
  for (int i = 0; i < kScanBeams; ++i) {
    const double angle = pose.theta + i * scan.angle_increment;
    double r = raycast_grid(*grid, pose.x, pose.y, angle, scan.max_range);
    const double dx = std::cos(angle), dy = std::sin(angle);
    for (const auto& ped : pedestrians) {
      const double t = ray_circle(pose.x, pose.y, dx, dy, ped.position, ped.radius);
      if (t < r) r = t;
    }
    if (noise_sigma > 0.0) r += rng.normal() * noise_sigma;
    scan.ranges[i] = std::clamp(r, 0.0, scan.max_range);
  }
  return scan;
}

CollisionReport World::check_collision() const {
  for (size_t i = 0; i < pedestrians.size(); ++i) {
    const auto& p = pedestrians[i];
    const double d = std::hypot(p.position.x - robot.pose.x,
                                p.position.y - robot.pose.y);
    if (d < p.radius + robot.radius)
      return {CollisionKind::Pedestrian, static_cast<int>(i)};
  }
  const int window = static_cast<int>(std::ceil(robot.radius / grid->resolution)) + 1;
  if (static_distance({robot.pose.x, robot.pose.y}, window) < robot.radius)
    return {CollisionKind::Static, -1};
  return {};
}

}  // namespace crowdnav
