#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "crowdnav/trainer.hpp"
#include "crowdnav/world.hpp"

using namespace crowdnav;

namespace {

struct Fixture {
  OccupancyGrid grid;
  ClearanceField clearance;
  Fixture(double w = 10.0, double h = 10.0, double wall = 0.5) {
    grid = build_room_grid(w, h, 0.05, wall);
    clearance = distance_transform(grid);
  }
  World world(uint64_t seed, WorldParams params = {}) {
    return World(&grid, &clearance, params, seed);
  }
};

// 10^4-substep Euler integration of the unicycle
Pose euler_oracle(const Pose& start, double v, double w, double dt) {
  Pose p = start;
  const int n = 10000;
  const double h = dt / n;
  for (int i = 0; i < n; ++i) {
    p.x += v * std::cos(p.theta) * h;
    p.y += v * std::sin(p.theta) * h;
    p.theta += w * h;
  }
  p.theta = wrap_angle(p.theta);
  return p;
}

// 1 mm ray-marching oracle against cell regions
double raymarch_oracle(const OccupancyGrid& g, double x, double y, double angle,
                       double max_range) {
  const double step = 0.001;
  const double dx = std::cos(angle) * step, dy = std::sin(angle) * step;
  double cx = x, cy = y;
  for (double r = 0.0; r < max_range; r += step) {
    int ix, iy;
    if (!g.world_to_grid({cx, cy}, ix, iy)) return max_range;
    if (g.blocked(ix, iy)) return r;
    cx += dx;
    cy += dy;
  }
  return max_range;
}

// exact slab-test oracle: first ray intersection over all blocked cell
// rectangles. Adjudicates the marching oracle's sub-millimeter corner clips.
double slab_oracle(const OccupancyGrid& g, double x, double y, double angle,
                   double max_range) {
  const double dx = std::cos(angle), dy = std::sin(angle);
  double best = max_range;
  const double res = g.resolution;
  for (int iy = 0; iy < g.height; ++iy)
    for (int ix = 0; ix < g.width; ++ix) {
      if (!g.blocked(ix, iy)) continue;
      const double x0 = g.origin.x + ix * res, x1 = x0 + res;
      const double y0 = g.origin.y + iy * res, y1 = y0 + res;
      double t0 = 0.0, t1 = best;
      if (std::abs(dx) < 1e-15) {
        if (x < x0 || x > x1) continue;
      } else {
        double ta = (x0 - x) / dx, tb = (x1 - x) / dx;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
      if (std::abs(dy) < 1e-15) {
        if (y < y0 || y > y1) continue;
      } else {
        double ta = (y0 - y) / dy, tb = (y1 - y) / dy;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
      if (t0 <= t1) best = std::min(best, t0);
    }
  return best;
}

uint64_t hash_world(const World& w) {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&](double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    h = (h ^ bits) * 1099511628211ULL;
  };
  mix(w.robot.pose.x);
  mix(w.robot.pose.y);
  mix(w.robot.pose.theta);
  mix(w.odom_pose.x);
  mix(w.odom_pose.y);
  mix(w.odom_pose.theta);
  for (const auto& p : w.pedestrians) {
    mix(p.position.x);
    mix(p.position.y);
    mix(p.vx);
    mix(p.vy);
  }
  return h;
}

}  // namespace

TEST_CASE("step: straight drive advances x by v*dt") {
  Fixture f;
  WorldParams params;
  for (double& a : params.odom_alpha) a = 0.0;
  World w = f.world(1, params);
  w.robot.pose = {3.0, 3.0, 0.0};
  w.step({1.0, 0.0}, 1.0);
  CHECK(w.robot.pose.x == doctest::Approx(4.0));
  CHECK(w.robot.pose.y == doctest::Approx(3.0));
  CHECK(w.clock == doctest::Approx(1.0));
}

TEST_CASE("step: pure rotation leaves position unchanged") {
  Fixture f;
  World w = f.world(1);
  w.robot.pose = {3.0, 3.0, 0.0};
  w.step({0.0, M_PI / 2.0}, 1.0);
  CHECK(w.robot.pose.x == doctest::Approx(3.0));
  CHECK(w.robot.pose.y == doctest::Approx(3.0));
  CHECK(w.robot.pose.theta == doctest::Approx(M_PI / 2.0));
}

TEST_CASE("step: arc motion matches the fine-step Euler oracle") {
  Fixture f;
  World w = f.world(1);
  w.robot.pose = {4.0, 4.0, 0.3};
  const Pose oracle = euler_oracle(w.robot.pose, 1.0, M_PI / 2.0, 1.0);
  w.step({1.0, M_PI / 2.0}, 1.0);
  CHECK(std::abs(w.robot.pose.x - oracle.x) < 1e-3);
  CHECK(std::abs(w.robot.pose.y - oracle.y) < 1e-3);
  // chord check from the exact arc: displacement (2/pi, 2/pi) at heading 0
  World w2 = f.world(2);
  w2.robot.pose = {4.0, 4.0, 0.0};
  w2.step({1.0, M_PI / 2.0}, 1.0);
  CHECK(w2.robot.pose.x - 4.0 == doctest::Approx(2.0 / M_PI));
  CHECK(w2.robot.pose.y - 4.0 == doctest::Approx(2.0 / M_PI));
}

TEST_CASE("step: non-finite command is rejected") {
  Fixture f;
  World w = f.world(1);
  w.robot.pose = {5.0, 5.0, 0.0};
  CHECK_THROWS(w.step({std::nan(""), 0.0}, 0.1));
}

TEST_CASE("social force: pedestrian at preferred speed has ~zero acceleration") {
  Fixture f;
  WorldParams params;
  PedRoute route;
  route.waypoints = {{2.0, 5.0}, {8.0, 5.0}};
  Pedestrian ped;
  ped.route = 0;
  ped.waypoint_index = 1;
  ped.position = {4.0, 5.0};
  ped.preferred_speed = 1.0;
  ped.vx = 1.0;
  ped.vy = 0.0;
  const Pedestrian out = social_force_step(ped, {}, {route}, f.grid,
                                           f.clearance, params, 0.1);
  CHECK(out.vx == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(out.vy) < 1e-6);
}

TEST_CASE("social force: relaxation from rest reaches most of preferred speed") {
  Fixture f(20.0, 20.0);
  WorldParams params;  // tau = 0.5
  PedRoute route;
  route.waypoints = {{2.0, 10.0}, {18.0, 10.0}};
  Pedestrian ped;
  ped.route = 0;
  ped.waypoint_index = 1;
  ped.position = {4.0, 10.0};
  ped.preferred_speed = 1.2;
  // integrate tau seconds; discrete relaxation leaves (1-dt/tau)^5 = 0.33
  for (int i = 0; i < 5; ++i)
    ped = social_force_step(ped, {}, {route}, f.grid, f.clearance, params, 0.1);
  const double speed = std::hypot(ped.vx, ped.vy);
  CHECK(std::abs(speed - ped.preferred_speed) < 0.4 * ped.preferred_speed);
}

TEST_CASE("social force: head-on encounter is mirror symmetric") {
  Fixture f(20.0, 20.0);
  WorldParams params;
  World w = f.world(3, params);
  w.robot.pose = {10.0, 2.0, 0.0};  // on the mirror axis, stationary
  w.routes.push_back({{{4.0, 10.0}, {16.0, 10.0}}, false});
  w.routes.push_back({{{16.0, 10.0}, {4.0, 10.0}}, false});
  // cell-center start positions keep the grid lookups mirror symmetric
  Pedestrian a, b;
  a.route = 0;
  a.waypoint_index = 1;
  a.position = {6.025, 10.0};
  a.preferred_speed = 1.0;
  b.route = 1;
  b.waypoint_index = 1;
  b.position = {13.975, 10.0};
  b.preferred_speed = 1.0;
  w.pedestrians = {a, b};
  for (int i = 0; i < 60; ++i) {
    w.step({0.0, 0.0}, 0.1);
    const auto& pa = w.pedestrians[0];
    const auto& pb = w.pedestrians[1];
    CHECK(pa.position.x - 6.025 ==
          doctest::Approx(13.975 - pb.position.x).epsilon(1e-9));
    CHECK(pa.position.y == doctest::Approx(pb.position.y).epsilon(1e-9));
  }
}

TEST_CASE("pedestrians never teleport") {
  Fixture f;
  WorldParams params;
  World w = f.world(17, params);
  w.robot.pose = {5.0, 5.0, 0.0};
  Rng rng(99);
  w.routes.push_back({{{1.5, 1.5}, {8.5, 8.5}}, false});
  w.routes.push_back({{{8.5, 1.5}, {1.5, 8.5}}, true});
  for (int i = 0; i < 12; ++i) {
    Pedestrian p;
    p.route = i % 2;
    p.position = {rng.uniform(1.5, 8.5), rng.uniform(1.5, 8.5)};
    p.preferred_speed = rng.uniform(0.6, 1.4);
    w.pedestrians.push_back(p);
  }
  const double dt = 0.1;
  for (int step = 0; step < 300; ++step) {
    std::vector<WorldPoint> before;
    for (const auto& p : w.pedestrians) before.push_back(p.position);
    w.step({0.3, 0.1}, dt);
    for (size_t i = 0; i < w.pedestrians.size(); ++i) {
      const double moved = distance(before[i], w.pedestrians[i].position);
      const double bound = 1.3 * w.pedestrians[i].preferred_speed * dt +
                           w.pedestrians[i].radius;
      CHECK(moved <= bound + 1e-9);
    }
  }
}

TEST_CASE("cast_scan: centered square room geometry") {
  // 7m x 7m footprint with 0.5 m walls leaves a 6x6 free interior
  OccupancyGrid grid = build_room_grid(7.0, 7.0, 0.05, 0.5);
  ClearanceField clearance = distance_transform(grid);
  WorldParams params;
  params.scan_sigma = 0.0;
  World w(&grid, &clearance, params, 1);
  w.robot.pose = {3.5, 3.5, 0.0};
  const LaserScan scan = w.cast_scan();
  REQUIRE(scan.ranges.size() == 360);
  CHECK(scan.ranges[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(scan.ranges[90] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(scan.ranges[180] == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("cast_scan: pedestrian circle intersection") {
  Fixture f;
  WorldParams params;
  params.scan_sigma = 0.0;
  World w = f.world(1, params);
  w.robot.pose = {3.0, 5.0, 0.0};
  Pedestrian ped;
  ped.position = {5.0, 5.0};
  ped.radius = 0.3;
  w.pedestrians.push_back(ped);
  const LaserScan scan = w.cast_scan();
  CHECK(scan.ranges[0] == doctest::Approx(1.7).epsilon(1e-9));
}

TEST_CASE("cast_scan matches the 1mm ray-march oracle on random scenes") {
  Rng rng(31);
  int rays = 0;
  for (int scene = 0; scene < 5; ++scene) {
    OccupancyGrid grid = build_room_grid(8.0, 8.0, 0.05, 0.4);
    for (int i = 0; i < 40; ++i) {
      const int ix = rng.uniform_int(10, grid.width - 11);
      const int iy = rng.uniform_int(10, grid.height - 11);
      grid.at(ix, iy) = Cell::Occupied;
    }
    ClearanceField clearance = distance_transform(grid);
    WorldParams params;
    params.scan_sigma = 0.0;
    World w(&grid, &clearance, params, scene);
    for (int trial = 0; trial < 6; ++trial) {
      Pose pose{rng.uniform(1.0, 7.0), rng.uniform(1.0, 7.0),
                rng.uniform(-M_PI, M_PI)};
      int ix, iy;
      if (!grid.world_to_grid({pose.x, pose.y}, ix, iy) || grid.blocked(ix, iy))
        continue;
      const LaserScan scan = w.cast_scan(pose, 0.0);
      for (int b = 0; b < 360; ++b) {
        const double angle = pose.theta + b * scan.angle_increment;
        const double march = raymarch_oracle(grid, pose.x, pose.y, angle, 6.0);
        if (std::abs(scan.ranges[b] - march) > 1.5 * grid.resolution) {
          // the fixed-step march skips occupied slivers thinner than its
          // step; the exact slab oracle must then confirm the traversal
          const double exact = slab_oracle(grid, pose.x, pose.y, angle, 6.0);
          CHECK(std::abs(scan.ranges[b] - exact) <= 1e-6);
          CHECK(march > exact);  // the march overshot a clip, not the DDA
        }
        ++rays;
      }
    }
  }
  CHECK(rays >= 10000);
}

TEST_CASE("cast_scan matches the exact slab oracle everywhere") {
  Rng rng(77);
  OccupancyGrid grid = build_room_grid(8.0, 8.0, 0.05, 0.4);
  for (int i = 0; i < 30; ++i)
    grid.at(rng.uniform_int(10, grid.width - 11),
            rng.uniform_int(10, grid.height - 11)) = Cell::Occupied;
  ClearanceField clearance = distance_transform(grid);
  WorldParams params;
  params.scan_sigma = 0.0;
  World w(&grid, &clearance, params, 1);
  for (int trial = 0; trial < 4; ++trial) {
    Pose pose{rng.uniform(1.0, 7.0), rng.uniform(1.0, 7.0),
              rng.uniform(-M_PI, M_PI)};
    int ix, iy;
    if (!grid.world_to_grid({pose.x, pose.y}, ix, iy) || grid.blocked(ix, iy))
      continue;
    const LaserScan scan = w.cast_scan(pose, 0.0);
    for (int b = 0; b < 360; b += 3) {
      const double angle = pose.theta + b * scan.angle_increment;
      const double exact = slab_oracle(grid, pose.x, pose.y, angle, 6.0);
      CHECK(scan.ranges[b] == doctest::Approx(exact).epsilon(1e-9));
    }
  }
}

TEST_CASE("odometry: zero noise equals ground truth on random commands") {
  Fixture f;
  WorldParams params;
  for (double& a : params.odom_alpha) a = 0.0;
  World w = f.world(5, params);
  w.robot.pose = {5.0, 5.0, 0.7};
  w.odom_pose = w.robot.pose;
  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    w.step({rng.uniform(0.0, 0.4), rng.uniform(-1.5, 1.5)}, 0.1);
    CHECK(w.odom_pose.x == doctest::Approx(w.robot.pose.x).epsilon(1e-12));
    CHECK(w.odom_pose.y == doctest::Approx(w.robot.pose.y).epsilon(1e-12));
    CHECK(w.odom_pose.theta ==
          doctest::Approx(w.robot.pose.theta).epsilon(1e-12));
  }
}

TEST_CASE("odometry: stationary robot accumulates no drift") {
  Fixture f;
  World w = f.world(5);
  w.robot.pose = {5.0, 5.0, 0.0};
  w.odom_pose = w.robot.pose;
  for (int i = 0; i < 100; ++i) w.step({0.0, 0.0}, 0.1);
  CHECK(w.odom_pose.x == doctest::Approx(5.0));
  CHECK(w.odom_pose.y == doctest::Approx(5.0));
  CHECK(w.odom_pose.theta == doctest::Approx(0.0));
}

TEST_CASE("odometry: drift grows with distance, no single-step jumps") {
  OccupancyGrid grid = build_room_grid(14.0, 4.0, 0.05, 0.5);
  ClearanceField clearance = distance_transform(grid);
  WorldParams params;
  params.odom_alpha[0] = 0.05;
  params.odom_alpha[1] = params.odom_alpha[2] = params.odom_alpha[3] = 0.0;

  double err_half = 0.0, err_full = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    World w(&grid, &clearance, params, seed + 1);
    w.robot.pose = {1.5, 2.0, 0.0};
    w.odom_pose = w.robot.pose;
    Pose prev_odom = w.odom_pose;
    for (int i = 0; i < 100; ++i) {  // 10 m at 1 m/s
      w.step({1.0, 0.0}, 0.1);
      const double jump = std::hypot(w.odom_pose.x - prev_odom.x,
                                     w.odom_pose.y - prev_odom.y);
      CHECK(jump < 0.5);
      prev_odom = w.odom_pose;
      if (i == 49)
        err_half += std::hypot(w.odom_pose.x - w.robot.pose.x,
                               w.odom_pose.y - w.robot.pose.y);
    }
    err_full += std::hypot(w.odom_pose.x - w.robot.pose.x,
                           w.odom_pose.y - w.robot.pose.y);
  }
  CHECK(err_full / 100.0 > err_half / 100.0);
  CHECK(err_half / 100.0 > 0.0);
}

TEST_CASE("check_collision thresholds") {
  Fixture f;
  World w = f.world(1);
  w.robot.pose = {5.0, 5.0, 0.0};
  w.robot.radius = 0.2;
  Pedestrian ped;
  ped.radius = 0.3;
  ped.position = {5.49, 5.0};
  w.pedestrians.push_back(ped);
  CHECK(w.check_collision().kind == CollisionKind::Pedestrian);
  w.pedestrians[0].position = {5.51, 5.0};
  CHECK(w.check_collision().kind == CollisionKind::None);

  // wall face at x=0.5; center 0.15 m away with r=0.2 -> static collision
  w.pedestrians.clear();
  w.robot.pose = {0.65, 5.0, 0.0};
  CHECK(w.check_collision().kind == CollisionKind::Static);
  w.robot.pose = {0.75, 5.0, 0.0};
  CHECK(w.check_collision().kind == CollisionKind::None);
}

TEST_CASE("determinism: identical seed and commands give identical sequences") {
  Fixture f;
  auto run = [&](uint64_t seed) {
    WorldParams params;
    World w = f.world(seed, params);
    w.robot.pose = {5.0, 5.0, 0.0};
    w.odom_pose = w.robot.pose;
    w.routes.push_back({{{2.0, 2.0}, {8.0, 8.0}}, false});
    for (int i = 0; i < 8; ++i) {
      Pedestrian p;
      p.route = 0;
      p.position = {2.0 + 0.5 * i, 3.0};
      w.pedestrians.push_back(p);
    }
    uint64_t h = 0;
    Rng cmd_rng(7);
    for (int i = 0; i < 200; ++i) {
      w.step({cmd_rng.uniform(0.0, 1.0), cmd_rng.uniform(-1.0, 1.0)}, 0.1);
      w.cast_scan();
      h ^= hash_world(w) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  };
  CHECK(run(12345) == run(12345));
  CHECK(run(12345) != run(54321));
}
