#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <queue>

#include "crowdnav/grid_map.hpp"
#include "crowdnav/rng.hpp"

using namespace crowdnav;
namespace fs = std::filesystem;

namespace {

OccupancyGrid make_grid(int w, int h, double res = 1.0) {
  OccupancyGrid g;
  g.width = w;
  g.height = h;
  g.resolution = res;
  g.origin = {0.0, 0.0};
  g.cells.assign(static_cast<size_t>(w) * h, Cell::Free);
  return g;
}

// brute-force Euclidean distance to the nearest blocked cell center
double edt_oracle(const OccupancyGrid& g, int ix, int iy) {
  double best = std::numeric_limits<double>::infinity();
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x)
      if (g.blocked(x, y))
        best = std::min(best, std::hypot(double(x - ix), double(y - iy)));
  return best * g.resolution;
}

// independent Dijkstra oracle: simple O(V^2) scan without a heap
double dijkstra_oracle(const OccupancyGrid& g, const ClearanceField& cf,
                       int sx, int sy, int gx, int gy, double inflation) {
  const int n = g.width * g.height;
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> done(n, false);
  auto ok = [&](int x, int y) {
    return g.in_bounds(x, y) && !g.blocked(x, y) && cf.at(x, y) >= inflation;
  };
  if (!ok(sx, sy) || !ok(gx, gy)) return std::numeric_limits<double>::infinity();
  dist[sy * g.width + sx] = 0.0;
  for (int iter = 0; iter < n; ++iter) {
    int best = -1;
    for (int i = 0; i < n; ++i)
      if (!done[i] && std::isfinite(dist[i]) && (best < 0 || dist[i] < dist[best]))
        best = i;
    if (best < 0) break;
    done[best] = true;
    const int x = best % g.width, y = best / g.width;
    static const int dx[] = {1, -1, 0, 0, 1, 1, -1, -1};
    static const int dy[] = {0, 0, 1, -1, 1, -1, 1, -1};
    for (int k = 0; k < 8; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (!ok(nx, ny)) continue;
      const double step = (k < 4 ? 1.0 : std::sqrt(2.0)) * g.resolution;
      if (dist[best] + step < dist[ny * g.width + nx])
        dist[ny * g.width + nx] = dist[best] + step;
    }
  }
  return dist[gy * g.width + gx];
}

std::string write_test_map(const std::string& dir, int w, int h,
                           const std::vector<uint8_t>& pixels, double res,
                           int meta_w = -1, int meta_h = -1) {
  fs::create_directories(dir);
  const std::string img = dir + "/map.pgm";
  std::ofstream out(img, std::ios::binary);
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  out.close();
  std::ofstream meta(dir + "/map.meta");
  meta << "resolution: " << res << "\norigin_x: 0\norigin_y: 0\n"
       << "free_thresh: 250\noccupied_thresh: 50\n";
  if (meta_w > 0) meta << "width: " << meta_w << "\nheight: " << meta_h << "\n";
  return img;
}

}  // namespace

TEST_CASE("load_map: all-white image maps to all Free") {
  const auto path = write_test_map("/tmp/crowdnav_maps/white", 4, 4,
                                   std::vector<uint8_t>(16, 254), 0.1);
  const OccupancyGrid g = load_map(path);
  CHECK(g.width == 4);
  CHECK(g.height == 4);
  CHECK(g.resolution == doctest::Approx(0.1));
  for (const Cell c : g.cells) CHECK(c == Cell::Free);
}

TEST_CASE("load_map: threshold arithmetic on a 2x2 image") {
  // image rows are top-down: row 0 = {254, 0}, row 1 = {128, 254}
  const auto path = write_test_map("/tmp/crowdnav_maps/thresh", 2, 2,
                                   {254, 0, 128, 254}, 0.1);
  const OccupancyGrid g = load_map(path);
  // grid row 1 (top) holds the first image row
  CHECK(g.at(0, 1) == Cell::Free);
  CHECK(g.at(1, 1) == Cell::Occupied);
  CHECK(g.at(0, 0) == Cell::Unknown);
  CHECK(g.at(1, 0) == Cell::Free);
}

TEST_CASE("load_map: metadata dimension mismatch is an error") {
  const auto path = write_test_map("/tmp/crowdnav_maps/mismatch", 2, 2,
                                   std::vector<uint8_t>(4, 254), 0.1, 3, 3);
  CHECK_THROWS(load_map(path));
}

TEST_CASE("load_map: missing file and bad resolution") {
  CHECK_THROWS(load_map("/tmp/crowdnav_maps/nope.pgm"));
  const auto path = write_test_map("/tmp/crowdnav_maps/badres", 2, 2,
                                   std::vector<uint8_t>(4, 254), -0.5);
  CHECK_THROWS(load_map(path));
}

TEST_CASE("grid round-trip: world_to_grid(grid_to_world(i)) == i") {
  OccupancyGrid g = make_grid(17, 9, 0.05);
  g.origin = {-3.2, 1.7};
  for (int iy = 0; iy < g.height; ++iy)
    for (int ix = 0; ix < g.width; ++ix) {
      int jx, jy;
      REQUIRE(g.world_to_grid(g.grid_to_world(ix, iy), jx, jy));
      CHECK(jx == ix);
      CHECK(jy == iy);
    }
}

TEST_CASE("distance_transform: 1-D strip") {
  OccupancyGrid g = make_grid(3, 1, 1.0);
  g.at(0, 0) = Cell::Occupied;
  const ClearanceField f = distance_transform(g);
  CHECK(f.at(0, 0) == doctest::Approx(0.0));
  CHECK(f.at(1, 0) == doctest::Approx(1.0));
  CHECK(f.at(2, 0) == doctest::Approx(2.0));
}

TEST_CASE("distance_transform: all-free grid falls back to boundary distance") {
  const OccupancyGrid g = make_grid(6, 4, 0.5);
  const ClearanceField f = distance_transform(g);
  CHECK(f.at(0, 0) == doctest::Approx(0.25));
  CHECK(f.at(3, 2) == doctest::Approx(0.5 * 1.5));
  CHECK(f.at(5, 3) == doctest::Approx(0.25));
}

TEST_CASE("distance_transform: single center obstacle, corners at 2*sqrt(2)") {
  OccupancyGrid g = make_grid(5, 5, 1.0);
  g.at(2, 2) = Cell::Occupied;
  const ClearanceField f = distance_transform(g);
  const double expect = edt_oracle(g, 0, 0);
  CHECK(expect == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK(f.at(0, 0) == doctest::Approx(expect));
  CHECK(f.at(4, 4) == doctest::Approx(expect));
  CHECK(f.at(0, 4) == doctest::Approx(expect));
}

TEST_CASE("distance_transform matches brute force on random grids") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    OccupancyGrid g = make_grid(20, 14, 0.25);
    for (auto& c : g.cells)
      if (rng.uniform() < 0.15) c = Cell::Occupied;
    const ClearanceField f = distance_transform(g);
    for (int iy = 0; iy < g.height; ++iy)
      for (int ix = 0; ix < g.width; ++ix)
        CHECK(f.at(ix, iy) == doctest::Approx(edt_oracle(g, ix, iy)).epsilon(1e-9));
  }
}

TEST_CASE("distance_transform symmetric under 90-degree rotation") {
  Rng rng(11);
  OccupancyGrid g = make_grid(12, 12, 1.0);
  for (auto& c : g.cells)
    if (rng.uniform() < 0.2) c = Cell::Occupied;
  OccupancyGrid rot = make_grid(12, 12, 1.0);
  for (int iy = 0; iy < 12; ++iy)
    for (int ix = 0; ix < 12; ++ix)
      rot.at(11 - iy, ix) = g.at(ix, iy);
  const ClearanceField f = distance_transform(g);
  const ClearanceField fr = distance_transform(rot);
  for (int iy = 0; iy < 12; ++iy)
    for (int ix = 0; ix < 12; ++ix)
      CHECK(f.at(ix, iy) == doctest::Approx(fr.at(11 - iy, ix)));
}

TEST_CASE("plan_global_path: straight corridor length") {
  const OccupancyGrid g = make_grid(10, 10, 1.0);
  const GlobalPath p = plan_global_path(g, {0.5, 0.5}, {0.5, 5.5}, 0.0);
  CHECK(p.total_length == doctest::Approx(5.0).epsilon(0.21));
  CHECK(p.waypoints.front().x == doctest::Approx(0.5));
  CHECK(p.waypoints.back().y == doctest::Approx(5.5));
}

TEST_CASE("plan_global_path: walled-off goal raises no-path") {
  OccupancyGrid g = make_grid(10, 10, 1.0);
  for (int iy = 0; iy < 10; ++iy) g.at(5, iy) = Cell::Occupied;
  CHECK_THROWS_WITH_AS(plan_global_path(g, {1.5, 1.5}, {8.5, 1.5}, 0.0),
                       doctest::Contains("no path"), std::runtime_error);
}

TEST_CASE("plan_global_path: collision after inflation is rejected") {
  OccupancyGrid g = make_grid(10, 10, 1.0);
  g.at(1, 2) = Cell::Occupied;
  CHECK_THROWS(plan_global_path(g, {1.5, 1.5}, {8.5, 8.5}, 1.5));
}

TEST_CASE("plan_global_path: wall with a gap matches the Dijkstra oracle") {
  OccupancyGrid g = make_grid(20, 20, 1.0);
  for (int iy = 0; iy < 20; ++iy)
    if (iy != 12) g.at(10, iy) = Cell::Occupied;
  const ClearanceField cf = distance_transform(g);
  const GlobalPath p = plan_global_path(g, {2.5, 2.5}, {17.5, 2.5}, 0.0);
  const double oracle = dijkstra_oracle(g, cf, 2, 2, 17, 2, 0.0);
  CHECK(p.total_length == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("plan_global_path cost equals oracle on random maps up to 50x50") {
  Rng rng(23);
  int solved = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const int w = rng.uniform_int(10, 50), h = rng.uniform_int(10, 50);
    OccupancyGrid g = make_grid(w, h, 0.5);
    for (auto& c : g.cells)
      if (rng.uniform() < 0.25) c = Cell::Occupied;
    g.at(1, 1) = Cell::Free;
    g.at(w - 2, h - 2) = Cell::Free;
    const ClearanceField cf = distance_transform(g);
    const double oracle = dijkstra_oracle(g, cf, 1, 1, w - 2, h - 2, 0.0);
    const WorldPoint start = g.grid_to_world(1, 1);
    const WorldPoint goal = g.grid_to_world(w - 2, h - 2);
    if (!std::isfinite(oracle)) {
      CHECK_THROWS(plan_global_path(g, start, goal, 0.0));
      continue;
    }
    const GlobalPath p = plan_global_path(g, start, goal, 0.0);
    CHECK(p.total_length == doctest::Approx(oracle).epsilon(1e-12));
    // path invariants: step spacing and inflated-free waypoints
    for (size_t i = 1; i < p.waypoints.size(); ++i)
      CHECK(distance(p.waypoints[i - 1], p.waypoints[i]) <=
            std::sqrt(2.0) * g.resolution + 1e-12);
    ++solved;
  }
  CHECK(solved > 3);
}

TEST_CASE("next_subgoal: arc-length lookahead on a straight path") {
  GlobalPath p;
  for (int i = 0; i <= 20; ++i) p.waypoints.push_back({i * 0.5, 0.0});
  const WorldPoint sg = next_subgoal(p, {0.0, 0.0}, 2.0);
  CHECK(sg.x == doctest::Approx(2.0));
  CHECK(sg.y == doctest::Approx(0.0));
}

TEST_CASE("next_subgoal: saturates at the final waypoint") {
  GlobalPath p;
  for (int i = 0; i <= 20; ++i) p.waypoints.push_back({i * 0.5, 0.0});
  const WorldPoint sg = next_subgoal(p, {9.5, 0.0}, 2.0);
  CHECK(sg.x == doctest::Approx(10.0));
}

TEST_CASE("next_subgoal: L-shaped path measures arc length, not euclidean") {
  GlobalPath p;
  for (int i = 0; i <= 4; ++i) p.waypoints.push_back({i * 0.5, 0.0});
  for (int i = 1; i <= 4; ++i) p.waypoints.push_back({2.0, i * 0.5});
  // pose at the corner: 1.0 of lookahead goes 1.0 into the second leg
  const WorldPoint sg = next_subgoal(p, {2.0, 0.0}, 1.0);
  CHECK(sg.x == doctest::Approx(2.0));
  CHECK(sg.y == doctest::Approx(1.0));
}

TEST_CASE("next_subgoal output lies on the path polyline") {
  Rng rng(5);
  GlobalPath p;
  WorldPoint cur{0.0, 0.0};
  p.waypoints.push_back(cur);
  for (int i = 0; i < 30; ++i) {
    cur.x += rng.uniform(-0.5, 0.5);
    cur.y += rng.uniform(-0.5, 0.5);
    p.waypoints.push_back(cur);
  }
  for (int trial = 0; trial < 50; ++trial) {
    const WorldPoint pose{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const WorldPoint sg = next_subgoal(p, pose, rng.uniform(0.1, 5.0));
    bool on_path = false;
    for (const auto& wp : p.waypoints)
      if (distance(wp, sg) < 1e-12) on_path = true;
    CHECK(on_path);
  }
  CHECK_THROWS(next_subgoal(GlobalPath{}, {0, 0}, 1.0));
}

TEST_CASE("raycast_grid basic geometry") {
  OccupancyGrid g = make_grid(60, 60, 0.1);  // 6m x 6m
  for (int i = 0; i < 60; ++i) {
    g.at(i, 0) = Cell::Occupied;
    g.at(i, 59) = Cell::Occupied;
    g.at(0, i) = Cell::Occupied;
    g.at(59, i) = Cell::Occupied;
  }
  // from the center, the +x wall face sits at x=5.9
  const double r = raycast_grid(g, 3.0, 3.0, 0.0, 10.0);
  CHECK(r == doctest::Approx(2.9).epsilon(1e-9));
  // diagonal
  const double rd = raycast_grid(g, 3.0, 3.0, M_PI / 4.0, 10.0);
  CHECK(rd == doctest::Approx(2.9 * std::sqrt(2.0)).epsilon(1e-6));
  // max range cap
  CHECK(raycast_grid(g, 3.0, 3.0, 0.0, 1.5) == doctest::Approx(1.5));
}
