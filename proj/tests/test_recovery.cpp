#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "crowdnav/recovery.hpp"
#include "crowdnav/rng.hpp"
#include "crowdnav/trainer.hpp"

using namespace crowdnav;

namespace {

OccupancyGrid empty_grid(int w, int h, double res = 0.05) {
  OccupancyGrid g;
  g.width = w;
  g.height = h;
  g.resolution = res;
  g.origin = {0.0, 0.0};
  g.cells.assign(static_cast<size_t>(w) * h, Cell::Free);
  return g;
}

// reference structure-tensor response without NMS, brute-force smoothing
std::vector<double> harris_reference(const OccupancyGrid& g, double sigma,
                                     double k) {
  const int w = g.width, h = g.height;
  std::vector<double> img(w * h, 0.0), gx(w * h, 0.0), gy(w * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img[y * w + x] = g.blocked(x, y) ? 1.0 : 0.0;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      gx[y * w + x] = 0.5 * (img[y * w + x + 1] - img[y * w + x - 1]);
      gy[y * w + x] = 0.5 * (img[(y + 1) * w + x] - img[(y - 1) * w + x]);
    }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> response(w * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sxx = 0, syy = 0, sxy = 0, norm = 0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          const double wgt = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
          sxx += wgt * gx[yy * w + xx] * gx[yy * w + xx];
          syy += wgt * gy[yy * w + xx] * gy[yy * w + xx];
          sxy += wgt * gx[yy * w + xx] * gy[yy * w + xx];
          norm += wgt;
        }
      (void)norm;
      response[y * w + x] = sxx * syy - sxy * sxy - k * (sxx + syy) * (sxx + syy);
    }
  return response;
}

// exhaustive 2-cluster assignment oracle by SSE
double best_two_cluster_sse(const std::vector<CornerPoint>& corners) {
  const int n = static_cast<int>(corners.size());
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << n) - 1; ++mask) {
    WorldPoint c0{0, 0}, c1{0, 0};
    int n0 = 0, n1 = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) {
        c0.x += corners[i].position.x;
        c0.y += corners[i].position.y;
        ++n0;
      } else {
        c1.x += corners[i].position.x;
        c1.y += corners[i].position.y;
        ++n1;
      }
    }
    c0.x /= n0; c0.y /= n0; c1.x /= n1; c1.y /= n1;
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
      const WorldPoint& c = (mask & (1 << i)) ? c0 : c1;
      sse += std::pow(distance(corners[i].position, c), 2);
    }
    best = std::min(best, sse);
  }
  return best;
}

}  // namespace

TEST_CASE("detect_corners: straight wall yields no corner on the wall run") {
  OccupancyGrid g = empty_grid(60, 60);
  for (int x = 0; x < 60; ++x) g.at(x, 30) = Cell::Occupied;
  const auto corners = detect_corners(g);
  // edge cells have rank-1 structure tensor: R <= 0 along the infinite run
  for (const auto& c : corners) {
    int ix, iy;
    g.world_to_grid(c.position, ix, iy);
    CHECK(std::abs(iy - 30) > 3);  // nothing on the wall line itself
  }
  CHECK(corners.empty());
}

TEST_CASE("detect_corners: single L junction gives exactly one corner there") {
  OccupancyGrid g = empty_grid(60, 60);
  for (int x = 0; x < 30; ++x) g.at(x, 30) = Cell::Occupied;   // to the border
  for (int y = 30; y < 60; ++y) g.at(30, y) = Cell::Occupied;  // to the border
  const auto corners = detect_corners(g);
  REQUIRE(corners.size() == 1);
  int ix, iy;
  g.world_to_grid(corners[0].position, ix, iy);
  CHECK(std::abs(ix - 30) <= 1);
  CHECK(std::abs(iy - 30) <= 1);

  // cross-check the peak against the dense reference response
  const auto ref = harris_reference(g, 2.0, 0.04);
  double ref_max = 0.0;
  int rx = 0, ry = 0;
  for (int y = 6; y < 54; ++y)
    for (int x = 6; x < 54; ++x)
      if (ref[y * 60 + x] > ref_max) {
        ref_max = ref[y * 60 + x];
        rx = x;
        ry = y;
      }
  CHECK(std::abs(rx - ix) <= 1);
  CHECK(std::abs(ry - iy) <= 1);
}

TEST_CASE("detect_corners: empty map yields an empty list") {
  const OccupancyGrid g = empty_grid(40, 40);
  CHECK(detect_corners(g).empty());
}

TEST_CASE("detect_corners: corners sit adjacent to occupied structure") {
  OccupancyGrid g = empty_grid(120, 120);
  // a room-like block with notches
  for (int x = 30; x < 90; ++x) {
    g.at(x, 30) = Cell::Occupied;
    g.at(x, 90) = Cell::Occupied;
  }
  for (int y = 30; y < 91; ++y) {
    g.at(30, y) = Cell::Occupied;
    g.at(90, y) = Cell::Occupied;
  }
  const ClearanceField cf = distance_transform(g);
  const auto corners = detect_corners(g);
  CHECK(!corners.empty());
  for (const auto& c : corners) {
    int ix, iy;
    g.world_to_grid(c.position, ix, iy);
    CHECK(cf.at(ix, iy) <= 3 * g.resolution);
  }
}

TEST_CASE("cluster_corners: two tight groups split cleanly (oracle check)") {
  std::vector<CornerPoint> corners = {
      {{0.0, 0.0}, 1.0}, {{0.0, 1.0}, 1.0}, {{10.0, 10.0}, 1.0}};
  const auto clusters = cluster_corners(corners, 2, 5.0);
  REQUIRE(clusters.size() == 2);
  // SSE equals the exhaustive best 2-partition
  double sse = 0.0;
  for (const auto& cl : clusters)
    for (int i : cl.members)
      sse += std::pow(distance(corners[i].position, cl.centroid), 2);
  CHECK(sse == doctest::Approx(best_two_cluster_sse(corners)));
  // membership: the pair together, the far point alone
  for (const auto& cl : clusters) {
    if (cl.members.size() == 2) {
      CHECK(cl.centroid.x == doctest::Approx(0.0));
      CHECK(cl.centroid.y == doctest::Approx(0.5));
    } else {
      REQUIRE(cl.members.size() == 1);
      CHECK(cl.centroid.x == doctest::Approx(10.0));
    }
  }
}

TEST_CASE("cluster_corners: one cluster when everything is close") {
  std::vector<CornerPoint> corners = {
      {{1.0, 1.0}, 1.0}, {{1.5, 1.2}, 1.0}, {{0.8, 1.4}, 1.0}};
  const auto clusters = cluster_corners(corners, 1, 5.0);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].centroid.x == doctest::Approx((1.0 + 1.5 + 0.8) / 3));
  CHECK(clusters[0].centroid.y == doctest::Approx((1.0 + 1.2 + 1.4) / 3));
}

TEST_CASE("cluster_corners: split refinement forces a new cluster") {
  std::vector<CornerPoint> corners = {{{0.0, 0.0}, 1.0}, {{20.0, 0.0}, 1.0}};
  const auto clusters = cluster_corners(corners, 1, 5.0);
  CHECK(clusters.size() == 2);
  CHECK_THROWS(cluster_corners({}, 2, 5.0));
}

TEST_CASE("cluster_corners: no member ends farther than split distance") {
  Rng rng(3);
  std::vector<CornerPoint> corners;
  for (int i = 0; i < 60; ++i)
    corners.push_back({{rng.uniform(0.0, 30.0), rng.uniform(0.0, 15.0)}, 1.0});
  const auto clusters = cluster_corners(corners, 2, 3.0);
  int assigned = 0;
  for (const auto& cl : clusters) {
    for (int i : cl.members) {
      CHECK(distance(corners[i].position, cl.centroid) <= 3.0 + 1e-9);
      ++assigned;
    }
  }
  CHECK(assigned == 60);
}

TEST_CASE("offset_to_passage: already clear centroid is unchanged") {
  OccupancyGrid g = build_room_grid(10.0, 10.0, 0.05, 0.5);
  const ClearanceField cf = distance_transform(g);
  const WorldPoint center{5.0, 5.0};
  const WorldPoint out = offset_to_passage(center, g, cf, 0.5);
  CHECK(out.x == doctest::Approx(center.x));
  CHECK(out.y == doctest::Approx(center.y));
}

TEST_CASE("offset_to_passage: wall centroid climbs to the corridor midline") {
  // corridor along x: free band y in [2, 6] -> 4 m wide, midline y = 4
  OccupancyGrid g = empty_grid(200, 160);
  for (int y = 0; y < 160; ++y)
    for (int x = 0; x < 200; ++x)
      if (y < 40 || y >= 120) g.at(x, y) = Cell::Occupied;
  const ClearanceField cf = distance_transform(g);
  // start on the wall surface; demand the full half-width clearance
  const WorldPoint out = offset_to_passage({5.0, 2.0, }, g, cf, 2.0);
  CHECK(out.y == doctest::Approx(4.0).epsilon(0.03));
  // and an impossible demand errors out
  CHECK_THROWS(offset_to_passage({5.0, 2.0}, g, cf, 10.0));
}

TEST_CASE("offset_to_passage: fully occupied map errors") {
  OccupancyGrid g = empty_grid(20, 20);
  for (auto& c : g.cells) c = Cell::Occupied;
  const ClearanceField cf = distance_transform(g);
  CHECK_THROWS(offset_to_passage({0.5, 0.5}, g, cf, 0.3));
}

TEST_CASE("compute_weights: Eq. 4 arithmetic and permutation equivariance") {
  std::vector<CornerCluster> clusters(3);
  clusters[0].members = {0, 1, 2};
  clusters[1].members = {3, 4, 5, 6, 7};
  clusters[2].members = {8, 9};
  const auto w = compute_weights(clusters);
  CHECK(w[0] == doctest::Approx(0.3));
  CHECK(w[1] == doctest::Approx(0.5));
  CHECK(w[2] == doctest::Approx(0.2));

  std::swap(clusters[0], clusters[2]);
  const auto w2 = compute_weights(clusters);
  CHECK(w2[0] == doctest::Approx(0.2));
  CHECK(w2[2] == doctest::Approx(0.3));

  // single cluster and the uniform case
  CHECK(compute_weights({clusters[0]})[0] == doctest::Approx(1.0));
  std::vector<CornerCluster> quad(4);
  for (int i = 0; i < 4; ++i) quad[i].members = {i};
  for (double v : compute_weights(quad)) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("score_distance: Eq. 6 arithmetic, symmetry, scale invariance") {
  std::vector<RecoveryPoint> pts(2);
  pts[0].position = {1.0, 0.0};
  pts[1].position = {3.0, 0.0};
  const WorldPoint goal{0.0, 0.0};
  const auto v = score_distance(pts, goal);
  CHECK(v[0] == doctest::Approx(-0.25));
  CHECK(v[1] == doctest::Approx(-0.75));
  CHECK(v[0] + v[1] == doctest::Approx(-1.0));

  // two equidistant points
  pts[1].position = {0.0, 1.0};
  const auto veq = score_distance(pts, goal);
  CHECK(veq[0] == doctest::Approx(-0.5));
  CHECK(veq[1] == doctest::Approx(-0.5));

  // scaling all distances by 7 leaves the vector unchanged
  pts[0].position = {7.0, 0.0};
  pts[1].position = {0.0, 7.0};
  const auto vscaled = score_distance(pts, goal);
  CHECK(vscaled[0] == doctest::Approx(veq[0]));
  CHECK(vscaled[1] == doctest::Approx(veq[1]));

  // all points on the goal: zero denominator
  pts[0].position = pts[1].position = goal;
  CHECK_THROWS(score_distance(pts, goal));
}

TEST_CASE("select_recovery_point: Table I fusion example") {
  const FusionWeights w{0.5, 0.2, 1.0};
  const std::vector<double> v_rl = {0.8, 0.2};
  const std::vector<double> v_cp = {0.3, 0.7};
  const std::vector<double> v_d = {-0.4, -0.6};
  // fused: A = 0.4 + 0.06 - 0.4 = 0.06, B = 0.1 + 0.14 - 0.6 = -0.36
  CHECK(select_recovery_point(v_rl, v_cp, v_d, w) == 0);
}

TEST_CASE("select_recovery_point: degenerate single candidate") {
  CHECK(select_recovery_point({-5.0}, {0.1}, {-1.0}, {}) == 0);
}

TEST_CASE("select_recovery_point: argmax invariant to constant shifts") {
  Rng rng(9);
  const FusionWeights w{0.5, 0.2, 1.0};
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(2, 20);
    std::vector<double> v_rl(n), v_cp(n), v_d(n), v_d_shift(n);
    for (int i = 0; i < n; ++i) {
      v_rl[i] = rng.normal();
      v_cp[i] = rng.uniform();
      v_d[i] = -rng.uniform();
    }
    const double c = rng.normal(0.0, 3.0);
    for (int i = 0; i < n; ++i) v_d_shift[i] = v_d[i] + c;
    CHECK(select_recovery_point(v_rl, v_cp, v_d, w) ==
          select_recovery_point(v_rl, v_cp, v_d_shift, w));
  }
}

TEST_CASE("select_recovery_point: hysteresis holds the current selection") {
  const FusionWeights w{1.0, 0.0, 0.0};
  // candidate 1 better by 0.03 < margin 0.05: stay on 0
  CHECK(select_recovery_point({0.50, 0.53}, {0, 0}, {0, 0}, w, 0, 0.05) == 0);
  // better by 0.08 > margin: switch
  CHECK(select_recovery_point({0.50, 0.58}, {0, 0}, {0, 0}, w, 0, 0.05) == 1);
  // margin zero equals the plain argmax, ties break to the lower index
  CHECK(select_recovery_point({0.5, 0.5}, {0, 0}, {0, 0}, w, 1, 0.0) == 1);
  CHECK(select_recovery_point({0.5, 0.5}, {0, 0}, {0, 0}, w) == 0);
}

TEST_CASE("select_recovery_point with zero margin equals brute-force argmax") {
  Rng rng(13);
  const FusionWeights w{0.5, 0.2, 1.0};
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.uniform_int(1, 100);
    std::vector<double> v_rl(n), v_cp(n), v_d(n);
    for (int i = 0; i < n; ++i) {
      v_rl[i] = rng.normal();
      v_cp[i] = rng.uniform();
      v_d[i] = -rng.uniform();
    }
    int best = 0;
    double best_f = -1e300;
    for (int i = 0; i < n; ++i) {
      const double f = w.rl * v_rl[i] + w.cp * v_cp[i] + w.d * v_d[i];
      if (f > best_f) {
        best_f = f;
        best = i;
      }
    }
    CHECK(select_recovery_point(v_rl, v_cp, v_d, w, std::nullopt, 0.0) == best);
  }
  CHECK_THROWS(select_recovery_point({}, {}, {}, {}));
}

TEST_CASE("extraction pipeline: office-like map produces clear recovery points") {
  // room with interior walls and alcoves: plenty of corner structure
  OccupancyGrid g = build_room_grid(20.0, 12.0, 0.05, 0.5);
  auto vline = [&](int x, int y0, int y1) {
    for (int y = y0; y <= y1; ++y) g.at(x, y) = Cell::Occupied;
  };
  auto hline = [&](int y, int x0, int x1) {
    for (int x = x0; x <= x1; ++x) g.at(x, y) = Cell::Occupied;
  };
  vline(100, 20, 90);
  vline(200, 140, 220);
  vline(300, 20, 90);
  hline(120, 40, 120);
  hline(60, 240, 340);
  const ClearanceField cf = distance_transform(g);

  RecoveryExtractParams params;
  const auto points = extract_recovery_points(g, cf, params);
  CHECK(points.size() >= 3);
  double total = 0.0;
  for (const auto& p : points) {
    total += p.weight;
    CHECK(cf.at_world(g, p.position) >= params.min_clearance);
    CHECK(p.cluster_size >= 1);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  // round-trip through the file format
  save_recovery_points("/tmp/crowdnav_recovery_test.csv", points);
  const auto loaded = load_recovery_points("/tmp/crowdnav_recovery_test.csv");
  REQUIRE(loaded.size() == points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    CHECK(loaded[i].cluster_id == points[i].cluster_id);
    CHECK(loaded[i].position.x == doctest::Approx(points[i].position.x));
    CHECK(loaded[i].cluster_size == points[i].cluster_size);
  }
}

TEST_CASE("extraction pipeline: featureless map errors on zero corners") {
  const OccupancyGrid g = empty_grid(100, 100);
  const ClearanceField cf = distance_transform(g);
  CHECK_THROWS(extract_recovery_points(g, cf, {}));
}
