// Regenerates the committed desk-scale benchmark fixtures: the three maps
// (corridor, supermarket, airport), their scenario files, and the bench
// plans. Run from the repo root: ./build/tools/make_fixtures assets
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "crowdnav/grid_map.hpp"

using namespace crowdnav;
namespace fs = std::filesystem;

namespace {

constexpr double kRes = 0.05;

OccupancyGrid blank(double w_m, double h_m) {
  OccupancyGrid g;
  g.resolution = kRes;
  g.width = static_cast<int>(w_m / kRes);
  g.height = static_cast<int>(h_m / kRes);
  g.origin = {0.0, 0.0};
  g.cells.assign(static_cast<size_t>(g.width) * g.height, Cell::Free);
  return g;
}

void rect(OccupancyGrid& g, double x0, double y0, double x1, double y1) {
  const int ix0 = std::max(0, static_cast<int>(x0 / kRes));
  const int iy0 = std::max(0, static_cast<int>(y0 / kRes));
  const int ix1 = std::min(g.width, static_cast<int>(x1 / kRes));
  const int iy1 = std::min(g.height, static_cast<int>(y1 / kRes));
  for (int iy = iy0; iy < iy1; ++iy)
    for (int ix = ix0; ix < ix1; ++ix) g.at(ix, iy) = Cell::Occupied;
}

void border(OccupancyGrid& g, double t) {
  rect(g, 0, 0, g.width_m(), t);
  rect(g, 0, g.height_m() - t, g.width_m(), g.height_m());
  rect(g, 0, 0, t, g.height_m());
  rect(g, g.width_m() - t, 0, g.width_m(), g.height_m());
}

// Long hall, corner-rich alcove stubs near both ends, smooth walls in the
// middle span so longitudinal localization has nothing to anchor on there.
OccupancyGrid corridor_map() {
  OccupancyGrid g = blank(30.0, 7.0);
  border(g, 0.5);
  for (double x : {3.5, 5.5, 7.5}) {
    rect(g, x, 0.5, x + 0.2, 1.6);        // bottom stubs
    rect(g, x + 1.0, 5.4, x + 1.2, 6.5);  // staggered top stubs
  }
  for (double x : {21.5, 23.5, 25.5}) {
    rect(g, x, 0.5, x + 0.2, 1.6);
    rect(g, x + 1.0, 5.4, x + 1.2, 6.5);
  }
  return g;
}

// Shelf lanes: two rows of long shelf blocks, lanes between them.
OccupancyGrid supermarket_map() {
  OccupancyGrid g = blank(24.0, 15.0);
  border(g, 0.5);
  for (int row = 0; row < 2; ++row) {
    const double y0 = row == 0 ? 2.6 : 9.2;
    for (int col = 0; col < 3; ++col) {
      const double x0 = 3.5 + col * 6.5;
      rect(g, x0, y0, x0 + 4.0, y0 + 1.0);
      rect(g, x0, y0 + 2.4, x0 + 4.0, y0 + 3.4);  // paired shelf with aisle
    }
  }
  return g;
}

// Open hall with a row of gate pillars making narrow aisles near the goal
// side and a couple of columns near the entrance.
OccupancyGrid airport_map() {
  OccupancyGrid g = blank(30.0, 18.0);
  border(g, 0.5);
  for (double y = 2.0; y < 17.0; y += 3.0) rect(g, 23.5, y, 24.5, y + 1.6);
  rect(g, 6.0, 4.0, 6.8, 4.8);
  rect(g, 6.0, 13.0, 6.8, 13.8);
  rect(g, 12.0, 8.6, 12.8, 9.4);
  return g;
}

void write_scenario(const std::string& path, const std::string& name,
                    const std::string& map, double sx, double sy, double gx,
                    double gy, int peds, const std::string& routes_json,
                    double free_area, const std::string& note) {
  std::ofstream out(path);
  out << "{\n"
      << "  \"name\": \"" << name << "\",\n"
      << "  \"map\": \"" << map << "\",\n"
      << "  \"recovery_points\": \"" << name << "_recovery.csv\",\n"
      << "  \"robot\": {\"start\": [" << sx << ", " << sy
      << ", 0.0], \"goal\": [" << gx << ", " << gy
      << "], \"radius\": 0.17, \"v_max\": 1.0, \"w_max\": 1.5707963},\n"
      << "  \"pedestrians\": {\n"
      << "    \"count\": " << peds << ",\n"
      << "    \"radius\": 0.3,\n"
      << "    \"speed_range\": [0.6, 1.4],\n"
      << "    \"routes\": [\n"
      << routes_json << "\n    ]\n  },\n"
      << "  \"noise\": {\"odom_alpha\": [0.05, 0.01, 0.05, 0.01], "
         "\"scan_sigma\": 0.05},\n"
      << "  \"timeout\": 180.0,\n"
      << "  \"mcl_spread_init\": 0.3,\n"
      << "  \"free_area_m2\": " << free_area << ",\n"
      << "  \"density_note\": \"" << note << "\"\n"
      << "}\n";
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "assets";
  fs::create_directories(out_dir + "/maps");
  fs::create_directories(out_dir + "/scenarios");
  fs::create_directories(out_dir + "/plans");
  fs::create_directories(out_dir + "/train");

  save_map(corridor_map(), out_dir + "/maps/corridor.pgm");
  save_map(supermarket_map(), out_dir + "/maps/supermarket.pgm");
  save_map(airport_map(), out_dir + "/maps/airport.pgm");

  // corridor: bidirectional through-traffic concentrated mid-hall
  write_scenario(
      out_dir + "/scenarios/corridor.json", "corridor", "../maps/corridor.pgm",
      2.0, 3.5, 28.0, 3.5, 18,
      "      {\"waypoints\": [[3.0, 2.2], [27.0, 2.2]], \"loop\": false, \"spawn_zone\": [8.0, 1.4, 22.0, 3.0]},\n"
      "      {\"waypoints\": [[27.0, 3.5], [3.0, 3.5]], \"loop\": false, \"spawn_zone\": [8.0, 2.7, 22.0, 4.3]},\n"
      "      {\"waypoints\": [[3.0, 4.8], [27.0, 4.8]], \"loop\": false, \"spawn_zone\": [8.0, 4.0, 22.0, 5.6]},\n"
      "      {\"waypoints\": [[27.0, 2.8], [3.0, 2.8]], \"loop\": false, \"spawn_zone\": [10.0, 2.0, 24.0, 3.6]},\n"
      "      {\"waypoints\": [[3.0, 4.2], [27.0, 4.2]], \"loop\": false, \"spawn_zone\": [6.0, 3.4, 20.0, 5.0]}",
      168.0, "18 peds over ~168 m2 free space = 0.107 /m2, the desk-scale "
             "stand-in for the paper's moderate crowd");

  // supermarket: shoppers looping the lanes
  write_scenario(
      out_dir + "/scenarios/supermarket.json", "supermarket",
      "../maps/supermarket.pgm", 2.0, 7.5, 22.0, 7.5, 22,
      "      {\"waypoints\": [[2.0, 2.0], [22.0, 2.0], [22.0, 7.5], [2.0, 7.5]], \"loop\": true, \"spawn_zone\": [2.0, 1.5, 22.0, 2.8]},\n"
      "      {\"waypoints\": [[22.0, 13.0], [2.0, 13.0], [2.0, 7.8], [22.0, 7.8]], \"loop\": true, \"spawn_zone\": [2.0, 12.2, 22.0, 13.8]},\n"
      "      {\"waypoints\": [[2.2, 7.6], [21.8, 7.6]], \"loop\": false, \"spawn_zone\": [4.0, 6.8, 20.0, 8.4]},\n"
      "      {\"waypoints\": [[8.8, 1.5], [8.8, 13.5]], \"loop\": false, \"spawn_zone\": [8.1, 2.0, 9.5, 13.0]},\n"
      "      {\"waypoints\": [[15.3, 13.5], [15.3, 1.5]], \"loop\": false, \"spawn_zone\": [14.6, 2.0, 16.0, 13.0]}",
      250.0, "22 peds over ~250 m2 free space = 0.088 /m2");

  // airport: crossing flows through the gate aisles
  write_scenario(
      out_dir + "/scenarios/airport.json", "airport", "../maps/airport.pgm",
      2.0, 9.0, 28.0, 9.0, 32,
      "      {\"waypoints\": [[4.0, 3.0], [27.0, 3.6]], \"loop\": false, \"spawn_zone\": [8.0, 2.0, 22.0, 6.0]},\n"
      "      {\"waypoints\": [[27.0, 9.0], [4.0, 9.0]], \"loop\": false, \"spawn_zone\": [10.0, 7.5, 26.0, 10.5]},\n"
      "      {\"waypoints\": [[4.0, 15.0], [27.0, 14.4]], \"loop\": false, \"spawn_zone\": [8.0, 12.0, 22.0, 16.0]},\n"
      "      {\"waypoints\": [[15.0, 2.0], [15.0, 16.0]], \"loop\": false, \"spawn_zone\": [13.0, 3.0, 17.0, 15.0]},\n"
      "      {\"waypoints\": [[27.0, 5.0], [4.0, 12.0]], \"loop\": false, \"spawn_zone\": [14.0, 4.0, 26.0, 13.0]},\n"
      "      {\"waypoints\": [[4.0, 6.0], [27.0, 12.0]], \"loop\": false, \"spawn_zone\": [6.0, 5.0, 20.0, 12.0]}",
      486.0, "32 peds over ~486 m2 free space = 0.066 /m2, aisles near the "
             "gates concentrate the flow");

  std::printf("fixtures written under %s\n", out_dir.c_str());
  return 0;
}
