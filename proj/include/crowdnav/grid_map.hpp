#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crowdnav/geometry.hpp"

namespace crowdnav {

enum class Cell : uint8_t { Free = 0, Occupied = 1, Unknown = 2 };

/// Static occupancy grid. Row-major storage with iy increasing along world +y
/// (map images are stored top-row-first and flipped on load).
struct OccupancyGrid {
  int width = 0;
  int height = 0;
  double resolution = 0.0;  // meters per cell
  WorldPoint origin;        // world position of the lower-left corner of cell (0,0)
  std::vector<Cell> cells;

  bool in_bounds(int ix, int iy) const {
    return ix >= 0 && iy >= 0 && ix < width && iy < height;
  }
  Cell at(int ix, int iy) const { return cells[iy * width + ix]; }
  Cell& at(int ix, int iy) { return cells[iy * width + ix]; }

  /// Unknown is treated as Occupied for planning and feature detection.
  bool blocked(int ix, int iy) const { return at(ix, iy) != Cell::Free; }

  bool world_to_grid(const WorldPoint& p, int& ix, int& iy) const {
    ix = static_cast<int>(std::floor((p.x - origin.x) / resolution));
    iy = static_cast<int>(std::floor((p.y - origin.y) / resolution));
    return in_bounds(ix, iy);
  }
  WorldPoint grid_to_world(int ix, int iy) const {
    return {origin.x + (ix + 0.5) * resolution,
            origin.y + (iy + 0.5) * resolution};
  }

  double width_m() const { return width * resolution; }
  double height_m() const { return height * resolution; }
};

/// Euclidean distance (meters) from every cell center to the nearest blocked
/// cell center. For an all-free grid, distance to the grid boundary instead.
struct ClearanceField {
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  std::vector<double> dist;

  double at(int ix, int iy) const { return dist[iy * width + ix]; }
  /// Clearance at a world point; 0 outside the grid.
  double at_world(const OccupancyGrid& grid, const WorldPoint& p) const {
    int ix, iy;
    if (!grid.world_to_grid(p, ix, iy)) return 0.0;
    return at(ix, iy);
  }
};

struct GlobalPath {
  std::vector<WorldPoint> waypoints;
  double total_length = 0.0;

  bool empty() const { return waypoints.empty(); }
};

/// Loads a binary 8-bit PGM map image plus its `<stem>.meta` sidecar
/// (key: value lines; resolution, origin_x, origin_y, free_thresh,
/// occupied_thresh, optional width/height cross-check).
OccupancyGrid load_map(const std::string& image_path);

/// Writes the grid back out as PGM + sidecar (used by fixtures and tools).
void save_map(const OccupancyGrid& grid, const std::string& image_path);

ClearanceField distance_transform(const OccupancyGrid& grid);

/// Shortest 8-connected grid path (diagonal cost sqrt(2)) through cells whose
/// clearance is >= inflation. Throws if start/goal are blocked or no path.
GlobalPath plan_global_path(const OccupancyGrid& grid, const WorldPoint& start,
                            const WorldPoint& goal, double inflation);
GlobalPath plan_global_path(const OccupancyGrid& grid,
                            const ClearanceField& clearance,
                            const WorldPoint& start, const WorldPoint& goal,
                            double inflation);

/// First waypoint at arc length >= lookahead past the waypoint nearest to
/// pose; final waypoint if the remainder is shorter.
WorldPoint next_subgoal(const GlobalPath& path, const WorldPoint& pose,
                        double lookahead);

/// Distance along a ray until the first blocked-cell boundary crossing,
/// capped at max_range. Start positions inside a blocked cell return 0.
double raycast_grid(const OccupancyGrid& grid, double x, double y,
                    double angle, double max_range);

/// Nearest cell (by BFS) with clearance >= min_clearance; nullopt if none.
std::optional<WorldPoint> nearest_clear_cell(const OccupancyGrid& grid,
                                             const ClearanceField& clearance,
                                             const WorldPoint& p,
                                             double min_clearance);

}  // namespace crowdnav
