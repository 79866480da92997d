#include "crowdnav/grid_map.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace crowdnav {

namespace {

std::string sidecar_path(const std::string& image_path) {
  const auto dot = image_path.find_last_of('.');
  const auto slash = image_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return image_path + ".meta";
  return image_path.substr(0, dot) + ".meta";
}

std::map<std::string, std::string> parse_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing map metadata file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw std::runtime_error("malformed metadata line: " + line);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, colon))] = trim(line.substr(colon + 1));
  }
  return kv;
}

double require_double(const std::map<std::string, std::string>& kv,
                      const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end())
    throw std::runtime_error("map metadata missing key: " + key);
  return std::stod(it->second);
}

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
std::string next_pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

OccupancyGrid load_map(const std::string& image_path) {
  std::ifstream img(image_path, std::ios::binary);
  if (!img) throw std::runtime_error("missing map image: " + image_path);

  if (next_pgm_token(img) != "P5")
    throw std::runtime_error("malformed map image (expected binary PGM P5): " +
                             image_path);
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_pgm_token(img));
    h = std::stoi(next_pgm_token(img));
    maxval = std::stoi(next_pgm_token(img));
  } catch (const std::exception&) {
    throw std::runtime_error("malformed PGM header: " + image_path);
  }
  if (w < 1 || h < 1 || maxval != 255)
    throw std::runtime_error("malformed PGM header: " + image_path);

  std::vector<uint8_t> pixels(static_cast<size_t>(w) * h);
  img.read(reinterpret_cast<char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (img.gcount() != static_cast<std::streamsize>(pixels.size()))
    throw std::runtime_error("truncated PGM payload: " + image_path);

  const auto meta = parse_sidecar(sidecar_path(image_path));
  OccupancyGrid grid;
  grid.resolution = require_double(meta, "resolution");
  if (grid.resolution <= 0.0)
    throw std::runtime_error("non-positive resolution in map metadata");
  grid.origin.x = require_double(meta, "origin_x");
  grid.origin.y = require_double(meta, "origin_y");
  const double free_thresh = require_double(meta, "free_thresh");
  const double occupied_thresh = require_double(meta, "occupied_thresh");
  if (meta.count("width") && static_cast<int>(require_double(meta, "width")) != w)
    throw std::runtime_error("metadata/image width mismatch: " + image_path);
  if (meta.count("height") &&
      static_cast<int>(require_double(meta, "height")) != h)
    throw std::runtime_error("metadata/image height mismatch: " + image_path);

  grid.width = w;
  grid.height = h;
  grid.cells.resize(pixels.size());
  // Image rows run top-down (top row = max y); grid rows run bottom-up.
  for (int iy = 0; iy < h; ++iy) {
    const int img_row = h - 1 - iy;
    for (int ix = 0; ix < w; ++ix) {
      const uint8_t px = pixels[static_cast<size_t>(img_row) * w + ix];
      Cell c = Cell::Unknown;
      if (px >= free_thresh)
        c = Cell::Free;
      else if (px <= occupied_thresh)
        c = Cell::Occupied;
      grid.at(ix, iy) = c;
    }
  }
  return grid;
}

void save_map(const OccupancyGrid& grid, const std::string& image_path) {
  std::ofstream img(image_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot write map image: " + image_path);
  img << "P5\n" << grid.width << " " << grid.height << "\n255\n";
  for (int img_row = 0; img_row < grid.height; ++img_row) {
    const int iy = grid.height - 1 - img_row;
    for (int ix = 0; ix < grid.width; ++ix) {
      uint8_t px = 128;
      if (grid.at(ix, iy) == Cell::Free) px = 254;
      if (grid.at(ix, iy) == Cell::Occupied) px = 0;
      img.put(static_cast<char>(px));
    }
  }
  std::ofstream meta(sidecar_path(image_path));
  meta << "resolution: " << grid.resolution << "\n"
       << "origin_x: " << grid.origin.x << "\n"
       << "origin_y: " << grid.origin.y << "\n"
       << "free_thresh: 250\n"
       << "occupied_thresh: 50\n"
       << "width: " << grid.width << "\n"
       << "height: " << grid.height << "\n";
}

namespace {

// 1-D squared distance transform (Felzenszwalb & Huttenlocher).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, int n,
            std::vector<int>& v, std::vector<double>& z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

ClearanceField distance_transform(const OccupancyGrid& grid) {
  const int w = grid.width, h = grid.height;
  ClearanceField field;
  field.width = w;
  field.height = h;
  field.resolution = grid.resolution;
  field.dist.assign(static_cast<size_t>(w) * h, 0.0);

  bool any_blocked = false;
  // large finite sentinel keeps the parabola intersections well defined
  const double far = static_cast<double>(w) * w + static_cast<double>(h) * h + 1.0;
  std::vector<double> sq(static_cast<size_t>(w) * h);
  for (int iy = 0; iy < h; ++iy)
    for (int ix = 0; ix < w; ++ix) {
      const bool b = grid.blocked(ix, iy);
      any_blocked = any_blocked || b;
      sq[iy * w + ix] = b ? 0.0 : far;
    }

  if (!any_blocked) {
    // Degenerate all-free map: distance from cell center to the grid edge.
    for (int iy = 0; iy < h; ++iy)
      for (int ix = 0; ix < w; ++ix)
        field.dist[iy * w + ix] =
            grid.resolution * std::min(std::min(ix + 0.5, iy + 0.5),
                                       std::min(w - ix - 0.5, h - iy - 0.5));
    return field;
  }

  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  // columns
  for (int ix = 0; ix < w; ++ix) {
    for (int iy = 0; iy < h; ++iy) f[iy] = sq[iy * w + ix];
    edt_1d(f, d, h, v, z);
    for (int iy = 0; iy < h; ++iy) sq[iy * w + ix] = d[iy];
  }
  // rows
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) f[ix] = sq[iy * w + ix];
    edt_1d(f, d, w, v, z);
    for (int ix = 0; ix < w; ++ix)
      field.dist[iy * w + ix] = grid.resolution * std::sqrt(d[ix]);
  }
  return field;
}

GlobalPath plan_global_path(const OccupancyGrid& grid, const WorldPoint& start,
                            const WorldPoint& goal, double inflation) {
  return plan_global_path(grid, distance_transform(grid), start, goal,
                          inflation);
}

GlobalPath plan_global_path(const OccupancyGrid& grid,
                            const ClearanceField& clearance,
                            const WorldPoint& start, const WorldPoint& goal,
                            double inflation) {
  int sx, sy, gx, gy;
  if (!grid.world_to_grid(start, sx, sy))
    throw std::runtime_error("plan_global_path: start outside map");
  if (!grid.world_to_grid(goal, gx, gy))
    throw std::runtime_error("plan_global_path: goal outside map");
  auto traversable = [&](int ix, int iy) {
    return !grid.blocked(ix, iy) && clearance.at(ix, iy) >= inflation;
  };
  if (!traversable(sx, sy))
    throw std::runtime_error("plan_global_path: start in collision after inflation");
  if (!traversable(gx, gy))
    throw std::runtime_error("plan_global_path: goal in collision after inflation");

  const int w = grid.width, h = grid.height;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(static_cast<size_t>(w) * h, inf);
  std::vector<int> parent(static_cast<size_t>(w) * h, -1);
  using QEntry = std::pair<double, int>;
  std::priority_queue<QEntry, std::vector<QEntry>, std::greater<>> open;

  const int start_idx = sy * w + sx, goal_idx = gy * w + gx;
  cost[start_idx] = 0.0;
  open.emplace(0.0, start_idx);

  static const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static const int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  const double sqrt2 = std::sqrt(2.0);

  while (!open.empty()) {
    const auto [c, idx] = open.top();
    open.pop();
    if (c > cost[idx]) continue;
    if (idx == goal_idx) break;
    const int ix = idx % w, iy = idx / w;
    for (int k = 0; k < 8; ++k) {
      const int nx = ix + dx8[k], ny = iy + dy8[k];
      if (!grid.in_bounds(nx, ny) || !traversable(nx, ny)) continue;
      const double step = (k < 4 ? 1.0 : sqrt2) * grid.resolution;
      const int nidx = ny * w + nx;
      if (cost[idx] + step < cost[nidx]) {
        cost[nidx] = cost[idx] + step;
        parent[nidx] = idx;
        open.emplace(cost[nidx], nidx);
      }
    }
  }

  if (!std::isfinite(cost[goal_idx]))
    throw std::runtime_error("plan_global_path: no path exists");

  GlobalPath path;
  for (int idx = goal_idx; idx != -1; idx = parent[idx])
    path.waypoints.push_back(grid.grid_to_world(idx % w, idx / w));
  std::reverse(path.waypoints.begin(), path.waypoints.end());
  path.total_length = cost[goal_idx];
  return path;
}

WorldPoint next_subgoal(const GlobalPath& path, const WorldPoint& pose,
                        double lookahead) {
  if (path.empty()) throw std::runtime_error("next_subgoal: empty path");
  size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < path.waypoints.size(); ++i) {
    const double d = distance(path.waypoints[i], pose);
    if (d < best) {
      best = d;
      nearest = i;
    }
  }
  double arc = 0.0;
  for (size_t i = nearest + 1; i < path.waypoints.size(); ++i) {
    arc += distance(path.waypoints[i - 1], path.waypoints[i]);
    if (arc >= lookahead) return path.waypoints[i];
  }
  return path.waypoints.back();
}

double raycast_grid(const OccupancyGrid& grid, double x, double y,
                    double angle, double max_range) {
  int ix, iy;
  if (!grid.world_to_grid({x, y}, ix, iy)) return 0.0;
  if (grid.blocked(ix, iy)) return 0.0;

  const double dx = std::cos(angle), dy = std::sin(angle);
  const double res = grid.resolution;
  const int step_x = dx > 0 ? 1 : -1;
  const int step_y = dy > 0 ? 1 : -1;

  // Distance along the ray to the next vertical / horizontal cell boundary.
  const double inf = std::numeric_limits<double>::infinity();
  const double cell_x = grid.origin.x + ix * res;
  const double cell_y = grid.origin.y + iy * res;
  double t_max_x = dx != 0.0
                       ? ((dx > 0 ? cell_x + res - x : cell_x - x) / dx)
                       : inf;
  double t_max_y = dy != 0.0
                       ? ((dy > 0 ? cell_y + res - y : cell_y - y) / dy)
                       : inf;
  const double t_delta_x = dx != 0.0 ? res / std::abs(dx) : inf;
  const double t_delta_y = dy != 0.0 ? res / std::abs(dy) : inf;

  while (true) {
    double t;
    if (t_max_x < t_max_y) {
      t = t_max_x;
      t_max_x += t_delta_x;
      ix += step_x;
    } else {
      t = t_max_y;
      t_max_y += t_delta_y;
      iy += step_y;
    }
    if (t >= max_range) return max_range;
    if (!grid.in_bounds(ix, iy)) return max_range;
    if (grid.blocked(ix, iy)) return t;
  }
}

std::optional<WorldPoint> nearest_clear_cell(const OccupancyGrid& grid,
                                             const ClearanceField& clearance,
                                             const WorldPoint& p,
                                             double min_clearance) {
  int sx, sy;
  if (!grid.world_to_grid(p, sx, sy)) {
    sx = std::clamp(sx, 0, grid.width - 1);
    sy = std::clamp(sy, 0, grid.height - 1);
  }
  if (clearance.at(sx, sy) >= min_clearance) return grid.grid_to_world(sx, sy);

  std::vector<uint8_t> seen(static_cast<size_t>(grid.width) * grid.height, 0);
  std::deque<std::pair<int, int>> queue{{sx, sy}};
  seen[sy * grid.width + sx] = 1;
  static const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static const int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  while (!queue.empty()) {
    const auto [ix, iy] = queue.front();
    queue.pop_front();
    if (clearance.at(ix, iy) >= min_clearance) return grid.grid_to_world(ix, iy);
    for (int k = 0; k < 8; ++k) {
      const int nx = ix + dx8[k], ny = iy + dy8[k];
      if (!grid.in_bounds(nx, ny) || seen[ny * grid.width + nx]) continue;
      seen[ny * grid.width + nx] = 1;
      queue.emplace_back(nx, ny);
    }
  }
  return std::nullopt;
}

}  // namespace crowdnav
