#include "crowdnav/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace crowdnav {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable Gaussian blur with zero padding.
void blur(std::vector<double>& img, int w, int h, const std::vector<double>& k) {
  const int radius = static_cast<int>(k.size()) / 2;
  std::vector<double> tmp(img.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= w) continue;
        acc += k[i + radius] * img[y * w + xx];
      }
      tmp[y * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= h) continue;
        acc += k[i + radius] * tmp[yy * w + x];
      }
      img[y * w + x] = acc;
    }
}

}  // namespace

std::vector<CornerPoint> detect_corners(const OccupancyGrid& grid,
                                        const HarrisParams& params) {
  const int w = grid.width, h = grid.height;
  std::vector<double> img(static_cast<size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img[y * w + x] = grid.blocked(x, y) ? 1.0 : 0.0;

  // central-difference gradients
  std::vector<double> ixx(img.size(), 0.0), iyy(img.size(), 0.0),
      ixy(img.size(), 0.0);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      const double gx = 0.5 * (img[y * w + x + 1] - img[y * w + x - 1]);
      const double gy = 0.5 * (img[(y + 1) * w + x] - img[(y - 1) * w + x]);
      ixx[y * w + x] = gx * gx;
      iyy[y * w + x] = gy * gy;
      ixy[y * w + x] = gx * gy;
    }

  const auto kernel = gaussian_kernel(params.smoothing_sigma);
  blur(ixx, w, h, kernel);
  blur(iyy, w, h, kernel);
  blur(ixy, w, h, kernel);

  std::vector<double> response(img.size(), 0.0);
  double max_response = 0.0;
  for (size_t i = 0; i < img.size(); ++i) {
    const double det = ixx[i] * iyy[i] - ixy[i] * ixy[i];
    const double tr = ixx[i] + iyy[i];
    response[i] = det - params.k * tr * tr;
    max_response = std::max(max_response, response[i]);
  }
  if (max_response <= 0.0) return {};

  const double thresh = params.response_thresh_frac * max_response;
  const int m = params.border_margin;
  std::vector<CornerPoint> corners;
  for (int y = m; y < h - m; ++y)
    for (int x = m; x < w - m; ++x) {
      const double r = response[y * w + x];
      if (r < thresh) continue;
      bool is_max = true;
      for (int dy = -params.nms_radius; dy <= params.nms_radius && is_max; ++dy)
        for (int dx = -params.nms_radius; dx <= params.nms_radius; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          const double other = response[yy * w + xx];
          // strict winner on ties with smaller scan index
          if (other > r || (other == r && (dy < 0 || (dy == 0 && dx < 0)))) {
            is_max = false;
            break;
          }
        }
      if (is_max) corners.push_back({grid.grid_to_world(x, y), r});
    }
  return corners;
}

namespace {

void lloyd_iterate(const std::vector<CornerPoint>& corners,
                   std::vector<CornerCluster>& clusters) {
  const int n = static_cast<int>(corners.size());
  const int k = static_cast<int>(clusters.size());
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<std::vector<int>> members(k);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = distance(corners[i].position, clusters[c].centroid);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      members[best].push_back(i);
    }
    bool changed = false;
    for (int c = 0; c < k; ++c) {
      if (members[c] != clusters[c].members) changed = true;
      clusters[c].members = members[c];
      if (!members[c].empty()) {
        WorldPoint mean{0.0, 0.0};
        for (int i : members[c]) {
          mean.x += corners[i].position.x;
          mean.y += corners[i].position.y;
        }
        mean.x /= members[c].size();
        mean.y /= members[c].size();
        clusters[c].centroid = mean;
      }
    }
    if (!changed) break;
  }
  // drop empty clusters
  clusters.erase(std::remove_if(clusters.begin(), clusters.end(),
                                [](const CornerCluster& c) {
                                  return c.members.empty();
                                }),
                 clusters.end());
}

}  // namespace

std::vector<CornerCluster> cluster_corners(const std::vector<CornerPoint>& corners,
                                           int k_init, double split_distance) {
  if (corners.empty())
    throw std::runtime_error("cluster_corners: no corners to cluster");
  const int n = static_cast<int>(corners.size());
  const int k = std::clamp(k_init, 1, n);

  // farthest-point initialization from the first corner
  std::vector<CornerCluster> clusters;
  clusters.push_back({{}, corners[0].position});
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(clusters.size()) < k) {
    int far = 0;
    double far_d = -1.0;
    for (int i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i],
                          distance(corners[i].position, clusters.back().centroid));
      if (min_d[i] > far_d) {
        far_d = min_d[i];
        far = i;
      }
    }
    clusters.push_back({{}, corners[far].position});
  }

  lloyd_iterate(corners, clusters);

  // split refinement: outliers seed new clusters until none remain
  for (int round = 0; round < n; ++round) {
    int worst = -1;
    double worst_d = split_distance;
    for (const auto& cluster : clusters)
      for (int i : cluster.members) {
        const double d = distance(corners[i].position, cluster.centroid);
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
    if (worst < 0) break;
    clusters.push_back({{}, corners[worst].position});
    lloyd_iterate(corners, clusters);
  }
  return clusters;
}

WorldPoint offset_to_passage(const WorldPoint& centroid,
                             const OccupancyGrid& grid,
                             const ClearanceField& clearance,
                             double min_clearance) {
  int ix, iy;
  if (!grid.world_to_grid(centroid, ix, iy)) {
    ix = std::clamp(ix, 0, grid.width - 1);
    iy = std::clamp(iy, 0, grid.height - 1);
  }
  if (clearance.at(ix, iy) >= min_clearance) return centroid;

  // Centroids buried inside structure first hop to the nearest free cell,
  // then climb the clearance field into the passage.
  if (grid.blocked(ix, iy)) {
    const auto free_cell =
        nearest_clear_cell(grid, clearance, grid.grid_to_world(ix, iy),
                           clearance.resolution * 0.5);
    if (!free_cell)
      throw std::runtime_error("offset_to_passage: no free space reachable");
    grid.world_to_grid(*free_cell, ix, iy);
  }

  static const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static const int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  while (clearance.at(ix, iy) < min_clearance) {
    int best_x = ix, best_y = iy;
    double best = clearance.at(ix, iy);
    for (int k = 0; k < 8; ++k) {
      const int nx = ix + dx8[k], ny = iy + dy8[k];
      if (!grid.in_bounds(nx, ny)) continue;
      if (clearance.at(nx, ny) > best) {
        best = clearance.at(nx, ny);
        best_x = nx;
        best_y = ny;
      }
    }
    if (best_x == ix && best_y == iy) break;  // local maximum
    ix = best_x;
    iy = best_y;
  }
  if (clearance.at(ix, iy) < min_clearance)
    throw std::runtime_error(
        "offset_to_passage: no cell with sufficient clearance reachable");
  return grid.grid_to_world(ix, iy);
}

std::vector<double> compute_weights(const std::vector<CornerCluster>& clusters) {
  int total = 0;
  for (const auto& c : clusters) total += static_cast<int>(c.members.size());
  if (total == 0)
    throw std::runtime_error("compute_weights: all clusters are empty");
  std::vector<double> weights;
  weights.reserve(clusters.size());
  for (const auto& c : clusters)
    weights.push_back(static_cast<double>(c.members.size()) / total);
  return weights;
}

std::vector<double> score_distance(const std::vector<RecoveryPoint>& points,
                                   const WorldPoint& goal) {
  if (points.empty()) throw std::runtime_error("score_distance: no points");
  double total = 0.0;
  std::vector<double> d(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    d[i] = distance(points[i].position, goal);
    total += d[i];
  }
  if (total <= 0.0)
    throw std::runtime_error("score_distance: all points coincide with the goal");
  for (auto& v : d) v = -v / total;
  return d;
}

std::vector<double> score_accessibility(const ActorCriticNet& net,
                                        const ScanStack& scans, double v,
                                        double w,
                                        const std::vector<RecoveryPoint>& points,
                                        const Pose& pose_estimate) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points)
    out.push_back(value_of_goal(net, scans, v, w, p.position, pose_estimate));
  return out;
}

int select_recovery_point(const std::vector<double>& v_rl,
                          const std::vector<double>& v_cp,
                          const std::vector<double>& v_d,
                          const FusionWeights& weights,
                          std::optional<int> current_selection,
                          double switch_margin) {
  const size_t n = v_rl.size();
  if (n == 0 || v_cp.size() != n || v_d.size() != n)
    throw std::runtime_error("select_recovery_point: empty or mismatched scores");

  std::vector<double> fused(n);
  for (size_t i = 0; i < n; ++i)
    fused[i] = weights.rl * v_rl[i] + weights.cp * v_cp[i] + weights.d * v_d[i];

  int best = 0;
  for (size_t i = 1; i < n; ++i)
    if (fused[i] > fused[best]) best = static_cast<int>(i);

  if (current_selection && *current_selection >= 0 &&
      *current_selection < static_cast<int>(n) && best != *current_selection &&
      fused[best] <= fused[*current_selection] + switch_margin)
    return *current_selection;
  return best;
}

std::vector<RecoveryPoint> extract_recovery_points(
    const OccupancyGrid& grid, const ClearanceField& clearance,
    const RecoveryExtractParams& params) {
  const auto corners = detect_corners(grid, params.harris);
  if (corners.empty())
    throw std::runtime_error("extract_recovery_points: no corners detected");

  const int k_init =
      std::max(2, static_cast<int>(corners.size()) / params.corners_per_cluster);
  const auto clusters =
      cluster_corners(corners, k_init, params.split_distance);
  const auto weights = compute_weights(clusters);

  std::vector<RecoveryPoint> points;
  points.reserve(clusters.size());
  for (size_t c = 0; c < clusters.size(); ++c) {
    RecoveryPoint p;
    try {
      p.position = offset_to_passage(clusters[c].centroid, grid, clearance,
                                     params.min_clearance);
    } catch (const std::exception& e) {
      throw std::runtime_error("recovery cluster " + std::to_string(c) + ": " +
                               e.what());
    }
    p.weight = weights[c];
    p.cluster_size = static_cast<int>(clusters[c].members.size());
    p.cluster_id = static_cast<int>(c);
    points.push_back(p);
  }
  return points;
}

void save_recovery_points(const std::string& path,
                          const std::vector<RecoveryPoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write recovery points: " + path);
  out << "cluster_id,x,y,cluster_size,weight\n";
  char buf[160];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%d,%.9f\n", p.cluster_id,
                  p.position.x, p.position.y, p.cluster_size, p.weight);
    out << buf;
  }
}

std::vector<RecoveryPoint> load_recovery_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing recovery-point file: " + path);
  std::vector<RecoveryPoint> points;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    RecoveryPoint p;
    std::getline(ss, field, ',');
    p.cluster_id = std::stoi(field);
    std::getline(ss, field, ',');
    p.position.x = std::stod(field);
    std::getline(ss, field, ',');
    p.position.y = std::stod(field);
    std::getline(ss, field, ',');
    p.cluster_size = std::stoi(field);
    std::getline(ss, field, ',');
    p.weight = std::stod(field);
    points.push_back(p);
  }
  if (points.empty())
    throw std::runtime_error("empty recovery-point file: " + path);
  return points;
}

void render_recovery_overlay(const std::string& path, const OccupancyGrid& grid,
                             const std::vector<RecoveryPoint>& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write overlay: " + path);
  std::vector<std::array<uint8_t, 3>> pix(
      static_cast<size_t>(grid.width) * grid.height);
  for (int iy = 0; iy < grid.height; ++iy)
    for (int ix = 0; ix < grid.width; ++ix) {
      uint8_t g = grid.at(ix, iy) == Cell::Free
                      ? 254
                      : (grid.at(ix, iy) == Cell::Occupied ? 0 : 128);
      pix[iy * grid.width + ix] = {g, g, g};
    }
  double max_w = 0.0;
  for (const auto& p : points) max_w = std::max(max_w, p.weight);
  for (const auto& p : points) {
    int cx, cy;
    if (!grid.world_to_grid(p.position, cx, cy)) continue;
    // brighter red = larger preference weight
    const uint8_t red =
        static_cast<uint8_t>(120 + 135 * (max_w > 0 ? p.weight / max_w : 1.0));
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = -3; dx <= 3; ++dx) {
        const int x = cx + dx, y = cy + dy;
        if (!grid.in_bounds(x, y) || std::abs(dx) + std::abs(dy) > 4) continue;
        pix[y * grid.width + x] = {red, 20, 20};
      }
  }
  out << "P6\n" << grid.width << " " << grid.height << "\n255\n";
  for (int img_row = 0; img_row < grid.height; ++img_row) {
    const int iy = grid.height - 1 - img_row;
    for (int ix = 0; ix < grid.width; ++ix) {
      const auto& c = pix[iy * grid.width + ix];
      out.put(static_cast<char>(c[0]));
      out.put(static_cast<char>(c[1]));
      out.put(static_cast<char>(c[2]));
    }
  }
}

}  // namespace crowdnav
