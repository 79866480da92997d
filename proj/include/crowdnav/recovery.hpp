#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crowdnav/grid_map.hpp"
#include "crowdnav/policy.hpp"

namespace crowdnav {

struct CornerPoint {
  WorldPoint position;
  double response = 0.0;
};

struct CornerCluster {
  std::vector<int> members;  // indices into the corner list
  WorldPoint centroid;
};

struct RecoveryPoint {
  WorldPoint position;  // post-offset, inside a passage
  double weight = 0.0;  // v_cp, normalized corner count
  int cluster_size = 0;
  int cluster_id = 0;
};

struct HarrisParams {
  double k = 0.04;
  double response_thresh_frac = 0.01;  // of the max response
  int nms_radius = 4;                  // cells
  double smoothing_sigma = 2.0;        // cells
  int border_margin = 6;               // cells skipped at the image border
};

/// Harris corners of the occupancy structure (Occupied/Unknown = 1), with
/// Gaussian-smoothed structure tensor, thresholding and non-max suppression.
std::vector<CornerPoint> detect_corners(const OccupancyGrid& grid,
                                        const HarrisParams& params = {});

/// Seeded K-means (farthest-point init) followed by split refinement: any
/// corner farther than split_distance from its centroid seeds a new cluster
/// until no violations remain. Throws on an empty corner list.
std::vector<CornerCluster> cluster_corners(const std::vector<CornerPoint>& corners,
                                           int k_init, double split_distance);

/// Walk up the clearance field from the centroid until clearance reaches
/// min_clearance or a local maximum. Throws when no sufficiently clear cell
/// is reachable.
WorldPoint offset_to_passage(const WorldPoint& centroid,
                             const OccupancyGrid& grid,
                             const ClearanceField& clearance,
                             double min_clearance);

/// Eq. 4 preference weights: cluster size over total corner count.
std::vector<double> compute_weights(const std::vector<CornerCluster>& clusters);

/// Eq. 6 distance scores: negative goal distance, normalized to sum to -1.
std::vector<double> score_distance(const std::vector<RecoveryPoint>& points,
                                   const WorldPoint& goal);

/// Eq. 5 accessibility: the critic value of each candidate as the goal.
std::vector<double> score_accessibility(const ActorCriticNet& net,
                                        const ScanStack& scans, double v,
                                        double w,
                                        const std::vector<RecoveryPoint>& points,
                                        const Pose& pose_estimate);

struct FusionWeights {
  double rl = 0.5;
  double cp = 0.2;
  double d = 1.0;
};

/// Eq. 7 fused argmax with switching hysteresis: moving off
/// current_selection requires beating it by switch_margin.
int select_recovery_point(const std::vector<double>& v_rl,
                          const std::vector<double>& v_cp,
                          const std::vector<double>& v_d,
                          const FusionWeights& weights,
                          std::optional<int> current_selection = std::nullopt,
                          double switch_margin = 0.0);

struct RecoveryExtractParams {
  HarrisParams harris;
  double split_distance = 3.0;
  int corners_per_cluster = 15;  // K_init = max(2, corners / this)
  double min_clearance = 0.47;   // robot radius + margin
};

/// Full offline pipeline: corners -> clusters -> offsets -> Eq. 4 weights.
std::vector<RecoveryPoint> extract_recovery_points(
    const OccupancyGrid& grid, const ClearanceField& clearance,
    const RecoveryExtractParams& params = {});

void save_recovery_points(const std::string& path,
                          const std::vector<RecoveryPoint>& points);
std::vector<RecoveryPoint> load_recovery_points(const std::string& path);

/// Grayscale map rendered to PPM with recovery points marked for inspection.
void render_recovery_overlay(const std::string& path, const OccupancyGrid& grid,
                             const std::vector<RecoveryPoint>& points);

}  // namespace crowdnav
