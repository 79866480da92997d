#pragma once

#include <Eigen/Dense>
#include <vector>

#include "crowdnav/geometry.hpp"
#include "crowdnav/grid_map.hpp"
#include "crowdnav/rng.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

struct Particle {
  Pose pose;
  double weight = 0.0;
};

struct ParticleBelief {
  std::vector<Particle> particles;
  int count() const { return static_cast<int>(particles.size()); }
};

struct PoseEstimate {
  Pose mean;
  Eigen::Matrix2d positional_covariance = Eigen::Matrix2d::Zero();
  double uncertainty = 0.0;  // trace of positional covariance, m^2
};

struct MclParams {
  int particle_count = 500;
  int beam_step = 10;  // likelihood uses every beam_step-th beam
  double z_hit = 0.8;
  double z_rand = 0.15;
  double z_max = 0.05;
  double sigma_hit = 0.1;
  double alpha[4] = {0.05, 0.01, 0.05, 0.01};  // prediction noise, as odometry
  double reinject_fraction = 0.05;
  // updates are skipped until the robot has moved this much
  double update_min_trans = 0.01;
  double update_min_rot = 0.005;
};

/// Weighted mean (circular in heading) and positional covariance of a belief.
/// Weights must be normalized.
PoseEstimate estimate(const ParticleBelief& belief);

/// Monte-Carlo localization against the static map. The beam likelihood
/// deliberately raycasts the static grid only, so pedestrian-occluded scans
/// inflate the covariance instead of being explained away.
class ParticleFilter {
 public:
  ParticleFilter(const OccupancyGrid* grid, MclParams params, uint64_t seed);

  /// Advance every particle by the odometry delta (relative motion in the
  /// previous robot frame) perturbed with the motion-noise model.
  void predict(const Pose& odom_delta);

  /// Beam-likelihood weight update. Returns false when the total weight
  /// underflowed (weights were reset to uniform and the flag latched).
  bool update(const LaserScan& scan);

  /// Systematic resampling, triggered only when ESS < N/2. After an
  /// underflow, a fraction of particles is reinjected uniformly over Free.
  void resample();

  /// Redraw all particles around `pose` (Gaussian position and heading,
  /// clipped to Free space). Throws if the pose cell is not Free.
  void reseed(const Pose& pose, double spread);

  PoseEstimate estimate() const { return crowdnav::estimate(belief_); }

  const ParticleBelief& belief() const { return belief_; }
  ParticleBelief& belief() { return belief_; }
  bool underflow_flagged() const { return underflow_; }

  /// Accumulated-motion gate for the update/resample pair.
  bool motion_gate(const Pose& odom_delta);

  const MclParams& params() const { return params_; }

 private:
  Pose sample_free_pose();

  const OccupancyGrid* grid_;
  MclParams params_;
  Rng rng_;
  ParticleBelief belief_;
  bool underflow_ = false;
  double gate_trans_ = 0.0;
  double gate_rot_ = 0.0;
};

/// Systematic (low-variance) resampling core with an explicit offset
/// u in [0, 1/n_out); exposed for enumeration in tests.
ParticleBelief systematic_resample(const ParticleBelief& belief, int n_out,
                                   double u);

}  // namespace crowdnav
