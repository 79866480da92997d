#include "crowdnav/mcl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crowdnav {

ParticleFilter::ParticleFilter(const OccupancyGrid* grid, MclParams params,
                               uint64_t seed)
    : grid_(grid), params_(params), rng_(seed) {
  belief_.particles.assign(params_.particle_count,
                           {Pose{}, 1.0 / params_.particle_count});
}

Pose ParticleFilter::sample_free_pose() {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Pose p;
    p.x = rng_.uniform(grid_->origin.x, grid_->origin.x + grid_->width_m());
    p.y = rng_.uniform(grid_->origin.y, grid_->origin.y + grid_->height_m());
    p.theta = rng_.uniform(-M_PI, M_PI);
    int ix, iy;
    if (grid_->world_to_grid({p.x, p.y}, ix, iy) && !grid_->blocked(ix, iy))
      return p;
  }
  throw std::runtime_error("mcl: no free space to sample particles");
}

void ParticleFilter::predict(const Pose& odom_delta) {
  if (!finite(odom_delta))
    throw std::runtime_error("mcl predict: non-finite odometry delta");
  const double trans = std::hypot(odom_delta.x, odom_delta.y);
  const double rot = std::abs(odom_delta.theta);
  const double trans_std = params_.alpha[0] * trans + params_.alpha[1] * rot;
  const double rot_std = params_.alpha[2] * rot + params_.alpha[3] * trans;

  for (auto& p : belief_.particles) {
    double dx = odom_delta.x, dy = odom_delta.y, dth = odom_delta.theta;
    if (trans_std > 0.0) {
      const double noisy = trans + rng_.normal() * trans_std;
      if (trans > 1e-9) {
        dx *= noisy / trans;
        dy *= noisy / trans;
      } else {
        // no translation direction to scale: push along the particle heading
        dx += noisy;
      }
    }
    if (rot_std > 0.0) dth += rng_.normal() * rot_std;
    p.pose = compose(p.pose, {dx, dy, dth});
  }
}

bool ParticleFilter::update(const LaserScan& scan) {
  const int n = belief_.count();
  const double max_range = scan.max_range;
  std::vector<double> log_w(n);
  double max_log = -std::numeric_limits<double>::infinity();

  for (int i = 0; i < n; ++i) {
    const Pose& pose = belief_.particles[i].pose;
    double lw = std::log(std::max(belief_.particles[i].weight, 1e-300));
    int ix, iy;
    if (!grid_->world_to_grid({pose.x, pose.y}, ix, iy) || grid_->blocked(ix, iy)) {
      lw = -std::numeric_limits<double>::infinity();
    } else {
      for (size_t b = 0; b < scan.ranges.size(); b += params_.beam_step) {
        const double measured = scan.ranges[b];
        const double angle = pose.theta + b * scan.angle_increment;
        const double expected =
            raycast_grid(*grid_, pose.x, pose.y, angle, max_range);
        const double err = measured - expected;
        double p = params_.z_hit *
                       std::exp(-0.5 * err * err /
                                (params_.sigma_hit * params_.sigma_hit)) /
                       (params_.sigma_hit * std::sqrt(2.0 * M_PI)) +
                   params_.z_rand / max_range;
        if (measured >= max_range - 1e-9) p += params_.z_max;
        lw += std::log(p);
      }
    }
    log_w[i] = lw;
    max_log = std::max(max_log, lw);
  }

  if (!std::isfinite(max_log)) {
    for (auto& p : belief_.particles) p.weight = 1.0 / n;
    underflow_ = true;
    return false;
  }

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(log_w[i] - max_log);
    belief_.particles[i].weight = w;
    total += w;
  }
  if (total <= 0.0 || !std::isfinite(total)) {
    for (auto& p : belief_.particles) p.weight = 1.0 / n;
    underflow_ = true;
    return false;
  }
  for (auto& p : belief_.particles) p.weight /= total;
  return true;
}

ParticleBelief systematic_resample(const ParticleBelief& belief, int n_out,
                                   double u) {
  ParticleBelief out;
  out.particles.reserve(n_out);
  double cum = belief.particles.empty() ? 0.0 : belief.particles[0].weight;
  size_t idx = 0;
  for (int k = 0; k < n_out; ++k) {
    const double target = u + static_cast<double>(k) / n_out;
    while (cum < target && idx + 1 < belief.particles.size())
      cum += belief.particles[++idx].weight;
    out.particles.push_back({belief.particles[idx].pose, 1.0 / n_out});
  }
  return out;
}

void ParticleFilter::resample() {
  const int n = belief_.count();
  double sum_sq = 0.0;
  for (const auto& p : belief_.particles) sum_sq += p.weight * p.weight;
  const double ess = 1.0 / std::max(sum_sq, 1e-300);
  if (ess >= n / 2.0) return;

  belief_ = systematic_resample(belief_, n, rng_.uniform() / n);

  if (underflow_) {
    const int k = std::max(1, static_cast<int>(params_.reinject_fraction * n));
    for (int i = 0; i < k; ++i) {
      belief_.particles[i].pose = sample_free_pose();
      belief_.particles[i].weight = 1.0 / n;
    }
    underflow_ = false;
  }
}

void ParticleFilter::reseed(const Pose& pose, double spread) {
  if (spread <= 0.0) throw std::runtime_error("mcl reseed: spread must be positive");
  int ix, iy;
  if (!grid_->world_to_grid({pose.x, pose.y}, ix, iy) || grid_->blocked(ix, iy))
    throw std::runtime_error("mcl reseed: pose is outside free space");
  const int n = belief_.count();
  for (auto& p : belief_.particles) {
    Pose sample;
    bool placed = false;
    for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
      sample.x = pose.x + rng_.normal() * spread;
      sample.y = pose.y + rng_.normal() * spread;
      sample.theta = wrap_angle(pose.theta + rng_.normal() * spread);
      int jx, jy;
      placed = grid_->world_to_grid({sample.x, sample.y}, jx, jy) &&
               !grid_->blocked(jx, jy);
    }
    p.pose = placed ? sample : pose;
    p.weight = 1.0 / n;
  }
  gate_trans_ = gate_rot_ = 0.0;
}

bool ParticleFilter::motion_gate(const Pose& odom_delta) {
  gate_trans_ += std::hypot(odom_delta.x, odom_delta.y);
  gate_rot_ += std::abs(odom_delta.theta);
  if (gate_trans_ >= params_.update_min_trans ||
      gate_rot_ >= params_.update_min_rot) {
    gate_trans_ = gate_rot_ = 0.0;
    return true;
  }
  return false;
}

PoseEstimate estimate(const ParticleBelief& belief) {
  PoseEstimate est;
  double sx = 0.0, sy = 0.0, ssin = 0.0, scos = 0.0;
  for (const auto& p : belief.particles) {
    sx += p.weight * p.pose.x;
    sy += p.weight * p.pose.y;
    ssin += p.weight * std::sin(p.pose.theta);
    scos += p.weight * std::cos(p.pose.theta);
  }
  est.mean = {sx, sy, std::atan2(ssin, scos)};

  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : belief.particles) {
    const Eigen::Vector2d d(p.pose.x - sx, p.pose.y - sy);
    cov += p.weight * d * d.transpose();
  }
  est.positional_covariance = cov;
  est.uncertainty = cov.trace();
  return est;
}

}  // namespace crowdnav
