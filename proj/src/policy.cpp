#include "crowdnav/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crowdnav {

Eigen::VectorXd Observation::to_vector() const {
  Eigen::VectorXd out(scans.size() + 4);
  out << scans, v, w, goal_dist, goal_bearing;
  return out;
}

bool Observation::is_finite() const {
  return scans.allFinite() && std::isfinite(v) && std::isfinite(w) &&
         std::isfinite(goal_dist) && std::isfinite(goal_bearing);
}

void ScanStack::push(const LaserScan& scan) {
  if (scans_.empty())
    for (int i = 0; i < stack_ - 1; ++i) scans_.push_back(scan);
  scans_.push_back(scan);
  while (static_cast<int>(scans_.size()) > stack_) scans_.pop_front();
}

Observation make_observation(const ScanStack& stack, double v, double w,
                             const WorldPoint& goal, const Pose& pose,
                             double max_range) {
  if (stack.empty()) throw std::runtime_error("make_observation: no scans");
  const auto& scans = stack.scans();
  const int beams = static_cast<int>(scans.front().ranges.size());

  Observation obs;
  obs.scans.resize(static_cast<Eigen::Index>(stack.stack()) * beams);
  int off = 0;
  for (const auto& scan : scans)
    for (int b = 0; b < beams; ++b)
      obs.scans(off++) = std::clamp(scan.ranges[b] / max_range, 0.0, 1.0);

  obs.v = v;
  obs.w = w;
  const WorldPoint rel = to_frame(pose, goal);
  const double dist = std::hypot(rel.x, rel.y);
  obs.goal_dist = std::min(dist, max_range) / max_range;
  obs.goal_bearing = dist > 1e-12 ? wrap_angle(std::atan2(rel.y, rel.x)) : 0.0;
  return obs;
}

PolicyOutput forward(const ActorCriticNet& net, const Observation& obs) {
  if (!obs.is_finite())
    throw std::runtime_error("policy forward: non-finite observation");
  ForwardCache cache;
  Eigen::MatrixXd X(1, obs.scans.size() + 4);
  X.row(0) = obs.to_vector();
  net.forward(X, &cache);
  PolicyOutput out;
  out.mean = cache.mean.row(0);
  out.log_std = net.log_std();
  out.value = cache.value(0);
  return out;
}

double gaussian_log_prob(const Eigen::Vector2d& raw, const Eigen::Vector2d& mean,
                         const Eigen::VectorXd& log_std) {
  double lp = 0.0;
  for (int j = 0; j < raw.size(); ++j) {
    const double sigma = std::exp(log_std(j));
    const double z = (raw(j) - mean(j)) / sigma;
    lp += -0.5 * z * z - log_std(j) - 0.5 * std::log(2.0 * M_PI);
  }
  return lp;
}

ActionSample sample_action(const ActorCriticNet& net, const Observation& obs,
                           Rng& rng, const ActionLimits& limits) {
  const PolicyOutput out = forward(net, obs);
  ActionSample sample;
  for (int j = 0; j < 2; ++j)
    sample.raw(j) = out.mean(j) + std::exp(out.log_std(j)) * rng.normal();
  sample.log_prob = gaussian_log_prob(sample.raw, out.mean, out.log_std);
  sample.v = std::clamp(sample.raw(0), 0.0, limits.v_max);
  sample.w = std::clamp(sample.raw(1), -limits.w_max, limits.w_max);
  return sample;
}

VelocityCmd mean_action(const ActorCriticNet& net, const Observation& obs,
                        const ActionLimits& limits) {
  const PolicyOutput out = forward(net, obs);
  return {std::clamp(out.mean(0), 0.0, limits.v_max),
          std::clamp(out.mean(1), -limits.w_max, limits.w_max)};
}

double reward(double prev_goal_dist, double new_goal_dist, bool arrived,
              bool collided, double w_cmd, const RewardParams& params) {
  double r = params.progress_gain * (prev_goal_dist - new_goal_dist) -
             params.rotation_penalty * std::abs(w_cmd);
  if (arrived) r += params.arrival_bonus;
  if (collided) r -= params.collision_penalty;
  return r;
}

double value_of_goal(const ActorCriticNet& net, const ScanStack& stack,
                     double v, double w, const WorldPoint& goal,
                     const Pose& pose) {
  const Observation obs = make_observation(stack, v, w, goal, pose);
  return forward(net, obs).value;
}

}  // namespace crowdnav
