#pragma once

#include <Eigen/Dense>
#include <deque>

#include "crowdnav/geometry.hpp"
#include "crowdnav/net.hpp"
#include "crowdnav/rng.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

/// Policy input: the three most recent scans (normalized), the commanded
/// velocity, and the sub-goal in the robot frame.
struct Observation {
  Eigen::VectorXd scans;  // stack * beams, each /max_range into [0,1], oldest first
  double v = 0.0;
  double w = 0.0;
  double goal_dist = 0.0;     // clipped to max_range, normalized to [0,1]
  double goal_bearing = 0.0;  // rad, (-pi, pi]

  Eigen::VectorXd to_vector() const;
  bool is_finite() const;
};

/// Rolling stack of the most recent scans; pads with the first scan until
/// `stack` scans have arrived.
class ScanStack {
 public:
  explicit ScanStack(int stack = 3) : stack_(stack) {}
  void push(const LaserScan& scan);
  void clear() { scans_.clear(); }
  bool empty() const { return scans_.empty(); }
  const std::deque<LaserScan>& scans() const { return scans_; }
  int stack() const { return stack_; }

 private:
  int stack_;
  std::deque<LaserScan> scans_;
};

Observation make_observation(const ScanStack& stack, double v, double w,
                             const WorldPoint& goal, const Pose& pose,
                             double max_range = 6.0);

struct ActionLimits {
  double v_max = 1.0;
  double w_max = M_PI / 2.0;
};

struct ActionSample {
  double v = 0.0;
  double w = 0.0;
  Eigen::Vector2d raw = Eigen::Vector2d::Zero();  // pre-clamp Gaussian sample
  double log_prob = 0.0;                          // density of the raw sample
};

/// Diagonal-Gaussian log density of `raw` under (mean, log_std).
double gaussian_log_prob(const Eigen::Vector2d& raw, const Eigen::Vector2d& mean,
                         const Eigen::VectorXd& log_std);

struct PolicyOutput {
  Eigen::Vector2d mean;
  Eigen::VectorXd log_std;
  double value = 0.0;
};

/// Single-observation forward pass; throws on non-finite observations.
PolicyOutput forward(const ActorCriticNet& net, const Observation& obs);

ActionSample sample_action(const ActorCriticNet& net, const Observation& obs,
                           Rng& rng, const ActionLimits& limits = {});

/// Deterministic action: the clamped mean.
VelocityCmd mean_action(const ActorCriticNet& net, const Observation& obs,
                        const ActionLimits& limits = {});

struct RewardParams {
  double arrival_bonus = 15.0;
  double collision_penalty = 15.0;
  double progress_gain = 2.5;
  double rotation_penalty = 0.1;
};

double reward(double prev_goal_dist, double new_goal_dist, bool arrived,
              bool collided, double w_cmd, const RewardParams& params = {});

/// Critic value of treating `goal` (world frame) as the policy goal from
/// `pose` under the current scans — Eq. 5's accessibility score.
double value_of_goal(const ActorCriticNet& net, const ScanStack& stack,
                     double v, double w, const WorldPoint& goal,
                     const Pose& pose);

}  // namespace crowdnav
