#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "crowdnav/net.hpp"

namespace crowdnav {

/// Fixed-horizon rollout storage for one worker segment.
struct RolloutBuffer {
  Eigen::MatrixXd obs;       // T x D
  Eigen::MatrixXd actions;   // T x 2, pre-clamp raw samples
  Eigen::VectorXd log_probs; // behavior-policy log densities
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  std::vector<uint8_t> dones;
  double bootstrap_value = 0.0;  // V(s_T) for the truncated tail

  void resize(int horizon, int obs_dim);
  int size() const { return static_cast<int>(rewards.size()); }
};

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// Eq. 2 advantages by backward recursion, truncated at episode boundaries
/// (value treated as 0 past a done); returns = advantages + values.
GaeResult compute_gae(const Eigen::VectorXd& rewards,
                      const Eigen::VectorXd& values,
                      const std::vector<uint8_t>& dones,
                      double bootstrap_value, double gamma, double lam);

/// Minibatch view used by the loss. Advantages must already be normalized.
struct PpoBatch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;
  Eigen::VectorXd log_probs_old;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

struct PpoLossStats {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

/// Clipped-surrogate loss (Eq. 1) plus value regression and entropy bonus.
/// Writes flattened analytic gradients into grads_out when non-null.
/// Throws on a non-finite per-element loss, naming the batch index.
PpoLossStats ppo_loss(const ActorCriticNet& net, const PpoBatch& batch,
                      double clip_eps, double value_coef, double entropy_coef,
                      Eigen::VectorXd* grads_out);

class AdamOptimizer {
 public:
  AdamOptimizer(int n, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads);
  double lr;

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace crowdnav
