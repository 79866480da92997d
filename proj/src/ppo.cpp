#include "crowdnav/ppo.hpp"

#include <cmath>
#include <stdexcept>

namespace crowdnav {

void RolloutBuffer::resize(int horizon, int obs_dim) {
  obs.resize(horizon, obs_dim);
  actions.resize(horizon, 2);
  log_probs.resize(horizon);
  rewards.resize(horizon);
  values.resize(horizon);
  dones.assign(horizon, 0);
}

GaeResult compute_gae(const Eigen::VectorXd& rewards,
                      const Eigen::VectorXd& values,
                      const std::vector<uint8_t>& dones,
                      double bootstrap_value, double gamma, double lam) {
  const int T = static_cast<int>(rewards.size());
  if (values.size() != T || static_cast<int>(dones.size()) != T)
    throw std::runtime_error("compute_gae: length mismatch");

  GaeResult out;
  out.advantages.resize(T);
  out.returns.resize(T);
  double running = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const double next_value =
        dones[t] ? 0.0 : (t + 1 < T ? values(t + 1) : bootstrap_value);
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double delta = rewards(t) + gamma * next_value - values(t);
    running = delta + gamma * lam * not_done * running;
    out.advantages(t) = running;
    out.returns(t) = running + values(t);
  }
  return out;
}

PpoLossStats ppo_loss(const ActorCriticNet& net, const PpoBatch& batch,
                      double clip_eps, double value_coef, double entropy_coef,
                      Eigen::VectorXd* grads_out) {
  const int B = static_cast<int>(batch.obs.rows());
  const int adim = net.config().action_dim;
  ForwardCache cache;
  net.forward(batch.obs, &cache);

  const Eigen::VectorXd& log_std = net.log_std();
  Eigen::VectorXd sigma(adim), inv_var(adim);
  for (int j = 0; j < adim; ++j) {
    sigma(j) = std::exp(log_std(j));
    inv_var(j) = 1.0 / (sigma(j) * sigma(j));
  }

  PpoLossStats stats;
  Eigen::MatrixXd dmean = Eigen::MatrixXd::Zero(B, adim);
  Eigen::VectorXd dvalue = Eigen::VectorXd::Zero(B);
  Eigen::VectorXd dlog_std = Eigen::VectorXd::Zero(adim);

  const double inv_b = 1.0 / B;
  for (int i = 0; i < B; ++i) {
    double logp = 0.0;
    for (int j = 0; j < adim; ++j) {
      const double z = (batch.actions(i, j) - cache.mean(i, j)) / sigma(j);
      logp += -0.5 * z * z - log_std(j) - 0.5 * std::log(2.0 * M_PI);
    }
    const double ratio = std::exp(logp - batch.log_probs_old(i));
    const double adv = batch.advantages(i);
    const double unclipped = ratio * adv;
    const double clipped =
        std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv;
    const double term = std::min(unclipped, clipped);
    stats.policy -= inv_b * term;

    // value regression
    const double verr = cache.value(i) - batch.returns(i);
    stats.value += inv_b * verr * verr;
    dvalue(i) = value_coef * 2.0 * verr * inv_b;

    if (!std::isfinite(term) || !std::isfinite(verr))
      throw std::runtime_error("ppo_loss: non-finite loss at batch index " +
                               std::to_string(i));

    // The clipped branch has zero derivative outside the trust band, so
    // disadvantageous out-of-band elements contribute exactly no gradient.
    const double dterm_dlogp = unclipped <= clipped ? unclipped : 0.0;
    const double dlogp_scale = -inv_b * dterm_dlogp;
    for (int j = 0; j < adim; ++j) {
      const double diff = batch.actions(i, j) - cache.mean(i, j);
      dmean(i, j) = dlogp_scale * diff * inv_var(j);
      dlog_std(j) += dlogp_scale * (diff * diff * inv_var(j) - 1.0);
    }
  }

  double entropy = 0.0;
  for (int j = 0; j < adim; ++j)
    entropy += log_std(j) + 0.5 * std::log(2.0 * M_PI * std::exp(1.0));
  stats.entropy = entropy;
  for (int j = 0; j < adim; ++j) dlog_std(j) -= entropy_coef;

  stats.total = stats.policy + value_coef * stats.value - entropy_coef * entropy;

  if (grads_out) {
    grads_out->setZero(net.param_count());
    net.backward(cache, dmean, dvalue, grads_out);
    const int off = net.log_std_offset();
    for (int j = 0; j < adim; ++j) (*grads_out)(off + j) += dlog_std(j);
  }
  return stats;
}

AdamOptimizer::AdamOptimizer(int n, double lr_, double beta1, double beta2,
                             double eps)
    : lr(lr_), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_ = Eigen::VectorXd::Zero(n);
  v_ = Eigen::VectorXd::Zero(n);
}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grads;
  v_ = beta2_ * v_.array() + (1.0 - beta2_) * grads.array().square();
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -=
      lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
}

}  // namespace crowdnav
