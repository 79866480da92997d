#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "crowdnav/rng.hpp"

namespace crowdnav {

struct ConvSpec {
  int out_channels = 8;
  int kernel = 5;
  int stride = 2;
};

struct NetConfig {
  int beams = 360;
  int stack = 3;  // stacked scans form the conv input channels
  std::vector<ConvSpec> convs = {{8, 5, 2}, {8, 3, 2}};
  std::vector<int> trunk = {256, 128};
  int extra_inputs = 4;  // v, w, goal distance, goal bearing
  int action_dim = 2;
  double init_log_std = -0.5;

  int input_dim() const { return beams * stack + extra_inputs; }
};

struct LinearParam {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
};

struct ForwardCache {
  Eigen::MatrixXd input;                            // B x D
  std::vector<Eigen::MatrixXd> conv_cols;           // flattened im2col per layer, (B*P) x (in_ch*k)
  std::vector<Eigen::MatrixXd> conv_act;            // (B*P) x out_ch, post-tanh
  Eigen::MatrixXd trunk_in;                         // B x (conv_flat + extras)
  std::vector<Eigen::MatrixXd> trunk_act;           // B x width, post-tanh
  Eigen::MatrixXd mean;                             // B x action_dim
  Eigen::VectorXd value;                            // B
};

/// Actor-critic network: a small 1-D conv stage over the stacked scans, a
/// tanh MLP trunk, linear mean/value heads, and a state-independent log-std.
/// Double precision with hand-written backprop so gradients can be checked
/// against finite differences exactly.
class ActorCriticNet {
 public:
  ActorCriticNet(NetConfig cfg, uint64_t seed);

  const NetConfig& config() const { return cfg_; }
  int param_count() const;

  /// Batched forward pass; rows of X are observation vectors.
  void forward(const Eigen::MatrixXd& X, ForwardCache* cache) const;

  /// Backprop of dL/dmean and dL/dvalue into flattened parameter gradients
  /// (accumulated into grads, which must be param_count()-sized and zeroed by
  /// the caller; the log-std block is left untouched — the loss owns it).
  void backward(const ForwardCache& cache, const Eigen::MatrixXd& dmean,
                const Eigen::VectorXd& dvalue, Eigen::VectorXd* grads) const;

  Eigen::VectorXd flatten_params() const;
  void set_params(const Eigen::VectorXd& flat);
  /// Index of the log-std block inside the flattened parameter vector.
  int log_std_offset() const;

  void zero_heads();  // zeroes mean/value head weights and biases

  const Eigen::VectorXd& log_std() const { return log_std_; }
  Eigen::VectorXd& log_std() { return log_std_; }

  // conv geometry
  int conv_positions(int layer) const { return conv_pos_[layer]; }
  int conv_flat_dim() const;

 private:
  void conv_forward(int layer, const Eigen::MatrixXd& channels_in, int B,
                    Eigen::MatrixXd* cols, Eigen::MatrixXd* act) const;

  NetConfig cfg_;
  std::vector<LinearParam> conv_;
  std::vector<LinearParam> trunk_;
  LinearParam mean_head_;
  LinearParam value_head_;
  Eigen::VectorXd log_std_;
  std::vector<int> conv_pos_;  // output length per conv layer
};

/// Versioned binary checkpoint: parameters as little-endian f32 plus a JSON
/// header carrying the architecture, the train-config snapshot, and the
/// training-step count.
void save_checkpoint(const std::string& path, const ActorCriticNet& net,
                     const std::string& config_json, int64_t train_steps);
ActorCriticNet load_checkpoint(const std::string& path,
                               int64_t* train_steps = nullptr,
                               std::string* config_json = nullptr);

}  // namespace crowdnav
