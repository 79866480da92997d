#include "crowdnav/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace crowdnav {

namespace {

int conv_out_len(int in_len, const ConvSpec& c) {
  const int pad = c.kernel / 2;
  return (in_len + 2 * pad - c.kernel) / c.stride + 1;
}

void xavier_init(LinearParam& p, int fan_in, int fan_out, Rng& rng,
                 double gain = 1.0) {
  const double s = gain * std::sqrt(6.0 / (fan_in + fan_out));
  p.W.resize(fan_out, fan_in);
  for (int r = 0; r < p.W.rows(); ++r)
    for (int c = 0; c < p.W.cols(); ++c) p.W(r, c) = rng.uniform(-s, s);
  p.b = Eigen::VectorXd::Zero(fan_out);
}

}  // namespace

ActorCriticNet::ActorCriticNet(NetConfig cfg, uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  int channels = cfg_.stack;
  int length = cfg_.beams;
  for (const auto& spec : cfg_.convs) {
    LinearParam p;
    xavier_init(p, channels * spec.kernel, spec.out_channels, rng);
    conv_.push_back(std::move(p));
    length = conv_out_len(length, spec);
    conv_pos_.push_back(length);
    channels = spec.out_channels;
  }
  int width = conv_flat_dim() + cfg_.extra_inputs;
  for (int out : cfg_.trunk) {
    LinearParam p;
    xavier_init(p, width, out, rng);
    trunk_.push_back(std::move(p));
    width = out;
  }
  // Small initial policy head keeps early actions near zero mean.
  xavier_init(mean_head_, width, cfg_.action_dim, rng, 0.01);
  xavier_init(value_head_, width, 1, rng);
  log_std_ = Eigen::VectorXd::Constant(cfg_.action_dim, cfg_.init_log_std);
}

int ActorCriticNet::conv_flat_dim() const {
  if (conv_.empty()) return cfg_.beams * cfg_.stack;
  return cfg_.convs.back().out_channels * conv_pos_.back();
}

int ActorCriticNet::param_count() const {
  int n = 0;
  for (const auto& p : conv_) n += p.W.size() + p.b.size();
  for (const auto& p : trunk_) n += p.W.size() + p.b.size();
  n += mean_head_.W.size() + mean_head_.b.size();
  n += value_head_.W.size() + value_head_.b.size();
  n += log_std_.size();
  return n;
}

void ActorCriticNet::conv_forward(int layer, const Eigen::MatrixXd& A, int B,
                                  Eigen::MatrixXd* cols,
                                  Eigen::MatrixXd* act) const {
  const ConvSpec& spec = cfg_.convs[layer];
  const int in_len = layer == 0 ? cfg_.beams : conv_pos_[layer - 1];
  const int in_ch = layer == 0 ? cfg_.stack : cfg_.convs[layer - 1].out_channels;
  const int P = conv_pos_[layer];
  const int pad = spec.kernel / 2;

  cols->setZero(static_cast<Eigen::Index>(B) * P, in_ch * spec.kernel);
  for (int i = 0; i < B; ++i) {
    for (int p = 0; p < P; ++p) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * P + p;
      for (int c = 0; c < in_ch; ++c) {
        for (int t = 0; t < spec.kernel; ++t) {
          const int q = p * spec.stride + t - pad;
          if (q < 0 || q >= in_len) continue;
          (*cols)(row, c * spec.kernel + t) = A(i, c * in_len + q);
        }
      }
    }
  }
  *act = ((*cols) * conv_[layer].W.transpose()).rowwise() +
         conv_[layer].b.transpose();
  *act = act->array().tanh();
}

void ActorCriticNet::forward(const Eigen::MatrixXd& X,
                             ForwardCache* cache) const {
  const int B = static_cast<int>(X.rows());
  if (X.cols() != cfg_.input_dim())
    throw std::runtime_error("net forward: bad input width");
  cache->input = X;
  cache->conv_cols.resize(conv_.size());
  cache->conv_act.resize(conv_.size());

  // scan block is channel-major already: stack scans concatenated
  Eigen::MatrixXd A = X.leftCols(cfg_.beams * cfg_.stack);
  for (size_t l = 0; l < conv_.size(); ++l) {
    conv_forward(static_cast<int>(l), A, B, &cache->conv_cols[l],
                 &cache->conv_act[l]);
    const int P = conv_pos_[l];
    const int out_ch = cfg_.convs[l].out_channels;
    A.resize(B, static_cast<Eigen::Index>(out_ch) * P);
    for (int i = 0; i < B; ++i)
      for (int c = 0; c < out_ch; ++c)
        for (int p = 0; p < P; ++p)
          A(i, c * P + p) = cache->conv_act[l](static_cast<Eigen::Index>(i) * P + p, c);
  }

  cache->trunk_in.resize(B, A.cols() + cfg_.extra_inputs);
  cache->trunk_in << A, X.rightCols(cfg_.extra_inputs);

  cache->trunk_act.resize(trunk_.size());
  const Eigen::MatrixXd* in = &cache->trunk_in;
  for (size_t l = 0; l < trunk_.size(); ++l) {
    cache->trunk_act[l] =
        ((*in) * trunk_[l].W.transpose()).rowwise() + trunk_[l].b.transpose();
    cache->trunk_act[l] = cache->trunk_act[l].array().tanh();
    in = &cache->trunk_act[l];
  }
  cache->mean = ((*in) * mean_head_.W.transpose()).rowwise() +
                mean_head_.b.transpose();
  cache->value = ((*in) * value_head_.W.transpose()).rowwise() +
                 value_head_.b.transpose();
}

void ActorCriticNet::backward(const ForwardCache& cache,
                              const Eigen::MatrixXd& dmean,
                              const Eigen::VectorXd& dvalue,
                              Eigen::VectorXd* grads) const {
  const int B = static_cast<int>(cache.input.rows());

  // Walk the flattened layout in order, remembering each block's offset.
  std::vector<int> offsets;
  int off = 0;
  auto reserve = [&](const LinearParam& p) {
    offsets.push_back(off);
    off += static_cast<int>(p.W.size() + p.b.size());
  };
  for (const auto& p : conv_) reserve(p);
  for (const auto& p : trunk_) reserve(p);
  reserve(mean_head_);
  reserve(value_head_);

  auto add_linear_grads = [&](int block, const LinearParam& p,
                              const Eigen::MatrixXd& dpre,
                              const Eigen::MatrixXd& in) {
    const Eigen::MatrixXd dW = dpre.transpose() * in;
    const Eigen::VectorXd db = dpre.colwise().sum();
    int o = offsets[block];
    for (int r = 0; r < dW.rows(); ++r)
      for (int c = 0; c < dW.cols(); ++c) (*grads)(o++) += dW(r, c);
    for (int r = 0; r < db.size(); ++r) (*grads)(o++) += db(r);
  };

  const Eigen::MatrixXd& top =
      trunk_.empty() ? cache.trunk_in : cache.trunk_act.back();
  const int n_conv = static_cast<int>(conv_.size());
  const int n_trunk = static_cast<int>(trunk_.size());

  add_linear_grads(n_conv + n_trunk, mean_head_, dmean, top);
  Eigen::MatrixXd dvalue_m = dvalue;  // B x 1
  add_linear_grads(n_conv + n_trunk + 1, value_head_, dvalue_m, top);

  Eigen::MatrixXd dtop = dmean * mean_head_.W + dvalue_m * value_head_.W;

  for (int l = n_trunk - 1; l >= 0; --l) {
    const Eigen::MatrixXd& act = cache.trunk_act[l];
    const Eigen::MatrixXd dpre =
        dtop.array() * (1.0 - act.array().square());
    const Eigen::MatrixXd& in = l == 0 ? cache.trunk_in : cache.trunk_act[l - 1];
    add_linear_grads(n_conv + l, trunk_[l], dpre, in);
    dtop = dpre * trunk_[l].W;
  }

  // Split the trunk-input gradient: conv part flows back through the convs.
  Eigen::MatrixXd dA = dtop.leftCols(conv_flat_dim());
  for (int l = n_conv - 1; l >= 0; --l) {
    const ConvSpec& spec = cfg_.convs[l];
    const int P = conv_pos_[l];
    const int out_ch = spec.out_channels;
    const int in_len = l == 0 ? cfg_.beams : conv_pos_[l - 1];
    const int in_ch = l == 0 ? cfg_.stack : cfg_.convs[l - 1].out_channels;
    const int pad = spec.kernel / 2;

    Eigen::MatrixXd dact(static_cast<Eigen::Index>(B) * P, out_ch);
    for (int i = 0; i < B; ++i)
      for (int c = 0; c < out_ch; ++c)
        for (int p = 0; p < P; ++p)
          dact(static_cast<Eigen::Index>(i) * P + p, c) = dA(i, c * P + p);

    const Eigen::MatrixXd dpre =
        dact.array() * (1.0 - cache.conv_act[l].array().square());
    add_linear_grads(l, conv_[l], dpre, cache.conv_cols[l]);

    if (l == 0) break;  // input gradient not needed
    const Eigen::MatrixXd dcols = dpre * conv_[l].W;
    dA.setZero(B, static_cast<Eigen::Index>(in_ch) * in_len);
    for (int i = 0; i < B; ++i)
      for (int p = 0; p < P; ++p) {
        const Eigen::Index row = static_cast<Eigen::Index>(i) * P + p;
        for (int c = 0; c < in_ch; ++c)
          for (int t = 0; t < spec.kernel; ++t) {
            const int q = p * spec.stride + t - pad;
            if (q < 0 || q >= in_len) continue;
            dA(i, c * in_len + q) += dcols(row, c * spec.kernel + t);
          }
      }
  }
}

namespace {

void flatten_linear(const LinearParam& p, Eigen::VectorXd& out, int& off) {
  for (int r = 0; r < p.W.rows(); ++r)
    for (int c = 0; c < p.W.cols(); ++c) out(off++) = p.W(r, c);
  for (int r = 0; r < p.b.size(); ++r) out(off++) = p.b(r);
}

void unflatten_linear(LinearParam& p, const Eigen::VectorXd& in, int& off) {
  for (int r = 0; r < p.W.rows(); ++r)
    for (int c = 0; c < p.W.cols(); ++c) p.W(r, c) = in(off++);
  for (int r = 0; r < p.b.size(); ++r) p.b(r) = in(off++);
}

}  // namespace

Eigen::VectorXd ActorCriticNet::flatten_params() const {
  Eigen::VectorXd out(param_count());
  int off = 0;
  for (const auto& p : conv_) flatten_linear(p, out, off);
  for (const auto& p : trunk_) flatten_linear(p, out, off);
  flatten_linear(mean_head_, out, off);
  flatten_linear(value_head_, out, off);
  for (int i = 0; i < log_std_.size(); ++i) out(off++) = log_std_(i);
  return out;
}

void ActorCriticNet::set_params(const Eigen::VectorXd& flat) {
  if (flat.size() != param_count())
    throw std::runtime_error("set_params: size mismatch");
  int off = 0;
  for (auto& p : conv_) unflatten_linear(p, flat, off);
  for (auto& p : trunk_) unflatten_linear(p, flat, off);
  unflatten_linear(mean_head_, flat, off);
  unflatten_linear(value_head_, flat, off);
  for (int i = 0; i < log_std_.size(); ++i) log_std_(i) = flat(off++);
}

int ActorCriticNet::log_std_offset() const {
  return param_count() - static_cast<int>(log_std_.size());
}

void ActorCriticNet::zero_heads() {
  mean_head_.W.setZero();
  mean_head_.b.setZero();
  value_head_.W.setZero();
  value_head_.b.setZero();
}

// ---------------------------------------------------------------------------
// checkpoint io

namespace {

constexpr char kMagic[8] = {'C', 'R', 'O', 'W', 'D', 'N', 'A', 'V'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ActorCriticNet& net,
                     const std::string& config_json, int64_t train_steps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

  nlohmann::json header;
  const auto& cfg = net.config();
  header["beams"] = cfg.beams;
  header["stack"] = cfg.stack;
  nlohmann::json convs = nlohmann::json::array();
  for (const auto& c : cfg.convs)
    convs.push_back({{"out", c.out_channels}, {"k", c.kernel}, {"stride", c.stride}});
  header["convs"] = convs;
  header["trunk"] = cfg.trunk;
  header["extra_inputs"] = cfg.extra_inputs;
  header["action_dim"] = cfg.action_dim;
  header["train_steps"] = train_steps;
  if (!config_json.empty())
    header["train_config"] = nlohmann::json::parse(config_json);
  const std::string hs = header.dump();

  out.write(kMagic, 8);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(hs.size()));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  const Eigen::VectorXd flat = net.flatten_params();
  write_u32(out, static_cast<uint32_t>(flat.size()));
  std::vector<float> f32(flat.size());
  for (int i = 0; i < flat.size(); ++i) f32[i] = static_cast<float>(flat(i));
  out.write(reinterpret_cast<const char*>(f32.data()),
            static_cast<std::streamsize>(f32.size() * sizeof(float)));
}

ActorCriticNet load_checkpoint(const std::string& path, int64_t* train_steps,
                               std::string* config_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version");

  const uint32_t hlen = read_u32(in);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  const auto header = nlohmann::json::parse(hs);

  NetConfig cfg;
  cfg.beams = header.at("beams");
  cfg.stack = header.at("stack");
  cfg.convs.clear();
  for (const auto& c : header.at("convs"))
    cfg.convs.push_back({c.at("out"), c.at("k"), c.at("stride")});
  cfg.trunk = header.at("trunk").get<std::vector<int>>();
  cfg.extra_inputs = header.at("extra_inputs");
  cfg.action_dim = header.at("action_dim");

  ActorCriticNet net(cfg, 0);
  const uint32_t count = read_u32(in);
  if (static_cast<int>(count) != net.param_count())
    throw std::runtime_error("checkpoint parameter count mismatch");
  std::vector<float> f32(count);
  in.read(reinterpret_cast<char*>(f32.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  Eigen::VectorXd flat(count);
  for (uint32_t i = 0; i < count; ++i) flat(i) = f32[i];
  net.set_params(flat);

  if (train_steps) *train_steps = header.value("train_steps", int64_t{0});
  if (config_json && header.contains("train_config"))
    *config_json = header["train_config"].dump();
  return net;
}

}  // namespace crowdnav
