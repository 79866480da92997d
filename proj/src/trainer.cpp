#include "crowdnav/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace crowdnav {

void TrainConfig::validate() const {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("train config: gamma must be in [0,1]");
  if (lam < 0.0 || lam > 1.0)
    throw std::invalid_argument("train config: lambda must be in [0,1]");
  if (clip_eps <= 0.0)
    throw std::invalid_argument("train config: clip epsilon must be positive");
  if (lr <= 0.0) throw std::invalid_argument("train config: lr must be positive");
  if (epochs < 1 || minibatch < 1 || horizon < 1 || workers < 1)
    throw std::invalid_argument("train config: counts must be >= 1");
  if (total_steps < 1)
    throw std::invalid_argument("train config: total_steps must be >= 1");
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read train config: " + path);
  nlohmann::json j;
  in >> j;

  TrainConfig cfg;
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.lam = j.value("lambda", cfg.lam);
  cfg.clip_eps = j.value("clip_eps", cfg.clip_eps);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.minibatch = j.value("minibatch", cfg.minibatch);
  cfg.total_steps = j.value("total_steps", cfg.total_steps);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.horizon = j.value("horizon", cfg.horizon);
  cfg.workers = j.value("workers", cfg.workers);
  cfg.value_coef = j.value("value_coef", cfg.value_coef);
  cfg.entropy_coef = j.value("entropy_coef", cfg.entropy_coef);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  if (j.contains("phases")) {
    cfg.phases.clear();
    for (const auto& p : j["phases"]) {
      CurriculumPhase phase;
      phase.room_w = p.value("room_w", phase.room_w);
      phase.room_h = p.value("room_h", phase.room_h);
      phase.peds = p.value("peds", phase.peds);
      phase.pillars = p.value("pillars", phase.pillars);
      phase.steps = p.value("steps", phase.steps);
      cfg.phases.push_back(phase);
    }
  }
  if (j.contains("net")) {
    const auto& n = j["net"];
    cfg.net.beams = n.value("beams", cfg.net.beams);
    cfg.net.stack = n.value("stack", cfg.net.stack);
    if (n.contains("trunk")) cfg.net.trunk = n["trunk"].get<std::vector<int>>();
    if (n.contains("convs")) {
      cfg.net.convs.clear();
      for (const auto& c : n["convs"])
        cfg.net.convs.push_back({c.value("out", 8), c.value("k", 5), c.value("stride", 2)});
    }
    cfg.net.init_log_std = n.value("init_log_std", cfg.net.init_log_std);
  }
  cfg.validate();
  return cfg;
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["gamma"] = gamma;
  j["lambda"] = lam;
  j["clip_eps"] = clip_eps;
  j["lr"] = lr;
  j["epochs"] = epochs;
  j["minibatch"] = minibatch;
  j["total_steps"] = total_steps;
  j["seed"] = seed;
  j["horizon"] = horizon;
  j["workers"] = workers;
  j["value_coef"] = value_coef;
  j["entropy_coef"] = entropy_coef;
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : phases_or_default())
    phases.push_back({{"room_w", p.room_w},
                      {"room_h", p.room_h},
                      {"peds", p.peds},
                      {"pillars", p.pillars},
                      {"steps", p.steps}});
  j["phases"] = phases;
  return j.dump();
}

OccupancyGrid build_room_grid(double w_m, double h_m, double resolution,
                              double wall_thickness,
                              const std::vector<WorldPoint>& pillar_centers,
                              double pillar_radius) {
  OccupancyGrid grid;
  grid.resolution = resolution;
  grid.width = static_cast<int>(std::lround(w_m / resolution));
  grid.height = static_cast<int>(std::lround(h_m / resolution));
  grid.origin = {0.0, 0.0};
  grid.cells.assign(static_cast<size_t>(grid.width) * grid.height, Cell::Free);
  const int wall = std::max(1, static_cast<int>(std::lround(wall_thickness / resolution)));
  for (int iy = 0; iy < grid.height; ++iy)
    for (int ix = 0; ix < grid.width; ++ix)
      if (ix < wall || iy < wall || ix >= grid.width - wall ||
          iy >= grid.height - wall)
        grid.at(ix, iy) = Cell::Occupied;
  for (const auto& c : pillar_centers) {
    const int r = static_cast<int>(std::ceil(pillar_radius / resolution));
    int cx, cy;
    if (!grid.world_to_grid(c, cx, cy)) continue;
    for (int iy = cy - r; iy <= cy + r; ++iy)
      for (int ix = cx - r; ix <= cx + r; ++ix) {
        if (!grid.in_bounds(ix, iy)) continue;
        if (distance(grid.grid_to_world(ix, iy), c) <= pillar_radius)
          grid.at(ix, iy) = Cell::Occupied;
      }
  }
  return grid;
}

TrainEnv::TrainEnv(const TrainEnvSpec& spec, uint64_t seed)
    : spec_(spec), rng_(seed), scan_stack_(3) {
  rebuild_map();
}

void TrainEnv::rebuild_map() {
  std::vector<WorldPoint> pillars;
  for (int i = 0; i < spec_.pillars; ++i) {
    const double margin = spec_.wall_thickness + 1.0;
    pillars.push_back({rng_.uniform(margin, spec_.room_w - margin),
                       rng_.uniform(margin, spec_.room_h - margin)});
  }
  grid_ = build_room_grid(spec_.room_w, spec_.room_h, spec_.resolution,
                          spec_.wall_thickness, pillars);
  clearance_ = distance_transform(grid_);
}

WorldPoint TrainEnv::sample_free_point(double min_clearance) {
  for (int attempt = 0; attempt < 2000; ++attempt) {
    WorldPoint p{rng_.uniform(0.0, spec_.room_w), rng_.uniform(0.0, spec_.room_h)};
    if (clearance_.at_world(grid_, p) >= min_clearance) return p;
  }
  throw std::runtime_error("train env: failed to sample a free point");
}

Observation TrainEnv::reset() {
  rebuild_map();
  world_ = std::make_unique<World>(&grid_, &clearance_, spec_.world,
                                   rng_.next_u64());

  const WorldPoint start = sample_free_point(0.5);
  world_->robot.pose = {start.x, start.y, rng_.uniform(-M_PI, M_PI)};
  world_->odom_pose = world_->robot.pose;

  for (int attempt = 0;; ++attempt) {
    goal_ = sample_free_point(0.5);
    const double d = distance(goal_, start);
    if (d >= spec_.goal_min && d <= spec_.goal_max) break;
    if (attempt > 5000) break;
  }

  world_->routes.clear();
  world_->pedestrians.clear();
  for (int i = 0; i < spec_.peds; ++i) {
    PedRoute route;
    route.loop = false;
    route.waypoints.push_back(sample_free_point(0.5));
    route.waypoints.push_back(sample_free_point(0.5));
    world_->routes.push_back(route);

    Pedestrian ped;
    ped.route = i;
    ped.waypoint_index = 1;  // walk toward the far waypoint first
    ped.position = route.waypoints[0];
    ped.preferred_speed = rng_.uniform(0.6, 1.4);
    // keep spawns off the robot
    if (distance(ped.position, start) < 1.0) ped.position = route.waypoints[1];
    world_->pedestrians.push_back(ped);
  }

  steps_in_episode_ = 0;
  prev_goal_dist_ = distance({start.x, start.y}, goal_);
  scan_stack_.clear();
  scan_stack_.push(world_->cast_scan());
  return make_observation(scan_stack_, world_->robot.v, world_->robot.w, goal_,
                          world_->robot.pose, spec_.world.scan_max_range);
}

TrainEnv::StepResult TrainEnv::step(double v, double w) {
  world_->step({v, w}, 0.1);
  ++steps_in_episode_;

  const WorldPoint pos{world_->robot.pose.x, world_->robot.pose.y};
  const double dist = distance(pos, goal_);
  const bool arrived = dist < spec_.arrive_radius;
  const bool collided = world_->check_collision().kind != CollisionKind::None;

  StepResult out;
  out.reward = reward(prev_goal_dist_, dist, arrived, collided, w, spec_.reward);
  out.arrived = arrived;
  out.done = arrived || (collided && spec_.collision_terminal) ||
             steps_in_episode_ >= spec_.max_steps;
  prev_goal_dist_ = dist;

  scan_stack_.push(world_->cast_scan());
  out.obs = make_observation(scan_stack_, world_->robot.v, world_->robot.w,
                             goal_, world_->robot.pose,
                             spec_.world.scan_max_range);
  return out;
}

namespace {

TrainEnvSpec spec_from_phase(const CurriculumPhase& phase) {
  TrainEnvSpec spec;
  spec.room_w = phase.room_w;
  spec.room_h = phase.room_h;
  spec.peds = phase.peds;
  spec.pillars = phase.pillars;
  spec.max_steps = phase.peds > 0 ? 400 : 300;
  return spec;
}

std::vector<CurriculumPhase> resolve_phases(const TrainConfig& cfg) {
  std::vector<CurriculumPhase> phases =
      cfg.phases.empty() ? std::vector<CurriculumPhase>{CurriculumPhase{}}
                         : cfg.phases;
  int64_t assigned = 0;
  for (auto& p : phases)
    if (p.steps > 0) assigned += p.steps;
  for (auto& p : phases)
    if (p.steps <= 0) p.steps = std::max<int64_t>(cfg.total_steps - assigned, 1);
  return phases;
}

}  // namespace

std::vector<CurriculumPhase> TrainConfig::phases_or_default() const {
  return resolve_phases(*this);
}

EnvFactory default_env_factory(const TrainConfig& /*cfg*/) {
  return [](const CurriculumPhase& phase, uint64_t seed) {
    return std::make_unique<TrainEnv>(spec_from_phase(phase), seed);
  };
}

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ActorCriticNet Trainer::train(const EnvFactory& factory,
                              std::vector<TrainLogRow>* log,
                              const std::string& checkpoint_path) {
  const auto phases = resolve_phases(cfg_);
  ActorCriticNet net(cfg_.net, cfg_.seed);
  Eigen::VectorXd params = net.flatten_params();
  AdamOptimizer adam(static_cast<int>(params.size()), cfg_.lr);
  Rng shuffle_rng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
  const int W = cfg_.workers;
  const int T = cfg_.horizon;
  const int D = cfg_.net.input_dim();

  struct WorkerState {
    std::unique_ptr<EnvInterface> env;
    Rng rng{0};
    Observation obs;
    double episode_reward = 0.0;
    RolloutBuffer buffer;
    std::vector<double> ep_rewards;  // episodes finished this update
    std::vector<int> ep_arrived;
  };
  std::vector<WorkerState> workers(W);
  int phase_idx = -1;

  auto ensure_phase = [&](int64_t steps_done) {
    int64_t acc = 0;
    int idx = static_cast<int>(phases.size()) - 1;
    for (size_t i = 0; i < phases.size(); ++i) {
      acc += phases[i].steps;
      if (steps_done < acc) {
        idx = static_cast<int>(i);
        break;
      }
    }
    if (idx != phase_idx) {
      phase_idx = idx;
      for (int wi = 0; wi < W; ++wi) {
        const uint64_t seed =
            cfg_.seed * 7919 + static_cast<uint64_t>(phase_idx) * 611 + wi;
        workers[wi].env = factory(phases[phase_idx], seed);
        workers[wi].rng = Rng(cfg_.seed * 31337 + wi * 97 + phase_idx);
        workers[wi].obs = workers[wi].env->reset();
        workers[wi].episode_reward = 0.0;
      }
    }
  };

  int64_t steps_done = 0;
  int update = 0;
  int64_t next_checkpoint = cfg_.checkpoint_every;

  while (steps_done < cfg_.total_steps) {
    ensure_phase(steps_done);
    ++update;

    auto collect = [&](int wi) {
      WorkerState& ws = workers[wi];
      ws.buffer.resize(T, D);
      ws.ep_rewards.clear();
      ws.ep_arrived.clear();
      for (int t = 0; t < T; ++t) {
        const ActionSample a = sample_action(net, ws.obs, ws.rng);
        ws.buffer.obs.row(t) = ws.obs.to_vector();
        ws.buffer.actions.row(t) = a.raw;
        ws.buffer.log_probs(t) = a.log_prob;
        ws.buffer.values(t) = forward(net, ws.obs).value;
        const auto r = ws.env->step(a.v, a.w);
        ws.buffer.rewards(t) = r.reward;
        ws.buffer.dones[t] = r.done ? 1 : 0;
        ws.episode_reward += r.reward;
        if (r.done) {
          ws.ep_rewards.push_back(ws.episode_reward);
          ws.ep_arrived.push_back(r.arrived ? 1 : 0);
          ws.episode_reward = 0.0;
          ws.obs = ws.env->reset();
        } else {
          ws.obs = r.obs;
        }
      }
      ws.buffer.bootstrap_value = forward(net, ws.obs).value;
    };

    if (W == 1) {
      collect(0);
    } else {
      std::vector<std::thread> threads;
      for (int wi = 0; wi < W; ++wi) threads.emplace_back(collect, wi);
      for (auto& th : threads) th.join();
    }
    steps_done += static_cast<int64_t>(W) * T;

    // merge per-worker episode stats in worker order (scheduling-independent)
    std::vector<double> episode_rewards;
    std::vector<int> episode_arrived;
    for (int wi = 0; wi < W; ++wi) {
      episode_rewards.insert(episode_rewards.end(), workers[wi].ep_rewards.begin(),
                             workers[wi].ep_rewards.end());
      episode_arrived.insert(episode_arrived.end(), workers[wi].ep_arrived.begin(),
                             workers[wi].ep_arrived.end());
    }

    // assemble the update batch: GAE per worker segment, then concat
    const int N = W * T;
    Eigen::MatrixXd obs(N, D), actions(N, 2);
    Eigen::VectorXd log_probs(N), advantages(N), returns(N);
    for (int wi = 0; wi < W; ++wi) {
      const auto& b = workers[wi].buffer;
      const GaeResult gae = compute_gae(b.rewards, b.values, b.dones,
                                        b.bootstrap_value, cfg_.gamma, cfg_.lam);
      obs.middleRows(wi * T, T) = b.obs;
      actions.middleRows(wi * T, T) = b.actions;
      log_probs.segment(wi * T, T) = b.log_probs;
      advantages.segment(wi * T, T) = gae.advantages;
      returns.segment(wi * T, T) = gae.returns;
    }
    const double adv_mean = advantages.mean();
    const double adv_std = std::sqrt(
        (advantages.array() - adv_mean).square().sum() / advantages.size());
    advantages = (advantages.array() - adv_mean) / (adv_std + 1e-8);

    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    PpoLossStats last_stats;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      // Fisher-Yates with the trainer rng keeps shuffles reproducible
      for (int i = N - 1; i > 0; --i)
        std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);
      for (int begin = 0; begin < N; begin += cfg_.minibatch) {
        const int len = std::min(cfg_.minibatch, N - begin);
        PpoBatch batch;
        batch.obs.resize(len, D);
        batch.actions.resize(len, 2);
        batch.log_probs_old.resize(len);
        batch.advantages.resize(len);
        batch.returns.resize(len);
        for (int i = 0; i < len; ++i) {
          const int src = order[begin + i];
          batch.obs.row(i) = obs.row(src);
          batch.actions.row(i) = actions.row(src);
          batch.log_probs_old(i) = log_probs(src);
          batch.advantages(i) = advantages(src);
          batch.returns(i) = returns(src);
        }
        Eigen::VectorXd grads;
        last_stats = ppo_loss(net, batch, cfg_.clip_eps, cfg_.value_coef,
                              cfg_.entropy_coef, &grads);
        adam.step(params, grads);
        net.set_params(params);
      }
    }

    TrainLogRow row;
    row.update = update;
    row.steps = steps_done;
    row.mean_reward =
        episode_rewards.empty()
            ? 0.0
            : std::accumulate(episode_rewards.begin(), episode_rewards.end(), 0.0) /
                  episode_rewards.size();
    row.success_rate =
        episode_arrived.empty()
            ? 0.0
            : std::accumulate(episode_arrived.begin(), episode_arrived.end(), 0.0) /
                  episode_arrived.size();
    row.policy_loss = last_stats.policy;
    row.value_loss = last_stats.value;
    row.entropy = last_stats.entropy;
    if (log) log->push_back(row);

    if (!checkpoint_path.empty() && steps_done >= next_checkpoint) {
      save_checkpoint(checkpoint_path, net, cfg_.to_json(), steps_done);
      next_checkpoint += cfg_.checkpoint_every;
    }
  }

  if (!checkpoint_path.empty())
    save_checkpoint(checkpoint_path, net, cfg_.to_json(), steps_done);
  return net;
}

void write_train_log(const std::string& path,
                     const std::vector<TrainLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write train log: " + path);
  out << "update_idx,steps,mean_reward,success_rate,policy_loss,value_loss,entropy\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%lld,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  r.update, static_cast<long long>(r.steps), r.mean_reward,
                  r.success_rate, r.policy_loss, r.value_loss, r.entropy);
    out << buf;
  }
}

double eval_policy(const ActorCriticNet& net, const TrainEnvSpec& spec,
                   int episodes, uint64_t seed) {
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    TrainEnv env(spec, seed + e);
    Observation obs = env.reset();
    for (int t = 0; t < spec.max_steps; ++t) {
      const VelocityCmd cmd = mean_action(net, obs);
      const auto r = env.step(cmd.v, cmd.w);
      obs = r.obs;
      if (r.done) {
        if (r.arrived) ++successes;
        break;
      }
    }
  }
  return static_cast<double>(successes) / episodes;
}

}  // namespace crowdnav
