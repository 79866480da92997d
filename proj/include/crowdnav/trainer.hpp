#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "crowdnav/grid_map.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/ppo.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

/// One curriculum stage: a synthetic room with a pedestrian crowd and
/// optional pillar obstacles, consuming a slice of the step budget.
struct CurriculumPhase {
  double room_w = 10.0;
  double room_h = 10.0;
  int peds = 0;
  int pillars = 0;
  int64_t steps = 0;  // 0 = rest of the budget
};

struct TrainConfig {
  double gamma = 0.99;
  double lam = 0.95;
  double clip_eps = 0.2;
  double lr = 3e-4;
  int epochs = 4;
  int minibatch = 256;
  int64_t total_steps = 200000;
  uint64_t seed = 1;
  int horizon = 512;
  int workers = 4;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  int64_t checkpoint_every = 100000;
  std::vector<CurriculumPhase> phases;  // empty = one empty-room phase
  NetConfig net;

  void validate() const;
  static TrainConfig from_json_file(const std::string& path);
  std::string to_json() const;
  /// Phases with the unassigned step budget distributed; a single empty-room
  /// phase when none are configured.
  std::vector<CurriculumPhase> phases_or_default() const;
};

class EnvInterface {
 public:
  virtual ~EnvInterface() = default;
  struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    bool arrived = false;
  };
  virtual Observation reset() = 0;
  virtual StepResult step(double v, double w) = 0;
};

struct TrainEnvSpec {
  double room_w = 10.0;
  double room_h = 10.0;
  double resolution = 0.05;
  double wall_thickness = 0.5;
  int peds = 0;
  int pillars = 0;
  double goal_min = 1.0;
  double goal_max = 6.0;
  int max_steps = 300;
  double arrive_radius = 0.5;
  bool collision_terminal = true;
  WorldParams world;
  RewardParams reward;
};

/// Goal-reaching episodes in a walled room, optionally with social-force
/// pedestrians on random routes and random pillar obstacles.
class TrainEnv : public EnvInterface {
 public:
  TrainEnv(const TrainEnvSpec& spec, uint64_t seed);
  Observation reset() override;
  StepResult step(double v, double w) override;

  const TrainEnvSpec& spec() const { return spec_; }
  const World& world() const { return *world_; }

 private:
  WorldPoint sample_free_point(double min_clearance);
  void rebuild_map();

  TrainEnvSpec spec_;
  Rng rng_;
  OccupancyGrid grid_;
  ClearanceField clearance_;
  std::unique_ptr<World> world_;
  WorldPoint goal_;
  ScanStack scan_stack_;
  double prev_goal_dist_ = 0.0;
  int steps_in_episode_ = 0;
};

/// Bordered empty room with optional pillars; shared by training and tests.
OccupancyGrid build_room_grid(double w_m, double h_m, double resolution,
                              double wall_thickness,
                              const std::vector<WorldPoint>& pillar_centers = {},
                              double pillar_radius = 0.25);

struct TrainLogRow {
  int update = 0;
  int64_t steps = 0;
  double mean_reward = 0.0;
  double success_rate = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

using EnvFactory = std::function<std::unique_ptr<EnvInterface>(
    const CurriculumPhase&, uint64_t seed)>;

EnvFactory default_env_factory(const TrainConfig& cfg);

/// Synchronous PPO: parallel rollout workers, serialized Adam updates.
/// Fixed seeds give identical logs regardless of thread scheduling.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);
  ActorCriticNet train(const EnvFactory& factory, std::vector<TrainLogRow>* log,
                       const std::string& checkpoint_path = "");

 private:
  TrainConfig cfg_;
};

void write_train_log(const std::string& path,
                     const std::vector<TrainLogRow>& log);

/// Deterministic-policy evaluation: fraction of episodes that reach the goal.
double eval_policy(const ActorCriticNet& net, const TrainEnvSpec& spec,
                   int episodes, uint64_t seed);

}  // namespace crowdnav
