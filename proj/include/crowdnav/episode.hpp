#pragma once

#include <string>
#include <vector>

#include "crowdnav/metrics.hpp"
#include "crowdnav/navigator.hpp"
#include "crowdnav/scenario.hpp"

namespace crowdnav {

enum class Method { Baseline, Rl, Rl2 };

Method method_from_name(const std::string& name);
const char* method_name(Method m);

struct EpisodeResult {
  TrialRecord record;
  TrialOutcome outcome = TrialOutcome::Lost;
  std::vector<ModeTransition> transitions;
  double mean_velocity = 0.0;  // ground-truth path length / elapsed time
  int recovery_cycles = 0;     // completed Normal->Recovery->Normal cycles
};

/// Run one seeded episode of a scenario with the given method. `net` is
/// required for rl/rl2, `recovery_points` for rl2. A non-negative
/// ped_count_override replaces the scenario's crowd size (density sweeps).
EpisodeResult run_episode(const ScenarioAssets& assets, Method method,
                          uint64_t seed, const ActorCriticNet* net,
                          const std::vector<RecoveryPoint>* recovery_points,
                          int ped_count_override = -1);

/// Trajectory CSV: one row per control tick, mode transitions appended as
/// comment lines. Byte-stable for a fixed seed.
void write_trajectory_log(const std::string& path, const EpisodeResult& result);

}  // namespace crowdnav
