#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "crowdnav/dwa.hpp"
#include "crowdnav/grid_map.hpp"
#include "crowdnav/mcl.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/recovery.hpp"

namespace crowdnav {

enum class NavMode { Normal, Recovery };

struct SwitchConfig {
  double eta_dev = 3.0;        // odometry-vs-SLAM deviation trigger, m
  double eta_cov_enter = 0.2;  // covariance trigger into recovery, m^2
  double eta_cov_exit = 0.08;  // recovery-success threshold, m^2
  double reseed_spread = 1.0;  // m

  void validate() const;  // exit < enter, all positive
};

/// True when either switch trigger fires (deviation or covariance).
bool should_enter_recovery(const Pose& odom_pose, const PoseEstimate& slam,
                           const SwitchConfig& cfg);

/// True when the covariance has fallen below the recovery-success threshold.
bool recovery_complete(const PoseEstimate& slam, const SwitchConfig& cfg);

enum class LocalPlannerKind { Dwa, Policy };

struct NavigatorConfig {
  LocalPlannerKind planner = LocalPlannerKind::Policy;
  bool recovery_enabled = true;
  SwitchConfig switches;
  FusionWeights fusion;
  double lookahead = 2.0;        // m, sub-goal arc length
  double replan_period = 1.0;    // s
  double rescore_period = 1.0;   // s
  double switch_margin = 0.05;   // fused-score hysteresis
  double inflation = 0.25;       // m, planning inflation radius
  ActionLimits limits;
};

enum class TransitionTrigger { Deviation, Covariance, Complete };

struct ModeTransition {
  double t = 0.0;
  NavMode mode = NavMode::Normal;
  TransitionTrigger trigger = TransitionTrigger::Covariance;
  int selected_recovery = -1;
};

/// Everything the navigator consults but does not own. The critic hook makes
/// recovery scoring scriptable in tests; when unset the real net is used.
struct NavServices {
  const OccupancyGrid* grid = nullptr;
  const ClearanceField* clearance = nullptr;
  const ActorCriticNet* net = nullptr;  // required for the policy planner
  const std::vector<RecoveryPoint>* recovery_points = nullptr;
  ParticleFilter* localizer = nullptr;  // reseeded on recovery entry
  std::function<std::vector<double>(const std::vector<RecoveryPoint>&,
                                    const Pose&)>
      critic_override;
};

/// The two-mode navigation state machine: normal navigation via global plan
/// plus local planner, and localization recovery toward scored recovery
/// points, switching on the deviation/covariance triggers.
class Navigator {
 public:
  Navigator(NavigatorConfig cfg, WorldPoint final_goal);

  /// One 10 Hz control tick. `odom_raw` is the accumulated odometry pose;
  /// internally it is re-anchored to the SLAM frame on recovery exit.
  VelocityCmd tick(const ScanStack& scans, const Pose& odom_raw,
                   const PoseEstimate& slam, double v, double w, double dt,
                   NavServices& services);

  NavMode mode() const { return mode_; }
  std::optional<int> selected_recovery() const { return selected_; }
  const std::vector<ModeTransition>& transitions() const { return transitions_; }
  WorldPoint current_subgoal() const { return subgoal_; }
  const WorldPoint& final_goal() const { return final_goal_; }
  /// Odometry pose expressed in the SLAM frame (re-anchored on recovery exit).
  Pose anchored_odom(const Pose& odom_raw) const;

 private:
  void enter_recovery(const ScanStack& scans, const Pose& odom_raw,
                      TransitionTrigger trigger, double v, double w,
                      NavServices& services);
  void exit_recovery(const Pose& odom_raw, const PoseEstimate& slam);
  std::vector<double> fused_scores(const ScanStack& scans, const Pose& pose,
                                   double v, double w, NavServices& services,
                                   std::vector<double>* v_rl_out = nullptr);
  VelocityCmd run_local_planner(const ScanStack& scans, const Pose& pose,
                                const WorldPoint& subgoal, double v, double w,
                                NavServices& services);
  void replan(const Pose& from, const WorldPoint& to, NavServices& services);

  NavigatorConfig cfg_;
  WorldPoint final_goal_;
  NavMode mode_ = NavMode::Normal;
  GlobalPath path_;
  WorldPoint subgoal_;
  std::optional<int> selected_;
  std::vector<ModeTransition> transitions_;
  DwaPlanner dwa_;

  double clock_ = 0.0;
  double replan_timer_ = 0.0;
  double rescore_timer_ = 0.0;
  bool have_path_ = false;

  // odometry re-anchoring: effective odom = slam_ref ⊕ (odom_ref^-1 ∘ odom_raw)
  Pose odom_ref_;
  Pose slam_ref_;
  bool anchored_ = false;

  // last healthy snapshot, used as the recovery-mode planning frame
  PoseEstimate last_good_slam_;
  Pose last_good_odom_;
  bool have_last_good_ = false;
};

}  // namespace crowdnav
