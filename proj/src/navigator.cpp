#include "crowdnav/navigator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crowdnav {

void SwitchConfig::validate() const {
  if (eta_dev <= 0.0 || eta_cov_enter <= 0.0 || eta_cov_exit <= 0.0 ||
      reseed_spread <= 0.0)
    throw std::invalid_argument("switch config: thresholds must be positive");
  if (eta_cov_exit >= eta_cov_enter)
    throw std::invalid_argument(
        "switch config: exit threshold must be below the entry threshold");
}

bool should_enter_recovery(const Pose& odom_pose, const PoseEstimate& slam,
                           const SwitchConfig& cfg) {
  if (!finite(odom_pose) || !finite(slam.mean))
    throw std::runtime_error("should_enter_recovery: non-finite pose");
  const double deviation =
      std::hypot(odom_pose.x - slam.mean.x, odom_pose.y - slam.mean.y);
  return deviation > cfg.eta_dev || slam.uncertainty > cfg.eta_cov_enter;
}

bool recovery_complete(const PoseEstimate& slam, const SwitchConfig& cfg) {
  return slam.uncertainty < cfg.eta_cov_exit;
}

Navigator::Navigator(NavigatorConfig cfg, WorldPoint final_goal)
    : cfg_(cfg), final_goal_(final_goal), subgoal_(final_goal) {
  cfg_.switches.validate();
  DwaParams dwa;
  dwa.v_max = cfg_.limits.v_max;
  dwa.w_max = cfg_.limits.w_max;
  dwa_ = DwaPlanner(dwa);
}

Pose Navigator::anchored_odom(const Pose& odom_raw) const {
  if (!anchored_) return odom_raw;
  return compose(slam_ref_, relative(odom_ref_, odom_raw));
}

void Navigator::replan(const Pose& from, const WorldPoint& to,
                       NavServices& services) {
  // Snap endpoints onto inflated-free cells so a degraded estimate cannot
  // wedge the planner inside a wall.
  const auto start = nearest_clear_cell(*services.grid, *services.clearance,
                                        {from.x, from.y}, cfg_.inflation);
  const auto goal = nearest_clear_cell(*services.grid, *services.clearance, to,
                                       cfg_.inflation);
  if (!start || !goal)
    throw std::runtime_error("navigator: no plannable start/goal cell");
  path_ = plan_global_path(*services.grid, *services.clearance, *start, *goal,
                           cfg_.inflation);
  have_path_ = true;
}

std::vector<double> Navigator::fused_scores(const ScanStack& scans,
                                            const Pose& pose, double v,
                                            double w, NavServices& services,
                                            std::vector<double>* v_rl_out) {
  const auto& points = *services.recovery_points;
  std::vector<double> v_rl;
  if (services.critic_override) {
    v_rl = services.critic_override(points, pose);
  } else {
    v_rl = score_accessibility(*services.net, scans, v, w, points, pose);
  }
  std::vector<double> v_cp(points.size());
  for (size_t i = 0; i < points.size(); ++i) v_cp[i] = points[i].weight;
  const std::vector<double> v_d = score_distance(points, final_goal_);

  std::vector<double> fused(points.size());
  for (size_t i = 0; i < points.size(); ++i)
    fused[i] = cfg_.fusion.rl * v_rl[i] + cfg_.fusion.cp * v_cp[i] +
               cfg_.fusion.d * v_d[i];
  if (v_rl_out) *v_rl_out = v_rl;
  return fused;
}

void Navigator::enter_recovery(const ScanStack& scans, const Pose& odom_raw,
                               TransitionTrigger trigger, double v, double w,
                               NavServices& services) {
  if (!services.recovery_points || services.recovery_points->empty())
    throw std::runtime_error("navigator: recovery triggered without recovery points");

  // Recovery starts from the last odometry output: propagate the last healthy
  // estimate by the odometry motion since that snapshot.
  Pose recovery_pose = anchored_odom(odom_raw);
  if (have_last_good_)
    recovery_pose =
        compose(last_good_slam_.mean, relative(last_good_odom_, odom_raw));

  if (services.localizer) {
    try {
      services.localizer->reseed(recovery_pose, cfg_.switches.reseed_spread);
    } catch (const std::exception&) {
      // reseed pose inside an obstacle: fall back to the nearest free cell
      const auto free_cell =
          nearest_clear_cell(*services.grid, *services.clearance,
                             {recovery_pose.x, recovery_pose.y}, 0.01);
      if (free_cell) {
        recovery_pose.x = free_cell->x;
        recovery_pose.y = free_cell->y;
        services.localizer->reseed(recovery_pose, cfg_.switches.reseed_spread);
      }
    }
  }

  const auto& points = *services.recovery_points;
  const auto fused = fused_scores(scans, recovery_pose, v, w, services);
  int best = 0;
  for (size_t i = 1; i < fused.size(); ++i)
    if (fused[i] > fused[best]) best = static_cast<int>(i);
  selected_ = best;
  mode_ = NavMode::Recovery;
  rescore_timer_ = 0.0;
  have_path_ = false;
  transitions_.push_back({clock_, NavMode::Recovery, trigger, best});
  (void)points;
}

void Navigator::exit_recovery(const Pose& odom_raw, const PoseEstimate& slam) {
  mode_ = NavMode::Normal;
  selected_.reset();
  have_path_ = false;
  // re-anchor the odometry frame to the recovered SLAM estimate
  odom_ref_ = odom_raw;
  slam_ref_ = slam.mean;
  anchored_ = true;
  transitions_.push_back(
      {clock_, NavMode::Normal, TransitionTrigger::Complete, -1});
}

VelocityCmd Navigator::run_local_planner(const ScanStack& scans,
                                         const Pose& pose,
                                         const WorldPoint& subgoal, double v,
                                         double w, NavServices& services) {
  if (cfg_.planner == LocalPlannerKind::Dwa) {
    return dwa_.plan(scans.scans().back(), v, w, to_frame(pose, subgoal));
  }
  const Observation obs = make_observation(scans, v, w, subgoal, pose);
  return mean_action(*services.net, obs, cfg_.limits);
}

VelocityCmd Navigator::tick(const ScanStack& scans, const Pose& odom_raw,
                            const PoseEstimate& slam, double v, double w,
                            double dt, NavServices& services) {
  const Pose odom = anchored_odom(odom_raw);

  bool entered_this_tick = false;
  if (mode_ == NavMode::Normal) {
    const bool trigger_now =
        cfg_.recovery_enabled && should_enter_recovery(odom, slam, cfg_.switches);
    if (trigger_now) {
      entered_this_tick = true;
      const double deviation =
          std::hypot(odom.x - slam.mean.x, odom.y - slam.mean.y);
      const TransitionTrigger trigger = deviation > cfg_.switches.eta_dev
                                            ? TransitionTrigger::Deviation
                                            : TransitionTrigger::Covariance;
      enter_recovery(scans, odom_raw, trigger, v, w, services);
    } else {
      last_good_slam_ = slam;
      last_good_odom_ = odom_raw;
      have_last_good_ = true;
    }
  }

  VelocityCmd cmd{0.0, 0.0};
  if (mode_ == NavMode::Normal) {
    replan_timer_ -= dt;
    if (!have_path_ || replan_timer_ <= 0.0) {
      replan(slam.mean, final_goal_, services);
      replan_timer_ = cfg_.replan_period;
    }
    subgoal_ = next_subgoal(path_, {slam.mean.x, slam.mean.y}, cfg_.lookahead);
    cmd = run_local_planner(scans, slam.mean, subgoal_, v, w, services);
  } else {
    // Recovery planning runs in the odometry-propagated frame of the last
    // healthy estimate; the particle filter keeps running underneath.
    Pose recovery_pose = anchored_odom(odom_raw);
    if (have_last_good_)
      recovery_pose =
          compose(last_good_slam_.mean, relative(last_good_odom_, odom_raw));

    rescore_timer_ -= dt;
    if (rescore_timer_ <= 0.0) {
      rescore_timer_ = cfg_.rescore_period;
      const auto fused = fused_scores(scans, recovery_pose, v, w, services);
      const int next = select_recovery_point(
          fused, std::vector<double>(fused.size(), 0.0),
          std::vector<double>(fused.size(), 0.0), {1.0, 0.0, 0.0}, selected_,
          cfg_.switch_margin);
      if (next != *selected_) {
        selected_ = next;
        have_path_ = false;
        transitions_.push_back({clock_, NavMode::Recovery,
                                TransitionTrigger::Covariance, next});
      }
    }

    const WorldPoint target = (*services.recovery_points)[*selected_].position;
    replan_timer_ -= dt;
    if (!have_path_ || replan_timer_ <= 0.0) {
      try {
        replan(recovery_pose, target, services);
      } catch (const std::exception&) {
        // fall back to the next-best candidate if this one is unreachable
        bool planned = false;
        const auto fused = fused_scores(scans, recovery_pose, v, w, services);
        std::vector<int> order(fused.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return fused[a] > fused[b]; });
        for (int idx : order) {
          if (idx == *selected_) continue;
          try {
            replan(recovery_pose, (*services.recovery_points)[idx].position,
                   services);
            selected_ = idx;
            planned = true;
            break;
          } catch (const std::exception&) {
          }
        }
        if (!planned)
          throw std::runtime_error("navigator: no recovery point reachable");
      }
      replan_timer_ = cfg_.replan_period;
    }
    subgoal_ = next_subgoal(path_, {recovery_pose.x, recovery_pose.y},
                            cfg_.lookahead);
    cmd = run_local_planner(scans, recovery_pose, subgoal_, v, w, services);

    // the exit check waits a tick after entry so the reseeded belief can
    // actually be estimated before it is judged recovered
    if (!entered_this_tick && recovery_complete(slam, cfg_.switches)) {
      exit_recovery(odom_raw, slam);
      replan_timer_ = 0.0;  // replan toward the final goal next tick
    }
  }

  clock_ += dt;
  return cmd;
}

}  // namespace crowdnav
