#include "crowdnav/episode.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace crowdnav {

Method method_from_name(const std::string& name) {
  if (name == "baseline") return Method::Baseline;
  if (name == "rl") return Method::Rl;
  if (name == "rl2") return Method::Rl2;
  throw std::runtime_error("unknown method: " + name +
                           " (expected baseline, rl, or rl2)");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::Baseline: return "baseline";
    case Method::Rl: return "rl";
    case Method::Rl2: return "rl2";
  }
  return "unknown";
}

EpisodeResult run_episode(const ScenarioAssets& assets, Method method,
                          uint64_t seed, const ActorCriticNet* net,
                          const std::vector<RecoveryPoint>* recovery_points,
                          int ped_count_override) {
  const Scenario& sc = assets.scenario;
  if (method != Method::Baseline && net == nullptr)
    throw std::runtime_error("run_episode: method requires a policy checkpoint");
  if (method == Method::Rl2 &&
      (recovery_points == nullptr || recovery_points->empty()))
    throw std::runtime_error("run_episode: rl2 requires recovery points");

  const double dt = 0.1;
  World world(&assets.grid, &assets.clearance, sc.world, seed * 2654435761ULL + 1);
  world.robot.pose = sc.robot_start;
  world.robot.radius = sc.robot_radius;
  world.odom_pose = sc.robot_start;

  Scenario crowd_sc = sc;
  if (ped_count_override >= 0) crowd_sc.ped_count = ped_count_override;
  Rng crowd_rng(seed * 40503ULL + 7);
  spawn_crowd(world, crowd_sc, crowd_rng);

  MclParams mcl_params;
  for (int i = 0; i < 4; ++i) mcl_params.alpha[i] = sc.world.odom_alpha[i];
  ParticleFilter mcl(&assets.grid, mcl_params, seed * 69069ULL + 13);
  mcl.reseed(sc.robot_start, sc.mcl_spread_init);

  NavigatorConfig nav_cfg;
  nav_cfg.planner = method == Method::Baseline ? LocalPlannerKind::Dwa
                                               : LocalPlannerKind::Policy;
  nav_cfg.recovery_enabled = method == Method::Rl2;
  nav_cfg.limits = {sc.world.v_max, sc.world.w_max};
  Navigator nav(nav_cfg, sc.goal);

  NavServices services;
  services.grid = &assets.grid;
  services.clearance = &assets.clearance;
  services.net = net;
  services.recovery_points = recovery_points;
  services.localizer = &mcl;

  EpisodeResult result;
  result.record.goal = sc.goal;
  result.record.dt = dt;

  ScanStack scans(3);
  Pose prev_odom = world.read_odometry();
  VelocityCmd cmd{0.0, 0.0};

  const MetricThresholds& th = sc.thresholds;
  const int lost_window = static_cast<int>(std::llround(th.dt_lost / dt));
  const int frozen_window = static_cast<int>(std::llround(th.dt_frozen / dt));
  int lost_run = 0;
  int frozen_run = 0;
  result.record.terminated_reason = TerminationReason::Timeout;

  while (true) {
    const LaserScan scan = world.cast_scan();
    scans.push(scan);

    const Pose odom = world.read_odometry();
    const Pose delta = relative(prev_odom, odom);
    prev_odom = odom;
    mcl.predict(delta);
    if (mcl.motion_gate(delta)) {
      mcl.update(scan);
      mcl.resample();
    }
    const PoseEstimate est = mcl.estimate();

    cmd = nav.tick(scans, odom, est, world.robot.v, world.robot.w, dt, services);

    TrialSample sample;
    sample.t = world.clock;
    sample.p_robot = {world.robot.pose.x, world.robot.pose.y};
    sample.heading = world.robot.pose.theta;
    sample.p_estimate = {est.mean.x, est.mean.y};
    sample.v_forward = cmd.v;
    sample.w = cmd.w;
    sample.mode = nav.mode() == NavMode::Recovery ? NavModeTag::Recovery
                                                  : NavModeTag::Normal;
    sample.uncertainty = est.uncertainty;
    sample.collision = world.check_collision().kind != CollisionKind::None;
    result.record.samples.push_back(sample);

    // online termination: success immediately, lost/frozen when their
    // windows complete, otherwise the scenario timeout
    if (distance(sample.p_robot, sc.goal) < th.r_arrive) {
      result.record.terminated_reason = TerminationReason::Arrived;
      break;
    }
    lost_run = distance(sample.p_robot, sample.p_estimate) > th.d_lost
                   ? lost_run + 1
                   : 0;
    frozen_run = sample.v_forward < th.v_frozen ? frozen_run + 1 : 0;
    if (lost_run >= lost_window + 1) {
      result.record.terminated_reason = TerminationReason::LostTrigger;
      break;
    }
    if (frozen_run >= frozen_window + 1) {
      result.record.terminated_reason = TerminationReason::FrozenTrigger;
      break;
    }
    if (world.clock >= sc.timeout) break;

    world.step(cmd, dt);
  }

  result.outcome = classify_trial(result.record, th);
  result.transitions = nav.transitions();
  for (const auto& tr : result.transitions)
    if (tr.trigger == TransitionTrigger::Complete) ++result.recovery_cycles;

  if (result.record.samples.size() > 1) {
    double path = 0.0;
    for (size_t i = 1; i < result.record.samples.size(); ++i)
      path += distance(result.record.samples[i - 1].p_robot,
                       result.record.samples[i].p_robot);
    const double elapsed = result.record.samples.back().t -
                           result.record.samples.front().t;
    if (elapsed > 0.0) result.mean_velocity = path / elapsed;
  }
  return result;
}

void write_trajectory_log(const std::string& path, const EpisodeResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory log: " + path);
  out << "t,px,py,heading,ex,ey,v_forward,w,mode,uncertainty,collision\n";
  char buf[320];
  for (const auto& s : result.record.samples) {
    std::snprintf(buf, sizeof(buf),
                  "%.4f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%s,%.8f,%d\n", s.t,
                  s.p_robot.x, s.p_robot.y, s.heading, s.p_estimate.x,
                  s.p_estimate.y, s.v_forward, s.w,
                  s.mode == NavModeTag::Recovery ? "recovery" : "normal",
                  s.uncertainty, s.collision ? 1 : 0);
    out << buf;
  }
  out << "# transition,t,mode,trigger,selected_recovery_id\n";
  for (const auto& tr : result.transitions) {
    const char* trigger = tr.trigger == TransitionTrigger::Deviation
                              ? "deviation"
                              : (tr.trigger == TransitionTrigger::Covariance
                                     ? "covariance"
                                     : "complete");
    std::snprintf(buf, sizeof(buf), "# transition,%.4f,%s,%s,%d\n", tr.t,
                  tr.mode == NavMode::Recovery ? "recovery" : "normal", trigger,
                  tr.selected_recovery);
    out << buf;
  }
}

}  // namespace crowdnav
