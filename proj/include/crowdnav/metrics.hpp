#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crowdnav/geometry.hpp"

namespace crowdnav {

enum class NavModeTag { Normal, Recovery };

struct TrialSample {
  double t = 0.0;
  WorldPoint p_robot;     // ground truth
  WorldPoint p_estimate;  // SLAM/MCL estimate
  double heading = 0.0;
  double v_forward = 0.0;  // signed forward speed
  double w = 0.0;
  NavModeTag mode = NavModeTag::Normal;
  double uncertainty = 0.0;
  bool collision = false;
};

enum class TerminationReason { Arrived, LostTrigger, FrozenTrigger, Timeout };

struct TrialRecord {
  std::vector<TrialSample> samples;
  WorldPoint goal;
  double dt = 0.1;
  TerminationReason terminated_reason = TerminationReason::Timeout;
};

struct MetricThresholds {
  double d_lost = 3.0;    // m
  double dt_lost = 10.0;  // s
  double v_frozen = 0.2;  // m/s
  double dt_frozen = 10.0;
  double r_arrive = 0.5;  // m
};

enum class TrialOutcome { Lost, Frozen, Success };

/// Earliest window start t0 with localization error > d_lost over the whole
/// window [t0, t0 + dt_lost]; nullopt when no window qualifies (including
/// records shorter than the window).
std::optional<double> is_lost(const TrialRecord& record,
                              const MetricThresholds& th);

/// Same windowing for forward speed < v_frozen over dt_frozen.
std::optional<double> is_frozen(const TrialRecord& record,
                                const MetricThresholds& th);

/// Earliest time with goal distance < r_arrive (strict).
std::optional<double> is_success(const TrialRecord& record,
                                 const MetricThresholds& th);

/// Exclusive outcome: the earliest trigger wins; a timeout with no trigger is
/// Frozen when the mean speed over the final window is below v_frozen, else
/// Lost.
TrialOutcome classify_trial(const TrialRecord& record,
                            const MetricThresholds& th);

struct BenchmarkCell {
  std::string method;
  std::string scenario;
  int density = -1;  // pedestrian count for sweep rows, -1 otherwise
  int trials = 0;
  double lost_rate = 0.0;
  double frozen_rate = 0.0;
  double success_rate = 0.0;
  double mean_velocity = 0.0;  // over Success trials; 0 when none
  int collisions = 0;
};

/// Aggregate one (method, scenario) cell. Mean velocity is the ground-truth
/// path length over elapsed time, averaged over Success trials.
BenchmarkCell aggregate(const std::vector<TrialRecord>& records,
                        const MetricThresholds& th);

const char* outcome_name(TrialOutcome o);

}  // namespace crowdnav
