#include "crowdnav/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace crowdnav {

namespace {

/// Earliest sample index i where pred holds for all samples [i, i + m],
/// with m = round(window / dt) so the window spans the full duration.
std::optional<double> earliest_window(const TrialRecord& record, double window,
                                      const std::function<bool(const TrialSample&)>& pred) {
  const int n = static_cast<int>(record.samples.size());
  const int m = static_cast<int>(std::llround(window / record.dt));
  if (n == 0 || m >= n) return std::nullopt;  // insufficient evidence

  std::vector<int> run(n + 1, 0);
  for (int i = n - 1; i >= 0; --i)
    run[i] = pred(record.samples[i]) ? run[i + 1] + 1 : 0;
  for (int i = 0; i + m < n; ++i)
    if (run[i] >= m + 1) return record.samples[i].t;
  return std::nullopt;
}

}  // namespace

std::optional<double> is_lost(const TrialRecord& record,
                              const MetricThresholds& th) {
  return earliest_window(record, th.dt_lost, [&](const TrialSample& s) {
    return distance(s.p_robot, s.p_estimate) > th.d_lost;
  });
}

std::optional<double> is_frozen(const TrialRecord& record,
                                const MetricThresholds& th) {
  return earliest_window(record, th.dt_frozen, [&](const TrialSample& s) {
    return s.v_forward < th.v_frozen;
  });
}

std::optional<double> is_success(const TrialRecord& record,
                                 const MetricThresholds& th) {
  for (const auto& s : record.samples)
    if (distance(s.p_robot, record.goal) < th.r_arrive) return s.t;
  return std::nullopt;
}

TrialOutcome classify_trial(const TrialRecord& record,
                            const MetricThresholds& th) {
  const auto success_t = is_success(record, th);
  const auto lost_t = is_lost(record, th);
  const auto frozen_t = is_frozen(record, th);

  const double inf = std::numeric_limits<double>::infinity();
  const double ts = success_t.value_or(inf);
  const double tl = lost_t.value_or(inf);
  const double tf = frozen_t.value_or(inf);

  if (ts <= tl && ts <= tf && success_t) return TrialOutcome::Success;
  if (tl <= tf && lost_t) return TrialOutcome::Lost;
  if (frozen_t) return TrialOutcome::Frozen;

  // timeout with no trigger: frozen when crawling at the end, lost otherwise
  const int n = static_cast<int>(record.samples.size());
  const int m = static_cast<int>(std::llround(th.dt_frozen / record.dt));
  const int from = std::max(0, n - m - 1);
  double mean_v = 0.0;
  int count = 0;
  for (int i = from; i < n; ++i, ++count) mean_v += record.samples[i].v_forward;
  if (count > 0) mean_v /= count;
  return mean_v < th.v_frozen ? TrialOutcome::Frozen : TrialOutcome::Lost;
}

BenchmarkCell aggregate(const std::vector<TrialRecord>& records,
                        const MetricThresholds& th) {
  if (records.empty()) throw std::runtime_error("aggregate: no records");
  BenchmarkCell cell;
  cell.trials = static_cast<int>(records.size());
  int lost = 0, frozen = 0, success = 0;
  double velocity_sum = 0.0;
  for (const auto& record : records) {
    const TrialOutcome outcome = classify_trial(record, th);
    switch (outcome) {
      case TrialOutcome::Lost: ++lost; break;
      case TrialOutcome::Frozen: ++frozen; break;
      case TrialOutcome::Success: ++success; break;
    }
    if (outcome == TrialOutcome::Success && record.samples.size() > 1) {
      double path = 0.0;
      for (size_t i = 1; i < record.samples.size(); ++i)
        path += distance(record.samples[i - 1].p_robot,
                         record.samples[i].p_robot);
      const double elapsed =
          record.samples.back().t - record.samples.front().t;
      if (elapsed > 0.0) velocity_sum += path / elapsed;
    }
    for (const auto& s : record.samples)
      if (s.collision) {
        ++cell.collisions;
        break;  // count collision episodes, not samples
      }
  }
  cell.lost_rate = static_cast<double>(lost) / cell.trials;
  cell.frozen_rate = static_cast<double>(frozen) / cell.trials;
  cell.success_rate = static_cast<double>(success) / cell.trials;
  cell.mean_velocity = success > 0 ? velocity_sum / success : 0.0;
  return cell;
}

const char* outcome_name(TrialOutcome o) {
  switch (o) {
    case TrialOutcome::Lost: return "lost";
    case TrialOutcome::Frozen: return "frozen";
    case TrialOutcome::Success: return "success";
  }
  return "unknown";
}

}  // namespace crowdnav
