#pragma once

#include <cmath>

namespace crowdnav {

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // rad
};

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a + M_PI, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - M_PI;
}

inline double distance(const WorldPoint& a, const WorldPoint& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline double deg2rad(double deg) { return deg * M_PI / 180.0; }

inline bool finite(const WorldPoint& p) {
  return std::isfinite(p.x) && std::isfinite(p.y);
}

inline bool finite(const Pose& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.theta);
}

/// Compose two poses: world pose of `b` expressed in the frame of `a`.
inline Pose compose(const Pose& a, const Pose& b) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y,
          wrap_angle(a.theta + b.theta)};
}

/// Express world pose `b` relative to frame `a` (inverse of compose).
inline Pose relative(const Pose& a, const Pose& b) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  const double dx = b.x - a.x, dy = b.y - a.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(b.theta - a.theta)};
}

/// Transform a world point into the frame of `pose`.
inline WorldPoint to_frame(const Pose& pose, const WorldPoint& p) {
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  const double dx = p.x - pose.x, dy = p.y - pose.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

}  // namespace crowdnav
