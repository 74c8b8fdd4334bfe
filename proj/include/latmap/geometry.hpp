#pragma once

#include <cmath>
#include <limits>

namespace latmap {

inline constexpr double kPi = 3.14159265358979323846;

// Wrap an angle to [-pi, pi). Values already in range pass through exactly.
inline double wrap_angle(double a) {
  if (a >= -kPi && a < kPi) return a;
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  return w - kPi;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Agent pose: planar position plus heading in [-pi, pi).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct Segment {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
};

// Distance from (px,py) along unit direction (dx,dy) to the segment, or
// +infinity when the ray misses it.
inline double ray_segment_distance(double px, double py, double dx, double dy, const Segment& s) {
  const double ex = s.x2 - s.x1;
  const double ey = s.y2 - s.y1;
  const double denom = dx * ey - dy * ex;
  if (std::fabs(denom) < 1e-15) return std::numeric_limits<double>::infinity();
  const double qx = s.x1 - px;
  const double qy = s.y1 - py;
  const double t = (qx * ey - qy * ex) / denom;  // along the ray
  const double u = (qx * dy - qy * dx) / denom;  // along the segment
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::numeric_limits<double>::infinity();
  return t;
}

}  // namespace latmap
