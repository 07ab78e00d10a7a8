#pragma once

#include <cmath>

namespace csisim {

// Signal propagation speed used throughout (m/s).
inline constexpr double kPropagationSpeed = 3.0e8;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

// World-frame bearing of `to` as seen from `from`, in (-pi, pi].
inline double bearing(Vec2 from, Vec2 to) { return std::atan2(to.y - from.y, to.x - from.x); }

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * M_PI);
    return a;
}

// Angle of a source relative to a linear array's broadside direction,
// folded into [-pi/2, pi/2]. A linear array only observes sin(angle), so
// sources behind the array alias onto their front-side mirror.
inline double array_angle(double source_bearing, double broadside) {
    return std::asin(std::sin(source_bearing - broadside));
}

// Perpendicular distance from point p to the infinite line through a and b.
inline double point_line_distance(Vec2 p, Vec2 a, Vec2 b) {
    double dx = b.x - a.x;
    double dy = b.y - a.y;
    double len = std::hypot(dx, dy);
    if (len == 0.0) return distance(p, a);
    return std::abs(dy * p.x - dx * p.y + b.x * a.y - b.y * a.x) / len;
}

inline double deg_to_rad(double d) { return d * M_PI / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / M_PI; }

} // namespace csisim
