#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace crowd {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr bool operator==(const Vec2&) const = default;

    double length() const { return std::hypot(x, y); }
    constexpr double length_squared() const { return x * x + y * y; }
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr double distance_squared(Vec2 a, Vec2 b) { return (a - b).length_squared(); }
inline double distance(Vec2 a, Vec2 b) { return (a - b).length(); }

inline Vec2 rotated(Vec2 v, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Axis-aligned rectangle, meters. Degenerate (zero-area) rectangles are legal.
struct Rect {
    Vec2 min;
    Vec2 max;

    double width() const { return max.x - min.x; }
    double height() const { return max.y - min.y; }
    double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
    bool degenerate() const { return !(width() > 0) || !(height() > 0); }
    bool contains(Vec2 p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
    }
    bool contains(const Rect& r) const { return contains(r.min) && contains(r.max); }
    bool operator==(const Rect&) const = default;
};

/// Convex polygon. Vertices are stored counter-clockwise whatever order they
/// were supplied in.
class ConvexPolygon {
public:
    ConvexPolygon() = default;
    /// Throws std::invalid_argument when the ring has < 3 vertices, zero area,
    /// or is not convex.
    explicit ConvexPolygon(std::vector<Vec2> vertices);

    static ConvexPolygon from_rect(const Rect& r);

    std::span<const Vec2> vertices() const { return vertices_; }
    double area() const;
    Rect bounding_box() const;

    /// True only for points strictly inside; boundary points are outside.
    bool contains_strict(Vec2 p) const;

    /// Smallest t in [0,1] at which the segment a→b touches the closed
    /// polygon, or nullopt when it never does.
    std::optional<double> first_hit(Vec2 a, Vec2 b) const;

    /// Smallest t at which a→b enters the open interior, or nullopt when the
    /// segment only grazes the boundary (or misses).
    std::optional<double> first_entry(Vec2 a, Vec2 b) const;

    /// Polygon ∩ rect area (Sutherland–Hodgman clip).
    double clipped_area(const Rect& r) const;

    bool operator==(const ConvexPolygon&) const = default;

private:
    std::vector<Vec2> vertices_;
};

/// Signed area of a closed ring (positive when counter-clockwise).
double signed_area(std::span<const Vec2> ring);

/// Proper or touching intersection of segments p1p2 and q1q2.
bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2);

/// Signed angle from a to b in (-pi, pi].
double signed_angle(Vec2 a, Vec2 b);

}  // namespace crowd
