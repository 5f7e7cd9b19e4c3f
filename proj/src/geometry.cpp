#include "crowd/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace crowd {

double signed_area(std::span<const Vec2> ring) {
    double twice = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const Vec2 a = ring[i];
        const Vec2 b = ring[(i + 1) % ring.size()];
        twice += cross(a, b);
    }
    return 0.5 * twice;
}

ConvexPolygon::ConvexPolygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 3) {
        throw std::invalid_argument("polygon needs at least 3 vertices");
    }
    const double a = signed_area(vertices_);
    if (!(std::abs(a) > 0.0)) {
        throw std::invalid_argument("polygon has zero area");
    }
    if (a < 0) {
        std::reverse(vertices_.begin(), vertices_.end());
    }
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 e0 = vertices_[(i + 1) % n] - vertices_[i];
        const Vec2 e1 = vertices_[(i + 2) % n] - vertices_[(i + 1) % n];
        if (cross(e0, e1) < 0) {
            throw std::invalid_argument("polygon is not convex");
        }
    }
}

ConvexPolygon ConvexPolygon::from_rect(const Rect& r) {
    return ConvexPolygon({r.min, {r.max.x, r.min.y}, r.max, {r.min.x, r.max.y}});
}

double ConvexPolygon::area() const { return signed_area(vertices_); }

Rect ConvexPolygon::bounding_box() const {
    Rect box{vertices_.front(), vertices_.front()};
    for (const Vec2& v : vertices_) {
        box.min.x = std::min(box.min.x, v.x);
        box.min.y = std::min(box.min.y, v.y);
        box.max.x = std::max(box.max.x, v.x);
        box.max.y = std::max(box.max.y, v.y);
    }
    return box;
}

bool ConvexPolygon::contains_strict(Vec2 p) const {
    if (vertices_.empty()) return false;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = vertices_[i];
        const Vec2 b = vertices_[(i + 1) % n];
        if (cross(b - a, p - a) <= 0.0) return false;
    }
    return true;
}

// Cyrus–Beck clipping of the segment against the polygon's half-planes.
std::optional<double> ConvexPolygon::first_hit(Vec2 a, Vec2 b) const {
    if (vertices_.empty()) return std::nullopt;
    const Vec2 d = b - a;
    double t_enter = 0.0;
    double t_exit = 1.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 v0 = vertices_[i];
        const Vec2 edge = vertices_[(i + 1) % n] - v0;
        // inside means cross(edge, p - v0) >= 0
        const double num = cross(edge, a - v0);
        const double den = cross(edge, d);
        if (den == 0.0) {
            if (num < 0.0) return std::nullopt;
            continue;
        }
        const double t = -num / den;
        if (den > 0.0) {
            t_enter = std::max(t_enter, t);
        } else {
            t_exit = std::min(t_exit, t);
        }
        if (t_enter > t_exit) return std::nullopt;
    }
    return t_enter;
}

std::optional<double> ConvexPolygon::first_entry(Vec2 a, Vec2 b) const {
    if (vertices_.empty()) return std::nullopt;
    const Vec2 d = b - a;
    double t_enter = 0.0;
    double t_exit = 1.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 v0 = vertices_[i];
        const Vec2 edge = vertices_[(i + 1) % n] - v0;
        const double num = cross(edge, a - v0);
        const double den = cross(edge, d);
        if (den == 0.0) {
            if (num <= 0.0) return std::nullopt;
            continue;
        }
        const double t = -num / den;
        if (den > 0.0) {
            t_enter = std::max(t_enter, t);
        } else {
            t_exit = std::min(t_exit, t);
        }
        if (!(t_enter < t_exit)) return std::nullopt;
    }
    return t_enter;
}

double ConvexPolygon::clipped_area(const Rect& r) const {
    if (r.degenerate()) return 0.0;
    std::vector<Vec2> poly(vertices_.begin(), vertices_.end());
    auto clip = [&poly](auto inside, auto intersect) {
        std::vector<Vec2> out;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Vec2 cur = poly[i];
            const Vec2 prev = poly[(i + poly.size() - 1) % poly.size()];
            const bool in_cur = inside(cur);
            const bool in_prev = inside(prev);
            if (in_cur) {
                if (!in_prev) out.push_back(intersect(prev, cur));
                out.push_back(cur);
            } else if (in_prev) {
                out.push_back(intersect(prev, cur));
            }
        }
        poly = std::move(out);
    };
    auto at_x = [](double x) {
        return [x](Vec2 p, Vec2 q) {
            const double t = (x - p.x) / (q.x - p.x);
            return Vec2{x, p.y + t * (q.y - p.y)};
        };
    };
    auto at_y = [](double y) {
        return [y](Vec2 p, Vec2 q) {
            const double t = (y - p.y) / (q.y - p.y);
            return Vec2{p.x + t * (q.x - p.x), y};
        };
    };
    clip([&](Vec2 p) { return p.x >= r.min.x; }, at_x(r.min.x));
    if (poly.empty()) return 0.0;
    clip([&](Vec2 p) { return p.x <= r.max.x; }, at_x(r.max.x));
    if (poly.empty()) return 0.0;
    clip([&](Vec2 p) { return p.y >= r.min.y; }, at_y(r.min.y));
    if (poly.empty()) return 0.0;
    clip([&](Vec2 p) { return p.y <= r.max.y; }, at_y(r.max.y));
    if (poly.size() < 3) return 0.0;
    return std::abs(signed_area(poly));
}

bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
    auto orient = [](Vec2 a, Vec2 b, Vec2 c) {
        const double v = cross(b - a, c - a);
        return (v > 0) - (v < 0);
    };
    auto on_segment = [](Vec2 a, Vec2 b, Vec2 p) {
        return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
               std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
    };
    const int o1 = orient(p1, p2, q1);
    const int o2 = orient(p1, p2, q2);
    const int o3 = orient(q1, q2, p1);
    const int o4 = orient(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

double signed_angle(Vec2 a, Vec2 b) { return std::atan2(cross(a, b), dot(a, b)); }

}  // namespace crowd
