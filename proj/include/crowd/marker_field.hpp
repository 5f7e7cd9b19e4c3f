#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crowd/geometry.hpp"

namespace crowd {

using MarkerId = std::int32_t;
using AgentId = std::int32_t;

struct Marker {
    MarkerId id = 0;
    Vec2 position;
    bool operator==(const Marker&) const = default;
};

/// Uniform bucket grid over a rectangle. Points outside the rectangle are
/// clamped into the border cells.
class PointGrid {
public:
    PointGrid() = default;
    PointGrid(const Rect& bounds, double cell_size);

    void insert(std::int32_t id, Vec2 p);

    /// Calls fn(id) for every id stored in cells overlapping the disk's
    /// bounding square. Callers filter by exact distance.
    template <typename Fn>
    void visit_candidates(Vec2 center, double radius, Fn&& fn) const {
        if (cols_ == 0) return;
        const auto [c0, r0] = cell_of({center.x - radius, center.y - radius});
        const auto [c1, r1] = cell_of({center.x + radius, center.y + radius});
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                for (std::int32_t id : cells_[static_cast<std::size_t>(r) * cols_ + c]) fn(id);
            }
        }
    }

    double cell_size() const { return cell_size_; }
    std::size_t cell_count() const { return cells_.size(); }
    std::span<const std::int32_t> cell(std::size_t index) const { return cells_[index]; }
    std::size_t cell_index(Vec2 p) const;

private:
    std::pair<int, int> cell_of(Vec2 p) const;

    Rect bounds_{};
    double cell_size_ = 1.0;
    int cols_ = 0;
    int rows_ = 0;
    std::vector<std::vector<std::int32_t>> cells_;
};

/// Static marker set with a spatial index. Immutable once built.
class MarkerField {
public:
    MarkerField() = default;
    MarkerField(Rect bounds, std::vector<Marker> markers, double cell_size);

    std::span<const Marker> markers() const { return markers_; }
    std::size_t size() const { return markers_.size(); }
    const Rect& bounds() const { return bounds_; }
    double cell_size() const { return grid_.cell_size(); }
    const PointGrid& grid() const { return grid_; }

    /// Markers within `radius` of `point` (inclusive), ascending id.
    std::vector<MarkerId> markers_near(Vec2 point, double radius) const;

    template <typename Fn>
    void for_each_near(Vec2 point, double radius, Fn&& fn) const {
        const double r2 = radius * radius;
        grid_.visit_candidates(point, radius, [&](std::int32_t id) {
            const Marker& m = markers_[static_cast<std::size_t>(id)];
            if (distance_squared(m.position, point) <= r2) fn(m);
        });
    }

    /// Same markers, re-bucketed with a different cell edge.
    MarkerField reindexed(double cell_size) const;

private:
    Rect bounds_{};
    std::vector<Marker> markers_;
    PointGrid grid_;
};

struct MarkerGenerationOptions {
    int max_consecutive_rejections = 500;
    double cell_size = 1.0;
};

/// Dart throwing. Target count is floor(density × walkable area), where the
/// walkable area is the bounds minus the obstacle area inside them. Throws
/// ConfigError for non-positive density or radius.
MarkerField generate_markers(const Rect& bounds, double density, double marker_radius,
                             std::span<const ConvexPolygon> obstacles, std::uint64_t seed,
                             const MarkerGenerationOptions& options = {});

double walkable_area(const Rect& bounds, std::span<const ConvexPolygon> obstacles);

/// Position and capture radius of one agent, as seen by ownership.
struct OwnershipCandidate {
    AgentId id = 0;
    Vec2 position;
    double radius = 0.0;
};

/// Per-step marker → agent assignment.
class Ownership {
public:
    static constexpr AgentId kUnowned = -1;

    Ownership() = default;
    Ownership(std::vector<AgentId> owners, std::vector<std::vector<MarkerId>> owned)
        : owners_(std::move(owners)), owned_(std::move(owned)) {}

    AgentId owner(MarkerId marker) const { return owners_[static_cast<std::size_t>(marker)]; }
    std::span<const AgentId> owners() const { return owners_; }

    /// Markers owned by the agent at `index` in the list passed to
    /// assign_ownership, ascending id.
    std::span<const MarkerId> owned_by_index(std::size_t index) const { return owned_[index]; }
    std::size_t agent_count() const { return owned_.size(); }

private:
    std::vector<AgentId> owners_;
    std::vector<std::vector<MarkerId>> owned_;
};

/// Each marker goes to the nearest agent that has it within its capture
/// radius; exact ties go to the lowest agent id. Independent of the order of
/// `agents`.
Ownership assign_ownership(const MarkerField& field, std::span<const OwnershipCandidate> agents);

}  // namespace crowd
