#include "crowd/marker_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crowd/errors.hpp"
#include "crowd/rng.hpp"

namespace crowd {

namespace {

constexpr std::size_t kMaxGridCells = 1u << 22;

bool inside_any(std::span<const ConvexPolygon> obstacles, Vec2 p) {
    for (const ConvexPolygon& o : obstacles) {
        // closed test: boundary counts as blocked for markers
        if (o.contains_strict(p) || o.first_hit(p, p).has_value()) return true;
    }
    return false;
}

}  // namespace

PointGrid::PointGrid(const Rect& bounds, double cell_size) : bounds_(bounds) {
    const double w = std::max(bounds.width(), 0.0);
    const double h = std::max(bounds.height(), 0.0);
    cell_size_ = cell_size > 0 ? cell_size : 1.0;
    // keep the table bounded for tiny cells on large worlds
    while ((std::floor(w / cell_size_) + 1) * (std::floor(h / cell_size_) + 1) >
           static_cast<double>(kMaxGridCells)) {
        cell_size_ *= 2.0;
    }
    cols_ = static_cast<int>(std::floor(w / cell_size_)) + 1;
    rows_ = static_cast<int>(std::floor(h / cell_size_)) + 1;
    cells_.resize(static_cast<std::size_t>(cols_) * rows_);
}

std::pair<int, int> PointGrid::cell_of(Vec2 p) const {
    auto axis = [this](double v, double lo, int n) {
        const double f = std::floor((v - lo) / cell_size_);
        if (!(f >= 0)) return 0;
        if (f >= n - 1) return n - 1;
        return static_cast<int>(f);
    };
    return {axis(p.x, bounds_.min.x, cols_), axis(p.y, bounds_.min.y, rows_)};
}

std::size_t PointGrid::cell_index(Vec2 p) const {
    const auto [c, r] = cell_of(p);
    return static_cast<std::size_t>(r) * cols_ + c;
}

void PointGrid::insert(std::int32_t id, Vec2 p) { cells_[cell_index(p)].push_back(id); }

MarkerField::MarkerField(Rect bounds, std::vector<Marker> markers, double cell_size)
    : bounds_(bounds), markers_(std::move(markers)), grid_(bounds, cell_size) {
    for (const Marker& m : markers_) grid_.insert(m.id, m.position);
}

std::vector<MarkerId> MarkerField::markers_near(Vec2 point, double radius) const {
    std::vector<MarkerId> out;
    for_each_near(point, radius, [&out](const Marker& m) { out.push_back(m.id); });
    std::sort(out.begin(), out.end());
    return out;
}

MarkerField MarkerField::reindexed(double cell_size) const {
    return MarkerField(bounds_, markers_, cell_size);
}

double walkable_area(const Rect& bounds, std::span<const ConvexPolygon> obstacles) {
    double area = bounds.area();
    for (const ConvexPolygon& o : obstacles) area -= o.clipped_area(bounds);
    return std::max(area, 0.0);
}

MarkerField generate_markers(const Rect& bounds, double density, double marker_radius,
                             std::span<const ConvexPolygon> obstacles, std::uint64_t seed,
                             const MarkerGenerationOptions& options) {
    if (!(density > 0)) throw ConfigError("marker density must be positive");
    if (!(marker_radius > 0)) throw ConfigError("marker radius must be positive");
    if (bounds.degenerate()) return MarkerField(bounds, {}, options.cell_size);

    const double target_f = std::floor(density * walkable_area(bounds, obstacles));
    if (target_f < 1) return MarkerField(bounds, {}, options.cell_size);
    const auto target = static_cast<std::size_t>(target_f);

    // Cells at least one marker radius wide, so the rejection test only needs
    // the 3x3 neighbourhood.
    const double spacing = std::sqrt(1.0 / density);
    PointGrid darts(bounds, std::max(marker_radius, spacing));
    const double r2 = marker_radius * marker_radius;

    Rng rng = Rng::substream(seed, "markers");
    std::vector<Marker> markers;
    markers.reserve(target);
    int rejected = 0;
    while (markers.size() < target && rejected < options.max_consecutive_rejections) {
        const Vec2 p{rng.uniform(bounds.min.x, bounds.max.x),
                     rng.uniform(bounds.min.y, bounds.max.y)};
        bool ok = !inside_any(obstacles, p);
        if (ok) {
            darts.visit_candidates(p, marker_radius, [&](std::int32_t id) {
                if (ok && distance_squared(markers[static_cast<std::size_t>(id)].position, p) < r2) {
                    ok = false;
                }
            });
        }
        if (!ok) {
            ++rejected;
            continue;
        }
        rejected = 0;
        const auto id = static_cast<MarkerId>(markers.size());
        markers.push_back({id, p});
        darts.insert(id, p);
    }
    return MarkerField(bounds, std::move(markers), options.cell_size);
}

Ownership assign_ownership(const MarkerField& field, std::span<const OwnershipCandidate> agents) {
    const std::size_t n = field.size();
    std::vector<AgentId> owners(n, Ownership::kUnowned);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());

    for (const OwnershipCandidate& a : agents) {
        field.for_each_near(a.position, a.radius, [&](const Marker& m) {
            const auto k = static_cast<std::size_t>(m.id);
            const double d2 = distance_squared(m.position, a.position);
            if (d2 < best[k] || (d2 == best[k] && a.id < owners[k])) {
                best[k] = d2;
                owners[k] = a.id;
            }
        });
    }

    // Map ids back to list positions for the per-agent view.
    std::vector<std::pair<AgentId, std::size_t>> index;
    index.reserve(agents.size());
    for (std::size_t i = 0; i < agents.size(); ++i) index.emplace_back(agents[i].id, i);
    std::sort(index.begin(), index.end());

    std::vector<std::vector<MarkerId>> owned(agents.size());
    for (std::size_t k = 0; k < n; ++k) {
        if (owners[k] == Ownership::kUnowned) continue;
        const auto it = std::lower_bound(index.begin(), index.end(),
                                         std::pair<AgentId, std::size_t>{owners[k], 0});
        owned[it->second].push_back(static_cast<MarkerId>(k));
    }
    return Ownership(std::move(owners), std::move(owned));
}

}  // namespace crowd
