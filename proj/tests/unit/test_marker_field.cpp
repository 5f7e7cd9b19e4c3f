#include <doctest.h>

#include <algorithm>
#include <random>

#include "../oracles.hpp"
#include "crowd/errors.hpp"
#include "crowd/marker_field.hpp"
#include "crowd/rng.hpp"

using namespace crowd;

namespace {

const Rect kWorld{{0, 0}, {40, 40}};

MarkerField random_field(Rng& rng, int count, const Rect& bounds, double cell) {
    std::vector<Marker> markers;
    for (int i = 0; i < count; ++i) {
        markers.push_back({i, {rng.uniform(bounds.min.x, bounds.max.x), rng.uniform(bounds.min.y, bounds.max.y)}});
    }
    return MarkerField(bounds, std::move(markers), cell);
}

}  // namespace

TEST_CASE("40x40 field at density 0.5 and radius 0.1") {
    const MarkerField f = generate_markers(kWorld, 0.5, 0.1, {}, 7);
    // frozen from the first seeded run
    CHECK(f.size() == 800);
    CHECK(f.size() >= 720);
    CHECK(oracle::min_pairwise_distance(f.markers()) >= 0.1);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(f.markers()[i].id == static_cast<MarkerId>(i));
        CHECK(kWorld.contains(f.markers()[i].position));
    }
}

TEST_CASE("zero-width bounds give an empty field") {
    CHECK(generate_markers(Rect{{0, 0}, {0, 40}}, 0.5, 0.1, {}, 1).size() == 0);
}

TEST_CASE("less than one marker of area gives an empty field") {
    CHECK(generate_markers(Rect{{0, 0}, {1, 1}}, 0.5, 0.1, {}, 1).size() == 0);
}

TEST_CASE("non-positive density or radius is a configuration error") {
    CHECK_THROWS_AS(generate_markers(kWorld, 0.0, 0.1, {}, 1), ConfigError);
    CHECK_THROWS_AS(generate_markers(kWorld, -1.0, 0.1, {}, 1), ConfigError);
    CHECK_THROWS_AS(generate_markers(kWorld, 0.5, 0.0, {}, 1), ConfigError);
}

TEST_CASE("obstacle over the left half keeps markers to the right") {
    const std::vector<ConvexPolygon> obstacles{ConvexPolygon::from_rect({{0, 0}, {20, 40}})};
    const MarkerField f = generate_markers(kWorld, 0.75, 0.6, obstacles, 11);
    REQUIRE(f.size() > 0);
    CHECK(f.size() <= 600);
    for (const Marker& m : f.markers()) {
        CHECK(m.position.x >= 20.0);
        CHECK_FALSE(obstacles[0].contains_strict(m.position));
    }
}

TEST_CASE("generation is deterministic per seed") {
    const std::vector<ConvexPolygon> obstacles{ConvexPolygon({{10, 10}, {20, 10}, {15, 18}})};
    const MarkerField a = generate_markers(kWorld, 0.75, 0.6, obstacles, 99);
    const MarkerField b = generate_markers(kWorld, 0.75, 0.6, obstacles, 99);
    const MarkerField c = generate_markers(kWorld, 0.75, 0.6, obstacles, 100);
    CHECK(std::equal(a.markers().begin(), a.markers().end(), b.markers().begin(), b.markers().end()));
    CHECK_FALSE(std::equal(a.markers().begin(), a.markers().end(), c.markers().begin(), c.markers().end()));
}

TEST_CASE("every marker sits in exactly one grid cell") {
    const MarkerField f = generate_markers(kWorld, 0.5, 0.6, {}, 5, {500, 1.7});
    std::vector<int> seen(f.size(), 0);
    for (std::size_t c = 0; c < f.grid().cell_count(); ++c) {
        for (std::int32_t id : f.grid().cell(c)) {
            ++seen[static_cast<std::size_t>(id)];
            CHECK(f.grid().cell_index(f.markers()[static_cast<std::size_t>(id)].position) == c);
        }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }));
}

TEST_CASE("markers_near matches a linear scan") {
    Rng rng(21);
    const MarkerField f = random_field(rng, 100, {{0, 0}, {10, 10}}, 1.0);
    for (int q = 0; q < 200; ++q) {
        const Vec2 p{rng.uniform(-1, 11), rng.uniform(-1, 11)};
        const double r = q == 0 ? 2.0 : rng.uniform(0, 4);
        CHECK(f.markers_near(p, r) == oracle::linear_markers_near(f.markers(), p, r));
    }
}

TEST_CASE("markers_near boundary cases") {
    Rng rng(4);
    const MarkerField f = random_field(rng, 50, {{0, 0}, {10, 10}}, 1.0);
    const Marker& m = f.markers()[17];
    CHECK(f.markers_near(m.position, 0.0) == std::vector<MarkerId>{17});
    CHECK(f.markers_near({5, 5}, 100.0).size() == 50);
}

TEST_CASE("ownership with a single candidate") {
    const MarkerField f(Rect{{0, 0}, {10, 10}}, {{0, {5, 5.5}}, {1, {5.5, 5}}, {2, {4.6, 5}}}, 1.0);
    const std::vector<OwnershipCandidate> agents{{7, {5, 5}, 1.0}};
    const Ownership o = assign_ownership(f, agents);
    CHECK(o.owner(0) == 7);
    CHECK(o.owner(1) == 7);
    CHECK(o.owner(2) == 7);
    CHECK(o.owned_by_index(0).size() == 3);
}

TEST_CASE("equidistant agents: lower id wins") {
    const MarkerField f(Rect{{0, 0}, {10, 10}}, {{0, {5, 5}}}, 1.0);
    const std::vector<OwnershipCandidate> agents{{9, {4, 5}, 2.0}, {3, {6, 5}, 2.0}};
    CHECK(assign_ownership(f, agents).owner(0) == 3);
}

TEST_CASE("empty agent list leaves every marker unowned") {
    const MarkerField f = generate_markers(kWorld, 0.5, 0.6, {}, 1);
    const Ownership o = assign_ownership(f, {});
    CHECK(std::all_of(o.owners().begin(), o.owners().end(), [](AgentId a) { return a == Ownership::kUnowned; }));
}

TEST_CASE("ownership matches brute force on 10 agents and 200 markers") {
    Rng rng(3);
    const MarkerField f = random_field(rng, 200, {{0, 0}, {20, 20}}, 2.0);
    std::vector<OwnershipCandidate> agents;
    for (int i = 0; i < 10; ++i) agents.push_back({i, {rng.uniform(0, 20), rng.uniform(0, 20)}, 2.0});
    const Ownership o = assign_ownership(f, agents);
    CHECK(std::vector<AgentId>(o.owners().begin(), o.owners().end()) ==
          oracle::brute_force_owners(f.markers(), agents));
}

TEST_CASE("ownership is a pure function of the agent set") {
    Rng rng(8);
    const MarkerField f = random_field(rng, 500, {{0, 0}, {20, 20}}, 1.0);
    std::vector<OwnershipCandidate> agents;
    for (int i = 0; i < 30; ++i) agents.push_back({i * 3 + 1, {rng.uniform(0, 20), rng.uniform(0, 20)}, 1.5});
    const Ownership a = assign_ownership(f, agents);
    std::mt19937 shuffle(1);
    std::shuffle(agents.begin(), agents.end(), shuffle);
    const Ownership b = assign_ownership(f, agents);
    CHECK(std::equal(a.owners().begin(), a.owners().end(), b.owners().begin(), b.owners().end()));
    for (std::size_t i = 0; i < agents.size(); ++i) {
        for (MarkerId m : b.owned_by_index(i)) {
            CHECK(b.owner(m) == agents[i].id);
            CHECK(distance(f.markers()[static_cast<std::size_t>(m)].position, agents[i].position) <= agents[i].radius);
        }
    }
}

TEST_CASE("walkable area subtracts obstacles inside the bounds") {
    const std::vector<ConvexPolygon> obstacles{ConvexPolygon::from_rect({{-10, 0}, {10, 40}})};
    CHECK(walkable_area(kWorld, obstacles) == doctest::Approx(1200.0));
}
