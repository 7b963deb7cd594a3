#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "foodaccess/geo.hpp"
#include "foodaccess/rng.hpp"

using namespace foodaccess;
using geo::GeoPoint;
using geo::GridEntry;
using geo::haversine_miles;
using geo::kEarthRadiusMiles;
using geo::kPi;

namespace {

GeoPoint random_point(Rng& rng) {
    // Uniform on the sphere (lat via arcsin of a uniform z).
    const double z = rng.uniform(-1.0, 1.0);
    const double lat = std::asin(z) * 180.0 / kPi;
    return GeoPoint(lat, rng.uniform(-180.0, 180.0));
}

// Independent oracle: spherical law of cosines.
double law_of_cosines_miles(const GeoPoint& a, const GeoPoint& b) {
    const double lat1 = a.latitude_deg * kPi / 180.0;
    const double lat2 = b.latitude_deg * kPi / 180.0;
    const double dlon = (b.longitude_deg - a.longitude_deg) * kPi / 180.0;
    const double c = std::sin(lat1) * std::sin(lat2) +
                     std::cos(lat1) * std::cos(lat2) * std::cos(dlon);
    return kEarthRadiusMiles * std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace

TEST_CASE("GeoPoint validation") {
    CHECK_THROWS_AS(GeoPoint(91.0, 0.0), DataError);
    CHECK_THROWS_AS(GeoPoint(-90.5, 0.0), DataError);
    CHECK_THROWS_AS(GeoPoint(0.0, 180.5), DataError);
    CHECK_THROWS_AS(GeoPoint(std::nan(""), 0.0), DataError);
    CHECK_NOTHROW(GeoPoint(-90.0, 180.0));
}

TEST_CASE("haversine analytic anchors") {
    const GeoPoint origin(0.0, 0.0);
    CHECK(haversine_miles(origin, origin) == 0.0);
    // Antipodal arc = pi * R.
    CHECK(haversine_miles(origin, GeoPoint(0.0, 180.0)) ==
          doctest::Approx(kPi * kEarthRadiusMiles).epsilon(1e-9));
    // One-degree meridian arc = R * pi / 180.
    CHECK(haversine_miles(origin, GeoPoint(1.0, 0.0)) ==
          doctest::Approx(kEarthRadiusMiles * kPi / 180.0).epsilon(1e-9));
    CHECK(haversine_miles(origin, GeoPoint(1.0, 0.0)) == doctest::Approx(69.093).epsilon(1e-4));
}

TEST_CASE("haversine symmetry and triangle inequality") {
    Rng rng(42);
    for (int i = 0; i < 2000; ++i) {
        const GeoPoint a = random_point(rng), b = random_point(rng), c = random_point(rng);
        const double ab = haversine_miles(a, b);
        CHECK(ab == haversine_miles(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= kPi * kEarthRadiusMiles * (1 + 1e-12));
        CHECK(haversine_miles(a, c) <= ab + haversine_miles(b, c) + 1e-9);
    }
}

TEST_CASE("haversine matches law-of-cosines oracle") {
    Rng rng(7);
    int checked = 0;
    while (checked < 20000) {
        const GeoPoint a = random_point(rng), b = random_point(rng);
        const double d = haversine_miles(a, b);
        // Skip near-antipodal and near-coincident pairs where the oracle
        // itself is ill-conditioned.
        if (d < 50.0 || d > (kPi - 0.05) * kEarthRadiusMiles) continue;
        ++checked;
        CHECK(d == doctest::Approx(law_of_cosines_miles(a, b)).epsilon(1e-6));
    }
}

TEST_CASE("destination_point round-trips with haversine") {
    Rng rng(3);
    for (int i = 0; i < 5000; ++i) {
        const GeoPoint origin(rng.uniform(-70.0, 70.0), rng.uniform(-180.0, 180.0));
        const double dist = rng.uniform(0.01, 200.0);
        const double bearing = rng.uniform(0.0, 2 * kPi);
        const GeoPoint dest = geo::destination_point(origin, bearing, dist);
        CHECK(haversine_miles(origin, dest) == doctest::Approx(dist).epsilon(1e-9));
    }
}

TEST_CASE("grid stores every agency and rejects empty input") {
    CHECK_THROWS_AS(geo::SpatialGrid({}, 1.0), DataError);

    std::vector<GridEntry> one = {{7, GeoPoint(41.5, -81.7)}};
    const geo::SpatialGrid g(one, 5.0);
    CHECK(g.size() == 1);
    const auto [id, dist] = g.nearest(GeoPoint(41.5, -81.7));
    CHECK(id == 7);
    CHECK(dist == 0.0);

    Rng rng(5);
    std::vector<GridEntry> many;
    for (int i = 0; i < 500; ++i)
        many.push_back({i, GeoPoint(rng.uniform(40.0, 42.0), rng.uniform(-83.0, -80.0))});
    CHECK(geo::SpatialGrid(many, 2.0).size() == 500);
}

TEST_CASE("radius query is a superset of the brute-force scan") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<GridEntry> agencies;
        const int n = 5 + static_cast<int>(rng.index(60));
        for (int i = 0; i < n; ++i)
            agencies.push_back(
                {i, GeoPoint(rng.uniform(39.0, 43.0), rng.uniform(-84.0, -79.0))});
        const double cell = rng.uniform(0.3, 10.0);
        const geo::SpatialGrid grid(agencies, cell);

        for (int q = 0; q < 25; ++q) {
            const GeoPoint p(rng.uniform(39.0, 43.0), rng.uniform(-84.0, -79.0));
            const double r = rng.uniform(0.1, 80.0);
            std::set<std::int64_t> expected;
            for (const auto& a : agencies)
                if (haversine_miles(p, a.pos) <= r) expected.insert(a.id);
            std::set<std::int64_t> got;
            for (const auto& [id, dist] : grid.query(p, r)) got.insert(id);
            CHECK(got == expected);
        }
    }
}

TEST_CASE("nearest matches linear scan, ties go to the smaller id") {
    Rng rng(13);
    std::vector<GridEntry> agencies;
    for (int i = 0; i < 200; ++i)
        agencies.push_back({i, GeoPoint(rng.uniform(40.0, 42.0), rng.uniform(-83.0, -80.0))});
    const geo::SpatialGrid grid(agencies, 1.0);

    for (int q = 0; q < 5000; ++q) {
        const GeoPoint p(rng.uniform(39.5, 42.5), rng.uniform(-83.5, -79.5));
        std::int64_t best_id = -1;
        double best = 1e300;
        for (const auto& a : agencies) {
            const double d = haversine_miles(p, a.pos);
            if (d < best) {
                best = d;
                best_id = a.id;
            }
        }
        const auto [id, dist] = grid.nearest(p);
        CHECK(id == best_id);
        CHECK(dist == best);
    }

    // Exact tie: two agencies mirrored across the query longitude.
    std::vector<GridEntry> tied = {{5, GeoPoint(41.0, -81.0)}, {2, GeoPoint(41.0, -83.0)}};
    const geo::SpatialGrid tg(tied, 1.0);
    CHECK(tg.nearest(GeoPoint(41.0, -82.0)).first == 2);
}

TEST_CASE("grid handles the antimeridian and high latitudes") {
    std::vector<GridEntry> agencies = {{0, GeoPoint(10.0, 179.95)},
                                       {1, GeoPoint(10.0, -179.95)},
                                       {2, GeoPoint(84.0, 30.0)}};
    const geo::SpatialGrid grid(agencies, 1.0);

    // Query on the other side of the antimeridian still finds both.
    const auto near_am = grid.query(GeoPoint(10.0, -179.99), 10.0);
    CHECK(near_am.size() == 2);

    // High latitude: longitude degrees shrink, cells must widen.
    const auto polar = grid.query(GeoPoint(84.0, 31.0), 20.0);
    CHECK(polar.size() == 1);
    CHECK(polar[0].first == 2);
    CHECK(grid.nearest(GeoPoint(84.0, 31.5)).first == 2);
}
