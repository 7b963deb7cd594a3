#pragma once

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "foodaccess/errors.hpp"

namespace foodaccess::geo {

// Spherical earth model. The 1-mile accessibility threshold makes
// sub-0.5% ellipsoidal corrections irrelevant.
inline constexpr double kEarthRadiusMiles = 3958.7613;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kMilesPerDegree = kEarthRadiusMiles * kPi / 180.0;

// WGS84 decimal-degree point; validated at construction.
struct GeoPoint {
    double latitude_deg;
    double longitude_deg;

    GeoPoint(double lat, double lon);
};

// Great-circle distance in statute miles (haversine form).
double haversine_miles(const GeoPoint& a, const GeoPoint& b);

// Point reached from `origin` travelling `distance_miles` along the
// initial bearing `bearing_rad` (spherical direct problem). Shares the
// sphere radius with haversine_miles so the pair round-trips.
GeoPoint destination_point(const GeoPoint& origin, double bearing_rad,
                           double distance_miles);

struct GridEntry {
    std::int64_t id;
    GeoPoint pos;
};

// Uniform lat/lon bucket grid for nearest-agency and radius queries.
// Immutable after construction; concurrent read-only queries are safe.
// Longitude indices wrap at the antimeridian and the per-query longitude
// span is widened by 1/cos(lat) so radius queries never miss an entry.
class SpatialGrid {
public:
    SpatialGrid(const std::vector<GridEntry>& agencies, double cell_size_miles);

    std::size_t size() const { return n_entries_; }
    double cell_size_miles() const { return cell_size_miles_; }

    // All entries within `radius_miles` of p, as (id, distance) pairs.
    std::vector<std::pair<std::int64_t, double>> query(const GeoPoint& p,
                                                       double radius_miles) const;

    // Closest entry; ties broken by the smallest id.
    std::pair<std::int64_t, double> nearest(const GeoPoint& p) const;

private:
    std::int64_t key_for(double lat, double lon) const;
    void scan_within(const GeoPoint& p, double radius_miles,
                     std::vector<const GridEntry*>& out) const;

    double cell_size_miles_;
    double cell_deg_;
    int n_lon_cells_;
    std::size_t n_entries_;
    std::unordered_map<std::int64_t, std::vector<GridEntry>> cells_;
};

}  // namespace foodaccess::geo
