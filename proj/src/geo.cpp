#include "foodaccess/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace foodaccess::geo {

namespace {

double deg2rad(double d) { return d * kPi / 180.0; }
double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace

GeoPoint::GeoPoint(double lat, double lon) : latitude_deg(lat), longitude_deg(lon) {
    if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0)
        throw DataError("GeoPoint: latitude out of range [-90, 90]");
    if (!std::isfinite(lon) || lon < -180.0 || lon > 180.0)
        throw DataError("GeoPoint: longitude out of range [-180, 180]");
}

double haversine_miles(const GeoPoint& a, const GeoPoint& b) {
    const double lat1 = deg2rad(a.latitude_deg);
    const double lat2 = deg2rad(b.latitude_deg);
    const double dlat = deg2rad(b.latitude_deg - a.latitude_deg);
    const double dlon = deg2rad(b.longitude_deg - a.longitude_deg);

    const double s1 = std::sin(0.5 * dlat);
    const double s2 = std::sin(0.5 * dlon);
    const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    const double angle = 2.0 * std::asin(std::min(1.0, std::sqrt(h)));
    return kEarthRadiusMiles * angle;
}

GeoPoint destination_point(const GeoPoint& origin, double bearing_rad,
                           double distance_miles) {
    const double delta = distance_miles / kEarthRadiusMiles;
    const double lat1 = deg2rad(origin.latitude_deg);
    const double lon1 = deg2rad(origin.longitude_deg);

    const double sin_lat2 = std::sin(lat1) * std::cos(delta) +
                            std::cos(lat1) * std::sin(delta) * std::cos(bearing_rad);
    const double lat2 = std::asin(std::clamp(sin_lat2, -1.0, 1.0));
    const double y = std::sin(bearing_rad) * std::sin(delta) * std::cos(lat1);
    const double x = std::cos(delta) - std::sin(lat1) * sin_lat2;
    double lon2 = lon1 + std::atan2(y, x);

    double lon_deg = rad2deg(lon2);
    while (lon_deg >= 180.0) lon_deg -= 360.0;
    while (lon_deg < -180.0) lon_deg += 360.0;
    return GeoPoint(std::clamp(rad2deg(lat2), -90.0, 90.0), lon_deg);
}

SpatialGrid::SpatialGrid(const std::vector<GridEntry>& agencies, double cell_size_miles)
    : cell_size_miles_(cell_size_miles) {
    if (agencies.empty()) throw DataError("SpatialGrid: agency list is empty");
    if (!(cell_size_miles > 0.0)) throw DataError("SpatialGrid: cell size must be positive");

    cell_deg_ = cell_size_miles_ / kMilesPerDegree;
    n_lon_cells_ = std::max(1, static_cast<int>(std::ceil(360.0 / cell_deg_)));
    n_entries_ = agencies.size();
    for (const auto& e : agencies)
        cells_[key_for(e.pos.latitude_deg, e.pos.longitude_deg)].push_back(e);
}

std::int64_t SpatialGrid::key_for(double lat, double lon) const {
    const int lat_idx = static_cast<int>(std::floor((lat + 90.0) / cell_deg_));
    int lon_idx = static_cast<int>(std::floor((lon + 180.0) / cell_deg_)) % n_lon_cells_;
    if (lon_idx < 0) lon_idx += n_lon_cells_;
    return (static_cast<std::int64_t>(lat_idx) << 32) | static_cast<std::uint32_t>(lon_idx);
}

void SpatialGrid::scan_within(const GeoPoint& p, double radius_miles,
                              std::vector<const GridEntry*>& out) const {
    out.clear();
    const int lat_idx = static_cast<int>(std::floor((p.latitude_deg + 90.0) / cell_deg_));
    const int lat_span = static_cast<int>(std::ceil(radius_miles / cell_size_miles_)) + 1;
    const int max_lat_idx = static_cast<int>(std::floor(180.0 / cell_deg_));

    const double rad_deg = radius_miles / kMilesPerDegree;
    const double band_lat = std::min(89.9, std::max(std::abs(p.latitude_deg - rad_deg),
                                                    std::abs(p.latitude_deg + rad_deg)));
    const double cos_min = std::max(std::cos(deg2rad(band_lat)), 1e-6);
    int lon_span = static_cast<int>(std::ceil(radius_miles / (cell_size_miles_ * cos_min))) + 1;
    const bool all_lon = 2 * lon_span + 1 >= n_lon_cells_;
    if (all_lon) lon_span = n_lon_cells_ / 2;

    int lon_idx = static_cast<int>(std::floor((p.longitude_deg + 180.0) / cell_deg_)) % n_lon_cells_;
    if (lon_idx < 0) lon_idx += n_lon_cells_;

    for (int li = std::max(0, lat_idx - lat_span);
         li <= std::min(max_lat_idx, lat_idx + lat_span); ++li) {
        const int lo = all_lon ? 0 : lon_idx - lon_span;
        const int hi = all_lon ? n_lon_cells_ - 1 : lon_idx + lon_span;
        for (int wj = lo; wj <= hi; ++wj) {
            int j = wj % n_lon_cells_;
            if (j < 0) j += n_lon_cells_;
            const std::int64_t key =
                (static_cast<std::int64_t>(li) << 32) | static_cast<std::uint32_t>(j);
            auto it = cells_.find(key);
            if (it == cells_.end()) continue;
            for (const auto& e : it->second) out.push_back(&e);
        }
    }
}

std::vector<std::pair<std::int64_t, double>> SpatialGrid::query(const GeoPoint& p,
                                                                double radius_miles) const {
    std::vector<const GridEntry*> candidates;
    scan_within(p, radius_miles, candidates);
    std::vector<std::pair<std::int64_t, double>> result;
    result.reserve(candidates.size());
    for (const auto* e : candidates) {
        const double d = haversine_miles(p, e->pos);
        if (d <= radius_miles) result.emplace_back(e->id, d);
    }
    std::sort(result.begin(), result.end(),
              [](const auto& a, const auto& b) {
                  return a.second != b.second ? a.second < b.second : a.first < b.first;
              });
    return result;
}

std::pair<std::int64_t, double> SpatialGrid::nearest(const GeoPoint& p) const {
    const double max_dist = kPi * kEarthRadiusMiles;
    std::vector<const GridEntry*> candidates;
    for (double r = cell_size_miles_;; r *= 2.0) {
        const bool final_round = r >= max_dist;
        scan_within(p, std::min(r, max_dist), candidates);
        std::int64_t best_id = -1;
        double best = std::numeric_limits<double>::infinity();
        for (const auto* e : candidates) {
            const double d = haversine_miles(p, e->pos);
            if (d < best || (d == best && e->id < best_id)) {
                best = d;
                best_id = e->id;
            }
        }
        // Everything within r has been scanned, so a best <= r is global.
        if (best_id >= 0 && (best <= r || final_round)) return {best_id, best};
        if (final_round) break;
    }
    throw NumericError("SpatialGrid::nearest: scan exhausted");  // unreachable
}

}  // namespace foodaccess::geo
