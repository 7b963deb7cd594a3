#include "foodaccess/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "foodaccess/csv.hpp"

namespace foodaccess::ingest {

namespace {

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_int(const std::string& s, int& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

bool valid_coords(double lat, double lon) {
    return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 &&
           lon >= -180.0 && lon <= 180.0;
}

int require_column(const csv::Table& t, const std::string& name, const std::string& path) {
    const int c = t.column(name);
    if (c < 0) throw DataError("missing required column '" + name + "' in " + path);
    return c;
}

}  // namespace

std::string RejectionReport::to_string() const {
    std::ostringstream out;
    out << "input_rows=" << input_rows << " valid_rows=" << valid_rows
        << " bad_coordinate=" << bad_coordinate << " bad_count=" << bad_count
        << " unknown_agency=" << unknown_agency << " unknown_tract=" << unknown_tract
        << " malformed=" << malformed;
    return out.str();
}

const AgencyRecord& Dataset::agency_for(const FamilyServiceRecord& r) const {
    return agencies[static_cast<std::size_t>(agency_index.at(r.agency_id))];
}

std::vector<geo::GridEntry> Dataset::agency_grid_entries() const {
    std::vector<geo::GridEntry> entries;
    entries.reserve(agencies.size());
    for (std::size_t i = 0; i < agencies.size(); ++i)
        entries.push_back({static_cast<std::int64_t>(i),
                           geo::GeoPoint(agencies[i].latitude_deg, agencies[i].longitude_deg)});
    return entries;
}

Dataset load_tables(const std::string& service_path, const std::string& agency_path,
                    const std::string& income_path, const LoadOptions& options) {
    Dataset ds;

    {
        const csv::Table t = csv::read_csv(agency_path);
        const int c_id = require_column(t, "agency_id", agency_path);
        const int c_lat = require_column(t, "latitude", agency_path);
        const int c_lon = require_column(t, "longitude", agency_path);
        const int c_name = t.column("name");
        for (const auto& row : t.rows) {
            if (static_cast<int>(row.size()) <= std::max({c_id, c_lat, c_lon}))
                throw DataError("malformed agency row in " + agency_path);
            AgencyRecord a;
            a.agency_id = row[static_cast<std::size_t>(c_id)];
            if (!parse_double(row[static_cast<std::size_t>(c_lat)], a.latitude_deg) ||
                !parse_double(row[static_cast<std::size_t>(c_lon)], a.longitude_deg) ||
                !valid_coords(a.latitude_deg, a.longitude_deg))
                throw DataError("invalid agency coordinates for id '" + a.agency_id + "'");
            if (c_name >= 0 && c_name < static_cast<int>(row.size()))
                a.name = row[static_cast<std::size_t>(c_name)];
            ds.agencies.push_back(std::move(a));
        }
        std::sort(ds.agencies.begin(), ds.agencies.end(),
                  [](const auto& x, const auto& y) { return x.agency_id < y.agency_id; });
        for (std::size_t i = 0; i < ds.agencies.size(); ++i) {
            if (!ds.agency_index.emplace(ds.agencies[i].agency_id, static_cast<int>(i)).second)
                throw DataError("duplicate agency_id '" + ds.agencies[i].agency_id + "'");
        }
        if (ds.agencies.empty()) throw DataError("no agencies in " + agency_path);
    }

    {
        const csv::Table t = csv::read_csv(income_path);
        const int c_id = require_column(t, "tract_id", income_path);
        const int c_inc = require_column(t, "avg_household_income", income_path);
        for (const auto& row : t.rows) {
            if (static_cast<int>(row.size()) <= std::max(c_id, c_inc))
                throw DataError("malformed tract row in " + income_path);
            TractIncomeRecord r;
            r.tract_id = row[static_cast<std::size_t>(c_id)];
            if (!parse_double(row[static_cast<std::size_t>(c_inc)], r.avg_household_income) ||
                r.avg_household_income <= 0.0)
                throw DataError("invalid income for tract '" + r.tract_id + "'");
            ds.tracts.push_back(std::move(r));
        }
        std::sort(ds.tracts.begin(), ds.tracts.end(),
                  [](const auto& x, const auto& y) { return x.tract_id < y.tract_id; });
        for (const auto& r : ds.tracts) {
            if (!ds.tract_income.emplace(r.tract_id, r.avg_household_income).second)
                throw DataError("duplicate tract_id '" + r.tract_id + "'");
        }
    }

    {
        const csv::Table t = csv::read_csv(service_path);
        const int c_fid = require_column(t, "family_id", service_path);
        const int c_lat = require_column(t, "latitude", service_path);
        const int c_lon = require_column(t, "longitude", service_path);
        const int c_aid = require_column(t, "agency_id", service_path);
        const int c_ad = require_column(t, "n_adults", service_path);
        const int c_ch = require_column(t, "n_children", service_path);
        const int c_se = require_column(t, "n_seniors", service_path);
        const int c_tid = require_column(t, "tract_id", service_path);
        const int max_col = std::max({c_fid, c_lat, c_lon, c_aid, c_ad, c_ch, c_se, c_tid});

        for (const auto& row : t.rows) {
            ++ds.report.input_rows;
            if (static_cast<int>(row.size()) <= max_col) {
                ++ds.report.malformed;
                continue;
            }
            FamilyServiceRecord r;
            r.family_id = row[static_cast<std::size_t>(c_fid)];
            r.agency_id = row[static_cast<std::size_t>(c_aid)];
            r.tract_id = row[static_cast<std::size_t>(c_tid)];
            if (!parse_double(row[static_cast<std::size_t>(c_lat)], r.latitude_deg) ||
                !parse_double(row[static_cast<std::size_t>(c_lon)], r.longitude_deg) ||
                !valid_coords(r.latitude_deg, r.longitude_deg)) {
                ++ds.report.bad_coordinate;
                continue;
            }
            if (!parse_int(row[static_cast<std::size_t>(c_ad)], r.n_adults) ||
                !parse_int(row[static_cast<std::size_t>(c_ch)], r.n_children) ||
                !parse_int(row[static_cast<std::size_t>(c_se)], r.n_seniors) ||
                r.n_adults < 0 || r.n_children < 0 || r.n_seniors < 0 ||
                r.household_size() < 1) {
                ++ds.report.bad_count;
                continue;
            }
            if (!ds.agency_index.count(r.agency_id)) {
                ++ds.report.unknown_agency;
                continue;
            }
            if (options.reject_unknown_tract && !ds.tract_income.count(r.tract_id)) {
                ++ds.report.unknown_tract;
                continue;
            }
            ++ds.report.valid_rows;
            ds.records.push_back(std::move(r));
        }
    }
    if (ds.records.empty())
        throw DataError("no valid rows in " + service_path + " (" + ds.report.to_string() + ")");
    return ds;
}

double assigned_distance(const FamilyServiceRecord& record, const Dataset& dataset) {
    const AgencyRecord& a = dataset.agency_for(record);
    return geo::haversine_miles(geo::GeoPoint(record.latitude_deg, record.longitude_deg),
                                geo::GeoPoint(a.latitude_deg, a.longitude_deg));
}

std::vector<double> assigned_distances(const Dataset& dataset) {
    std::vector<double> out;
    out.reserve(dataset.records.size());
    for (const auto& r : dataset.records) out.push_back(assigned_distance(r, dataset));
    return out;
}

Feature feature_from_string(const std::string& name) {
    if (name == "distance_miles") return Feature::distance_miles;
    if (name == "log_distance_miles") return Feature::log_distance_miles;
    if (name == "household_size") return Feature::household_size;
    if (name == "latitude_deg") return Feature::latitude_deg;
    if (name == "longitude_deg") return Feature::longitude_deg;
    throw DataError("unknown feature: " + name);
}

std::string to_string(Feature f) {
    switch (f) {
        case Feature::distance_miles: return "distance_miles";
        case Feature::log_distance_miles: return "log_distance_miles";
        case Feature::household_size: return "household_size";
        case Feature::latitude_deg: return "latitude_deg";
        case Feature::longitude_deg: return "longitude_deg";
    }
    throw DataError("unknown feature");
}

double FeatureMatrix::inverse_map(int col, double value) const {
    if (scaling != Scaling::zscore) return value;
    return value * col_sd[static_cast<std::size_t>(col)] +
           col_mean[static_cast<std::size_t>(col)];
}

FeatureMatrix featurize(const Dataset& dataset, const std::vector<Feature>& spec,
                        Scaling scaling) {
    if (spec.empty()) throw DataError("featurize: empty feature spec");
    const int n = static_cast<int>(dataset.records.size());
    const int d = static_cast<int>(spec.size());

    // Distance floor keeps log_distance finite for co-located rows.
    constexpr double kLogDistanceFloorMiles = 1e-3;

    std::vector<double> distances;
    for (Feature f : spec)
        if (f == Feature::distance_miles || f == Feature::log_distance_miles) {
            distances = assigned_distances(dataset);
            break;
        }

    FeatureMatrix fm;
    fm.spec = spec;
    fm.scaling = scaling;
    fm.X = Eigen::MatrixXd(n, d);
    for (int i = 0; i < n; ++i) {
        const auto& r = dataset.records[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) {
            double v = 0.0;
            switch (spec[static_cast<std::size_t>(j)]) {
                case Feature::distance_miles:
                    v = distances[static_cast<std::size_t>(i)];
                    break;
                case Feature::log_distance_miles:
                    v = std::log(std::max(distances[static_cast<std::size_t>(i)],
                                          kLogDistanceFloorMiles));
                    break;
                case Feature::household_size:
                    v = static_cast<double>(r.household_size());
                    break;
                case Feature::latitude_deg:
                    v = r.latitude_deg;
                    break;
                case Feature::longitude_deg:
                    v = r.longitude_deg;
                    break;
            }
            fm.X(i, j) = v;
        }
    }

    if (scaling == Scaling::zscore) {
        fm.col_mean.resize(static_cast<std::size_t>(d));
        fm.col_sd.resize(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            const double mean = fm.X.col(j).mean();
            const double var = (fm.X.col(j).array() - mean).square().sum() / n;
            if (var <= 0.0)
                throw DataError("featurize: zero-variance column under zscore: " +
                                to_string(spec[static_cast<std::size_t>(j)]));
            const double sd = std::sqrt(var);
            fm.col_mean[static_cast<std::size_t>(j)] = mean;
            fm.col_sd[static_cast<std::size_t>(j)] = sd;
            fm.X.col(j) = (fm.X.col(j).array() - mean) / sd;
        }
    }
    return fm;
}

}  // namespace foodaccess::ingest
