#include "foodaccess/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "foodaccess/geo.hpp"
#include "foodaccess/ingest.hpp"
#include "foodaccess/rng.hpp"

namespace foodaccess::synth {

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

std::string padded_id(char prefix, long long i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%0*lld", prefix, width, i);
    return buf;
}

std::ofstream open_out(const std::string& path, const std::string& stamp = "") {
    std::ofstream out(path, std::ios::binary);  // binary keeps '\n' on every platform
    if (!out) throw DataError("cannot write file: " + path);
    if (!stamp.empty()) out << "# " << stamp << "\n";
    return out;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_families < 1) throw DataError("SynthConfig: n_families must be >= 1");
    if (n_agencies < 1) throw DataError("SynthConfig: n_agencies must be >= 1");
    if (n_tracts < 1) throw DataError("SynthConfig: n_tracts must be >= 1");
    if (n_families < n_tracts)
        throw DataError("SynthConfig: need n_families >= n_tracts");
    if (distance_mixture.empty()) throw DataError("SynthConfig: empty distance mixture");
    if (composition.size() != distance_mixture.size())
        throw DataError("SynthConfig: composition must match mixture size");
    double wsum = 0.0, prev_mean = -1.0;
    for (const auto& c : distance_mixture) {
        if (c.weight <= 0.0 || c.sd_miles < 0.0 || c.mean_miles < 0.0)
            throw DataError("SynthConfig: invalid mixture component");
        if (c.mean_miles <= prev_mean)
            throw DataError("SynthConfig: mixture means must be strictly increasing");
        prev_mean = c.mean_miles;
        wsum += c.weight;
    }
    if (wsum <= 0.0) throw DataError("SynthConfig: mixture weights must sum > 0");
    if (income_median <= 0.0 || income_log_sd < 0.0)
        throw DataError("SynthConfig: invalid income model");
    if (!(box.min_lat < box.max_lat) || !(box.min_lon < box.max_lon) ||
        box.min_lat < -90.0 || box.max_lat > 90.0 || box.min_lon < -180.0 ||
        box.max_lon > 180.0)
        throw DataError("SynthConfig: invalid bounding box");

    const double diag = geo::haversine_miles(geo::GeoPoint(box.min_lat, box.min_lon),
                                             geo::GeoPoint(box.max_lat, box.max_lon));
    if (distance_mixture.back().mean_miles > diag)
        throw DataError("SynthConfig: box too small for the distance scale");
}

SynthResult generate(const SynthConfig& config, const std::string& out_dir,
                     const std::string& stamp) {
    config.validate();

    SynthResult result;
    result.services_path = out_dir + "/services.csv";
    result.agencies_path = out_dir + "/agencies.csv";
    result.tract_income_path = out_dir + "/tract_income.csv";
    result.ground_truth_path = out_dir + "/ground_truth.csv";

    // Independent sub-streams so adding draws to one stage never shifts
    // another stage's output.
    Rng agency_rng(Rng::derive(config.seed, 1));
    Rng tract_rng(Rng::derive(config.seed, 2));
    Rng income_rng(Rng::derive(config.seed, 3));
    Rng family_rng(Rng::derive(config.seed, 4));

    std::vector<geo::GeoPoint> agencies;
    agencies.reserve(static_cast<std::size_t>(config.n_agencies));
    {
        auto out = open_out(result.agencies_path, stamp);
        out << "agency_id,latitude,longitude,name\n";
        for (int i = 0; i < config.n_agencies; ++i) {
            const double lat = agency_rng.uniform(config.box.min_lat, config.box.max_lat);
            const double lon = agency_rng.uniform(config.box.min_lon, config.box.max_lon);
            agencies.emplace_back(lat, lon);
            out << padded_id('A', i, 5) << ',' << fmt("%.10f", lat) << ','
                << fmt("%.10f", lon) << ",Agency " << i << '\n';
        }
    }

    std::vector<geo::GeoPoint> tract_centers;
    tract_centers.reserve(static_cast<std::size_t>(config.n_tracts));
    for (int i = 0; i < config.n_tracts; ++i)
        tract_centers.emplace_back(tract_rng.uniform(config.box.min_lat, config.box.max_lat),
                                   tract_rng.uniform(config.box.min_lon, config.box.max_lon));

    {
        auto out = open_out(result.tract_income_path, stamp);
        out << "tract_id,avg_household_income\n";
        for (int i = 0; i < config.n_tracts; ++i) {
            const double income =
                config.income_median * std::exp(config.income_log_sd * income_rng.normal());
            out << padded_id('T', i, 5) << ',' << fmt("%.2f", income) << '\n';
        }
    }

    // Component sampling by cumulative weight.
    std::vector<double> cumulative;
    {
        double acc = 0.0, wsum = 0.0;
        for (const auto& c : config.distance_mixture) wsum += c.weight;
        for (const auto& c : config.distance_mixture) {
            acc += c.weight / wsum;
            cumulative.push_back(acc);
        }
        cumulative.back() = 1.0;
    }

    auto services = open_out(result.services_path, stamp);
    auto truth = open_out(result.ground_truth_path, stamp);
    services << "family_id,latitude,longitude,agency_id,n_adults,n_children,n_seniors,"
                "tract_id\n";
    truth << "family_row_index,component_label\n";

    result.component.reserve(static_cast<std::size_t>(config.n_families));
    result.sampled_distance.reserve(static_cast<std::size_t>(config.n_families));

    const double two_pi = 2.0 * geo::kPi;
    for (long long i = 0; i < config.n_families; ++i) {
        const double u = family_rng.uniform();
        int comp = 0;
        while (comp + 1 < static_cast<int>(cumulative.size()) &&
               u > cumulative[static_cast<std::size_t>(comp)])
            ++comp;

        const auto& mix = config.distance_mixture[static_cast<std::size_t>(comp)];
        const double dist =
            std::max(0.01, family_rng.normal(mix.mean_miles, mix.sd_miles));
        const std::size_t agency = family_rng.index(agencies.size());
        const double bearing = family_rng.uniform(0.0, two_pi);
        const geo::GeoPoint loc =
            geo::destination_point(agencies[agency], bearing, dist);

        const auto& comp_means = config.composition[static_cast<std::size_t>(comp)];
        int adults = family_rng.poisson(comp_means.adults);
        int children = family_rng.poisson(comp_means.children);
        int seniors = family_rng.poisson(comp_means.seniors);
        if (adults + children + seniors == 0) adults = 1;

        // Proximity bucketing: nearest tract center.
        int tract = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int tmask = 0; tmask < config.n_tracts; ++tmask) {
            const double d =
                geo::haversine_miles(loc, tract_centers[static_cast<std::size_t>(tmask)]);
            if (d < best) {
                best = d;
                tract = tmask;
            }
        }

        services << padded_id('F', i, 7) << ',' << fmt("%.10f", loc.latitude_deg) << ','
                 << fmt("%.10f", loc.longitude_deg) << ','
                 << padded_id('A', static_cast<long long>(agency), 5) << ',' << adults
                 << ',' << children << ',' << seniors << ','
                 << padded_id('T', tract, 5) << '\n';
        truth << i << ',' << comp << '\n';
        result.component.push_back(comp);
        result.sampled_distance.push_back(dist);
    }
    return result;
}

RoundtripReport roundtrip_check(const SynthConfig& config, const std::string& out_dir) {
    const SynthResult gen = generate(config, out_dir);
    const ingest::Dataset ds = ingest::load_tables(
        gen.services_path, gen.agencies_path, gen.tract_income_path);

    RoundtripReport report;
    report.rejections = ds.report.total_rejected();
    report.rows_checked = static_cast<long long>(ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const double recomputed = ingest::assigned_distance(ds.records[i], ds);
        report.max_abs_error_miles = std::max(
            report.max_abs_error_miles, std::abs(recomputed - gen.sampled_distance[i]));
    }
    report.ok = report.rejections == 0 &&
                report.rows_checked == config.n_families &&
                report.max_abs_error_miles < 1e-6;
    return report;
}

}  // namespace foodaccess::synth
