#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foodaccess/errors.hpp"

namespace foodaccess::synth {

struct DistanceComponent {
    double weight;
    double mean_miles;
    double sd_miles;
};

struct CompositionMeans {
    double adults;
    double children;
    double seniors;
};

struct BoundingBox {
    double min_lat;
    double max_lat;
    double min_lon;
    double max_lon;
};

// Scenario generator configuration. The default distance mixture and
// household compositions follow the published per-cluster aggregates
// (families get larger as distance grows).
struct SynthConfig {
    long long n_families = 10000;
    int n_agencies = 25;
    int n_tracts = 40;
    std::vector<DistanceComponent> distance_mixture = {
        {0.3246, 0.42, 0.15}, {0.3273, 1.45, 0.40}, {0.3201, 4.63, 1.20},
        {0.0279, 19.47, 5.00}};
    std::vector<CompositionMeans> composition = {
        {1.12, 0.62, 0.61}, {1.23, 0.77, 0.64}, {1.26, 0.78, 0.67}, {1.38, 0.82, 0.61}};
    double income_median = 45000.0;
    double income_log_sd = 0.35;
    double state_median_income = 52407.0;
    BoundingBox box = {40.9, 41.9, -82.2, -81.0};
    std::uint64_t seed = 1;

    void validate() const;  // throws DataError on an infeasible config
};

struct SynthResult {
    std::string services_path;
    std::string agencies_path;
    std::string tract_income_path;
    std::string ground_truth_path;
    // Ground truth kept in memory for tests, in row order.
    std::vector<int> component;
    std::vector<double> sampled_distance;
};

// Writes services.csv, agencies.csv, tract_income.csv, ground_truth.csv
// into out_dir. Byte-identical output for identical (config, seed).
// A non-empty `stamp` is written as a leading '#' comment line.
SynthResult generate(const SynthConfig& config, const std::string& out_dir,
                     const std::string& stamp = "");

struct RoundtripReport {
    long long rows_checked = 0;
    long long rejections = 0;
    double max_abs_error_miles = 0;
    bool ok = false;
};

// Generates, reloads through ingest, and compares recomputed assigned
// distances against the sampled ones (tolerance 1e-6 miles).
RoundtripReport roundtrip_check(const SynthConfig& config, const std::string& out_dir);

}  // namespace foodaccess::synth
