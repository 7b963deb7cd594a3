#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "foodaccess/geo.hpp"

namespace foodaccess::ingest {

// One service event: one row of services.csv.
struct FamilyServiceRecord {
    std::string family_id;
    double latitude_deg;
    double longitude_deg;
    std::string agency_id;
    int n_adults;
    int n_children;
    int n_seniors;
    std::string tract_id;

    int household_size() const { return n_adults + n_children + n_seniors; }
};

struct AgencyRecord {
    std::string agency_id;
    double latitude_deg;
    double longitude_deg;
    std::string name;
};

struct TractIncomeRecord {
    std::string tract_id;
    double avg_household_income;
};

struct RejectionReport {
    long long input_rows = 0;
    long long valid_rows = 0;
    long long bad_coordinate = 0;
    long long bad_count = 0;
    long long unknown_agency = 0;
    long long unknown_tract = 0;
    long long malformed = 0;

    long long total_rejected() const {
        return bad_coordinate + bad_count + unknown_agency + unknown_tract + malformed;
    }
    std::string to_string() const;
};

struct LoadOptions {
    // When false (default), rows whose tract is absent from the income
    // table are kept for clustering and reported as unknown-income.
    bool reject_unknown_tract = false;
};

struct Dataset {
    std::vector<FamilyServiceRecord> records;
    std::vector<AgencyRecord> agencies;            // sorted by agency_id
    std::vector<TractIncomeRecord> tracts;         // sorted by tract_id
    std::map<std::string, int> agency_index;       // id -> rank in `agencies`
    std::map<std::string, double> tract_income;    // id -> income
    RejectionReport report;

    const AgencyRecord& agency_for(const FamilyServiceRecord& r) const;
    // Grid entries with ids equal to the agency rank (rank order equals
    // lexicographic id order, preserving the smallest-id tie rule).
    std::vector<geo::GridEntry> agency_grid_entries() const;
};

// Loads and validates the three tables. Hard errors (DataError): missing
// file, missing required column, duplicate agency/tract ids, no valid
// service row. Per-row problems go to the rejection report.
Dataset load_tables(const std::string& service_path, const std::string& agency_path,
                    const std::string& income_path, const LoadOptions& options = {});

// Haversine miles between the family and its assigned agency.
double assigned_distance(const FamilyServiceRecord& record, const Dataset& dataset);

// All assigned distances in record order.
std::vector<double> assigned_distances(const Dataset& dataset);

enum class Feature {
    distance_miles,
    log_distance_miles,
    household_size,
    latitude_deg,
    longitude_deg
};

Feature feature_from_string(const std::string& name);
std::string to_string(Feature f);

enum class Scaling { none, zscore };

struct FeatureMatrix {
    Eigen::MatrixXd X;              // n x d, rows follow dataset.records
    std::vector<Feature> spec;
    Scaling scaling = Scaling::none;
    std::vector<double> col_mean;   // filled when zscored
    std::vector<double> col_sd;

    // Undo the zscore transform for one column.
    double inverse_map(int col, double value) const;
};

FeatureMatrix featurize(const Dataset& dataset, const std::vector<Feature>& spec,
                        Scaling scaling);

}  // namespace foodaccess::ingest
