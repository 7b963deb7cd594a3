#pragma once

#include <string>
#include <vector>

#include "foodaccess/geo.hpp"
#include "foodaccess/ingest.hpp"

namespace foodaccess::profile {

// Orders mixture components by ascending mean assigned distance and names
// them. K = 4 gets the proximity names; other K get "Cluster 1..K".
struct ClusterLabeling {
    std::vector<int> order;                  // component ids, ascending mean distance
    std::vector<std::string> label_by_component;
    std::vector<double> mean_distance_by_component;
};

ClusterLabeling label_clusters(const std::vector<int>& assignments,
                               const std::vector<double>& distances, int K);

// Percentage of records with a nearest agency within threshold_miles.
double coverage_within(const std::vector<ingest::FamilyServiceRecord>& records,
                       const geo::SpatialGrid& grid, double threshold_miles);

// Poor iff income is strictly below the state median.
bool classify_tract_poor(double avg_household_income, double state_median_income);

struct ClusterProfileRow {
    std::string label;
    long long n_families = 0;
    long long n_adults = 0;
    long long n_children = 0;
    long long n_seniors = 0;
    long long n_people = 0;
    double avg_adults = 0;
    double avg_children = 0;
    double avg_seniors = 0;
    double avg_people = 0;
    long long n_tracts = 0;  // distinct tracts in the cluster
    double avg_distance_miles = 0;
    double family_share_pct = 0;
    double coverage_1mi_pct = 0;
    double pct_poor = 0;
    double pct_rich = 0;
    double pct_unknown_income = 0;
};

struct ClusterProfile {
    std::vector<ClusterProfileRow> clusters;  // in labeling order
    ClusterProfileRow totals;                 // n_tracts = distinct union

    std::string to_csv() const;
    std::string to_text() const;
};

struct ProfileConfig {
    double threshold_miles = 1.0;
    double state_median_income = 52407.0;
    // When true, poor/rich percentages weight by people instead of families.
    bool person_weighted = false;
};

ClusterProfile build_profile(const std::vector<int>& assignments,
                             const ingest::Dataset& dataset,
                             const std::vector<double>& distances,
                             const geo::SpatialGrid& grid, const ClusterLabeling& labeling,
                             const ProfileConfig& config);

// Per-cluster quantiles via the nearest-rank method; default list is
// min/q25/median/q75/max.
struct QuantileTable {
    std::vector<double> quantiles;
    std::vector<std::string> labels;                  // per cluster
    std::vector<std::vector<double>> values;          // [cluster][quantile]

    std::string to_csv() const;
};

QuantileTable distance_quantiles(const std::vector<int>& assignments,
                                 const std::vector<double>& distances,
                                 const ClusterLabeling& labeling,
                                 const std::vector<double>& quantiles = {0.0, 0.25, 0.5,
                                                                         0.75, 1.0});

// Consecutive-cluster separation, both mean-gap and median-gap versions.
struct ClusterGaps {
    std::vector<double> mean_gap;    // mean dist of cluster i+1 minus cluster i
    std::vector<double> median_gap;

    std::string to_csv(const ClusterLabeling& labeling) const;
};

ClusterGaps cluster_gaps(const std::vector<int>& assignments,
                         const std::vector<double>& distances,
                         const ClusterLabeling& labeling);

struct DesertRow {
    std::string tract_id;
    long long n_families = 0;
    double share_beyond_pct = 0;        // > 50 by construction
    double avg_nearest_distance = 0;
};

struct DesertReport {
    double threshold_miles = 1.0;
    std::vector<DesertRow> rows;  // sorted by n_families descending

    std::string to_csv() const;
};

// Tracts where more than half the families have no agency within the
// threshold.
DesertReport desert_report(const std::vector<ingest::FamilyServiceRecord>& records,
                           const geo::SpatialGrid& grid, double threshold_miles);

}  // namespace foodaccess::profile
