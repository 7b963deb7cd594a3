#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "foodaccess/geo.hpp"
#include "foodaccess/profile.hpp"

using namespace foodaccess;
using namespace foodaccess::profile;
using ingest::Dataset;
using ingest::FamilyServiceRecord;

namespace {

// Degrees of latitude giving an exact meridian arc of `miles`.
double lat_offset_for_miles(double miles) {
    return miles / (geo::kEarthRadiusMiles * geo::kPi / 180.0);
}

constexpr double kAgencyLat = 41.0;
constexpr double kAgencyLon = -81.5;

FamilyServiceRecord make_record(const std::string& fid, double miles_north,
                                const std::string& tract, int adults, int children,
                                int seniors) {
    FamilyServiceRecord r;
    r.family_id = fid;
    r.latitude_deg = kAgencyLat + lat_offset_for_miles(miles_north);
    r.longitude_deg = kAgencyLon;
    r.agency_id = "A1";
    r.n_adults = adults;
    r.n_children = children;
    r.n_seniors = seniors;
    r.tract_id = tract;
    return r;
}

Dataset make_dataset(const std::vector<FamilyServiceRecord>& records) {
    Dataset ds;
    ds.records = records;
    ds.agencies = {{"A1", kAgencyLat, kAgencyLon, "Pantry"}};
    ds.agency_index = {{"A1", 0}};
    ds.tracts = {{"TP", 40000.0}, {"TR", 70000.0}};
    ds.tract_income = {{"TP", 40000.0}, {"TR", 70000.0}};
    return ds;
}

geo::SpatialGrid make_grid(const Dataset& ds) {
    return geo::SpatialGrid(ds.agency_grid_entries(), 1.0);
}

}  // namespace

TEST_CASE("label_clusters") {
    SUBCASE("four clusters get the proximity names by ascending mean distance") {
        // Component means: 2 -> 0.5, 0 -> 3.0, 3 -> 10.0, 1 -> 25.0.
        const std::vector<int> assign = {2, 2, 0, 0, 3, 1};
        const std::vector<double> dist = {0.4, 0.6, 2.0, 4.0, 10.0, 25.0};
        const ClusterLabeling lab = label_clusters(assign, dist, 4);
        CHECK(lab.order == std::vector<int>{2, 0, 3, 1});
        CHECK(lab.label_by_component[2] == "Very Nearby");
        CHECK(lab.label_by_component[0] == "Nearby");
        CHECK(lab.label_by_component[3] == "Far Away");
        CHECK(lab.label_by_component[1] == "Very Far Away");
        CHECK(lab.mean_distance_by_component[2] == doctest::Approx(0.5));
        CHECK(lab.mean_distance_by_component[0] == doctest::Approx(3.0));
    }
    SUBCASE("other K use numbered labels") {
        const ClusterLabeling lab =
            label_clusters({0, 1, 2}, {5.0, 1.0, 3.0}, 3);
        CHECK(lab.order == std::vector<int>{1, 2, 0});
        CHECK(lab.label_by_component[1] == "Cluster 1");
        CHECK(lab.label_by_component[2] == "Cluster 2");
        CHECK(lab.label_by_component[0] == "Cluster 3");
    }
    SUBCASE("an empty component sorts last") {
        const ClusterLabeling lab = label_clusters({0, 0}, {1.0, 2.0}, 2);
        CHECK(lab.order == std::vector<int>{0, 1});
        CHECK(std::isinf(lab.mean_distance_by_component[1]));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(label_clusters({0}, {1.0, 2.0}, 1), DataError);
        CHECK_THROWS_AS(label_clusters({5}, {1.0}, 2), DataError);
    }
}

TEST_CASE("classify_tract_poor is strictly below the median") {
    CHECK(classify_tract_poor(52406.99, 52407.0));
    CHECK(!classify_tract_poor(52407.0, 52407.0));
    CHECK(!classify_tract_poor(52407.01, 52407.0));
}

TEST_CASE("coverage_within") {
    const std::vector<FamilyServiceRecord> records = {
        make_record("F1", 0.2, "TP", 1, 0, 0), make_record("F2", 0.9, "TP", 1, 0, 0),
        make_record("F3", 1.5, "TP", 1, 0, 0), make_record("F4", 4.0, "TP", 1, 0, 0)};
    const Dataset ds = make_dataset(records);
    const geo::SpatialGrid grid = make_grid(ds);
    CHECK(coverage_within(records, grid, 1.0) == doctest::Approx(50.0));
    CHECK(coverage_within(records, grid, 2.0) == doctest::Approx(75.0));
    CHECK_THROWS_AS(coverage_within({}, grid, 1.0), DataError);
}

TEST_CASE("build_profile hand-checked table") {
    // Cluster 0 (near): F1, F2 in poor tract TP; cluster 1 (far): F3 in rich
    // tract TR, F4 in unknown tract TX.
    const std::vector<FamilyServiceRecord> records = {
        make_record("F1", 0.5, "TP", 2, 1, 0), make_record("F2", 0.7, "TP", 1, 0, 1),
        make_record("F3", 6.0, "TR", 1, 2, 0), make_record("F4", 8.0, "TX", 3, 0, 0)};
    const Dataset ds = make_dataset(records);
    const geo::SpatialGrid grid = make_grid(ds);
    const std::vector<int> assign = {0, 0, 1, 1};
    const std::vector<double> dist = {0.5, 0.7, 6.0, 8.0};
    const ClusterLabeling lab = label_clusters(assign, dist, 2);
    ProfileConfig cfg;
    cfg.threshold_miles = 1.0;
    cfg.state_median_income = 52407.0;

    const ClusterProfile prof = build_profile(assign, ds, dist, grid, lab, cfg);
    REQUIRE(prof.clusters.size() == 2);
    const ClusterProfileRow& near = prof.clusters[0];
    const ClusterProfileRow& far = prof.clusters[1];

    CHECK(near.label == "Cluster 1");
    CHECK(near.n_families == 2);
    CHECK(near.n_adults == 3);
    CHECK(near.n_children == 1);
    CHECK(near.n_seniors == 1);
    CHECK(near.n_people == 5);
    CHECK(near.avg_adults == doctest::Approx(1.5));
    CHECK(near.avg_people == doctest::Approx(2.5));
    CHECK(near.n_tracts == 1);
    CHECK(near.avg_distance_miles == doctest::Approx(0.6));
    CHECK(near.family_share_pct == doctest::Approx(50.0));
    CHECK(near.coverage_1mi_pct == doctest::Approx(100.0));
    CHECK(near.pct_poor == doctest::Approx(100.0));
    CHECK(near.pct_rich == doctest::Approx(0.0));

    CHECK(far.n_families == 2);
    CHECK(far.n_tracts == 2);
    CHECK(far.avg_distance_miles == doctest::Approx(7.0));
    CHECK(far.coverage_1mi_pct == doctest::Approx(0.0));
    CHECK(far.pct_rich == doctest::Approx(50.0));
    CHECK(far.pct_unknown_income == doctest::Approx(50.0));

    // Conservation identities.
    const ClusterProfileRow& tot = prof.totals;
    CHECK(tot.n_families == near.n_families + far.n_families);
    CHECK(tot.n_people == near.n_people + far.n_people);
    CHECK(near.family_share_pct + far.family_share_pct == doctest::Approx(100.0));
    CHECK(tot.family_share_pct == doctest::Approx(100.0));
    CHECK(tot.n_tracts == 3);  // distinct union TP, TR, TX
    CHECK(tot.pct_poor + tot.pct_rich + tot.pct_unknown_income == doctest::Approx(100.0));
    CHECK(tot.avg_distance_miles == doctest::Approx((0.5 + 0.7 + 6.0 + 8.0) / 4.0));

    // Person weighting shifts the income mix toward larger households.
    ProfileConfig pw = cfg;
    pw.person_weighted = true;
    const ClusterProfile prof_pw = build_profile(assign, ds, dist, grid, lab, pw);
    // Far cluster: rich household of 3 people, unknown household of 3 -> 50/50
    // either way; near cluster stays all-poor.
    CHECK(prof_pw.clusters[1].pct_rich == doctest::Approx(50.0));
    // Totals: poor weight 3+2=5 of 11 people.
    CHECK(prof_pw.totals.pct_poor == doctest::Approx(100.0 * 5.0 / 11.0));

    // Serialized forms carry the header and the totals row.
    const std::string csv = prof.to_csv();
    CHECK(csv.rfind("label,n_families,", 0) == 0);
    CHECK(csv.find("Total") != std::string::npos);
    const std::string text = prof.to_text();
    CHECK(text.find("Average distance (miles)") != std::string::npos);

    CHECK_THROWS_AS(build_profile({0}, ds, dist, grid, lab, cfg), DataError);
}

TEST_CASE("distance_quantiles uses the nearest-rank method") {
    const std::vector<int> assign = {0, 0, 0, 0, 1, 1, 1};
    const std::vector<double> dist = {1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0};
    const ClusterLabeling lab = label_clusters(assign, dist, 2);
    const QuantileTable q = distance_quantiles(assign, dist, lab);

    REQUIRE(q.values.size() == 2);
    // Cluster of {1,2,3,4}: ranks ceil(q*4).
    CHECK(q.values[0] == std::vector<double>{1.0, 1.0, 2.0, 3.0, 4.0});
    // Cluster of {10,20,30}: ranks ceil(q*3).
    CHECK(q.values[1] == std::vector<double>{10.0, 10.0, 20.0, 30.0, 30.0});
    CHECK(q.labels[0] == "Cluster 1");

    const std::string csv = q.to_csv();
    CHECK(csv.rfind("label,q0,q25,q50,q75,q100", 0) == 0);

    const ClusterLabeling bad = label_clusters({0, 0}, {1.0, 1.0}, 2);
    CHECK_THROWS_AS(distance_quantiles({0, 0}, {1.0, 1.0}, bad), DataError);
}

TEST_CASE("cluster_gaps") {
    const std::vector<int> assign = {0, 0, 1, 1, 2, 2};
    const std::vector<double> dist = {1.0, 3.0, 10.0, 14.0, 30.0, 50.0};
    const ClusterLabeling lab = label_clusters(assign, dist, 3);
    const ClusterGaps gaps = cluster_gaps(assign, dist, lab);

    REQUIRE(gaps.mean_gap.size() == 2);
    CHECK(gaps.mean_gap[0] == doctest::Approx(12.0 - 2.0));
    CHECK(gaps.mean_gap[1] == doctest::Approx(40.0 - 12.0));
    // Medians by nearest rank on two points are the lower one.
    CHECK(gaps.median_gap[0] == doctest::Approx(10.0 - 1.0));
    CHECK(gaps.median_gap[1] == doctest::Approx(30.0 - 10.0));

    const std::string csv = gaps.to_csv(lab);
    CHECK(csv.rfind("from,to,", 0) == 0);
    CHECK(csv.find("Cluster 1,Cluster 2") != std::string::npos);
}

TEST_CASE("desert_report finds planted deserts") {
    std::vector<FamilyServiceRecord> records;
    // TD1: 3 of 4 families beyond 1 mile (75%) -> desert.
    records.push_back(make_record("D1", 0.5, "TD1", 1, 0, 0));
    records.push_back(make_record("D2", 2.0, "TD1", 1, 0, 0));
    records.push_back(make_record("D3", 3.0, "TD1", 1, 0, 0));
    records.push_back(make_record("D4", 4.0, "TD1", 1, 0, 0));
    // TD2: 2 of 2 beyond -> desert with fewer families.
    records.push_back(make_record("E1", 5.0, "TD2", 1, 0, 0));
    records.push_back(make_record("E2", 7.0, "TD2", 1, 0, 0));
    // TOK: exactly half beyond -> not a desert (strictly more than half).
    records.push_back(make_record("G1", 0.5, "TOK", 1, 0, 0));
    records.push_back(make_record("G2", 2.0, "TOK", 1, 0, 0));
    // TNEAR: all covered.
    records.push_back(make_record("H1", 0.2, "TNEAR", 1, 0, 0));

    const Dataset ds = make_dataset(records);
    const geo::SpatialGrid grid = make_grid(ds);
    const DesertReport report = desert_report(records, grid, 1.0);

    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].tract_id == "TD1");  // more families first
    CHECK(report.rows[0].n_families == 4);
    CHECK(report.rows[0].share_beyond_pct == doctest::Approx(75.0));
    CHECK(report.rows[0].avg_nearest_distance == doctest::Approx(9.5 / 4.0).epsilon(1e-9));
    CHECK(report.rows[1].tract_id == "TD2");
    CHECK(report.rows[1].share_beyond_pct == doctest::Approx(100.0));

    CHECK(report.to_csv().rfind("tract_id,n_families,share_beyond_pct", 0) == 0);

    // Equal family counts fall back to tract-id order.
    std::vector<FamilyServiceRecord> tie = {make_record("X1", 5.0, "TB", 1, 0, 0),
                                            make_record("X2", 5.0, "TA", 1, 0, 0)};
    const DesertReport tied = desert_report(tie, grid, 1.0);
    REQUIRE(tied.rows.size() == 2);
    CHECK(tied.rows[0].tract_id == "TA");
}
