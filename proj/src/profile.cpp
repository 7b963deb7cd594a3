#include "foodaccess/profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "foodaccess/csv.hpp"

namespace foodaccess::profile {

namespace {

std::string fmt(double v, int decimals = 4) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

const char* kFourClusterNames[4] = {"Very Nearby", "Nearby", "Far Away", "Very Far Away"};

double nearest_rank_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    if (q <= 0.0) return sorted.front();
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::min(rank, sorted.size()) - 1];
}

}  // namespace

ClusterLabeling label_clusters(const std::vector<int>& assignments,
                               const std::vector<double>& distances, int K) {
    if (assignments.size() != distances.size())
        throw DataError("label_clusters: length mismatch");

    std::vector<double> sum(static_cast<std::size_t>(K), 0.0);
    std::vector<long long> count(static_cast<std::size_t>(K), 0);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const int c = assignments[i];
        if (c < 0 || c >= K) throw DataError("label_clusters: assignment out of range");
        sum[static_cast<std::size_t>(c)] += distances[i];
        ++count[static_cast<std::size_t>(c)];
    }

    ClusterLabeling lab;
    lab.mean_distance_by_component.resize(static_cast<std::size_t>(K));
    lab.order.resize(static_cast<std::size_t>(K));
    std::iota(lab.order.begin(), lab.order.end(), 0);
    for (int k = 0; k < K; ++k)
        lab.mean_distance_by_component[static_cast<std::size_t>(k)] =
            count[static_cast<std::size_t>(k)] > 0
                ? sum[static_cast<std::size_t>(k)] / count[static_cast<std::size_t>(k)]
                : std::numeric_limits<double>::infinity();
    std::sort(lab.order.begin(), lab.order.end(), [&](int a, int b) {
        const double da = lab.mean_distance_by_component[static_cast<std::size_t>(a)];
        const double db = lab.mean_distance_by_component[static_cast<std::size_t>(b)];
        return da != db ? da < db : a < b;
    });

    lab.label_by_component.resize(static_cast<std::size_t>(K));
    for (int rank = 0; rank < K; ++rank) {
        const int comp = lab.order[static_cast<std::size_t>(rank)];
        lab.label_by_component[static_cast<std::size_t>(comp)] =
            K == 4 ? kFourClusterNames[rank] : "Cluster " + std::to_string(rank + 1);
    }
    return lab;
}

double coverage_within(const std::vector<ingest::FamilyServiceRecord>& records,
                       const geo::SpatialGrid& grid, double threshold_miles) {
    if (records.empty()) throw DataError("coverage_within: empty records");
    long long covered = 0;
    for (const auto& r : records) {
        const auto [id, dist] = grid.nearest(geo::GeoPoint(r.latitude_deg, r.longitude_deg));
        if (dist <= threshold_miles) ++covered;
    }
    return 100.0 * static_cast<double>(covered) / static_cast<double>(records.size());
}

bool classify_tract_poor(double avg_household_income, double state_median_income) {
    return avg_household_income < state_median_income;
}

ClusterProfile build_profile(const std::vector<int>& assignments,
                             const ingest::Dataset& dataset,
                             const std::vector<double>& distances,
                             const geo::SpatialGrid& grid, const ClusterLabeling& labeling,
                             const ProfileConfig& config) {
    const std::size_t n = dataset.records.size();
    if (assignments.size() != n || distances.size() != n)
        throw DataError("build_profile: length mismatch");
    const int K = static_cast<int>(labeling.order.size());

    struct Accum {
        long long families = 0, adults = 0, children = 0, seniors = 0;
        long long covered = 0;
        double dist_sum = 0;
        double poor_w = 0, rich_w = 0, unknown_w = 0;
        std::set<std::string> tracts;
    };
    std::vector<Accum> acc(static_cast<std::size_t>(K));
    Accum total;

    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = dataset.records[i];
        Accum& a = acc[static_cast<std::size_t>(assignments[i])];
        const double w = config.person_weighted ? r.household_size() : 1.0;
        const auto it = dataset.tract_income.find(r.tract_id);

        const auto [nid, ndist] =
            grid.nearest(geo::GeoPoint(r.latitude_deg, r.longitude_deg));
        const bool covered = ndist <= config.threshold_miles;

        for (Accum* t : {&a, &total}) {
            t->families += 1;
            t->adults += r.n_adults;
            t->children += r.n_children;
            t->seniors += r.n_seniors;
            t->dist_sum += distances[i];
            t->tracts.insert(r.tract_id);
            if (covered) t->covered += 1;
            if (it == dataset.tract_income.end())
                t->unknown_w += w;
            else if (classify_tract_poor(it->second, config.state_median_income))
                t->poor_w += w;
            else
                t->rich_w += w;
        }
    }

    auto fill = [&](const Accum& a, const std::string& label) {
        ClusterProfileRow row;
        row.label = label;
        row.n_families = a.families;
        row.n_adults = a.adults;
        row.n_children = a.children;
        row.n_seniors = a.seniors;
        row.n_people = a.adults + a.children + a.seniors;
        if (a.families > 0) {
            row.avg_adults = static_cast<double>(a.adults) / a.families;
            row.avg_children = static_cast<double>(a.children) / a.families;
            row.avg_seniors = static_cast<double>(a.seniors) / a.families;
            row.avg_people = static_cast<double>(row.n_people) / a.families;
            row.avg_distance_miles = a.dist_sum / a.families;
            row.coverage_1mi_pct = 100.0 * static_cast<double>(a.covered) / a.families;
        }
        row.n_tracts = static_cast<long long>(a.tracts.size());
        row.family_share_pct =
            100.0 * static_cast<double>(a.families) / static_cast<double>(total.families);
        const double wsum = a.poor_w + a.rich_w + a.unknown_w;
        if (wsum > 0) {
            row.pct_poor = 100.0 * a.poor_w / wsum;
            row.pct_rich = 100.0 * a.rich_w / wsum;
            row.pct_unknown_income = 100.0 * a.unknown_w / wsum;
        }
        return row;
    };

    ClusterProfile prof;
    for (int rank = 0; rank < K; ++rank) {
        const int comp = labeling.order[static_cast<std::size_t>(rank)];
        prof.clusters.push_back(
            fill(acc[static_cast<std::size_t>(comp)],
                 labeling.label_by_component[static_cast<std::size_t>(comp)]));
    }
    prof.totals = fill(total, "Total");
    return prof;
}

namespace {

void profile_row_csv(std::ostringstream& out, const ClusterProfileRow& r) {
    out << csv::escape_field(r.label) << ',' << r.n_families << ',' << r.n_adults << ','
        << r.n_children << ',' << r.n_seniors << ',' << r.n_people << ','
        << fmt(r.avg_adults) << ',' << fmt(r.avg_children) << ',' << fmt(r.avg_seniors)
        << ',' << fmt(r.avg_people) << ',' << r.n_tracts << ','
        << fmt(r.avg_distance_miles) << ',' << fmt(r.family_share_pct) << ','
        << fmt(r.coverage_1mi_pct) << ',' << fmt(r.pct_poor) << ',' << fmt(r.pct_rich)
        << ',' << fmt(r.pct_unknown_income) << '\n';
}

}  // namespace

std::string ClusterProfile::to_csv() const {
    std::ostringstream out;
    out << "label,n_families,n_adults,n_children,n_seniors,n_people,avg_adults,"
           "avg_children,avg_seniors,avg_people,n_tracts,avg_distance_miles,"
           "family_share_pct,coverage_1mi_pct,pct_poor,pct_rich,pct_unknown_income\n";
    for (const auto& r : clusters) profile_row_csv(out, r);
    profile_row_csv(out, totals);
    return out.str();
}

std::string ClusterProfile::to_text() const {
    std::ostringstream out;
    auto line = [&](const std::string& name, auto get) {
        out << name;
        for (std::size_t pad = name.size(); pad < 34; ++pad) out << ' ';
        for (const auto& r : clusters) {
            const std::string v = get(r);
            out << ' ';
            for (std::size_t pad = v.size(); pad < 16; ++pad) out << ' ';
            out << v;
        }
        const std::string v = get(totals);
        out << ' ';
        for (std::size_t pad = v.size(); pad < 16; ++pad) out << ' ';
        out << v << '\n';
    };
    line("Variable", [](const ClusterProfileRow& r) { return r.label; });
    line("Number of families",
         [](const ClusterProfileRow& r) { return std::to_string(r.n_families); });
    line("Number of adults",
         [](const ClusterProfileRow& r) { return std::to_string(r.n_adults); });
    line("Number of children",
         [](const ClusterProfileRow& r) { return std::to_string(r.n_children); });
    line("Number of seniors",
         [](const ClusterProfileRow& r) { return std::to_string(r.n_seniors); });
    line("Number of people",
         [](const ClusterProfileRow& r) { return std::to_string(r.n_people); });
    line("Average adults per family",
         [](const ClusterProfileRow& r) { return fmt(r.avg_adults, 2); });
    line("Average children per family",
         [](const ClusterProfileRow& r) { return fmt(r.avg_children, 2); });
    line("Average seniors per family",
         [](const ClusterProfileRow& r) { return fmt(r.avg_seniors, 2); });
    line("Average people per family",
         [](const ClusterProfileRow& r) { return fmt(r.avg_people, 2); });
    line("Number of tracts",
         [](const ClusterProfileRow& r) { return std::to_string(r.n_tracts); });
    line("Average distance (miles)",
         [](const ClusterProfileRow& r) { return fmt(r.avg_distance_miles, 2); });
    line("Family share (%)",
         [](const ClusterProfileRow& r) { return fmt(r.family_share_pct, 1); });
    line("Coverage within 1 mile (%)",
         [](const ClusterProfileRow& r) { return fmt(r.coverage_1mi_pct, 1); });
    line("Pct in poor tracts", [](const ClusterProfileRow& r) { return fmt(r.pct_poor, 1); });
    line("Pct in rich tracts", [](const ClusterProfileRow& r) { return fmt(r.pct_rich, 1); });
    line("Pct unknown income",
         [](const ClusterProfileRow& r) { return fmt(r.pct_unknown_income, 1); });
    return out.str();
}

QuantileTable distance_quantiles(const std::vector<int>& assignments,
                                 const std::vector<double>& distances,
                                 const ClusterLabeling& labeling,
                                 const std::vector<double>& quantiles) {
    const int K = static_cast<int>(labeling.order.size());
    std::vector<std::vector<double>> per_cluster(static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < assignments.size(); ++i)
        per_cluster[static_cast<std::size_t>(assignments[i])].push_back(distances[i]);

    QuantileTable table;
    table.quantiles = quantiles;
    for (int rank = 0; rank < K; ++rank) {
        const int comp = labeling.order[static_cast<std::size_t>(rank)];
        auto& vals = per_cluster[static_cast<std::size_t>(comp)];
        if (vals.empty()) throw DataError("distance_quantiles: empty cluster");
        std::sort(vals.begin(), vals.end());
        table.labels.push_back(labeling.label_by_component[static_cast<std::size_t>(comp)]);
        std::vector<double> row;
        for (double q : quantiles) row.push_back(nearest_rank_quantile(vals, q));
        table.values.push_back(std::move(row));
    }
    return table;
}

std::string QuantileTable::to_csv() const {
    std::ostringstream out;
    out << "label";
    for (double q : quantiles) out << ",q" << fmt(100.0 * q, 0);
    out << '\n';
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << csv::escape_field(labels[i]);
        for (double v : values[i]) out << ',' << fmt(v);
        out << '\n';
    }
    return out.str();
}

ClusterGaps cluster_gaps(const std::vector<int>& assignments,
                         const std::vector<double>& distances,
                         const ClusterLabeling& labeling) {
    const QuantileTable q = distance_quantiles(assignments, distances, labeling, {0.5});
    const int K = static_cast<int>(labeling.order.size());

    ClusterGaps gaps;
    for (int rank = 0; rank + 1 < K; ++rank) {
        const int a = labeling.order[static_cast<std::size_t>(rank)];
        const int b = labeling.order[static_cast<std::size_t>(rank + 1)];
        gaps.mean_gap.push_back(
            labeling.mean_distance_by_component[static_cast<std::size_t>(b)] -
            labeling.mean_distance_by_component[static_cast<std::size_t>(a)]);
        gaps.median_gap.push_back(q.values[static_cast<std::size_t>(rank + 1)][0] -
                                  q.values[static_cast<std::size_t>(rank)][0]);
    }
    return gaps;
}

std::string ClusterGaps::to_csv(const ClusterLabeling& labeling) const {
    std::ostringstream out;
    out << "from,to,mean_gap_miles,median_gap_miles\n";
    for (std::size_t i = 0; i < mean_gap.size(); ++i) {
        const int a = labeling.order[i];
        const int b = labeling.order[i + 1];
        out << csv::escape_field(labeling.label_by_component[static_cast<std::size_t>(a)])
            << ','
            << csv::escape_field(labeling.label_by_component[static_cast<std::size_t>(b)])
            << ',' << fmt(mean_gap[i]) << ',' << fmt(median_gap[i]) << '\n';
    }
    return out.str();
}

DesertReport desert_report(const std::vector<ingest::FamilyServiceRecord>& records,
                           const geo::SpatialGrid& grid, double threshold_miles) {
    struct TractAccum {
        long long families = 0, beyond = 0;
        double dist_sum = 0;
    };
    std::map<std::string, TractAccum> by_tract;
    for (const auto& r : records) {
        const auto [id, dist] = grid.nearest(geo::GeoPoint(r.latitude_deg, r.longitude_deg));
        TractAccum& t = by_tract[r.tract_id];
        t.families += 1;
        t.dist_sum += dist;
        if (dist > threshold_miles) t.beyond += 1;
    }

    DesertReport report;
    report.threshold_miles = threshold_miles;
    for (const auto& [tract, t] : by_tract) {
        const double share = 100.0 * static_cast<double>(t.beyond) / t.families;
        if (share > 50.0)
            report.rows.push_back(
                {tract, t.families, share, t.dist_sum / static_cast<double>(t.families)});
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
        return a.n_families != b.n_families ? a.n_families > b.n_families
                                            : a.tract_id < b.tract_id;
    });
    return report;
}

std::string DesertReport::to_csv() const {
    std::ostringstream out;
    out << "tract_id,n_families,share_beyond_pct,avg_nearest_distance_miles\n";
    for (const auto& r : rows)
        out << csv::escape_field(r.tract_id) << ',' << r.n_families << ','
            << fmt(r.share_beyond_pct) << ',' << fmt(r.avg_nearest_distance) << '\n';
    return out.str();
}

}  // namespace foodaccess::profile
