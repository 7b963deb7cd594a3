#include "foodaccess/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "foodaccess/rng.hpp"
#include <limits>

#include "json.hpp"

namespace foodaccess::selection {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// Dense relabeling preserving order of first appearance.
std::vector<int> densify(const std::vector<int>& labels, int& n_clusters) {
    std::map<int, int> remap;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, _ins] = remap.emplace(labels[i], static_cast<int>(remap.size()));
        out[i] = it->second;
        (void)_ins;
    }
    n_clusters = static_cast<int>(remap.size());
    return out;
}

}  // namespace

double bic(const mixture::FitResult& fit) {
    const double ll = fit.final_loglik();
    if (!std::isfinite(ll)) throw NumericError("bic: non-finite log-likelihood");
    const int m = mixture::n_free_params(fit.model.parameterization, fit.model.K, fit.model.d);
    return 2.0 * ll - m * std::log(static_cast<double>(fit.n_rows()));
}

const SelectionRow& SelectionTable::best_row() const {
    if (best < 0 || best >= static_cast<int>(rows.size()))
        throw NumericError("SelectionTable: no converged row available");
    return rows[static_cast<std::size_t>(best)];
}

std::string SelectionTable::to_csv() const {
    std::ostringstream out;
    out << "model,K,bic,converged,silhouette\n";
    for (const auto& r : rows) {
        out << mixture::to_string(r.requested) << ',' << r.K << ',' << fmt_double(r.bic)
            << ',' << (r.converged ? "true" : "false") << ','
            << (r.silhouette ? fmt_double(*r.silhouette) : "") << '\n';
    }
    return out.str();
}

std::string SelectionTable::to_json() const {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row;
        row["model"] = mixture::to_string(r.requested);
        row["effective_model"] = mixture::to_string(r.effective);
        row["K"] = r.K;
        row["bic"] = r.bic;
        row["loglik"] = r.loglik;
        row["n_params"] = r.n_params;
        row["converged"] = r.converged;
        if (r.silhouette)
            row["silhouette"] = *r.silhouette;
        else
            row["silhouette"] = nullptr;
        j["rows"].push_back(row);
    }
    j["best"] = best;
    return j.dump(2);
}

SelectionTable grid_search(const Eigen::MatrixXd& data, const std::vector<int>& k_range,
                           const std::vector<mixture::Parameterization>& parameterizations,
                           const mixture::FitConfig& config, const GridOptions& options) {
    const int n = static_cast<int>(data.rows());
    const int d = static_cast<int>(data.cols());
    if (k_range.empty()) throw DataError("grid_search: empty K range");
    for (int K : k_range)
        if (K < 1 || K >= n) throw DataError("grid_search: each K must satisfy 1 <= K < n");

    SelectionTable table;
    // Duplicate 1-D collapses share one fit (and one sub-seed), keyed by
    // the effective model.
    std::map<std::pair<int, int>, mixture::FitResult> cache;

    for (const auto requested : parameterizations) {
        mixture::Parameterization effective = requested;
        if (d == 1)
            effective = mixture::collapse_to_1d(requested);
        else if (!mixture::is_legal(requested, d))
            continue;
        for (int K : k_range) {
            const int eff_ord = static_cast<int>(effective);
            auto key = std::make_pair(eff_ord, K);
            auto it = cache.find(key);
            if (it == cache.end()) {
                mixture::FitConfig cell_config = config;
                cell_config.seed = Rng::derive(
                    config.seed, static_cast<std::uint64_t>(eff_ord) * 1009 + K);
                mixture::FitResult fr = mixture::fit(data, K, effective, cell_config);
                it = cache.emplace(key, std::move(fr)).first;
            }
            const mixture::FitResult& fr = it->second;

            SelectionRow row;
            row.requested = requested;
            row.effective = effective;
            row.K = K;
            row.loglik = fr.final_loglik();
            row.n_params = mixture::n_free_params(effective, K, d);
            row.bic = bic(fr);
            row.converged = fr.converged;
            if (options.silhouette_sample_size > 0 && K >= 2) {
                int nc = 0;
                densify(fr.hard_assignments, nc);
                if (nc >= 2) {
                    const std::uint64_t sil_seed = Rng::derive(
                        config.seed,
                        0x51100000ULL + static_cast<std::uint64_t>(eff_ord) * 1009 + K);
                    row.silhouette = silhouette_sampled(
                        data, fr.hard_assignments, options.silhouette_sample_size, sil_seed);
                }
            }
            table.rows.push_back(row);
        }
    }
    if (table.rows.empty()) throw DataError("grid_search: no legal (model, K) combination");

    for (int i = 0; i < static_cast<int>(table.rows.size()); ++i) {
        const auto& r = table.rows[static_cast<std::size_t>(i)];
        if (!r.converged) continue;
        if (table.best < 0) {
            table.best = i;
            continue;
        }
        const auto& b = table.rows[static_cast<std::size_t>(table.best)];
        if (r.bic > b.bic ||
            (r.bic == b.bic && (r.K < b.K || (r.K == b.K && r.n_params < b.n_params))))
            table.best = i;
    }
    return table;
}

namespace {

// Sorted per-cluster values with prefix sums; mean |x - v| over a cluster
// in O(log n).
struct SortedCluster {
    std::vector<double> values;
    std::vector<double> prefix;

    void finalize() {
        std::sort(values.begin(), values.end());
        prefix.resize(values.size() + 1);
        prefix[0] = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) prefix[i + 1] = prefix[i] + values[i];
    }
    double sum_abs_dev(double x) const {
        const auto it = std::upper_bound(values.begin(), values.end(), x);
        const std::size_t idx = static_cast<std::size_t>(it - values.begin());
        const double total = prefix.back();
        return x * idx - prefix[idx] + (total - prefix[idx]) - x * (values.size() - idx);
    }
};

}  // namespace

double silhouette_sampled(const Eigen::MatrixXd& data, const std::vector<int>& assignments,
                          int sample_size, std::uint64_t seed) {
    const int n = static_cast<int>(data.rows());
    if (static_cast<int>(assignments.size()) != n)
        throw DataError("silhouette: assignment length mismatch");
    if (sample_size < 2) throw DataError("silhouette: sample_size must be >= 2");

    int n_clusters = 0;
    const std::vector<int> labels = densify(assignments, n_clusters);
    if (n_clusters < 2)
        throw DataError("silhouette: undefined for a single cluster");

    std::vector<std::vector<int>> members(static_cast<std::size_t>(n_clusters));
    for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

    // Stratified sample, proportional with at least one point per cluster.
    std::vector<int> sample;
    if (n <= sample_size) {
        sample.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) sample[static_cast<std::size_t>(i)] = i;
    } else {
        Rng rng(seed);
        for (auto& m : members) {
            const int nc = static_cast<int>(m.size());
            int take = std::max<int>(
                1, static_cast<int>(std::llround(static_cast<double>(sample_size) * nc / n)));
            take = std::min(take, nc);
            std::vector<int> pool = m;
            for (int t = 0; t < take; ++t) {
                const std::size_t j = t + rng.index(pool.size() - t);
                std::swap(pool[static_cast<std::size_t>(t)], pool[j]);
                sample.push_back(pool[static_cast<std::size_t>(t)]);
            }
        }
        std::sort(sample.begin(), sample.end());
    }

    const bool one_dim = data.cols() == 1;
    std::vector<SortedCluster> sorted;
    if (one_dim) {
        sorted.resize(static_cast<std::size_t>(n_clusters));
        for (int i = 0; i < n; ++i)
            sorted[static_cast<std::size_t>(labels[i])].values.push_back(data(i, 0));
        for (auto& s : sorted) s.finalize();
    }

    double total = 0.0;
    std::vector<double> cluster_sum(static_cast<std::size_t>(n_clusters));
    for (int i : sample) {
        const int own = labels[i];
        const std::size_t own_n = members[static_cast<std::size_t>(own)].size();
        if (own_n <= 1) continue;  // singleton scores 0

        if (one_dim) {
            const double x = data(i, 0);
            for (int c = 0; c < n_clusters; ++c)
                cluster_sum[static_cast<std::size_t>(c)] =
                    sorted[static_cast<std::size_t>(c)].sum_abs_dev(x);
        } else {
            std::fill(cluster_sum.begin(), cluster_sum.end(), 0.0);
            for (int j = 0; j < n; ++j)
                cluster_sum[static_cast<std::size_t>(labels[j])] +=
                    (data.row(i) - data.row(j)).norm();
        }

        const double a = cluster_sum[static_cast<std::size_t>(own)] /
                         static_cast<double>(own_n - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < n_clusters; ++c) {
            if (c == own) continue;
            const double mean = cluster_sum[static_cast<std::size_t>(c)] /
                                static_cast<double>(members[static_cast<std::size_t>(c)].size());
            b = std::min(b, mean);
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(sample.size());
}

double adjusted_rand_index(const std::vector<int>& labels_a,
                           const std::vector<int>& labels_b) {
    if (labels_a.size() != labels_b.size())
        throw DataError("adjusted_rand_index: label length mismatch");
    const std::size_t n = labels_a.size();
    if (n < 2) throw DataError("adjusted_rand_index: need at least 2 labels");

    int ca = 0, cb = 0;
    const std::vector<int> a = densify(labels_a, ca);
    const std::vector<int> b = densify(labels_b, cb);

    std::vector<std::vector<long long>> table(
        static_cast<std::size_t>(ca), std::vector<long long>(static_cast<std::size_t>(cb), 0));
    std::vector<long long> row_sum(static_cast<std::size_t>(ca), 0);
    std::vector<long long> col_sum(static_cast<std::size_t>(cb), 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++table[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])];
        ++row_sum[static_cast<std::size_t>(a[i])];
        ++col_sum[static_cast<std::size_t>(b[i])];
    }

    auto comb2 = [](long long m) { return 0.5 * static_cast<double>(m) * (m - 1); };
    double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i)
        for (long long cell : table[i]) sum_cells += comb2(cell);
    for (long long r : row_sum) sum_rows += comb2(r);
    for (long long c : col_sum) sum_cols += comb2(c);

    const double total_pairs = comb2(static_cast<long long>(n));
    const double expected = sum_rows * sum_cols / total_pairs;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;  // both partitions trivial
    return (sum_cells - expected) / (max_index - expected);
}

}  // namespace foodaccess::selection
