#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "foodaccess/mixture.hpp"

namespace foodaccess::selection {

// BIC = 2 ln L - m ln n, maximize.
double bic(const mixture::FitResult& fit);

struct SelectionRow {
    mixture::Parameterization requested;
    mixture::Parameterization effective;  // 1-D collapse recorded here
    int K;
    double bic;
    double loglik;
    int n_params;
    bool converged;
    std::optional<double> silhouette;
};

struct SelectionTable {
    std::vector<SelectionRow> rows;
    int best = -1;  // index of the winning converged row, -1 if none

    const SelectionRow& best_row() const;
    // CSV with columns model,K,bic,converged,silhouette (effective model
    // appended for transparency).
    std::string to_csv() const;
    std::string to_json() const;
};

struct GridOptions {
    // 0 disables the silhouette column.
    int silhouette_sample_size = 10000;
};

// One fit per legal (parameterization, K) cell with deterministic
// sub-seeds derived from config.seed. Non-converged rows stay in the
// table but are excluded from best-row selection. Ties break toward
// smaller K, then fewer free parameters.
SelectionTable grid_search(const Eigen::MatrixXd& data, const std::vector<int>& k_range,
                           const std::vector<mixture::Parameterization>& parameterizations,
                           const mixture::FitConfig& config, const GridOptions& options = {});

// Average silhouette over a stratified sample (proportional per cluster,
// at least one point each); exact when n <= sample_size. Distances to all
// n points are used for every sampled point. Throws when fewer than two
// clusters are present.
double silhouette_sampled(const Eigen::MatrixXd& data, const std::vector<int>& assignments,
                          int sample_size, std::uint64_t seed);

// Chance-corrected partition agreement, <= 1 with 1 for identical
// clusterings (up to relabeling).
double adjusted_rand_index(const std::vector<int>& labels_a,
                           const std::vector<int>& labels_b);

}  // namespace foodaccess::selection
