#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "foodaccess/errors.hpp"

namespace foodaccess::mixture {

// Covariance family, three letters encoding (volume, shape, orientation):
// E = equal across components, V = variable, I = identity. E and V are the
// one-dimensional collapse of the family (equal / per-component variance).
enum class Parameterization { EII, VII, EEI, VVI, EEE, EEV, VVV, E, V };

std::string to_string(Parameterization p);
Parameterization parameterization_from_string(const std::string& name);

// All nine identifiers, multivariate family first.
const std::vector<Parameterization>& all_parameterizations();

bool is_legal(Parameterization p, int d);

// The 1-D equivalent of a multivariate identifier (equal-volume models
// collapse to E, the rest to V). Identity for E/V themselves.
Parameterization collapse_to_1d(Parameterization p);

// Number of free parameters: (K-1) weights + K*d means + covariance
// parameters of the family.
int n_free_params(Parameterization p, int K, int d);

struct MixtureModel {
    Parameterization parameterization;
    int K = 0;
    int d = 0;
    Eigen::VectorXd weights;                 // K, simplex
    Eigen::MatrixXd means;                   // K x d
    std::vector<Eigen::MatrixXd> covariances;  // K matrices, d x d, SPD

    // Throws NumericError when an invariant is violated (simplex weights,
    // SPD covariances, EEV shared eigenvalues).
    void validate() const;
};

struct FitConfig {
    double tol = 1e-8;        // relative log-likelihood change
    int max_iter = 500;
    int n_restarts = 5;
    std::uint64_t seed = 0;
    // Ridge added to every updated covariance, as a fraction of the mean
    // diagonal of the global data covariance.
    double cov_floor_scale = 1e-6;
};

struct FitResult {
    MixtureModel model;
    Eigen::MatrixXd responsibilities;  // n x K, rows on the simplex
    std::vector<double> loglik_trace;  // per E-step, non-decreasing
    std::vector<int> hard_assignments;
    bool converged = false;
    int iterations = 0;

    double final_loglik() const { return loglik_trace.back(); }
    int n_rows() const { return static_cast<int>(hard_assignments.size()); }
};

// log of the mixture density at x, via log-sum-exp over components with
// Cholesky-based Gaussian log-densities.
double log_density(const MixtureModel& model, const Eigen::VectorXd& x);

// n x K matrix of log w_k + log N(x_i; mu_k, Sigma_k).
Eigen::MatrixXd weighted_log_densities(const MixtureModel& model,
                                       const Eigen::MatrixXd& data);

// Posterior responsibilities and total log-likelihood.
std::pair<Eigen::MatrixXd, double> e_step(const MixtureModel& model,
                                          const Eigen::MatrixXd& data);

// Constrained maximizer of the expected complete-data log-likelihood.
// `cov_floor` is the absolute ridge added to every covariance eigenvalue.
// A component with responsibility mass below 10*eps*n is reseeded at the
// lowest-density data row before the update.
MixtureModel m_step(const Eigen::MatrixXd& data, const Eigen::MatrixXd& responsibilities,
                    Parameterization parameterization, double cov_floor);

FitResult fit(const Eigen::MatrixXd& data, int K, Parameterization parameterization,
              const FitConfig& config);

// Hard assignments (argmax responsibility, lowest index on ties) plus the
// posterior matrix for new rows.
std::pair<std::vector<int>, Eigen::MatrixXd> predict(const MixtureModel& model,
                                                     const Eigen::MatrixXd& data);

// k-means++ seeding followed by at most 10 Lloyd iterations.
struct KmeansInit {
    Eigen::MatrixXd centers;  // K x d
    std::vector<int> labels;
};
KmeansInit init_kmeanspp(const Eigen::MatrixXd& data, int K, std::uint64_t seed);

}  // namespace foodaccess::mixture
