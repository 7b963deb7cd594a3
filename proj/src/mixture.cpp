#include "foodaccess/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "foodaccess/rng.hpp"

namespace foodaccess::mixture {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double logsumexp_row(const Eigen::RowVectorXd& row) {
    const double m = row.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((row.array() - m).exp().sum());
}

}  // namespace

std::string to_string(Parameterization p) {
    switch (p) {
        case Parameterization::EII: return "EII";
        case Parameterization::VII: return "VII";
        case Parameterization::EEI: return "EEI";
        case Parameterization::VVI: return "VVI";
        case Parameterization::EEE: return "EEE";
        case Parameterization::EEV: return "EEV";
        case Parameterization::VVV: return "VVV";
        case Parameterization::E: return "E";
        case Parameterization::V: return "V";
    }
    throw NumericError("unknown parameterization");
}

Parameterization parameterization_from_string(const std::string& name) {
    for (auto p : all_parameterizations())
        if (to_string(p) == name) return p;
    throw DataError("unknown parameterization: " + name);
}

const std::vector<Parameterization>& all_parameterizations() {
    static const std::vector<Parameterization> all = {
        Parameterization::EII, Parameterization::VII, Parameterization::EEI,
        Parameterization::VVI, Parameterization::EEE, Parameterization::EEV,
        Parameterization::VVV, Parameterization::E,   Parameterization::V};
    return all;
}

bool is_legal(Parameterization p, int d) {
    if (d < 1) return false;
    if (p == Parameterization::E || p == Parameterization::V) return d == 1;
    return d >= 2;
}

Parameterization collapse_to_1d(Parameterization p) {
    switch (p) {
        case Parameterization::EII:
        case Parameterization::EEI:
        case Parameterization::EEE:
        case Parameterization::EEV:
        case Parameterization::E:
            return Parameterization::E;
        default:
            return Parameterization::V;
    }
}

int n_free_params(Parameterization p, int K, int d) {
    if (K < 1 || !is_legal(p, d))
        throw DataError("n_free_params: illegal (parameterization, d) pair: " +
                        to_string(p) + ", d=" + std::to_string(d));
    const int base = (K - 1) + K * d;
    switch (p) {
        case Parameterization::EII: return base + 1;
        case Parameterization::VII: return base + K;
        case Parameterization::EEI: return base + d;
        case Parameterization::VVI: return base + K * d;
        case Parameterization::EEE: return base + d * (d + 1) / 2;
        case Parameterization::EEV: return base + 1 + (d - 1) + K * d * (d - 1) / 2;
        case Parameterization::VVV: return base + K * d * (d + 1) / 2;
        case Parameterization::E: return base + 1;
        case Parameterization::V: return base + K;
    }
    throw NumericError("unreachable");
}

void MixtureModel::validate() const {
    if (K < 1 || d < 1) throw NumericError("MixtureModel: K and d must be >= 1");
    if (weights.size() != K || means.rows() != K || means.cols() != d ||
        static_cast<int>(covariances.size()) != K)
        throw NumericError("MixtureModel: inconsistent shapes");
    if (std::abs(weights.sum() - 1.0) > 1e-12 || weights.minCoeff() < 0.0)
        throw NumericError("MixtureModel: weights not on the simplex");

    std::vector<Eigen::VectorXd> eigs;
    for (const auto& cov : covariances) {
        if (cov.rows() != d || cov.cols() != d)
            throw NumericError("MixtureModel: covariance shape mismatch");
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + cov.cwiseAbs().maxCoeff()))
            throw NumericError("MixtureModel: covariance not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw NumericError("MixtureModel: covariance not positive definite");
        eigs.push_back(es.eigenvalues());
    }
    if (parameterization == Parameterization::EEV) {
        for (int k = 1; k < K; ++k) {
            const double rel = ((eigs[k] - eigs[0]).cwiseAbs().array() /
                                eigs[0].cwiseAbs().array().max(1e-300))
                                   .maxCoeff();
            if (rel > 1e-8)
                throw NumericError("MixtureModel: EEV components do not share eigenvalues");
        }
    }
}

Eigen::MatrixXd weighted_log_densities(const MixtureModel& model,
                                       const Eigen::MatrixXd& data) {
    const int n = static_cast<int>(data.rows());
    if (data.cols() != model.d)
        throw DataError("dimension mismatch: data has d=" + std::to_string(data.cols()) +
                        ", model has d=" + std::to_string(model.d));

    Eigen::MatrixXd out(n, model.K);
    for (int k = 0; k < model.K; ++k) {
        const double log_w = std::log(model.weights(k));
        if (model.d == 1) {
            const double mu = model.means(k, 0);
            const double s2 = model.covariances[k](0, 0);
            const double inv2 = 0.5 / s2;
            const double c = log_w - 0.5 * std::log(s2) - 0.5 * kLog2Pi;
            out.col(k) = (-(data.col(0).array() - mu).square() * inv2 + c).matrix();
        } else {
            Eigen::LLT<Eigen::MatrixXd> llt(model.covariances[k]);
            if (llt.info() != Eigen::Success)
                throw NumericError("Cholesky factorization failed in density evaluation");
            const Eigen::MatrixXd L = llt.matrixL();
            const double log_det = L.diagonal().array().log().sum();
            Eigen::MatrixXd centered = data.rowwise() - model.means.row(k);
            Eigen::MatrixXd y =
                L.triangularView<Eigen::Lower>().solve(centered.transpose());
            const double c = log_w - log_det - 0.5 * model.d * kLog2Pi;
            out.col(k) = (-0.5 * y.colwise().squaredNorm().array() + c).matrix();
        }
    }
    return out;
}

double log_density(const MixtureModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.d)
        throw DataError("dimension mismatch in log_density");
    Eigen::MatrixXd row = x.transpose();
    const Eigen::MatrixXd lp = weighted_log_densities(model, row);
    return logsumexp_row(lp.row(0));
}

std::pair<Eigen::MatrixXd, double> e_step(const MixtureModel& model,
                                          const Eigen::MatrixXd& data) {
    const int n = static_cast<int>(data.rows());
    if (n < 1) throw DataError("e_step: empty data");
    Eigen::MatrixXd lp = weighted_log_densities(model, data);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double lse = logsumexp_row(lp.row(i));
        total += lse;
        lp.row(i) = (lp.row(i).array() - lse).exp();
    }
    if (!std::isfinite(total)) throw NumericError("e_step: non-finite log-likelihood");
    return {std::move(lp), total};
}

namespace {

// Per-row mixture log-density, used to reseed dead components.
Eigen::VectorXd row_log_densities(const MixtureModel& model, const Eigen::MatrixXd& data) {
    const Eigen::MatrixXd lp = weighted_log_densities(model, data);
    Eigen::VectorXd out(data.rows());
    for (int i = 0; i < data.rows(); ++i) out(i) = logsumexp_row(lp.row(i));
    return out;
}

MixtureModel m_step_core(const Eigen::MatrixXd& data, const Eigen::MatrixXd& resp,
                         Parameterization p, double cov_floor) {
    const int n = static_cast<int>(data.rows());
    const int d = static_cast<int>(data.cols());
    const int K = static_cast<int>(resp.cols());

    MixtureModel model;
    model.parameterization = p;
    model.K = K;
    model.d = d;

    const Eigen::VectorXd nk = resp.colwise().sum();
    model.weights = nk / static_cast<double>(n);
    model.means = Eigen::MatrixXd(K, d);
    for (int k = 0; k < K; ++k)
        model.means.row(k) = (resp.col(k).transpose() * data) / nk(k);

    // Weighted scatter per component.
    std::vector<Eigen::MatrixXd> scatter(K);
    for (int k = 0; k < K; ++k) {
        Eigen::MatrixXd centered = data.rowwise() - model.means.row(k);
        scatter[k] = centered.transpose() * (resp.col(k).asDiagonal() * centered);
    }

    model.covariances.assign(K, Eigen::MatrixXd());
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);

    switch (p) {
        case Parameterization::E: {
            double s2 = 0.0;
            for (int k = 0; k < K; ++k) s2 += scatter[k](0, 0);
            s2 = s2 / n + cov_floor;
            for (int k = 0; k < K; ++k)
                model.covariances[k] = Eigen::MatrixXd::Constant(1, 1, s2);
            break;
        }
        case Parameterization::V: {
            for (int k = 0; k < K; ++k)
                model.covariances[k] =
                    Eigen::MatrixXd::Constant(1, 1, scatter[k](0, 0) / nk(k) + cov_floor);
            break;
        }
        case Parameterization::EII: {
            double tr = 0.0;
            for (int k = 0; k < K; ++k) tr += scatter[k].trace();
            const Eigen::MatrixXd shared = (tr / (n * d) + cov_floor) * eye;
            for (int k = 0; k < K; ++k) model.covariances[k] = shared;
            break;
        }
        case Parameterization::VII: {
            for (int k = 0; k < K; ++k)
                model.covariances[k] = (scatter[k].trace() / (nk(k) * d) + cov_floor) * eye;
            break;
        }
        case Parameterization::EEI: {
            Eigen::VectorXd diag = Eigen::VectorXd::Zero(d);
            for (int k = 0; k < K; ++k) diag += scatter[k].diagonal();
            diag = diag / n;
            diag.array() += cov_floor;
            const Eigen::MatrixXd shared = diag.asDiagonal();
            for (int k = 0; k < K; ++k) model.covariances[k] = shared;
            break;
        }
        case Parameterization::VVI: {
            for (int k = 0; k < K; ++k) {
                Eigen::VectorXd diag = scatter[k].diagonal() / nk(k);
                diag.array() += cov_floor;
                model.covariances[k] = diag.asDiagonal();
            }
            break;
        }
        case Parameterization::EEE: {
            Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(d, d);
            for (int k = 0; k < K; ++k) pooled += scatter[k];
            const Eigen::MatrixXd shared = pooled / n + cov_floor * eye;
            for (int k = 0; k < K; ++k) model.covariances[k] = shared;
            break;
        }
        case Parameterization::EEV: {
            // Each component keeps its own eigenvectors; eigenvalues are
            // pooled across components, which enforces equal volume and
            // shape exactly.
            std::vector<Eigen::MatrixXd> vectors(K);
            Eigen::VectorXd pooled = Eigen::VectorXd::Zero(d);
            for (int k = 0; k < K; ++k) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter[k]);
                if (es.info() != Eigen::Success)
                    throw NumericError("EEV M-step: eigendecomposition failed");
                vectors[k] = es.eigenvectors();
                pooled += es.eigenvalues();  // ascending order, consistent across k
            }
            pooled = pooled / n;
            pooled.array() += cov_floor;
            for (int k = 0; k < K; ++k)
                model.covariances[k] =
                    vectors[k] * pooled.asDiagonal() * vectors[k].transpose();
            break;
        }
        case Parameterization::VVV: {
            for (int k = 0; k < K; ++k)
                model.covariances[k] = scatter[k] / nk(k) + cov_floor * eye;
            break;
        }
    }
    return model;
}

}  // namespace

MixtureModel m_step(const Eigen::MatrixXd& data, const Eigen::MatrixXd& responsibilities,
                    Parameterization parameterization, double cov_floor) {
    const int n = static_cast<int>(data.rows());
    const int d = static_cast<int>(data.cols());
    const int K = static_cast<int>(responsibilities.cols());
    if (responsibilities.rows() != n) throw DataError("m_step: row count mismatch");
    Parameterization p = d == 1 ? collapse_to_1d(parameterization) : parameterization;
    if (!is_legal(p, d)) throw DataError("m_step: illegal parameterization for d");

    const double dead_mass = 10.0 * std::numeric_limits<double>::epsilon() * n;
    const Eigen::VectorXd nk = responsibilities.colwise().sum();
    std::vector<int> dead;
    for (int k = 0; k < K; ++k)
        if (nk(k) < dead_mass) dead.push_back(k);
    if (dead.empty()) return m_step_core(data, responsibilities, p, cov_floor);

    // Empty-component rescue: give the dead component full responsibility
    // for the row with the lowest current mixture density, then redo the
    // update with the patched responsibilities.
    Eigen::MatrixXd patched = responsibilities;
    std::vector<int> alive;
    for (int k = 0; k < K; ++k)
        if (nk(k) >= dead_mass) alive.push_back(k);
    Eigen::MatrixXd alive_resp(n, static_cast<int>(alive.size()));
    for (std::size_t j = 0; j < alive.size(); ++j)
        alive_resp.col(static_cast<int>(j)) = responsibilities.col(alive[j]);
    // Renormalize rows so the interim model is a proper mixture.
    for (int i = 0; i < n; ++i) {
        const double s = alive_resp.row(i).sum();
        if (s > 0) alive_resp.row(i) /= s;
    }
    MixtureModel interim =
        m_step_core(data, alive_resp,
                    d == 1 ? Parameterization::V : Parameterization::VVV, cov_floor);
    Eigen::VectorXd dens = row_log_densities(interim, data);
    std::unordered_set<int> used;
    for (int k : dead) {
        int best = -1;
        for (int i = 0; i < n; ++i) {
            if (used.count(i)) continue;
            if (best < 0 || dens(i) < dens(best)) best = i;
        }
        used.insert(best);
        patched.row(best).setZero();
        patched(best, k) = 1.0;
    }
    return m_step_core(data, patched, p, cov_floor);
}

KmeansInit init_kmeanspp(const Eigen::MatrixXd& data, int K, std::uint64_t seed) {
    const int n = static_cast<int>(data.rows());
    const int d = static_cast<int>(data.cols());
    if (K < 1) throw DataError("init_kmeanspp: K must be >= 1");

    Rng rng(seed);
    Eigen::MatrixXd centers(K, d);
    centers.row(0) = data.row(static_cast<int>(rng.index(n)));

    Eigen::VectorXd min_sq(n);
    for (int i = 0; i < n; ++i)
        min_sq(i) = (data.row(i) - centers.row(0)).squaredNorm();

    for (int k = 1; k < K; ++k) {
        const double total = min_sq.sum();
        if (total <= 0.0)
            throw DataError("init_kmeanspp: fewer than K distinct points");
        double target = rng.uniform() * total;
        int chosen = -1;
        for (int i = 0; i < n; ++i) {
            target -= min_sq(i);
            if (target <= 0.0 && min_sq(i) > 0.0) {
                chosen = i;
                break;
            }
        }
        if (chosen < 0) {
            // Floating-point tail: take the last point with positive mass.
            for (int i = n - 1; i >= 0; --i)
                if (min_sq(i) > 0.0) {
                    chosen = i;
                    break;
                }
        }
        centers.row(k) = data.row(chosen);
        for (int i = 0; i < n; ++i)
            min_sq(i) = std::min(min_sq(i), (data.row(i) - centers.row(k)).squaredNorm());
    }

    std::vector<int> labels(n, 0);
    for (int iter = 0; iter < 10; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_sq = (data.row(i) - centers.row(0)).squaredNorm();
            for (int k = 1; k < K; ++k) {
                const double sq = (data.row(i) - centers.row(k)).squaredNorm();
                if (sq < best_sq) {
                    best_sq = sq;
                    best = k;
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, d);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
        for (int i = 0; i < n; ++i) {
            sums.row(labels[i]) += data.row(i);
            counts(labels[i]) += 1.0;
        }
        for (int k = 0; k < K; ++k)
            if (counts(k) > 0.0) centers.row(k) = sums.row(k) / counts(k);
        if (!changed) break;
    }
    return {std::move(centers), std::move(labels)};
}

FitResult fit(const Eigen::MatrixXd& data, int K, Parameterization parameterization,
              const FitConfig& config) {
    const int n = static_cast<int>(data.rows());
    const int d = static_cast<int>(data.cols());
    if (n <= K) throw DataError("fit: need n > K");
    if (config.tol <= 0 || config.max_iter < 1 || config.n_restarts < 1)
        throw DataError("fit: invalid FitConfig");
    Parameterization p = d == 1 ? collapse_to_1d(parameterization) : parameterization;
    if (!is_legal(p, d)) throw DataError("fit: illegal parameterization for d");

    // Ridge scale from the global data covariance diagonal.
    const Eigen::RowVectorXd col_mean = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - col_mean;
    const double mean_var = centered.array().square().colwise().sum().mean() / n;
    if (mean_var <= 0.0)
        throw DataError("fit: all data points identical (zero variance)");
    const double cov_floor = config.cov_floor_scale * mean_var;

    FitResult best;
    bool have_best = false;
    for (int r = 0; r < config.n_restarts; ++r) {
        const std::uint64_t sub_seed = Rng::derive(config.seed, static_cast<std::uint64_t>(r));
        KmeansInit init = init_kmeanspp(data, K, sub_seed);

        Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, K);
        for (int i = 0; i < n; ++i) resp(i, init.labels[i]) = 1.0;
        MixtureModel model = m_step(data, resp, p, cov_floor);

        FitResult result;
        result.model = model;
        double prev_ll = -std::numeric_limits<double>::infinity();
        for (int it = 1; it <= config.max_iter; ++it) {
            auto [r_mat, ll] = e_step(result.model, data);
            result.responsibilities = std::move(r_mat);
            result.loglik_trace.push_back(ll);
            result.iterations = it;
            if (it > 1 &&
                std::abs(ll - prev_ll) < config.tol * (std::abs(prev_ll) + 1e-12)) {
                result.converged = true;
                break;
            }
            prev_ll = ll;
            if (it == config.max_iter) break;
            result.model = m_step(data, result.responsibilities, p, cov_floor);
        }
        result.hard_assignments.resize(n);
        for (int i = 0; i < n; ++i) {
            int arg = 0;
            for (int k = 1; k < K; ++k)
                if (result.responsibilities(i, k) > result.responsibilities(i, arg)) arg = k;
            result.hard_assignments[i] = arg;
        }
        if (!have_best || result.final_loglik() > best.final_loglik()) {
            best = std::move(result);
            have_best = true;
        }
    }
    return best;
}

std::pair<std::vector<int>, Eigen::MatrixXd> predict(const MixtureModel& model,
                                                     const Eigen::MatrixXd& data) {
    auto [resp, ll] = e_step(model, data);
    (void)ll;
    std::vector<int> labels(resp.rows());
    for (int i = 0; i < resp.rows(); ++i) {
        int arg = 0;
        for (int k = 1; k < model.K; ++k)
            if (resp(i, k) > resp(i, arg)) arg = k;
        labels[i] = arg;
    }
    return {std::move(labels), std::move(resp)};
}

}  // namespace foodaccess::mixture
