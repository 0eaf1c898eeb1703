#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "cmmd/dataset.hpp"
#include "cmmd/errors.hpp"
#include "cmmd/kernels.hpp"
#include "cmmd/linalg.hpp"
#include "cmmd/rng.hpp"

namespace cmmd {

// Fitted conditional-mean-operator estimator: training data plus the ridge
// weight matrix W = (K_XX + lambda n I)^{-1}. Outcome Grams are built on
// demand since the CMMD closed forms need cross-Grams anyway.
struct CmoModel {
    PairedDataset train;
    KernelSpec kernel_x;
    KernelSpec kernel_y;
    double lambda = 0.1;
    Eigen::MatrixXd weights;
};

// Median-heuristic bandwidths are resolved against the training sample; for
// pooled-sample conventions resolve the kernels first and pass them in fixed.
inline CmoModel fit_cmo(const PairedDataset& data, const KernelSpec& kernel_x,
                        const KernelSpec& kernel_y, double lambda) {
    data.validate();
    if (!(lambda > 0.0)) throw InputError("fit_cmo: lambda must be > 0");
    CmoModel model;
    model.train = data;
    model.kernel_x = resolve_bandwidths(kernel_x, data.covariates);
    model.kernel_y = resolve_bandwidths(kernel_y, data.outcomes);
    model.lambda = lambda;
    const Eigen::MatrixXd kxx = gram(model.kernel_x, data.covariates, data.covariates);
    model.weights = ridge_weights(kxx, lambda, data.size());
    return model;
}

// beta(x) = W K_{X,x}; the CME estimate is sum_i beta_i(x) l(., y_i) and
// inner products against it are evaluated through outcome Gram columns.
inline Eigen::VectorXd cme_weights(const CmoModel& model, const PointRef& x) {
    if (x.size() != model.train.xdim()) {
        throw InputError("cme_weights: point dimension does not match training covariates");
    }
    Eigen::VectorXd kx(model.train.size());
    for (Eigen::Index i = 0; i < model.train.size(); ++i) {
        kx[i] = eval(model.kernel_x, model.train.covariates.row(i).transpose(), x);
    }
    return model.weights * kx;
}

// CMO estimator in primal form for explicit finite-dimensional features:
// a p x d matrix mapping covariate features to outcome features.
struct PrimalCmoModel {
    Eigen::MatrixXd weight_matrix;  // p x d
    Eigen::Index xdim() const { return weight_matrix.cols(); }
    Eigen::Index ydim() const { return weight_matrix.rows(); }

    Eigen::VectorXd apply(const PointRef& feature) const {
        if (feature.size() != weight_matrix.cols()) {
            throw InputError("primal cmo: feature dimension mismatch");
        }
        return weight_matrix * feature;
    }
};

// Psi_Y Phi_X^T (Phi_X Phi_X^T + lambda n I_d)^{-1} with features stored one
// sample per row.
inline PrimalCmoModel fit_cmo_primal(const Eigen::MatrixXd& features_x,
                                     const Eigen::MatrixXd& features_y, double lambda) {
    if (features_x.rows() != features_y.rows()) {
        throw InputError("fit_cmo_primal: feature matrices have different sample counts");
    }
    if (features_x.rows() < 1) throw InputError("fit_cmo_primal: need at least one sample");
    if (!(lambda > 0.0)) throw InputError("fit_cmo_primal: lambda must be > 0");
    const Eigen::Index n = features_x.rows();
    const Eigen::MatrixXd cov = features_x.transpose() * features_x;  // d x d
    const Eigen::MatrixXd w = ridge_weights(cov, lambda, n);
    PrimalCmoModel model;
    model.weight_matrix = features_y.transpose() * features_x * w;
    return model;
}

// Pooled covariates and per-point weights for the mixture covariance
// estimator sum_i w_i k(.,x_i) (x) k(.,x_i): P points carry alpha/n, Q points
// (1-alpha)/m. The default alpha = n/(n+m) makes every weight 1/(n+m).
struct PooledCovariates {
    Points points;
    Eigen::VectorXd weights;
};

inline PooledCovariates pooled_covariance_gram(const PointsRef& covariatesP,
                                               const PointsRef& covariatesQ, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw InputError("pooled covariance: alpha must lie in [0,1]");
    }
    const Eigen::Index n = covariatesP.rows();
    const Eigen::Index m = covariatesQ.rows();
    if ((n == 0 && alpha != 0.0) || (m == 0 && alpha != 1.0)) {
        throw InputError("pooled covariance: empty sample with nonzero weight");
    }
    if (n == 0 && m == 0) throw InputError("pooled covariance: both samples empty");
    PooledCovariates out;
    if (n == 0) {
        out.points = covariatesQ;
    } else if (m == 0) {
        out.points = covariatesP;
    } else {
        out.points = stack_rows(covariatesP, covariatesQ);
    }
    out.weights.resize(out.points.rows());
    const double wp = n > 0 ? alpha / static_cast<double>(n) : 0.0;
    const double wq = m > 0 ? (1.0 - alpha) / static_cast<double>(m) : 0.0;
    if (n > 0) out.weights.head(n).setConstant(wp);
    if (m > 0) out.weights.tail(m).setConstant(wq);
    return out;
}

inline double default_mixture_alpha(Eigen::Index n, Eigen::Index m) {
    return static_cast<double>(n) / static_cast<double>(n + m);
}

// Fold assignment for cross-validation: contiguous blocks of a seeded
// shuffle, block sizes differing by at most one.
inline std::vector<std::vector<int>> cv_folds(int n, int folds, std::uint64_t seed) {
    if (folds < 2) throw InputError("cv_folds: need at least 2 folds");
    if (folds > n) throw InputError("cv_folds: more folds than samples");
    rng::Engine eng(rng::derive_seed(seed, 0x63766c64));  // "cvld"
    const std::vector<int> perm = rng::partial_shuffle_indices(n, n, eng);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
    for (int f = 0; f < folds; ++f) {
        const int begin = static_cast<int>(static_cast<long long>(f) * n / folds);
        const int end = static_cast<int>(static_cast<long long>(f + 1) * n / folds);
        out[static_cast<std::size_t>(f)].assign(perm.begin() + begin, perm.begin() + end);
    }
    return out;
}

// Grid search for the ridge parameter by k-fold CV of the RKHS regression
// loss sum_j ||l(.,y_j) - mu_hat(x_j)||^2, computed from Gram matrices alone:
// kxx is the covariate Gram and lyy the outcome Gram of the full sample.
// Ties break toward the larger lambda.
inline double select_lambda_cv_gram(const Eigen::MatrixXd& kxx, const Eigen::MatrixXd& lyy,
                                    std::vector<double> grid, int folds, std::uint64_t seed) {
    detail::require_square(kxx, "select_lambda_cv");
    if (kxx.rows() != lyy.rows() || lyy.rows() != lyy.cols()) {
        throw InputError("select_lambda_cv: Gram matrices must be square and aligned");
    }
    if (grid.empty()) throw InputError("select_lambda_cv: grid must be nonempty");
    for (double g : grid) {
        if (!(g > 0.0)) throw InputError("select_lambda_cv: grid values must be > 0");
    }
    std::sort(grid.begin(), grid.end());
    const int n = static_cast<int>(kxx.rows());
    const auto folds_idx = cv_folds(n, folds, seed);

    std::vector<double> losses(grid.size(), 0.0);
    for (const auto& heldout : folds_idx) {
        std::vector<int> train;
        train.reserve(static_cast<std::size_t>(n) - heldout.size());
        std::vector<char> held(static_cast<std::size_t>(n), 0);
        for (int j : heldout) held[static_cast<std::size_t>(j)] = 1;
        for (int i = 0; i < n; ++i) {
            if (!held[static_cast<std::size_t>(i)]) train.push_back(i);
        }
        const Eigen::Index nt = static_cast<Eigen::Index>(train.size());
        const Eigen::Index nh = static_cast<Eigen::Index>(heldout.size());
        Eigen::MatrixXd ktt(nt, nt), kth(nt, nh), ltt(nt, nt), lth(nt, nh);
        Eigen::VectorXd lhh(nh);
        for (Eigen::Index a = 0; a < nt; ++a) {
            for (Eigen::Index b = 0; b < nt; ++b) {
                ktt(a, b) = kxx(train[static_cast<std::size_t>(a)], train[static_cast<std::size_t>(b)]);
                ltt(a, b) = lyy(train[static_cast<std::size_t>(a)], train[static_cast<std::size_t>(b)]);
            }
            for (Eigen::Index b = 0; b < nh; ++b) {
                kth(a, b) = kxx(train[static_cast<std::size_t>(a)], heldout[static_cast<std::size_t>(b)]);
                lth(a, b) = lyy(train[static_cast<std::size_t>(a)], heldout[static_cast<std::size_t>(b)]);
            }
        }
        for (Eigen::Index b = 0; b < nh; ++b) {
            lhh[b] = lyy(heldout[static_cast<std::size_t>(b)], heldout[static_cast<std::size_t>(b)]);
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const Eigen::MatrixXd w = ridge_weights(ktt, grid[g], nt);
            const Eigen::MatrixXd beta = w * kth;  // nt x nh
            double loss = 0.0;
            for (Eigen::Index b = 0; b < nh; ++b) {
                const Eigen::VectorXd bb = beta.col(b);
                loss += lhh[b] - 2.0 * bb.dot(lth.col(b)) + bb.dot(ltt * bb);
            }
            losses[g] += loss;
        }
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        if (losses[g] <= losses[best]) best = g;  // ties -> larger lambda
    }
    return grid[best];
}

inline double select_lambda_cv(const PairedDataset& data, const KernelSpec& kernel_x,
                               const KernelSpec& kernel_y, const std::vector<double>& grid,
                               int folds, std::uint64_t seed) {
    data.validate();
    if (folds > data.size()) throw InputError("select_lambda_cv: folds exceed sample count");
    const KernelSpec kx = resolve_bandwidths(kernel_x, data.covariates);
    const KernelSpec ky = resolve_bandwidths(kernel_y, data.outcomes);
    const Eigen::MatrixXd kxx = gram(kx, data.covariates, data.covariates);
    const Eigen::MatrixXd lyy = gram(ky, data.outcomes, data.outcomes);
    return select_lambda_cv_gram(kxx, lyy, grid, folds, seed);
}

}  // namespace cmmd
