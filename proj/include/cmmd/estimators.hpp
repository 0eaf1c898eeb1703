#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "cmmd/dataset.hpp"
#include "cmmd/embeddings.hpp"
#include "cmmd/errors.hpp"
#include "cmmd/kernels.hpp"
#include "cmmd/linalg.hpp"

namespace cmmd {

enum class EstimatorKind { naive, shared_marginal_mmd, doubly_robust };

// Ridge parameter: a fixed value or "select by cross-validation at resolve
// time". The paper's experiments use 0.1 unless fitted by CV.
struct LambdaSpec {
    bool use_cv = false;
    double value = 0.1;

    static LambdaSpec fixed(double v) {
        if (!(v > 0.0)) throw InputError("lambda: must be > 0");
        return LambdaSpec{false, v};
    }
    static LambdaSpec cv() { return LambdaSpec{true, 0.0}; }
};

inline std::vector<double> default_cv_grid() { return {1e-4, 1e-3, 1e-2, 1e-1, 1.0}; }

// Full description of a squared-CMMD estimator. shared_marginal_mmd is only
// meaningful when the caller asserts P_X = Q_X. alpha is the covariate
// mixture weight; unset means n/(n+m) (plain concatenation).
struct CmmdConfig {
    double level = 1.0;
    KernelSpec kernel_x = KernelSpec::gaussian_median();
    KernelSpec kernel_y = KernelSpec::gaussian_median();
    LambdaSpec lambda_p = LambdaSpec::fixed(0.1);
    LambdaSpec lambda_q = LambdaSpec::fixed(0.1);
    LambdaSpec dr_lambda = LambdaSpec::cv();  // shared ridge of the DR estimator
    std::optional<double> alpha;
    EstimatorKind estimator = EstimatorKind::naive;
    std::vector<double> cv_grid = default_cv_grid();
    int cv_folds = 5;
    std::uint64_t cv_seed = 0;

    void require_resolved() const {
        if (!(level >= 0.0)) throw InputError("cmmd config: level must be >= 0");
        if (!is_resolved(kernel_x) || !is_resolved(kernel_y)) {
            throw InputError("cmmd config: kernels must be resolved before estimation");
        }
        if (lambda_p.use_cv || lambda_q.use_cv) {
            throw InputError("cmmd config: lambdas must be resolved before estimation");
        }
        if (alpha && !(*alpha >= 0.0 && *alpha <= 1.0)) {
            throw InputError("cmmd config: alpha must lie in [0,1]");
        }
    }
};

// A squared-CMMD value with full provenance.
struct CmmdEstimate {
    double value = 0.0;
    CmmdConfig config;
    Eigen::Index n = 0;
    Eigen::Index m = 0;
};

namespace detail {

inline void require_compatible(const PairedDataset& p, const PairedDataset& q) {
    p.validate();
    q.validate();
    if (p.xdim() != q.xdim()) throw InputError("cmmd: covariate dimensions differ");
    if (p.ydim() != q.ydim()) throw InputError("cmmd: outcome dimensions differ");
}

// Shared matrices for the naive closed forms: ridge weights per dataset,
// outcome Grams, the pooled covariate Gram and the mixture weights.
struct NaiveWorkspace {
    Eigen::Index n = 0, m = 0;
    Eigen::MatrixXd w_p, w_q;
    Eigen::MatrixXd l_yy, l_yz, l_zz;
    Eigen::MatrixXd k_pool;     // (n+m) x (n+m); P block first
    Eigen::VectorXd weights;    // mixture weights, length n+m
    bool equal_weights = true;  // true iff all pooled weights coincide

    // Tr(W_P A W_P M_pp) - 2 Tr(W_P B W_Q M_qp) + Tr(W_Q C W_Q M_qq) for a
    // pooled middle matrix M.
    double three_terms(const Eigen::MatrixXd& middle) const {
        const auto mpp = middle.topLeftCorner(n, n);
        const auto mqp = middle.bottomLeftCorner(m, n);
        const auto mqq = middle.bottomRightCorner(m, m);
        const double t1 = trace_product({w_p * l_yy * w_p, mpp});
        const double t2 = trace_product({w_p * l_yz * w_q, mqp});
        const double t3 = trace_product({w_q * l_zz * w_q, mqq});
        return t1 - 2.0 * t2 + t3;
    }
};

inline NaiveWorkspace build_naive_workspace(const PairedDataset& p, const PairedDataset& q,
                                            const CmmdConfig& cfg) {
    require_compatible(p, q);
    cfg.require_resolved();
    NaiveWorkspace ws;
    ws.n = p.size();
    ws.m = q.size();
    const Points pooled = stack_rows(p.covariates, q.covariates);
    ws.k_pool = gram(cfg.kernel_x, pooled, pooled);
    ws.w_p = ridge_weights(ws.k_pool.topLeftCorner(ws.n, ws.n), cfg.lambda_p.value, ws.n);
    ws.w_q = ridge_weights(ws.k_pool.bottomRightCorner(ws.m, ws.m), cfg.lambda_q.value, ws.m);
    ws.l_yy = gram(cfg.kernel_y, p.outcomes, p.outcomes);
    ws.l_yz = gram(cfg.kernel_y, p.outcomes, q.outcomes);
    ws.l_zz = gram(cfg.kernel_y, q.outcomes, q.outcomes);
    const double alpha = cfg.alpha ? *cfg.alpha : default_mixture_alpha(ws.n, ws.m);
    const PooledCovariates pc = pooled_covariance_gram(p.covariates, q.covariates, alpha);
    ws.weights = pc.weights;
    ws.equal_weights =
        (ws.weights.maxCoeff() - ws.weights.minCoeff()) <= 1e-15 * ws.weights.maxCoeff();
    return ws;
}

// Spectral power with a pseudo-inverse convention: eigenvalues are clamped
// at zero as in matrix_power, and for negative exponents eigenvalues below
// a relative cutoff map to 0 instead of diverging.
inline Eigen::MatrixXd pseudo_power(const Eigen::MatrixXd& m, double exponent) {
    const Spectrum spec = sym_eig(m);
    const double top = std::max(spec.eigenvalues.maxCoeff(), 0.0);
    const double cutoff = exponent < 0.0 ? top * 1e-13 : 0.0;
    Eigen::VectorXd powered(spec.eigenvalues.size());
    for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i) {
        double ev = spec.eigenvalues[i];
        if (ev < -1e-8) throw NotPsdError("pseudo_power: matrix is not PSD");
        if (ev <= cutoff) {
            powered[i] = 0.0;
        } else if (exponent == 0.0) {
            powered[i] = 1.0;
        } else {
            powered[i] = std::pow(ev, exponent);
        }
    }
    return symmetrized(spec.eigenvectors * powered.asDiagonal() * spec.eigenvectors.transpose());
}

// Middle matrix Phi~* (C^R)^s Phi~ of the level-s closed form, i.e. the
// smoothing factor between the projection blocks. Equal weights w reduce to
// matrix_power(w K~, s+1) / w (Theorem-7 form, overflow-safe); general
// weights use the symmetrized weighted sandwich over positive-weight points.
inline Eigen::MatrixXd pooled_smoothing_matrix(const NaiveWorkspace& ws, double s) {
    const Eigen::Index nt = ws.n + ws.m;
    if (s == 0.0) return ws.k_pool;
    if (ws.equal_weights) {
        const double w = ws.weights[0];
        return matrix_power(w * ws.k_pool, s + 1.0) / w;
    }
    std::vector<Eigen::Index> pos;
    pos.reserve(static_cast<std::size_t>(nt));
    for (Eigen::Index i = 0; i < nt; ++i) {
        if (ws.weights[i] > 0.0) pos.push_back(i);
    }
    if (pos.empty()) throw InputError("cmmd: all mixture weights are zero");
    const Eigen::Index r = static_cast<Eigen::Index>(pos.size());
    Eigen::VectorXd sqw(r);
    Eigen::MatrixXd krr(r, r);
    Eigen::MatrixXd cross(nt, r);  // K_{pool, reduced}
    for (Eigen::Index a = 0; a < r; ++a) {
        sqw[a] = std::sqrt(ws.weights[pos[static_cast<std::size_t>(a)]]);
        cross.col(a) = ws.k_pool.col(pos[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < r; ++b) {
            krr(a, b) = ws.k_pool(pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)]);
        }
    }
    const Eigen::MatrixXd g = sqw.asDiagonal() * krr * sqw.asDiagonal();
    const Eigen::MatrixXd core =
        sqw.asDiagonal() * pseudo_power(g, s - 1.0) * sqw.asDiagonal();
    return symmetrized(cross * core * cross.transpose());
}

inline CmmdEstimate make_estimate(double value, const CmmdConfig& cfg, double level,
                                  EstimatorKind kind, Eigen::Index n, Eigen::Index m) {
    CmmdEstimate est;
    est.value = value;
    est.config = cfg;
    est.config.level = level;
    est.config.estimator = kind;
    if (!est.config.alpha) est.config.alpha = default_mixture_alpha(n, m);
    est.n = n;
    est.m = m;
    return est;
}

}  // namespace detail

// Squared CMMD_0: Tr(W_X L_YY W_X K_XX) - 2 Tr(W_X L_YZ W_X' K_X'X)
//                 + Tr(W_X' L_ZZ W_X' K_X'X').
inline CmmdEstimate cmmd0_sq(const PairedDataset& p, const PairedDataset& q,
                             const CmmdConfig& cfg) {
    const auto ws = detail::build_naive_workspace(p, q, cfg);
    const double value = ws.three_terms(ws.k_pool);
    return detail::make_estimate(value, cfg, 0.0, EstimatorKind::naive, ws.n, ws.m);
}

// Squared CMMD_1: the Lemma-3 trace form; with the default mixture this is
// the 1/(n+m)-weighted version of K_XX~ K_~XX blocks, and for general
// weights the diagonal scaling of the pooled Gram.
inline CmmdEstimate cmmd1_sq(const PairedDataset& p, const PairedDataset& q,
                             const CmmdConfig& cfg) {
    const auto ws = detail::build_naive_workspace(p, q, cfg);
    const Eigen::MatrixXd middle =
        ws.k_pool * ws.weights.asDiagonal() * ws.k_pool;
    const double value = ws.three_terms(middle);
    return detail::make_estimate(value, cfg, 1.0, EstimatorKind::naive, ws.n, ws.m);
}

// Squared CMMD_2: the Lemma-4 trace form with two smoothing factors.
inline CmmdEstimate cmmd2_sq(const PairedDataset& p, const PairedDataset& q,
                             const CmmdConfig& cfg) {
    const auto ws = detail::build_naive_workspace(p, q, cfg);
    const Eigen::MatrixXd kd = ws.k_pool * ws.weights.asDiagonal();
    const Eigen::MatrixXd middle = kd * kd * ws.k_pool;
    const double value = ws.three_terms(middle);
    return detail::make_estimate(value, cfg, 2.0, EstimatorKind::naive, ws.n, ws.m);
}

// Squared level-s CMMD via the projection form with K~^{s+1} computed by
// spectral decomposition; agrees with the dedicated formulas at s = 0, 1, 2.
inline CmmdEstimate cmmd_s_sq(const PairedDataset& p, const PairedDataset& q,
                              const CmmdConfig& cfg) {
    const auto ws = detail::build_naive_workspace(p, q, cfg);
    const Eigen::MatrixXd middle = detail::pooled_smoothing_matrix(ws, cfg.level);
    const double value = ws.three_terms(middle);
    return detail::make_estimate(value, cfg, cfg.level, EstimatorKind::naive, ws.n, ws.m);
}

// Standard squared MMD between the joint distributions (recommended for
// CMMD_2 when P_X = Q_X, which the caller asserts): no ridge weights needed.
inline CmmdEstimate mmd_joint_sq(const PairedDataset& p, const PairedDataset& q,
                                 const CmmdConfig& cfg) {
    detail::require_compatible(p, q);
    if (!is_resolved(cfg.kernel_x) || !is_resolved(cfg.kernel_y)) {
        throw InputError("mmd_joint_sq: kernels must be resolved");
    }
    const double n = static_cast<double>(p.size());
    const double m = static_cast<double>(q.size());
    const Eigen::MatrixXd k_pp = gram(cfg.kernel_x, p.covariates, p.covariates);
    const Eigen::MatrixXd k_qp = gram(cfg.kernel_x, q.covariates, p.covariates);
    const Eigen::MatrixXd k_qq = gram(cfg.kernel_x, q.covariates, q.covariates);
    const Eigen::MatrixXd l_yy = gram(cfg.kernel_y, p.outcomes, p.outcomes);
    const Eigen::MatrixXd l_yz = gram(cfg.kernel_y, p.outcomes, q.outcomes);
    const Eigen::MatrixXd l_zz = gram(cfg.kernel_y, q.outcomes, q.outcomes);
    const double value = trace_product({l_yy, k_pp}) / (n * n) -
                         2.0 * trace_product({l_yz, k_qp}) / (n * m) +
                         trace_product({l_zz, k_qq}) / (m * m);
    return detail::make_estimate(value, cfg, 2.0, EstimatorKind::shared_marginal_mmd, p.size(),
                                 q.size());
}

// Resolves median bandwidths on the pooled samples and CV lambdas on their
// datasets, returning a config that satisfies require_resolved(). Median
// bandwidths use the pooled covariates (respectively outcomes) of both
// datasets so the same kernel serves every estimator level and replicate.
inline CmmdConfig resolve_cmmd_config(const PairedDataset& p, const PairedDataset& q,
                                      CmmdConfig cfg, std::uint64_t seed) {
    detail::require_compatible(p, q);
    cfg.kernel_x = resolve_bandwidths(cfg.kernel_x, stack_rows(p.covariates, q.covariates));
    cfg.kernel_y = resolve_bandwidths(cfg.kernel_y, stack_rows(p.outcomes, q.outcomes));
    cfg.cv_seed = seed;
    if (cfg.lambda_p.use_cv) {
        const int folds = std::min<int>(cfg.cv_folds, static_cast<int>(p.size()));
        cfg.lambda_p = LambdaSpec::fixed(select_lambda_cv(p, cfg.kernel_x, cfg.kernel_y,
                                                          cfg.cv_grid, folds,
                                                          rng::derive_seed(seed, 0x6c70)));
    }
    if (cfg.lambda_q.use_cv) {
        const int folds = std::min<int>(cfg.cv_folds, static_cast<int>(q.size()));
        cfg.lambda_q = LambdaSpec::fixed(select_lambda_cv(q, cfg.kernel_x, cfg.kernel_y,
                                                          cfg.cv_grid, folds,
                                                          rng::derive_seed(seed, 0x6c71)));
    }
    return cfg;
}

}  // namespace cmmd
