#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cmmd/dataset.hpp"
#include "cmmd/embeddings.hpp"
#include "cmmd/errors.hpp"
#include "cmmd/estimators.hpp"
#include "cmmd/kernels.hpp"
#include "cmmd/linalg.hpp"

namespace cmmd {

// Propensity e(x) = P(point with covariate x came from P). Values must stay
// strictly inside (0,1) (overlap assumption); evaluation sites outside the
// configured band [delta, 1-delta] raise OverlapError.
class PropensityModel {
public:
    static constexpr double kDefaultOverlapDelta = 1e-3;

    static PropensityModel constant(double value) {
        if (!(value > 0.0 && value < 1.0)) {
            throw InputError("propensity: constant value must lie strictly inside (0,1)");
        }
        PropensityModel p;
        p.kind_ = Kind::kConstant;
        p.value_ = value;
        return p;
    }

    static PropensityModel analytic(std::string name, std::function<double(const PointRef&)> fn) {
        if (!fn) throw InputError("propensity: analytic function must be callable");
        PropensityModel p;
        p.kind_ = Kind::kAnalytic;
        p.name_ = std::move(name);
        p.fn_ = std::move(fn);
        return p;
    }

    // Exact-coordinate lookup table (one point per row).
    static PropensityModel tabulated(Points points, Eigen::VectorXd values) {
        if (points.rows() != values.size() || points.rows() == 0) {
            throw InputError("propensity: table points and values must align and be nonempty");
        }
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            if (!(values[i] > 0.0 && values[i] < 1.0)) {
                throw InputError("propensity: table values must lie strictly inside (0,1)");
            }
        }
        PropensityModel p;
        p.kind_ = Kind::kTabulated;
        p.table_points_ = std::move(points);
        p.table_values_ = std::move(values);
        return p;
    }

    double operator()(const PointRef& x) const {
        double e = 0.0;
        switch (kind_) {
            case Kind::kConstant:
                e = value_;
                break;
            case Kind::kAnalytic:
                e = fn_(x);
                break;
            case Kind::kTabulated: {
                bool found = false;
                for (Eigen::Index i = 0; i < table_points_.rows(); ++i) {
                    if (table_points_.row(i).transpose() == x) {
                        e = table_values_[i];
                        found = true;
                        break;
                    }
                }
                if (!found) throw InputError("propensity: point not present in table");
                break;
            }
        }
        if (!(e > 0.0 && e < 1.0)) {
            throw OverlapError("propensity: evaluated value outside (0,1)");
        }
        return e;
    }

    double checked(const PointRef& x, double delta = kDefaultOverlapDelta) const {
        const double e = (*this)(x);
        if (e < delta || e > 1.0 - delta) {
            throw OverlapError("propensity: value violates the overlap band [delta, 1-delta]");
        }
        return e;
    }

    // The propensity of the label-swapped problem, 1 - e(x).
    PropensityModel complement() const {
        switch (kind_) {
            case Kind::kConstant:
                return constant(1.0 - value_);
            case Kind::kAnalytic: {
                auto fn = fn_;
                return analytic(name_.empty() ? "" : name_ + "_complement",
                                [fn](const PointRef& x) { return 1.0 - fn(x); });
            }
            case Kind::kTabulated:
                return tabulated(table_points_, Eigen::VectorXd::Ones(table_values_.size()) -
                                                    table_values_);
        }
        throw NumericError("propensity: unreachable");
    }

    bool is_constant() const { return kind_ == Kind::kConstant; }
    bool is_analytic() const { return kind_ == Kind::kAnalytic; }
    bool is_tabulated() const { return kind_ == Kind::kTabulated; }
    double constant_value() const { return value_; }
    const std::string& name() const { return name_; }

private:
    enum class Kind { kConstant, kAnalytic, kTabulated };
    PropensityModel() = default;

    Kind kind_ = Kind::kConstant;
    double value_ = 0.5;
    std::string name_;
    std::function<double(const PointRef&)> fn_;
    Points table_points_;
    Eigen::VectorXd table_values_;
};

// Pooled test data {(t_i, x~_i, w_i)}: t = 1 marks points from P.
struct CombinedSample {
    Points covariates;
    Points outcomes;
    std::vector<int> treatment;

    Eigen::Index size() const { return covariates.rows(); }

    void validate() const {
        if (covariates.rows() != outcomes.rows() ||
            covariates.rows() != static_cast<Eigen::Index>(treatment.size())) {
            throw InputError("combined sample: covariates, outcomes and treatment must align");
        }
        if (covariates.rows() == 0) throw InputError("combined sample: must be nonempty");
        if (!covariates.allFinite() || !outcomes.allFinite()) {
            throw InputError("combined sample: entries must be finite");
        }
        int ones = 0, zeros = 0;
        for (int t : treatment) {
            if (t == 1) {
                ++ones;
            } else if (t == 0) {
                ++zeros;
            } else {
                throw InputError("combined sample: treatment entries must be 0 or 1");
            }
        }
        if (ones == 0 || zeros == 0) {
            throw InputError("combined sample: need at least one point from each distribution");
        }
    }
};

inline CombinedSample combine(const PairedDataset& p, const PairedDataset& q) {
    detail::require_compatible(p, q);
    CombinedSample s;
    s.covariates = stack_rows(p.covariates, q.covariates);
    s.outcomes = stack_rows(p.outcomes, q.outcomes);
    s.treatment.assign(static_cast<std::size_t>(p.size()), 1);
    s.treatment.insert(s.treatment.end(), static_cast<std::size_t>(q.size()), 0);
    return s;
}

// Everything needed to form Psi_DR* Psi_DR: propensities, the inverse-
// propensity residual weights e~_i = (t_i - e_i)/(e_i (1 - e_i)), the model
// CME weight columns and the six Gram blocks between observed outcomes and
// model CMEs at the pooled covariates.
struct PseudoOutcomeAssembly {
    CombinedSample sample;
    KernelSpec kernel_y;
    std::shared_ptr<const CmoModel> model_y;
    std::shared_ptr<const CmoModel> model_z;
    Eigen::VectorXd e_hat;
    Eigen::VectorXd e_tilde;
    Eigen::MatrixXd beta_y;  // n_p x n_t, column j = CME weights of model Y at x~_j
    Eigen::MatrixXd beta_z;  // n_q x n_t
    Eigen::MatrixXd l_ww;    // <l(.,w_i), l(.,w_j)>
    Eigen::MatrixXd l_wyh;   // <l(.,w_i), mu_Y(x~_j)>
    Eigen::MatrixXd l_wzh;   // <l(.,w_i), mu_Z(x~_j)>
    Eigen::MatrixXd l_yhyh;  // <mu_Y(x~_i), mu_Y(x~_j)>
    Eigen::MatrixXd l_yhzh;  // <mu_Y(x~_i), mu_Z(x~_j)>
    Eigen::MatrixXd l_zhzh;  // <mu_Z(x~_i), mu_Z(x~_j)>
};

inline PseudoOutcomeAssembly pseudo_outcome_assembly(
    const CombinedSample& sample, const PropensityModel& prop, const CmoModel& model_y,
    const CmoModel& model_z, const KernelSpec& kernel_y,
    double overlap_delta = PropensityModel::kDefaultOverlapDelta) {
    sample.validate();
    if (!is_resolved(kernel_y)) throw InputError("pseudo outcomes: outcome kernel not resolved");
    if (!kernel_equal(kernel_y, model_y.kernel_y) || !kernel_equal(kernel_y, model_z.kernel_y)) {
        throw InputError("pseudo outcomes: CME models use a different outcome kernel");
    }
    if (!kernel_equal(model_y.kernel_x, model_z.kernel_x)) {
        throw InputError("pseudo outcomes: CME models use different covariate kernels");
    }
    if (sample.covariates.cols() != model_y.train.xdim()) {
        throw InputError("pseudo outcomes: covariate dimension mismatch with CME models");
    }
    if (sample.outcomes.cols() != model_y.train.ydim() ||
        sample.outcomes.cols() != model_z.train.ydim()) {
        throw InputError("pseudo outcomes: outcome dimension mismatch with CME models");
    }

    PseudoOutcomeAssembly a;
    a.sample = sample;
    a.kernel_y = kernel_y;
    a.model_y = std::make_shared<const CmoModel>(model_y);
    a.model_z = std::make_shared<const CmoModel>(model_z);

    const Eigen::Index nt = sample.size();
    a.e_hat.resize(nt);
    a.e_tilde.resize(nt);
    for (Eigen::Index i = 0; i < nt; ++i) {
        const double e = prop.checked(sample.covariates.row(i).transpose(), overlap_delta);
        a.e_hat[i] = e;
        a.e_tilde[i] = (static_cast<double>(sample.treatment[static_cast<std::size_t>(i)]) - e) /
                       (e * (1.0 - e));
    }

    a.beta_y = model_y.weights *
               gram(model_y.kernel_x, model_y.train.covariates, sample.covariates);
    a.beta_z = model_z.weights *
               gram(model_z.kernel_x, model_z.train.covariates, sample.covariates);

    a.l_ww = gram(kernel_y, sample.outcomes, sample.outcomes);
    const Eigen::MatrixXd l_w_trainy = gram(kernel_y, sample.outcomes, model_y.train.outcomes);
    const Eigen::MatrixXd l_w_trainz = gram(kernel_y, sample.outcomes, model_z.train.outcomes);
    const Eigen::MatrixXd l_trainy_trainy =
        gram(kernel_y, model_y.train.outcomes, model_y.train.outcomes);
    const Eigen::MatrixXd l_trainy_trainz =
        gram(kernel_y, model_y.train.outcomes, model_z.train.outcomes);
    const Eigen::MatrixXd l_trainz_trainz =
        gram(kernel_y, model_z.train.outcomes, model_z.train.outcomes);

    a.l_wyh = l_w_trainy * a.beta_y;
    a.l_wzh = l_w_trainz * a.beta_z;
    a.l_yhyh = a.beta_y.transpose() * l_trainy_trainy * a.beta_y;
    a.l_yhzh = a.beta_y.transpose() * l_trainy_trainz * a.beta_z;
    a.l_zhzh = a.beta_z.transpose() * l_trainz_trainz * a.beta_z;
    return a;
}

// Psi_DR* Psi_DR from the factored form
// Psi_DR = (Psi_W - M_Y (I - E) - M_Z E) E~.
inline Eigen::MatrixXd psi_gram(const PseudoOutcomeAssembly& a) {
    const Eigen::VectorXd e = a.e_hat;
    const Eigen::VectorXd u = Eigen::VectorXd::Ones(e.size()) - e;
    Eigen::MatrixXd bracket = a.l_ww;
    bracket.noalias() -= a.l_wyh * u.asDiagonal();
    bracket.noalias() -= u.asDiagonal() * a.l_wyh.transpose();
    bracket.noalias() -= a.l_wzh * e.asDiagonal();
    bracket.noalias() -= e.asDiagonal() * a.l_wzh.transpose();
    bracket.noalias() += u.asDiagonal() * a.l_yhyh * u.asDiagonal();
    bracket.noalias() += u.asDiagonal() * a.l_yhzh * e.asDiagonal();
    bracket.noalias() += e.asDiagonal() * a.l_yhzh.transpose() * u.asDiagonal();
    bracket.noalias() += e.asDiagonal() * a.l_zhzh * e.asDiagonal();
    return detail::symmetrized(a.e_tilde.asDiagonal() * bracket * a.e_tilde.asDiagonal());
}

// <l(.,g), [Psi_DR]_i> for every i; with a linear outcome kernel and g = 1
// this extracts the scalar pseudo-outcome features.
inline Eigen::VectorXd psi_inner_products(const PseudoOutcomeAssembly& a, const PointRef& g) {
    const Eigen::Index nt = a.sample.size();
    Eigen::VectorXd l_gw(nt);
    for (Eigen::Index i = 0; i < nt; ++i) {
        l_gw[i] = eval(a.kernel_y, g, a.sample.outcomes.row(i).transpose());
    }
    Eigen::VectorXd l_gy(a.model_y->train.size());
    for (Eigen::Index i = 0; i < l_gy.size(); ++i) {
        l_gy[i] = eval(a.kernel_y, g, a.model_y->train.outcomes.row(i).transpose());
    }
    Eigen::VectorXd l_gz(a.model_z->train.size());
    for (Eigen::Index i = 0; i < l_gz.size(); ++i) {
        l_gz[i] = eval(a.kernel_y, g, a.model_z->train.outcomes.row(i).transpose());
    }
    const Eigen::VectorXd mu_y = a.beta_y.transpose() * l_gy;  // <l(.,g), mu_Y(x~_i)>
    const Eigen::VectorXd mu_z = a.beta_z.transpose() * l_gz;
    Eigen::VectorXd out(nt);
    for (Eigen::Index i = 0; i < nt; ++i) {
        out[i] = a.e_tilde[i] *
                 (l_gw[i] - (1.0 - a.e_hat[i]) * mu_y[i] - a.e_hat[i] * mu_z[i]);
    }
    return out;
}

// Coefficient vector c(x) = W_X~ K_{X~,x} over the pseudo-outcome atoms, so
// that <g, Delta_DR k(.,x)> = sum_i c_i(x) <g, [Psi_DR]_i>.
inline Eigen::VectorXd dr_difference_weights(const PseudoOutcomeAssembly& a,
                                             const Eigen::MatrixXd& w_ridge, const PointRef& x) {
    if (x.size() != a.sample.covariates.cols()) {
        throw InputError("dr_difference_weights: point dimension mismatch");
    }
    if (w_ridge.rows() != a.sample.size() || w_ridge.cols() != a.sample.size()) {
        throw InputError("dr_difference_weights: ridge matrix has wrong size");
    }
    Eigen::VectorXd kx(a.sample.size());
    for (Eigen::Index i = 0; i < a.sample.size(); ++i) {
        kx[i] = eval(a.model_y->kernel_x, a.sample.covariates.row(i).transpose(), x);
    }
    return w_ridge * kx;
}

// Doubly robust squared level-s CMMD,
// Tr(Psi_DR* Psi_DR W_X~ K~^{s+1} W_X~) / n_t^s, with the shared ridge
// parameter either fixed or selected by CV on the pooled pseudo-regression.
inline CmmdEstimate cmmd_dr_sq(const CombinedSample& sample, const PropensityModel& prop,
                               const CmoModel& model_y, const CmoModel& model_z,
                               const CmmdConfig& cfg,
                               double overlap_delta = PropensityModel::kDefaultOverlapDelta) {
    if (!(cfg.level >= 0.0)) throw InputError("cmmd_dr_sq: level must be >= 0");
    const PseudoOutcomeAssembly assembly =
        pseudo_outcome_assembly(sample, prop, model_y, model_z, cfg.kernel_y, overlap_delta);
    const Eigen::MatrixXd s_psi = psi_gram(assembly);
    const Eigen::Index nt = sample.size();
    const Eigen::MatrixXd k_pool =
        gram(model_y.kernel_x, sample.covariates, sample.covariates);

    double lambda;
    if (cfg.dr_lambda.use_cv) {
        const int folds = std::min<int>(cfg.cv_folds, static_cast<int>(nt));
        lambda = select_lambda_cv_gram(k_pool, s_psi, cfg.cv_grid, folds,
                                       rng::derive_seed(cfg.cv_seed, 0x6472));
    } else {
        lambda = cfg.dr_lambda.value;
    }

    const Eigen::MatrixXd w_ridge = ridge_weights(k_pool, lambda, nt);
    const double scale = static_cast<double>(nt);
    const Eigen::MatrixXd middle = scale * matrix_power(k_pool / scale, cfg.level + 1.0);
    const double value = trace_product({s_psi, w_ridge, middle, w_ridge});

    Eigen::Index n_treated = 0;
    for (int t : sample.treatment) n_treated += t;
    CmmdEstimate est;
    est.value = value;
    est.config = cfg;
    est.config.estimator = EstimatorKind::doubly_robust;
    est.config.dr_lambda = LambdaSpec::fixed(lambda);
    est.config.kernel_x = model_y.kernel_x;
    est.n = n_treated;
    est.m = nt - n_treated;
    return est;
}

}  // namespace cmmd
