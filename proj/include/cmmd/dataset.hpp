#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "cmmd/errors.hpp"
#include "cmmd/kernels.hpp"

namespace cmmd {

// Covariate/outcome sample pairs from one joint distribution; the unit of
// input for every estimator. One row per sample.
struct PairedDataset {
    Points covariates;  // n x d
    Points outcomes;    // n x p

    PairedDataset() = default;
    PairedDataset(Points x, Points y) : covariates(std::move(x)), outcomes(std::move(y)) {
        validate();
    }

    Eigen::Index size() const { return covariates.rows(); }
    Eigen::Index xdim() const { return covariates.cols(); }
    Eigen::Index ydim() const { return outcomes.cols(); }

    void validate() const {
        if (covariates.rows() != outcomes.rows()) {
            throw InputError("paired dataset: covariates and outcomes have different lengths");
        }
        if (covariates.rows() < 1) throw InputError("paired dataset: must contain at least one pair");
        if (covariates.cols() < 1 || outcomes.cols() < 1) {
            throw InputError("paired dataset: points must have dimension >= 1");
        }
        if (!covariates.allFinite() || !outcomes.allFinite()) {
            throw InputError("paired dataset: entries must be finite");
        }
    }

    PairedDataset select(const std::vector<int>& idx) const {
        Points x(static_cast<Eigen::Index>(idx.size()), covariates.cols());
        Points y(static_cast<Eigen::Index>(idx.size()), outcomes.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = covariates.row(idx[i]);
            y.row(static_cast<Eigen::Index>(i)) = outcomes.row(idx[i]);
        }
        return PairedDataset(std::move(x), std::move(y));
    }
};

inline PairedDataset concat(const PairedDataset& a, const PairedDataset& b) {
    if (a.xdim() != b.xdim() || a.ydim() != b.ydim()) {
        throw InputError("concat: datasets have mismatched dimensions");
    }
    Points x(a.size() + b.size(), a.xdim());
    Points y(a.size() + b.size(), a.ydim());
    x << a.covariates, b.covariates;
    y << a.outcomes, b.outcomes;
    return PairedDataset(std::move(x), std::move(y));
}

inline Points stack_rows(const PointsRef& a, const PointsRef& b) {
    if (a.cols() != b.cols()) throw InputError("stack_rows: mismatched dimensions");
    Points out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

}  // namespace cmmd
