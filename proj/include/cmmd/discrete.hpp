#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "cmmd/errors.hpp"

namespace cmmd {

// Conditional distribution on finite domains: a |Y| x |X| column-stochastic
// table plus the covariate marginal. With Kronecker delta kernels these are
// exactly the RKHS embeddings, so squared CMMDs reduce to weighted Frobenius
// norms and are computed in closed form.
struct DiscreteConditionalModel {
    Eigen::MatrixXd cond_table;  // |Y| x |X|, columns sum to 1
    Eigen::VectorXd marginal;    // |X|, sums to 1

    DiscreteConditionalModel() = default;
    DiscreteConditionalModel(Eigen::MatrixXd table, Eigen::VectorXd mu)
        : cond_table(std::move(table)), marginal(std::move(mu)) {
        validate();
    }

    void validate() const {
        if (cond_table.rows() < 1 || cond_table.cols() < 1) {
            throw InputError("discrete model: table must be nonempty");
        }
        if (marginal.size() != cond_table.cols()) {
            throw InputError("discrete model: marginal length must match table columns");
        }
        if (cond_table.minCoeff() < 0.0 || cond_table.maxCoeff() > 1.0) {
            throw InputError("discrete model: table entries must lie in [0,1]");
        }
        for (Eigen::Index j = 0; j < cond_table.cols(); ++j) {
            if (std::abs(cond_table.col(j).sum() - 1.0) > 1e-12) {
                throw InputError("discrete model: table columns must sum to 1");
            }
        }
        if (marginal.minCoeff() < 0.0 || std::abs(marginal.sum() - 1.0) > 1e-12) {
            throw InputError("discrete model: marginal must be a probability vector");
        }
    }

    // Joint table: columns of the conditional scaled by the marginal.
    Eigen::MatrixXd joint_table() const { return cond_table * marginal.asDiagonal(); }
};

// Population squared CMMD between two discrete conditional models sharing a
// marginal, under delta kernels. Level 0 compares conditional tables, level 1
// weights column distances by the marginal, level 2 compares joint tables.
inline double discrete_cmmd_sq(const DiscreteConditionalModel& p,
                               const DiscreteConditionalModel& q, int level) {
    p.validate();
    q.validate();
    if (p.cond_table.rows() != q.cond_table.rows() || p.cond_table.cols() != q.cond_table.cols()) {
        throw InputError("discrete_cmmd_sq: domain sizes do not match");
    }
    if ((p.marginal - q.marginal).cwiseAbs().maxCoeff() > 1e-12) {
        throw InputError("discrete_cmmd_sq: models must share the covariate marginal");
    }
    switch (level) {
        case 0:
            return (p.cond_table - q.cond_table).squaredNorm();
        case 1: {
            double total = 0.0;
            for (Eigen::Index j = 0; j < p.cond_table.cols(); ++j) {
                total += p.marginal[j] * (p.cond_table.col(j) - q.cond_table.col(j)).squaredNorm();
            }
            return total;
        }
        case 2:
            return (p.joint_table() - q.joint_table()).squaredNorm();
        default:
            throw InputError("discrete_cmmd_sq: level must be 0, 1 or 2");
    }
}

}  // namespace cmmd
