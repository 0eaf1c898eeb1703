#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cmmd/errors.hpp"

namespace cmmd {

namespace detail {

inline void require_square(const Eigen::MatrixXd& m, const char* who) {
    if (m.rows() != m.cols()) throw InputError(std::string(who) + ": matrix must be square");
    if (m.rows() == 0) throw InputError(std::string(who) + ": matrix must be nonempty");
}

inline void require_symmetric(const Eigen::MatrixXd& m, const char* who, double tol = 1e-10) {
    require_square(m, who);
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > tol) {
        throw InputError(std::string(who) + ": matrix is asymmetric beyond tolerance");
    }
}

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
    return 0.5 * (m + m.transpose());
}

}  // namespace detail

// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending
// with eigenvector columns aligned.
struct Spectrum {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

inline Spectrum sym_eig(const Eigen::MatrixXd& m) {
    detail::require_symmetric(m, "sym_eig");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(detail::symmetrized(m));
    if (solver.info() != Eigen::Success) {
        throw NumericError("sym_eig: eigendecomposition failed to converge");
    }
    // Eigen returns ascending order.
    Spectrum s;
    s.eigenvalues = solver.eigenvalues().reverse();
    s.eigenvectors = solver.eigenvectors().rowwise().reverse();
    return s;
}

// W = (K + lambda n I)^{-1} via Cholesky; W is materialized and symmetrized
// because the closed-form estimators reuse it across several trace terms.
inline Eigen::MatrixXd ridge_weights(const Eigen::MatrixXd& k, double lambda, Eigen::Index n) {
    detail::require_symmetric(k, "ridge_weights");
    if (!(lambda > 0.0)) throw InputError("ridge_weights: lambda must be > 0");
    if (n != k.rows()) throw InputError("ridge_weights: sample count must match matrix size");
    Eigen::MatrixXd a = detail::symmetrized(k);
    a.diagonal().array() += lambda * static_cast<double>(n);
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericError("ridge_weights: Cholesky factorization failed (matrix not PD)");
    }
    Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(k.rows(), k.rows()));
    return detail::symmetrized(w);
}

// K^s for symmetric PSD K via spectral decomposition. Eigenvalues in
// [-1e-8, 0) are clamped to 0 (PSD up to roundoff); anything lower is an
// upstream bug and rejected. Conventions: lambda^0 = 1 (s = 0 returns the
// identity) and 0^s = 0 for s > 0.
inline Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& k, double s) {
    if (!(s >= 0.0)) throw InputError("matrix_power: exponent must be >= 0");
    detail::require_symmetric(k, "matrix_power");
    if (s == 0.0) return Eigen::MatrixXd::Identity(k.rows(), k.rows());
    if (s == 1.0) return detail::symmetrized(k);
    const Spectrum spec = sym_eig(k);
    Eigen::VectorXd powered(spec.eigenvalues.size());
    for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i) {
        double ev = spec.eigenvalues[i];
        if (ev < -1e-8) {
            throw NotPsdError("matrix_power: eigenvalue below -1e-8, matrix is not PSD");
        }
        if (ev < 0.0) ev = 0.0;
        powered[i] = ev > 0.0 ? std::pow(ev, s) : 0.0;
    }
    return detail::symmetrized(spec.eigenvectors * powered.asDiagonal() *
                               spec.eigenvectors.transpose());
}

// Trace of the ordered product of the factors. The chain is folded left to
// right and the last factor is paired via Tr(AB) = sum_ij A_ij B_ji, which
// avoids materializing the final square product.
inline double trace_product(const std::vector<Eigen::MatrixXd>& factors) {
    if (factors.empty()) throw InputError("trace_product: factor list must be nonempty");
    if (factors.size() == 1) {
        detail::require_square(factors[0], "trace_product");
        return factors[0].trace();
    }
    Eigen::MatrixXd acc = factors[0];
    for (std::size_t i = 1; i + 1 < factors.size(); ++i) {
        if (acc.cols() != factors[i].rows()) {
            throw InputError("trace_product: factors are not conformable");
        }
        acc = acc * factors[i];
    }
    const Eigen::MatrixXd& last = factors.back();
    if (acc.cols() != last.rows() || last.cols() != acc.rows()) {
        throw InputError("trace_product: factor chain does not form a square product");
    }
    return (acc.array() * last.transpose().array()).sum();
}

}  // namespace cmmd
