#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "cmmd/errors.hpp"

namespace cmmd {

// A point is a finite real vector; categorical covariates are encoded as
// one-dimensional integer-valued coordinates. Collections of points are
// matrices with one point per row.
using Point = Eigen::VectorXd;
using PointRef = Eigen::Ref<const Eigen::VectorXd>;
using Points = Eigen::MatrixXd;
using PointsRef = Eigen::Ref<const Eigen::MatrixXd>;

class KernelSpec;

// k(x,x') = exp(-1/2 h ||x-x'||^2); h unset means "resolve via the median
// heuristic against the fit-time sample".
struct GaussianKernel {
    std::optional<double> bandwidth;
};

// k(x,x') = <x,x'>
struct LinearKernel {};

// k(x,x') = (<x,x'> + offset)^degree
struct PolynomialKernel {
    int degree = 2;
    double offset = 1.0;
};

// k(x,x') = 1{x = x'}
struct KroneckerDeltaKernel {};

// (k (x) l)((x,y),(x',y')) = k(x,x') l(y,y'); the left factor consumes the
// first left_dim coordinates, the right factor the rest.
struct TensorProductKernel {
    std::shared_ptr<const KernelSpec> left;
    std::shared_ptr<const KernelSpec> right;
    int left_dim = 1;
};

class KernelSpec {
public:
    using Variant = std::variant<GaussianKernel, LinearKernel, PolynomialKernel,
                                 KroneckerDeltaKernel, TensorProductKernel>;

    KernelSpec() : v_(GaussianKernel{std::nullopt}) {}
    explicit KernelSpec(Variant v) : v_(std::move(v)) {}

    static KernelSpec gaussian(double bandwidth) {
        if (!(bandwidth > 0.0)) throw InputError("gaussian kernel: bandwidth must be > 0");
        return KernelSpec(GaussianKernel{bandwidth});
    }
    static KernelSpec gaussian_median() { return KernelSpec(GaussianKernel{std::nullopt}); }
    static KernelSpec linear() { return KernelSpec(LinearKernel{}); }
    static KernelSpec polynomial(int degree, double offset) {
        if (degree < 1) throw InputError("polynomial kernel: degree must be >= 1");
        return KernelSpec(PolynomialKernel{degree, offset});
    }
    static KernelSpec kronecker_delta() { return KernelSpec(KroneckerDeltaKernel{}); }
    static KernelSpec tensor_product(KernelSpec left, int left_dim, KernelSpec right) {
        if (left_dim < 1) throw InputError("tensor product kernel: left_dim must be >= 1");
        TensorProductKernel t;
        t.left = std::make_shared<const KernelSpec>(std::move(left));
        t.right = std::make_shared<const KernelSpec>(std::move(right));
        t.left_dim = left_dim;
        return KernelSpec(std::move(t));
    }

    const Variant& variant() const { return v_; }

private:
    Variant v_;
};

// True once every Gaussian factor has a concrete bandwidth.
inline bool is_resolved(const KernelSpec& spec) {
    return std::visit(
        [](const auto& k) -> bool {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GaussianKernel>) {
                return k.bandwidth.has_value();
            } else if constexpr (std::is_same_v<T, TensorProductKernel>) {
                return is_resolved(*k.left) && is_resolved(*k.right);
            } else {
                return true;
            }
        },
        spec.variant());
}

// h = 1 / median{ ||x_i - x_j||^2 : i < j }, so the Gaussian value at the
// median distance is exp(-1/2). Even pair counts use the mean of the two
// central elements.
inline double median_heuristic_bandwidth(const PointsRef& points) {
    const Eigen::Index n = points.rows();
    if (n < 2) throw InputError("median heuristic: need at least 2 points");
    std::vector<double> d2;
    d2.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d2.push_back((points.row(i) - points.row(j)).squaredNorm());
        }
    }
    const std::size_t c = d2.size();
    const std::size_t mid = c / 2;
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid), d2.end());
    double median = d2[mid];
    if (c % 2 == 0) {
        std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid - 1),
                         d2.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + d2[mid - 1]);
    }
    if (!(median > 0.0)) {
        throw DegenerateDataError("median heuristic: all pairwise distances are zero");
    }
    return 1.0 / median;
}

// Fills in median-heuristic bandwidths from the given sample; tensor factors
// see their own coordinate slice. Already-resolved specs pass through.
inline KernelSpec resolve_bandwidths(const KernelSpec& spec, const PointsRef& points) {
    return std::visit(
        [&](const auto& k) -> KernelSpec {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GaussianKernel>) {
                if (k.bandwidth) return spec;
                return KernelSpec::gaussian(median_heuristic_bandwidth(points));
            } else if constexpr (std::is_same_v<T, TensorProductKernel>) {
                if (points.cols() <= k.left_dim) {
                    throw InputError("tensor product kernel: points have too few coordinates");
                }
                KernelSpec left = resolve_bandwidths(*k.left, points.leftCols(k.left_dim));
                KernelSpec right =
                    resolve_bandwidths(*k.right, points.rightCols(points.cols() - k.left_dim));
                return KernelSpec::tensor_product(std::move(left), k.left_dim, std::move(right));
            } else {
                return spec;
            }
        },
        spec.variant());
}

namespace detail {

inline double eval_nocheck(const KernelSpec& spec, const PointRef& x, const PointRef& y) {
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GaussianKernel>) {
                if (!k.bandwidth) {
                    throw InputError("gaussian kernel: bandwidth not resolved");
                }
                return std::exp(-0.5 * *k.bandwidth * (x - y).squaredNorm());
            } else if constexpr (std::is_same_v<T, LinearKernel>) {
                return x.dot(y);
            } else if constexpr (std::is_same_v<T, PolynomialKernel>) {
                return std::pow(x.dot(y) + k.offset, k.degree);
            } else if constexpr (std::is_same_v<T, KroneckerDeltaKernel>) {
                return x == y ? 1.0 : 0.0;
            } else {
                const Eigen::Index d = x.size();
                if (d <= k.left_dim) {
                    throw InputError("tensor product kernel: points have too few coordinates");
                }
                return eval_nocheck(*k.left, x.head(k.left_dim), y.head(k.left_dim)) *
                       eval_nocheck(*k.right, x.tail(d - k.left_dim), y.tail(d - k.left_dim));
            }
        },
        spec.variant());
}

}  // namespace detail

// Structural equality (same variant, same parameters, same children).
inline bool kernel_equal(const KernelSpec& a, const KernelSpec& b) {
    if (a.variant().index() != b.variant().index()) return false;
    return std::visit(
        [&](const auto& ka) -> bool {
            using T = std::decay_t<decltype(ka)>;
            const auto& kb = std::get<T>(b.variant());
            if constexpr (std::is_same_v<T, GaussianKernel>) {
                return ka.bandwidth == kb.bandwidth;
            } else if constexpr (std::is_same_v<T, PolynomialKernel>) {
                return ka.degree == kb.degree && ka.offset == kb.offset;
            } else if constexpr (std::is_same_v<T, TensorProductKernel>) {
                return ka.left_dim == kb.left_dim && kernel_equal(*ka.left, *kb.left) &&
                       kernel_equal(*ka.right, *kb.right);
            } else {
                return true;
            }
        },
        a.variant());
}

inline double eval(const KernelSpec& spec, const PointRef& x, const PointRef& y) {
    if (x.size() != y.size()) {
        throw InputError("kernel eval: points have mismatched dimensions");
    }
    if (x.size() == 0) throw InputError("kernel eval: points must have dimension >= 1");
    return detail::eval_nocheck(spec, x, y);
}

// Gram matrix with entry (i,j) = k(rows_i, cols_j). Entries are computed
// pairwise so that gram(spec, P, P) is exactly symmetric and unit diagonals
// (Gaussian, delta) are exact.
inline Eigen::MatrixXd gram(const KernelSpec& spec, const PointsRef& rows, const PointsRef& cols) {
    if (rows.rows() == 0 || cols.rows() == 0) {
        throw InputError("gram: point lists must be nonempty");
    }
    if (rows.cols() != cols.cols()) {
        throw InputError("gram: points have mismatched dimensions");
    }
    if (rows.cols() == 0) throw InputError("gram: points must have dimension >= 1");
    Eigen::MatrixXd out(rows.rows(), cols.rows());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < cols.rows(); ++j) {
            out(i, j) = detail::eval_nocheck(spec, rows.row(i).transpose(), cols.row(j).transpose());
        }
    }
    return out;
}

}  // namespace cmmd
