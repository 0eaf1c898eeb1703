#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cmmd/errors.hpp"

// Reproducible random number generation. All sampling is built from
// std::mt19937_64 (whose output sequence is fully specified by the C++
// standard, hence identical across platforms) and explicit, documented
// transforms:
//   - uniforms:      ((x >> 11) + 0.5) * 2^-53, strictly inside (0,1)
//   - normals:       inverse CDF (Wichura's AS241 / PPND16), one uniform each
//   - Beta(a,b), integer a,b:  a-th smallest of a+b-1 uniforms
//   - Beta(1/2,1/2): arcsine inverse CDF, sin^2(pi u / 2), one uniform each
// Sub-streams are derived with splitmix64 so work can be distributed across
// replicates or trials in any order with identical results.

namespace cmmd::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a stream index.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream * 0xD1342543DE82EF95ull + 1));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(seed, a), b);
}

// Inverse of the standard normal CDF, Wichura's algorithm AS241 (PPND16).
// Accurate to about 1e-16 relative for p in (0,1).
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("inverse_normal_cdf: p must lie strictly inside (0,1)");
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                             1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                             4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                                 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                               3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                             4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                                 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                               6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                             2.05319162663775882187e0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                                 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                               2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                             5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                                 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                               1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                             5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return (q < 0.0) ? -value : value;
}

class Engine {
public:
    explicit Engine(std::uint64_t seed) : gen_(seed) {}

    // Uniform draw strictly inside (0,1); consumes one engine output.
    double uniform01() {
        const std::uint64_t x = gen_();
        return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via inverse CDF; consumes one uniform.
    double normal() { return inverse_normal_cdf(uniform01()); }

    // Beta(a,b) for integer a,b >= 1 as the a-th smallest of a+b-1 uniforms.
    double beta_integer(int a, int b) {
        if (a < 1 || b < 1) throw InputError("beta_integer: shape parameters must be >= 1");
        const int count = a + b - 1;
        std::vector<double> u(static_cast<std::size_t>(count));
        for (double& v : u) v = uniform01();
        std::nth_element(u.begin(), u.begin() + (a - 1), u.end());
        return u[static_cast<std::size_t>(a - 1)];
    }

    // Beta(1/2,1/2) (arcsine law) via its inverse CDF; consumes one uniform.
    double beta_half_half() {
        const double s = std::sin(1.5707963267948966 * uniform01());
        return s * s;
    }

    // Uniform integer in [0, n) by rejection; unbiased.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) throw InputError("bounded: n must be positive");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    // Bernoulli(p); consumes one uniform.
    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::mt19937_64 gen_;
};

// First k entries of a Fisher-Yates shuffle of 0..n-1 (k = n gives a full
// permutation). Consumes exactly k bounded draws.
inline std::vector<int> partial_shuffle_indices(int n, int k, Engine& eng) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
        const auto j = i + static_cast<int>(eng.bounded(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

}  // namespace cmmd::rng
