#pragma once

#include <algorithm>
#include <cmath>

#include "actnet/errors.hpp"
#include "actnet/tensor.hpp"

namespace actnet {

inline constexpr double kPowerFloor = 1e-12;

/// Per-channel spatial mean.
template <typename Scalar>
Vector<Scalar> global_average_pool(const Tensor3<Scalar>& t) {
    Vector<Scalar> out(static_cast<Eigen::Index>(t.depth()));
    const Scalar inv = Scalar(1) / Scalar(t.spatial_size());
    for (std::size_t k = 0; k < t.depth(); ++k) {
        out[static_cast<Eigen::Index>(k)] = t.channel(k).sum() * inv;
    }
    return out;
}

/// Per-channel spatial maximum.
template <typename Scalar>
Vector<Scalar> global_max_pool(const Tensor3<Scalar>& t) {
    Vector<Scalar> out(static_cast<Eigen::Index>(t.depth()));
    for (std::size_t k = 0; k < t.depth(); ++k) {
        out[static_cast<Eigen::Index>(k)] = t.channel(k).maxCoeff();
    }
    return out;
}

/// Generalized mean ((1/WH) sum x^p)^(1/p), p >= 1. Evaluated relative to the
/// channel maximum so large exponents neither overflow nor underflow.
template <typename Scalar>
Vector<Scalar> gem_pool(const Tensor3<Scalar>& t, Scalar p_gem) {
    if (!(p_gem >= Scalar(1)) || !std::isfinite(double(p_gem))) {
        throw ParameterError("gem_pool exponent must be finite and >= 1");
    }
    if (p_gem == Scalar(1)) return global_average_pool(t);
    using std::pow;
    Vector<Scalar> out(static_cast<Eigen::Index>(t.depth()));
    const Scalar inv = Scalar(1) / Scalar(t.spatial_size());
    for (std::size_t k = 0; k < t.depth(); ++k) {
        const auto ch = t.channel(k);
        const Scalar m = ch.maxCoeff();
        if (m == Scalar(0)) {
            out[static_cast<Eigen::Index>(k)] = 0;
            continue;
        }
        Scalar acc = 0;
        for (Eigen::Index n = 0; n < ch.size(); ++n) acc += pow(ch[n] / m, p_gem);
        out[static_cast<Eigen::Index>(k)] = m * pow(acc * inv, Scalar(1) / p_gem);
    }
    return out;
}

/// lambda * max(z, 1e-12)^p, element-wise.
template <typename Derived>
Vector<typename Derived::Scalar> power_normalize(const Eigen::MatrixBase<Derived>& z,
                                                 typename Derived::Scalar p,
                                                 typename Derived::Scalar lambda) {
    using Scalar = typename Derived::Scalar;
    return z.unaryExpr([p, lambda](Scalar v) {
        using std::pow;
        return lambda * pow(std::max(v, Scalar(kPowerFloor)), p);
    });
}

} // namespace actnet
