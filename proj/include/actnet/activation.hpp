#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "actnet/errors.hpp"
#include "actnet/tensor.hpp"

namespace actnet {

enum class ActivationFamily { SinH, Exp, Weibull };

std::string_view family_name(ActivationFamily family);
ActivationFamily parse_family(std::string_view name);

inline constexpr double kParamFloor = 1e-6;
inline constexpr double kLogFloor = 1e-12;
/// Exponent arguments beta*x of SinH/Exp are capped here.
inline constexpr double kExpArgCap = 60.0;

namespace detail {
inline std::atomic<std::uint64_t> exp_clamp_counter{0};
}

/// Number of times an exponent argument was capped since the last reset.
inline std::uint64_t exp_clamp_count() { return detail::exp_clamp_counter.load(); }
inline void reset_exp_clamp_count() { detail::exp_clamp_counter.store(0); }

/// Learnable parameters of one activation instance. gamma and zeta are only
/// meaningful for the Weibull family.
template <typename Scalar>
struct ActivationParams {
    ActivationFamily family = ActivationFamily::Weibull;
    Scalar alpha = 1;
    Scalar beta = 2;
    Scalar gamma = 3;
    Scalar zeta = 1;

    static ActivationParams defaults(ActivationFamily family) {
        ActivationParams p;
        p.family = family;
        if (family == ActivationFamily::Weibull) {
            p.alpha = 1; p.beta = 2; p.gamma = 3; p.zeta = 1;
        } else {
            p.alpha = 1; p.beta = 1; p.gamma = 0; p.zeta = 0;
        }
        return p;
    }

    static ActivationParams sinh(Scalar alpha, Scalar beta) {
        return {ActivationFamily::SinH, alpha, beta, 0, 0};
    }
    static ActivationParams exp(Scalar alpha, Scalar beta) {
        return {ActivationFamily::Exp, alpha, beta, 0, 0};
    }
    static ActivationParams weibull(Scalar alpha, Scalar beta, Scalar gamma, Scalar zeta) {
        return {ActivationFamily::Weibull, alpha, beta, gamma, zeta};
    }

    bool is_weibull() const { return family == ActivationFamily::Weibull; }
    std::size_t parameter_count() const { return is_weibull() ? 4 : 2; }

    void validate() const {
        auto positive = [](Scalar v) { return std::isfinite(double(v)) && v > Scalar(0); };
        if (!positive(alpha) || !positive(beta)) {
            throw ParameterError("activation alpha and beta must be finite and positive");
        }
        if (is_weibull()) {
            if (!positive(gamma) || !positive(zeta)) {
                throw ParameterError("Weibull gamma and zeta must be finite and positive");
            }
            if (!(beta > Scalar(1))) {
                throw ParameterError("Weibull beta must exceed 1");
            }
        }
    }

    /// Projects onto the constraint set after an optimizer step.
    void clamp_to_constraints() {
        const Scalar floor = Scalar(kParamFloor);
        alpha = std::max(alpha, floor);
        beta = std::max(beta, is_weibull() ? Scalar(1) + floor : floor);
        if (is_weibull()) {
            gamma = std::max(gamma, floor);
            zeta = std::max(zeta, floor);
        }
    }
};

/// Partials of one activation output. d_gamma and d_zeta are zero outside
/// the Weibull family.
template <typename Scalar>
struct ActivationGradients {
    Scalar d_input = 0;
    Scalar d_alpha = 0;
    Scalar d_beta = 0;
    Scalar d_gamma = 0;
    Scalar d_zeta = 0;
};

template <typename Scalar>
struct ActivationEvaluation {
    Scalar value = 0;
    ActivationGradients<Scalar> grad;
};

namespace detail {

template <typename Scalar>
void check_input(Scalar x) {
    if (!std::isfinite(double(x))) throw InputError("activation input is not finite");
    if (x < Scalar(0)) throw InputError("activation input is negative");
}

// No validation: callers check parameters once per tensor.
template <typename Scalar>
ActivationEvaluation<Scalar> evaluate_unchecked(Scalar x, const ActivationParams<Scalar>& p) {
    using std::cosh;
    using std::exp;
    using std::expm1;
    using std::log;
    using std::max;
    using std::pow;
    using std::sinh;

    ActivationEvaluation<Scalar> r;
    switch (p.family) {
    case ActivationFamily::SinH: {
        Scalar u = p.beta * x;
        const bool capped = u > Scalar(kExpArgCap);
        if (capped) {
            u = Scalar(kExpArgCap);
            exp_clamp_counter.fetch_add(1, std::memory_order_relaxed);
        }
        const Scalar s = sinh(u);
        const Scalar c = cosh(u);
        r.value = p.alpha * s;
        r.grad.d_alpha = s;
        // Past the cap the output no longer depends on x or beta.
        r.grad.d_input = capped ? Scalar(0) : p.alpha * p.beta * c;
        r.grad.d_beta = capped ? Scalar(0) : p.alpha * x * c;
        break;
    }
    case ActivationFamily::Exp: {
        Scalar u = p.beta * x;
        const bool capped = u > Scalar(kExpArgCap);
        if (capped) {
            u = Scalar(kExpArgCap);
            exp_clamp_counter.fetch_add(1, std::memory_order_relaxed);
        }
        const Scalar em1 = expm1(u);
        const Scalar e = em1 + Scalar(1);
        r.value = p.alpha * em1;
        r.grad.d_alpha = em1;
        r.grad.d_input = capped ? Scalar(0) : p.alpha * p.beta * e;
        r.grad.d_beta = capped ? Scalar(0) : p.alpha * x * e;
        break;
    }
    case ActivationFamily::Weibull: {
        const Scalar floor = Scalar(kLogFloor);
        if (x == Scalar(0)) {
            // theta(0) = 0 for beta > 1 and so are all parameter partials. The
            // input slope is evaluated at the log floor to stay finite.
            const Scalar xc = floor;
            const Scalar q = pow(xc / p.gamma, p.zeta);
            const Scalar theta = pow(xc / p.alpha, p.beta - Scalar(1)) * exp(-q);
            r.value = 0;
            r.grad.d_input = theta * ((p.beta - Scalar(1)) - p.zeta * q) / xc;
            break;
        }
        const Scalar xl = max(x, floor);
        const Scalar q = pow(x / p.gamma, p.zeta);
        const Scalar theta = pow(x / p.alpha, p.beta - Scalar(1)) * exp(-q);
        r.value = theta;
        r.grad.d_input = theta * ((p.beta - Scalar(1)) - p.zeta * q) / xl;
        r.grad.d_beta = theta * log(xl / p.alpha);
        r.grad.d_alpha = (Scalar(1) - p.beta) / p.alpha * theta;
        r.grad.d_gamma = theta * p.zeta * q / p.gamma;
        // Chain rule gives -(x/gamma)^zeta * ln(x/gamma), not the printed variant.
        r.grad.d_zeta = -theta * q * log(xl / p.gamma);
        break;
    }
    }
    return r;
}

} // namespace detail

/// theta(x): SinH alpha*sinh(beta x); Exp alpha*(exp(beta x) - 1);
/// Weibull (x/alpha)^(beta-1) * exp(-(x/gamma)^zeta).
template <typename Scalar>
Scalar activate(Scalar x, const ActivationParams<Scalar>& p) {
    p.validate();
    detail::check_input(x);
    return detail::evaluate_unchecked(x, p).value;
}

template <typename Scalar>
ActivationGradients<Scalar> activate_gradients(Scalar x, const ActivationParams<Scalar>& p) {
    p.validate();
    detail::check_input(x);
    return detail::evaluate_unchecked(x, p).grad;
}

/// Input value where the Weibull activation turns from amplifying to
/// attenuating: gamma * ((beta - 1) / zeta)^(1/zeta).
template <typename Scalar>
Scalar weibull_peak(const ActivationParams<Scalar>& p) {
    if (!p.is_weibull()) throw ParameterError("weibull_peak requires the Weibull family");
    p.validate();
    using std::pow;
    return p.gamma * pow((p.beta - Scalar(1)) / p.zeta, Scalar(1) / p.zeta);
}

template <typename Scalar>
Tensor3<Scalar> apply_activation(const Tensor3<Scalar>& t, const ActivationParams<Scalar>& p) {
    p.validate();
    return tensor_map(t, [&p](Scalar x) {
        detail::check_input(x);
        return detail::evaluate_unchecked(x, p).value;
    });
}

} // namespace actnet
