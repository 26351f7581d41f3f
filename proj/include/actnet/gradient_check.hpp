#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "actnet/activation.hpp"
#include "actnet/rng.hpp"

namespace actnet {

/// Analytic-vs-central-difference comparison. A partial passes when its
/// relative error is within `rel_tol`, or, for references smaller than
/// `small_ref`, when the absolute error is within `abs_tol`.
struct GradientTolerance {
    double step = 1e-5;
    double rel_tol = 1e-4;
    double abs_tol = 1e-7;
    double small_ref = 1e-3;

    bool accepts(double analytic, double numeric) const;
    /// Relative error, or absolute error when the reference is small.
    double error(double analytic, double numeric) const;
};

struct GradientCheckResult {
    std::string name;
    std::size_t checks = 0;
    std::size_t failures = 0;
    double max_error = 0;
    std::string worst;  // description of the worst partial

    bool passed() const { return failures == 0 && checks > 0; }
    void record(const std::string& what, double analytic, double numeric, const GradientTolerance& tol);
};

nlohmann::json gradient_check_to_json(const GradientCheckResult& r);

/// Random valid parameters for `family` in the ranges used by the checks.
ActivationParams<double> random_activation_params(ActivationFamily family, SeededRng& rng);

/// Every partial of theta at `points` random (x, params) draws.
GradientCheckResult check_activation_gradients(ActivationFamily family, std::size_t points,
                                               SeededRng& rng, GradientTolerance tol = {});

/// Dense-grid argmax over [0, 5 x0] (10000 points) lies within one grid step of x0.
GradientCheckResult check_weibull_peaks(std::size_t draws, SeededRng& rng);

/// Triplet loss through the full head (K=2, depths {4, 8}); families cycle
/// SinH, Exp, Weibull over configurations. Checks every learnable and the
/// query's input gradients.
GradientCheckResult check_head_gradients(std::size_t configurations, SeededRng& rng,
                                         GradientTolerance tol = {1e-5, 1e-3, 1e-7, 1e-3});

struct GradientSuiteReport {
    std::uint64_t seed = 0;
    std::vector<GradientCheckResult> results;
    bool passed() const;
};

GradientSuiteReport run_gradient_suite(std::uint64_t seed);
nlohmann::json gradient_suite_to_json(const GradientSuiteReport& r);

} // namespace actnet
