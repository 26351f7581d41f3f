#pragma once

#include <cstdint>
#include <optional>

#include <json.hpp>

#include "actnet/rng.hpp"

namespace actnet {

/// A ~ Exponential(rate_exp), Y = exp(A / p_scale). Y is Pareto on [1, inf)
/// with tail exponent rate_exp * p_scale.
struct ExpTransformModel {
    double rate_exp = 1;
    double p_scale = 1;

    double exponent() const { return rate_exp * p_scale; }
    void validate() const;
};

/// 0 for y < 1, else 1 - y^(-rate*p).
double transformed_cdf(const ExpTransformModel& m, double y);

/// 0 for y < 1, else rate*p * y^(-1 - rate*p).
double transformed_pdf(const ExpTransformModel& m, double y);

/// E[Y] = rate*p / (rate*p - 1) when rate*p > 1; empty when the mean diverges.
std::optional<double> transformed_mean(const ExpTransformModel& m);

struct MonteCarloReport {
    double rate_exp = 0;
    double p_scale = 0;
    std::size_t n = 0;
    std::optional<double> mean_closed_form;
    double mean_empirical = 0;
    std::optional<double> mean_error;  // |empirical - closed form|, when the mean is finite
    double ks_distance = 0;
    double rate_estimate = 0;          // 1 / mean(A)
};

nlohmann::json monte_carlo_report_to_json(const MonteCarloReport& r);

inline constexpr std::size_t kMinMonteCarloSamples = 10'000;

/// Samples A by inverse transform, maps through exp(A / p_scale) and compares
/// against the closed forms.
MonteCarloReport monte_carlo_validate(const ExpTransformModel& m, std::size_t n_samples, SeededRng& rng);

} // namespace actnet
