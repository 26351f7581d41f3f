#include "actnet/appendix.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "actnet/errors.hpp"

namespace actnet {

void ExpTransformModel::validate() const {
    if (!(rate_exp > 0) || !(p_scale > 0) || !std::isfinite(rate_exp) || !std::isfinite(p_scale)) {
        throw ParameterError("rate_exp and p_scale must be finite and positive");
    }
}

double transformed_cdf(const ExpTransformModel& m, double y) {
    m.validate();
    if (!(y >= 1)) return 0;
    return 1 - std::pow(y, -m.exponent());
}

double transformed_pdf(const ExpTransformModel& m, double y) {
    m.validate();
    if (!(y >= 1)) return 0;
    const double a = m.exponent();
    return a * std::pow(y, -1 - a);
}

std::optional<double> transformed_mean(const ExpTransformModel& m) {
    m.validate();
    const double a = m.exponent();
    if (a <= 1) return std::nullopt;
    return a / (a - 1);
}

MonteCarloReport monte_carlo_validate(const ExpTransformModel& m, std::size_t n_samples, SeededRng& rng) {
    m.validate();
    if (n_samples < kMinMonteCarloSamples) {
        throw ParameterError("monte_carlo_validate needs at least 10000 samples");
    }
    std::vector<double> y(n_samples);
    double sum_a = 0;
    double sum_y = 0;
    for (auto& v : y) {
        const double a = rng.exponential(m.rate_exp);
        sum_a += a;
        v = std::exp(a / m.p_scale);
        sum_y += v;
    }
    MonteCarloReport r;
    r.rate_exp = m.rate_exp;
    r.p_scale = m.p_scale;
    r.n = n_samples;
    r.rate_estimate = static_cast<double>(n_samples) / sum_a;
    r.mean_empirical = sum_y / static_cast<double>(n_samples);
    r.mean_closed_form = transformed_mean(m);
    if (r.mean_closed_form) r.mean_error = std::abs(r.mean_empirical - *r.mean_closed_form);

    std::sort(y.begin(), y.end());
    const double n = static_cast<double>(n_samples);
    double ks = 0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double f = transformed_cdf(m, y[i]);
        ks = std::max({ks, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    r.ks_distance = ks;
    return r;
}

nlohmann::json monte_carlo_report_to_json(const MonteCarloReport& r) {
    nlohmann::json j = {{"lambda_exp", r.rate_exp},
                        {"p_scale", r.p_scale},
                        {"n", r.n},
                        {"mean_closed_form", nullptr},
                        {"mean_empirical", r.mean_empirical},
                        {"mean_error", nullptr},
                        {"ks_distance", r.ks_distance},
                        {"rate_estimate", r.rate_estimate}};
    if (r.mean_closed_form) j["mean_closed_form"] = *r.mean_closed_form;
    if (r.mean_error) j["mean_error"] = *r.mean_error;
    return j;
}

} // namespace actnet
