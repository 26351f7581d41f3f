#include <doctest.h>

#include <cmath>

#include "actnet/appendix.hpp"
#include "actnet/errors.hpp"

using namespace actnet;

namespace {

// Composite Simpson over u = ln y, where pdf(y) dy = pdf(e^u) e^u du.
double integrate_pdf(const ExpTransformModel& m, double upper) {
    const int n = 200000;
    const double b = std::log(upper);
    const double h = b / n;
    double s = 0;
    for (int i = 0; i <= n; ++i) {
        const double u = i * h;
        const double f = transformed_pdf(m, std::exp(u)) * std::exp(u);
        s += f * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
    }
    return s * h / 3;
}

} // namespace

TEST_CASE("transformed cdf") {
    const ExpTransformModel m{2.0, 1.0};
    CHECK(transformed_cdf(m, 1.0) == 0.0);
    CHECK(transformed_cdf(m, 0.3) == 0.0);
    CHECK(transformed_cdf(m, 2.0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(transformed_cdf(m, 1e12) == doctest::Approx(1.0).epsilon(1e-15));
    double prev = 0;
    for (double y = 0.5; y < 100; y *= 1.07) {
        const double c = transformed_cdf(m, y);
        CHECK(c >= prev);
        prev = c;
    }
    // Same exponent, different factorization.
    CHECK(transformed_cdf({0.5, 4.0}, 3.0) == transformed_cdf(m, 3.0));
}

TEST_CASE("transformed pdf") {
    const ExpTransformModel m{2.0, 1.0};
    CHECK(transformed_pdf(m, 0.5) == 0.0);
    CHECK(transformed_pdf(m, 1.0) == 2.0);
    CHECK(std::abs(integrate_pdf(m, 1e6) - 1.0) <= 1e-4);
    CHECK(std::abs(integrate_pdf({1.5, 1.0}, 1e6) - 1.0) <= 1e-4);
    // Derivative of the cdf.
    const double y = 2.7, h = 1e-6;
    CHECK(transformed_pdf(m, y) ==
          doctest::Approx((transformed_cdf(m, y + h) - transformed_cdf(m, y - h)) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("transformed mean") {
    const auto finite = transformed_mean({2.0, 1.0});
    REQUIRE(finite.has_value());
    CHECK(*finite == doctest::Approx(2.0));
    CHECK(*transformed_mean({1.0, 3.0}) == doctest::Approx(1.5));
    CHECK_FALSE(transformed_mean({1.0, 1.0}).has_value());
    CHECK_FALSE(transformed_mean({0.5, 1.0}).has_value());
    CHECK_THROWS_AS(transformed_mean({-1.0, 1.0}), ParameterError);
}

TEST_CASE("monte carlo settles the closed-form mean") {
    SeededRng rng(42);
    const MonteCarloReport r = monte_carlo_validate({2.0, 1.0}, 1'000'000, rng);
    REQUIRE(r.mean_closed_form.has_value());
    CHECK(std::abs(r.mean_empirical - *r.mean_closed_form) / *r.mean_closed_form <= 0.01);
    // 1 / (lambda p - 1) = 1 is far from the sampled mean.
    CHECK(std::abs(r.mean_empirical - 1.0) > 0.5);
    CHECK(r.ks_distance <= 0.005);
    CHECK(std::abs(r.rate_estimate - 2.0) / 2.0 <= 0.01);
    REQUIRE(r.mean_error.has_value());
    CHECK(*r.mean_error == doctest::Approx(std::abs(r.mean_empirical - 2.0)));

    const auto j = monte_carlo_report_to_json(r);
    for (const char* key : {"lambda_exp", "p_scale", "n", "mean_closed_form", "mean_empirical", "ks_distance"}) {
        CHECK(j.contains(key));
    }
}

TEST_CASE("monte carlo at small n and divergent means") {
    SeededRng rng(1);
    CHECK(monte_carlo_validate({2.0, 1.0}, 10'000, rng).ks_distance <= 0.05);
    const MonteCarloReport d = monte_carlo_validate({0.8, 1.0}, 10'000, rng);
    CHECK_FALSE(d.mean_closed_form.has_value());
    CHECK_FALSE(d.mean_error.has_value());
    CHECK(monte_carlo_report_to_json(d).at("mean_error").is_null());
    CHECK_THROWS_AS(monte_carlo_validate({2.0, 1.0}, 9'999, rng), ParameterError);
}

TEST_CASE("monte carlo is reproducible") {
    SeededRng a(5), b(5);
    const auto ra = monte_carlo_validate({3.0, 0.5}, 20'000, a);
    const auto rb = monte_carlo_validate({3.0, 0.5}, 20'000, b);
    CHECK(ra.mean_empirical == rb.mean_empirical);
    CHECK(ra.ks_distance == rb.ks_distance);
}
