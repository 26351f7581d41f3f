#include "actnet/gradient_check.hpp"

#include <cmath>
#include <sstream>

#include "actnet/aggregation.hpp"
#include "actnet/triplet_loss.hpp"

namespace actnet {

double GradientTolerance::error(double analytic, double numeric) const {
    const double diff = std::abs(analytic - numeric);
    const double ref = std::max(std::abs(analytic), std::abs(numeric));
    if (ref < small_ref) return diff;
    return diff / ref;
}

bool GradientTolerance::accepts(double analytic, double numeric) const {
    if (!std::isfinite(analytic) || !std::isfinite(numeric)) return false;
    const double ref = std::max(std::abs(analytic), std::abs(numeric));
    return ref < small_ref ? std::abs(analytic - numeric) <= abs_tol : error(analytic, numeric) <= rel_tol;
}

void GradientCheckResult::record(const std::string& what, double analytic, double numeric,
                                 const GradientTolerance& tol) {
    ++checks;
    const double e = std::isfinite(analytic) && std::isfinite(numeric) ? tol.error(analytic, numeric)
                                                                       : INFINITY;
    if (!tol.accepts(analytic, numeric)) ++failures;
    if (e >= max_error) {
        max_error = e;
        std::ostringstream os;
        os.precision(10);
        os << what << ": analytic " << analytic << ", numeric " << numeric;
        worst = os.str();
    }
}

nlohmann::json gradient_check_to_json(const GradientCheckResult& r) {
    return {{"name", r.name},         {"checks", r.checks}, {"failures", r.failures},
            {"max_error", r.max_error}, {"worst", r.worst},   {"passed", r.passed()}};
}

ActivationParams<double> random_activation_params(ActivationFamily family, SeededRng& rng) {
    switch (family) {
    case ActivationFamily::SinH:
        return ActivationParams<double>::sinh(rng.uniform(0.5, 2.0), rng.uniform(0.3, 2.0));
    case ActivationFamily::Exp:
        return ActivationParams<double>::exp(rng.uniform(0.5, 2.0), rng.uniform(0.3, 2.0));
    case ActivationFamily::Weibull:
        return ActivationParams<double>::weibull(rng.uniform(0.5, 2.0), rng.uniform(1.5, 4.0),
                                                 rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0));
    }
    throw ParameterError("unknown family");
}

namespace {

template <typename F>
double central_difference(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

} // namespace

GradientCheckResult check_activation_gradients(ActivationFamily family, std::size_t points,
                                               SeededRng& rng, GradientTolerance tol) {
    GradientCheckResult r;
    r.name = "activation/" + std::string(family_name(family));
    const double h = tol.step;
    for (std::size_t i = 0; i < points; ++i) {
        // Points with |theta| <= 1e-8 are redrawn; relative error is meaningless there.
        ActivationParams<double> p;
        double x = 0;
        do {
            p = random_activation_params(family, rng);
            x = family == ActivationFamily::Weibull ? rng.uniform(0.05, 5.0) : rng.uniform(0.0, 3.0);
        } while (std::abs(activate(x, p)) <= 1e-8);
        const auto g = activate_gradients(x, p);
        const std::string at = r.name + " point " + std::to_string(i);

        // The input difference must not step below zero.
        const double xi = std::max(x, 2 * h);
        r.record(at + " d_input",
                 activate_gradients(xi, p).d_input,
                 central_difference([&](double v) { return activate(v, p); }, xi, h), tol);
        auto check_param = [&](const char* name, double analytic, double ActivationParams<double>::*field) {
            const double numeric = central_difference(
                [&](double v) {
                    auto q = p;
                    q.*field = v;
                    return activate(x, q);
                },
                p.*field, h);
            r.record(at + " " + name, analytic, numeric, tol);
        };
        check_param("d_alpha", g.d_alpha, &ActivationParams<double>::alpha);
        check_param("d_beta", g.d_beta, &ActivationParams<double>::beta);
        if (p.is_weibull()) {
            check_param("d_gamma", g.d_gamma, &ActivationParams<double>::gamma);
            check_param("d_zeta", g.d_zeta, &ActivationParams<double>::zeta);
        }
    }
    return r;
}

GradientCheckResult check_weibull_peaks(std::size_t draws, SeededRng& rng) {
    GradientCheckResult r;
    r.name = "weibull/peak";
    constexpr std::size_t grid = 10'000;
    for (std::size_t d = 0; d < draws; ++d) {
        const auto p = random_activation_params(ActivationFamily::Weibull, rng);
        const double x0 = weibull_peak(p);
        const double step = 5 * x0 / static_cast<double>(grid - 1);
        std::size_t best = 0;
        double best_value = -1;
        for (std::size_t i = 0; i < grid; ++i) {
            const double v = activate(step * static_cast<double>(i), p);
            if (v > best_value) {
                best_value = v;
                best = i;
            }
        }
        const double offset = std::abs(step * static_cast<double>(best) - x0) / step;
        ++r.checks;
        if (offset > 1.0) ++r.failures;
        if (offset >= r.max_error) {
            r.max_error = offset;
            r.worst = "draw " + std::to_string(d) + ": argmax offset " + std::to_string(offset) + " grid steps";
        }
    }
    return r;
}

namespace {

FeatureMap random_map(std::size_t w, std::size_t h, std::size_t d, SeededRng& rng) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(w * h * d));
    for (Eigen::Index n = 0; n < v.size(); ++n) v[n] = 0.05 + rng.exponential(2.0);
    return FeatureMap(w, h, d, std::move(v));
}

} // namespace

GradientCheckResult check_head_gradients(std::size_t configurations, SeededRng& rng,
                                         GradientTolerance tol) {
    GradientCheckResult r;
    r.name = "head/triplet";
    const std::vector<std::size_t> depths{4, 8};
    constexpr ActivationFamily families[] = {ActivationFamily::SinH, ActivationFamily::Exp,
                                             ActivationFamily::Weibull};
    // Distances of unit vectors are at most 2, so this margin keeps every triplet active.
    constexpr double margin = 4.5;

    for (std::size_t c = 0; c < configurations; ++c) {
        const ActivationFamily family = families[c % 3];
        ModelState model = ModelState::make(family, depths);
        for (auto& s : model.streams) {
            s.activation = random_activation_params(family, rng);
            if (family != ActivationFamily::Weibull) s.activation.alpha = rng.uniform(0.5, 1.5);
            s.power_p = rng.uniform(0.3, 0.9);
            s.power_lambda = rng.uniform(0.5, 2.0);
        }
        const Eigen::Index dim = model.concatenated_dim();
        for (Eigen::Index i = 0; i < model.whitening.projection.size(); ++i) {
            model.whitening.projection.data()[i] = rng.normal();
        }
        for (Eigen::Index i = 0; i < dim; ++i) model.whitening.bias[i] = 0.5 * rng.normal();

        std::vector<std::vector<FeatureMap>> images(3);
        for (auto& img : images) {
            for (auto d : depths) img.push_back(random_map(3, 3, d, rng));
        }

        auto loss_of = [&](const ModelState& m, const std::vector<std::vector<FeatureMap>>& imgs) {
            return triplet_loss(forward_head(imgs[0], m), forward_head(imgs[1], m),
                                forward_head(imgs[2], m), margin);
        };

        HeadCache cq, cm, cn;
        const auto aq = forward_head(images[0], model, &cq);
        const auto am = forward_head(images[1], model, &cm);
        const auto an = forward_head(images[2], model, &cn);
        const auto lg = triplet_loss_gradients(aq, am, an, margin);
        HeadGradients g = backward_head(images[0], model, cq, lg.d_query, true);
        const std::vector<FeatureMap> d_query_maps = g.d_maps;
        g += backward_head(images[1], model, cm, lg.d_match);
        g += backward_head(images[2], model, cn, lg.d_nonmatch);

        const Eigen::VectorXd analytic = pack_gradients(model, g);
        const Eigen::VectorXd params = pack_parameters(model);
        const auto names = parameter_names(model);
        const std::string at = "config " + std::to_string(c) + " (" + std::string(family_name(family)) + ") ";
        for (Eigen::Index i = 0; i < params.size(); ++i) {
            ModelState plus = model, minus = model;
            Eigen::VectorXd pp = params, pm = params;
            pp[i] += tol.step;
            pm[i] -= tol.step;
            unpack_parameters(plus, pp);
            unpack_parameters(minus, pm);
            const double numeric = (loss_of(plus, images) - loss_of(minus, images)) / (2 * tol.step);
            r.record(at + names[static_cast<std::size_t>(i)], analytic[i], numeric, tol);
        }

        for (std::size_t s = 0; s < depths.size(); ++s) {
            const FeatureMap& t = images[0][s];
            for (Eigen::Index n = 0; n < static_cast<Eigen::Index>(t.size()); ++n) {
                auto shifted = [&](double delta) {
                    auto imgs = images;
                    Eigen::VectorXd v = t.values();
                    v[n] += delta;
                    imgs[0][s] = FeatureMap(t.width(), t.height(), t.depth(), std::move(v));
                    return loss_of(model, imgs);
                };
                const double numeric = (shifted(tol.step) - shifted(-tol.step)) / (2 * tol.step);
                r.record(at + "query map " + std::to_string(s) + " element " + std::to_string(n),
                         d_query_maps[s].values()[n], numeric, tol);
            }
        }
    }
    return r;
}

bool GradientSuiteReport::passed() const {
    for (const auto& r : results) {
        if (!r.passed()) return false;
    }
    return !results.empty();
}

GradientSuiteReport run_gradient_suite(std::uint64_t seed) {
    GradientSuiteReport report;
    report.seed = seed;
    SeededRng rng(seed);
    for (auto family : {ActivationFamily::SinH, ActivationFamily::Exp, ActivationFamily::Weibull}) {
        SeededRng child = rng.derive(static_cast<std::uint64_t>(family) + 1);
        report.results.push_back(check_activation_gradients(family, 100, child));
    }
    SeededRng peak_rng = rng.derive(10);
    report.results.push_back(check_weibull_peaks(50, peak_rng));
    SeededRng head_rng = rng.derive(20);
    report.results.push_back(check_head_gradients(20, head_rng));
    return report;
}

nlohmann::json gradient_suite_to_json(const GradientSuiteReport& r) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : r.results) checks.push_back(gradient_check_to_json(c));
    return {{"seed", r.seed}, {"passed", r.passed()}, {"checks", checks}};
}

} // namespace actnet
