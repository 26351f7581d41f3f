// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "actnet/appendix.hpp"
#include "actnet/baseline.hpp"
#include "actnet/dataset.hpp"
#include "actnet/gradient_check.hpp"
#include "actnet/model_io.hpp"
#include "actnet/pipeline.hpp"
#include "actnet/synthetic.hpp"
#include "actnet/trainer.hpp"
#include "retrieval_oracle.hpp"
#include "test_support.hpp"

using namespace actnet;
using actnet::testing::TempDir;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body, double limit_seconds = 0) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit_seconds > 0 && secs >= limit_seconds) {
        o.passed = false;
        o.detail += "; runtime over " + std::to_string(limit_seconds) + " s";
    }
    if (!o.passed) ++failures;
    std::printf("%s %s: %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string describe(const GradientCheckResult& r) {
    return r.name + " " + std::to_string(r.checks) + " checks, " + std::to_string(r.failures) +
           " failures, max error " + fmt(r.max_error);
}

Outcome activation_gradients() {
    SeededRng rng(1001);
    Outcome o{true, ""};
    for (auto f : {ActivationFamily::SinH, ActivationFamily::Exp, ActivationFamily::Weibull}) {
        const auto r = check_activation_gradients(f, 100, rng);
        o.passed = o.passed && r.passed();
        o.detail += (o.detail.empty() ? "" : "; ") + describe(r);
    }
    return o;
}

Outcome weibull_peaks() {
    SeededRng rng(1002);
    const auto r = check_weibull_peaks(50, rng);
    return {r.passed(), describe(r)};
}

Outcome head_gradients() {
    SeededRng rng(1003);
    const auto r = check_head_gradients(20, rng);
    return {r.passed(), describe(r)};
}

ModelState random_model(SeededRng& rng) {
    const std::size_t k = 1 + rng.uniform_index(3);
    ModelState m;
    for (std::size_t s = 0; s < k; ++s) {
        const auto family = static_cast<ActivationFamily>(rng.uniform_index(3));
        StreamParams p;
        p.activation = random_activation_params(family, rng);
        p.power_p = 0.05 + 0.95 * rng.uniform();
        p.power_lambda = 0.5 + 1.5 * rng.uniform();
        m.streams.push_back(p);
        m.stream_input_depths.push_back(1 + rng.uniform_index(8));
    }
    const auto in = m.concatenated_dim();
    const auto out = static_cast<Eigen::Index>(1 + rng.uniform_index(static_cast<std::uint64_t>(in)));
    m.whitening.projection.resize(out, in);
    for (Eigen::Index i = 0; i < m.whitening.projection.size(); ++i) m.whitening.projection.data()[i] = rng.normal();
    m.whitening.bias.resize(in);
    for (Eigen::Index i = 0; i < in; ++i) m.whitening.bias[i] = 0.1 * rng.normal();
    return m;
}

Outcome descriptor_contract() {
    SeededRng rng(1004);
    double worst_norm = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const ModelState m = random_model(rng);
        const std::size_t w = 1 + rng.uniform_index(6);
        const std::size_t h = 1 + rng.uniform_index(6);
        std::vector<FeatureMap> maps;
        for (auto d : m.stream_input_depths) maps.push_back(actnet::testing::random_map(w, h, d, rng));
        const auto out = forward_head(maps, m);
        worst_norm = std::max(worst_norm, std::abs(out.norm() - 1.0));
    }

    // Correlated 32-D Gaussian: x = A g + mu.
    const Eigen::Index dim = 32;
    const Eigen::Index n = 10000;
    Eigen::MatrixXd a(dim, dim);
    Eigen::VectorXd mu(dim);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < dim; ++i) mu[i] = 3 * rng.normal();
    Eigen::MatrixXd samples(n, dim);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::VectorXd g(dim);
        for (Eigen::Index i = 0; i < dim; ++i) g[i] = rng.normal();
        samples.row(r) = (a * g + mu).transpose();
    }
    const WhiteningLayer wl = fit_whitening(samples, dim);
    Eigen::MatrixXd projected(n, dim);
    for (Eigen::Index r = 0; r < n; ++r) projected.row(r) = wl.apply(samples.row(r).transpose()).transpose();
    const Eigen::RowVectorXd mean = projected.colwise().mean();
    const Eigen::MatrixXd centered = projected.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
    double diag_dev = 0, off = 0;
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            if (i == j) diag_dev = std::max(diag_dev, std::abs(cov(i, j) - 1));
            else off = std::max(off, std::abs(cov(i, j)));
        }
    }
    return {worst_norm <= 1e-6 && diag_dev <= 0.1 && off <= 0.05,
            "max |norm-1| " + fmt(worst_norm) + " over 1000 forwards; whitened covariance max |diag-1| " +
                fmt(diag_dev) + ", max |off-diag| " + fmt(off)};
}

Outcome map_oracle() {
    SeededRng rng(1005);
    int mismatches = 0;
    int compared = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int classes = 1 + static_cast<int>(rng.uniform_index(5));
        const std::size_t db = 1 + rng.uniform_index(40);
        const std::size_t queries = 1 + rng.uniform_index(50 - db);
        const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng.uniform_index(8));
        const auto inst = actnet::testing::random_instance(rng, db, queries, classes, dim);
        const auto expected = actnet::testing::brute_force_map(inst);
        if (!expected) continue;
        ++compared;
        const double got = mean_average_precision(inst.index, inst.queries).map;
        if (got != *expected) ++mismatches;
    }
    return {mismatches == 0 && compared > 0,
            std::to_string(compared) + " instances compared exactly, " + std::to_string(mismatches) + " mismatches"};
}

// Shared state for the dataset-level criteria.
struct Trained {
    Dataset data;
    std::vector<EpochSummary> trace;
    ModelState model;
    EvalReport trained_eval;
    EvalReport da_eval;
    double trained_kld = 0;
    double da_kld = 0;
};

TrainConfig acceptance_config() {
    TrainConfig cfg;
    cfg.triplets_per_epoch = 500;
    cfg.max_epochs = 20;
    cfg.seed = 42;
    return cfg;
}

Trained train_default(const std::filesystem::path& dir) {
    SynthConfig sc;
    generate_synthetic_dataset(sc, dir);
    Trained t{load_dataset(dir / "manifest.jsonl"), {}, {}, {}, {}, 0, 0};
    const auto train_split = t.data.indices(Split::Train);
    const auto queries = t.data.indices(Split::Query);
    const auto db = t.data.indices(Split::Db);
    std::vector<std::size_t> rows = queries;
    rows.insert(rows.end(), db.begin(), db.end());

    ModelState init = initialize_model(t.data, train_split, ActivationFamily::Weibull);
    TrainResult r = train(std::move(init), t.data, train_split, acceptance_config(), [](const EpochSummary& s) {
        std::printf("  epoch %zu: mined %zu, mean loss %.6f\n", s.epoch, s.mined, s.mean_loss);
        std::fflush(stdout);
    });
    t.trace = r.trace;
    t.model = std::move(r.model);
    t.trained_eval = evaluate_model(t.data, t.model);
    t.trained_kld = separability_of(t.data, rows, extract_descriptors(t.data, rows, t.model)).kld;

    const BaselineHead da = fit_baseline(t.data, train_split, BaselinePooling::Average);
    const Eigen::MatrixXd qd = extract_baseline_descriptors(t.data, queries, da);
    const Eigen::MatrixXd dd = extract_baseline_descriptors(t.data, db, da);
    t.da_eval = evaluate_split(t.data, qd, dd);
    Eigen::MatrixXd all(qd.rows() + dd.rows(), qd.cols());
    all << qd, dd;
    t.da_kld = separability_of(t.data, rows, all).kld;
    return t;
}

Outcome compact_signatures(const Trained& t) {
    const Eigen::Index dim = t.model.whitening.out_dim();
    const double full = t.trained_eval.map;
    EvalOptions same;
    same.compact_k = dim;
    const double at_dim = evaluate_model(t.data, t.model, same).map;
    EvalOptions quarter;
    quarter.compact_k = dim / 4;
    const double at_quarter = evaluate_model(t.data, t.model, quarter).map;
    const double rel = std::abs(at_quarter - full) / full;
    return {std::abs(at_dim - full) <= 1e-12 && rel <= 0.3,
            "full mAP " + fmt(full) + ", k=" + std::to_string(dim) + " mAP " + fmt(at_dim) + ", k=" +
                std::to_string(dim / 4) + " mAP " + fmt(at_quarter) + " (relative change " + fmt(rel) + ")"};
}

Outcome query_expansion(const std::filesystem::path& root) {
    Outcome o{true, ""};
    for (std::uint64_t seed : {1, 2, 3}) {
        SynthConfig sc;
        sc.seed = seed;
        const auto dir = root / ("qe_" + std::to_string(seed));
        generate_synthetic_dataset(sc, dir);
        const Dataset data = load_dataset(dir / "manifest.jsonl");
        const ModelState model = initialize_model(data, data.indices(Split::Train), ActivationFamily::Weibull);
        const double plain = evaluate_model(data, model).map;
        EvalOptions qe;
        qe.qe = QueryExpansionOptions{10, 3.0};
        const double expanded = evaluate_model(data, model, qe).map;
        o.passed = o.passed && expanded >= plain;
        o.detail += (o.detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": " +
                    fmt(plain) + " -> " + fmt(expanded);
    }
    return o;
}

Outcome appendix() {
    SeededRng rng(42);
    const auto r = monte_carlo_validate({2.0, 1.0}, 1'000'000, rng);
    const double closed = r.mean_closed_form.value_or(NAN);
    const double alt = 1.0 / (r.rate_exp * r.p_scale - 1.0);
    const double rel_closed = std::abs(r.mean_empirical - closed) / closed;
    const double rel_alt = std::abs(r.mean_empirical - alt) / alt;
    return {r.ks_distance <= 0.005 && rel_closed <= 0.01 && rel_alt > 0.1,
            "KS " + fmt(r.ks_distance) + "; empirical mean " + fmt(r.mean_empirical) + " vs lambda*p/(lambda*p-1) " +
                fmt(closed) + " and 1/(lambda*p-1) " + fmt(alt)};
}

// synth -> train -> evaluate, writing model and report files.
void pipeline_run(const std::filesystem::path& dir) {
    SynthConfig sc = actnet::testing::small_synth(4, 12, 7);
    generate_synthetic_dataset(sc, dir / "data");
    const Dataset data = load_dataset(dir / "data" / "manifest.jsonl");
    const auto split = data.indices(Split::Train);
    TrainConfig cfg;
    cfg.triplets_per_epoch = 40;
    cfg.accumulation_size = 8;
    cfg.max_epochs = 3;
    cfg.seed = 11;
    const TrainResult r = train(initialize_model(data, split, ActivationFamily::Weibull, 6), data, split, cfg);
    save_model(r.model, dir / "model.json");
    EvalOptions opts;
    opts.qe = QueryExpansionOptions{};
    write_text_file(dir / "report.json", dump_json(eval_report_to_json(evaluate_model(data, load_model(dir / "model.json"), opts))));
}

Outcome determinism(const std::filesystem::path& root) {
    pipeline_run(root / "run_a");
    pipeline_run(root / "run_b");
    bool same = true;
    std::string detail;
    for (const char* f : {"model.json", "report.json", "data/manifest.jsonl"}) {
        const bool eq = read_binary_file(root / "run_a" / f) == read_binary_file(root / "run_b" / f);
        same = same && eq;
        detail += std::string(detail.empty() ? "" : ", ") + f + (eq ? " identical" : " differs");
    }
    return {same, detail};
}

} // namespace

int main() {
    TempDir tmp("acceptance");

    report("activation gradients", activation_gradients, 5);
    report("weibull peak", weibull_peaks, 5);
    report("head gradients", head_gradients, 120);
    report("descriptor contract", descriptor_contract);
    report("mAP oracle", map_oracle);

    std::printf("training the Weibull head on the default synthetic dataset...\n");
    std::fflush(stdout);
    const auto start = std::chrono::steady_clock::now();
    std::optional<Trained> trained;
    std::string train_error;
    try {
        trained = train_default(tmp.path / "default");
    } catch (const std::exception& e) {
        train_error = e.what();
    }
    const double train_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto need = [&]() -> const Trained& {
        if (!trained) throw std::runtime_error("training failed: " + train_error);
        return *trained;
    };

    report("training trend (a) loss decreases", [&]() -> Outcome {
        const auto& t = need();
        if (t.trace.empty()) return {false, "no epochs ran"};
        const double first = t.trace.front().mean_loss;
        const double last = t.trace.back().mean_loss;
        return {last < first && train_secs < 600, std::to_string(t.trace.size()) + " epochs, mean mined loss " +
                                                      fmt(first) + " -> " + fmt(last) + ", " + fmt(train_secs) + " s"};
    });
    report("training trend (b) mAP beats untrained DA", [&]() -> Outcome {
        const auto& t = need();
        return {t.trained_eval.map > t.da_eval.map,
                "trained Weibull mAP " + fmt(t.trained_eval.map) + " vs DA mAP " + fmt(t.da_eval.map)};
    });
    report("separability KLD(trained Weibull) > KLD(DA)", [&]() -> Outcome {
        const auto& t = need();
        return {t.trained_kld > t.da_kld, "KLD " + fmt(t.trained_kld) + " vs " + fmt(t.da_kld)};
    });
    report("compact signatures", [&]() { return compact_signatures(need()); });
    report("alpha query expansion", [&]() { return query_expansion(tmp.path); });
    report("appendix Monte Carlo", appendix, 30);
    report("determinism", [&]() { return determinism(tmp.path); });

    std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
