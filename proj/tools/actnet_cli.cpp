// actnet: synthesize feature maps, train the aggregation head, extract and
// evaluate descriptors, and run the verification suites.
//
// Exit status: 0 success, 1 validation error, 2 I/O error, 64 usage error.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "actnet/appendix.hpp"
#include "actnet/baseline.hpp"
#include "actnet/dataset.hpp"
#include "actnet/gradient_check.hpp"
#include "actnet/model_io.hpp"
#include "actnet/parallel.hpp"
#include "actnet/pipeline.hpp"
#include "actnet/synthetic.hpp"
#include "actnet/trainer.hpp"

namespace {

using namespace actnet;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitUsage = 64;

void log(const std::string& msg) { std::cerr << msg << '\n'; }

std::optional<Split> parse_split_option(const std::string& s) {
    if (s == "all") return std::nullopt;
    return parse_split(s);
}

struct SynthArgs {
    SynthConfig cfg;
    std::string out;
};

int run_synth(const SynthArgs& a) {
    const auto entries = generate_synthetic_dataset(a.cfg, a.out);
    log("synth: wrote " + std::to_string(entries.size()) + " feature files and " + a.out + "/manifest.jsonl");
    return kExitOk;
}

struct TrainArgs {
    std::string manifest;
    std::string config;
    std::string out;
    std::string log_path;
    std::string family = "weibull";
    std::optional<Eigen::Index> out_dim;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg;
    if (!a.config.empty()) cfg = train_config_from_json(read_json_file(a.config));
    const Dataset data = load_dataset(a.manifest);
    const auto split = data.indices(Split::Train);
    ModelState model = initialize_model(data, split, parse_family(a.family), a.out_dim);
    log("train: " + std::to_string(split.size()) + " training images, " +
        std::to_string(model.concatenated_dim()) + "-D concatenation");

    std::ofstream run_log;
    if (!a.log_path.empty()) {
        run_log.open(a.log_path, std::ios::binary | std::ios::app);
        if (!run_log) throw IoError("cannot open run log '" + a.log_path + "'");
    }
    const TrainResult result = train(std::move(model), data, split, cfg, [&](const EpochSummary& s) {
        log("epoch " + std::to_string(s.epoch) + ": mined " + std::to_string(s.mined) + ", mean loss " +
            std::to_string(s.mean_loss));
        if (run_log.is_open()) run_log << epoch_summary_to_json(s).dump() << '\n' << std::flush;
    });
    save_model(result.model, a.out);
    log("train: model written to " + a.out);
    return kExitOk;
}

struct ExtractArgs {
    std::string model;
    std::string manifest;
    std::string out;
    std::string split = "all";
};

int run_extract(const ExtractArgs& a) {
    const ModelState model = load_model(a.model);
    const Dataset data = load_dataset(a.manifest);
    const auto split = parse_split_option(a.split);
    const auto rows = split ? data.indices(*split) : data.all_indices();
    const Eigen::MatrixXd d = extract_descriptors(data, rows, model);
    DescriptorStore store;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        store.append(data.entry(rows[r]).id, d.row(static_cast<Eigen::Index>(r)).transpose());
    }
    write_descriptors(store, a.out);
    log("extract: " + std::to_string(store.count()) + " descriptors of dimension " + std::to_string(store.dim()));
    return kExitOk;
}

struct EvalArgs {
    std::string model;
    std::string manifest;
    std::string out;
    double qe_alpha = 3.0;
    std::size_t qe_n = 0;
    std::optional<Eigen::Index> compact;
    bool exclude_self = false;
};

EvalOptions eval_options(const EvalArgs& a) {
    EvalOptions o;
    o.exclude_self = a.exclude_self;
    o.compact_k = a.compact;
    if (a.qe_n > 0) o.qe = QueryExpansionOptions{a.qe_n, a.qe_alpha};
    return o;
}

int run_evaluate(const EvalArgs& a) {
    const ModelState model = load_model(a.model);
    const Dataset data = load_dataset(a.manifest);
    const EvalReport report = evaluate_model(data, model, eval_options(a));
    write_text_file(a.out, dump_json(eval_report_to_json(report)));
    log("evaluate: mAP " + std::to_string(report.map) + " over " + std::to_string(report.per_query.size()) +
        " queries");
    return kExitOk;
}

struct SeparabilityArgs {
    std::string descriptors;
    std::string pairs;
    std::string manifest;
    std::size_t bins = kDefaultSeparabilityBins;
    std::string out;
};

int run_separability(const SeparabilityArgs& a) {
    const DescriptorStore store = read_descriptors(a.descriptors);
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < store.count(); ++i) row_of[store.ids()[i]] = i;
    auto row = [&](const std::string& id) {
        const auto it = row_of.find(id);
        if (it == row_of.end()) throw DataError("pair references unknown descriptor id '" + id + "'");
        return it->second;
    };

    std::vector<double> matching, nonmatching;
    if (!a.pairs.empty()) {
        const json pairs = read_json_file(a.pairs);
        auto collect = [&](const char* key, std::vector<double>& out) {
            if (!pairs.contains(key) || !pairs.at(key).is_array()) {
                throw FormatError("pairs file needs an array '" + std::string(key) + "'");
            }
            for (const auto& p : pairs.at(key)) {
                if (!p.is_array() || p.size() != 2) throw FormatError("each pair must be [id, id]");
                out.push_back(euclidean_distance(store.descriptor(row(p[0].get<std::string>())),
                                                 store.descriptor(row(p[1].get<std::string>()))));
            }
        };
        collect("matching", matching);
        collect("nonmatching", nonmatching);
    } else {
        const Manifest manifest = read_manifest(a.manifest);
        std::map<std::string, std::int64_t> label_of;
        for (const auto& e : manifest.entries) label_of[e.id] = e.class_label;
        std::vector<std::int64_t> labels;
        for (const auto& id : store.ids()) {
            const auto it = label_of.find(id);
            if (it == label_of.end()) throw DataError("descriptor '" + id + "' is not in the manifest");
            labels.push_back(it->second);
        }
        std::tie(matching, nonmatching) = labelled_pair_distances(store.matrix(), labels);
    }
    const SeparabilityReport r = separability_from_distances(matching, nonmatching, a.bins);
    write_text_file(a.out, dump_json(separability_report_to_json(r)));
    log("analyze-separability: KLD " + std::to_string(r.kld));
    return kExitOk;
}

struct VerifyArgs {
    std::uint64_t seed = 7;
    std::string out;
};

int run_verify(const VerifyArgs& a) {
    const GradientSuiteReport r = run_gradient_suite(a.seed);
    for (const auto& c : r.results) {
        log(std::string(c.passed() ? "PASS " : "FAIL ") + c.name + ": " + std::to_string(c.checks) +
            " checks, max error " + std::to_string(c.max_error));
    }
    if (!a.out.empty()) write_text_file(a.out, dump_json(gradient_suite_to_json(r)));
    return r.passed() ? kExitOk : kExitValidation;
}

struct AppendixArgs {
    double lambda = 2.0;
    double p = 1.0;
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 42;
    std::string out;
};

int run_appendix(const AppendixArgs& a) {
    SeededRng rng(a.seed);
    const MonteCarloReport r = monte_carlo_validate({a.lambda, a.p}, a.samples, rng);
    log("appendix-check: KS distance " + std::to_string(r.ks_distance));
    const std::string text = dump_json(monte_carlo_report_to_json(r));
    if (a.out.empty()) {
        std::cout << text;
    } else {
        write_text_file(a.out, text);
    }
    return kExitOk;
}

struct BaselineArgs {
    std::string kind = "da";
    double gem_p = 3.0;
    std::string manifest;
    std::string out;
    std::optional<Eigen::Index> out_dim;
};

int run_baseline(const BaselineArgs& a) {
    const Dataset data = load_dataset(a.manifest);
    const BaselineHead head = fit_baseline(data, data.indices(Split::Train), parse_baseline(a.kind), a.gem_p, a.out_dim);
    const auto queries = data.indices(Split::Query);
    const auto db = data.indices(Split::Db);
    const Eigen::MatrixXd qd = extract_baseline_descriptors(data, queries, head);
    const Eigen::MatrixXd dd = extract_baseline_descriptors(data, db, head);
    const EvalReport report = evaluate_split(data, qd, dd);

    std::vector<std::size_t> rows = queries;
    rows.insert(rows.end(), db.begin(), db.end());
    Eigen::MatrixXd all(qd.rows() + dd.rows(), qd.cols());
    all << qd, dd;
    const SeparabilityReport sep = separability_of(data, rows, all);

    json j = eval_report_to_json(report);
    j["baseline"] = std::string(baseline_name(head.pooling));
    if (head.pooling == BaselinePooling::GeM) j["gem_p"] = head.gem_p;
    j["kld"] = sep.kld;
    write_text_file(a.out, dump_json(j));
    log("baseline " + a.kind + ": mAP " + std::to_string(report.map) + ", KLD " + std::to_string(sep.kld));
    return kExitOk;
}

std::size_t threads_from_env() {
    if (const char* env = std::getenv("ACTNET_THREADS")) {
        try {
            return static_cast<std::size_t>(std::stoul(env));
        } catch (const std::exception&) {
            log("warning: ignoring malformed ACTNET_THREADS='" + std::string(env) + "'");
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ACTNET aggregation head: training, extraction and evaluation on feature maps"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (default: ACTNET_THREADS or all cores)");

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic feature-map dataset");
    c_synth->add_option("--classes", synth.cfg.classes, "Number of classes")->capture_default_str();
    c_synth->add_option("--per-class", synth.cfg.images_per_class, "Images per class")->capture_default_str();
    c_synth->add_option("--width", synth.cfg.width)->capture_default_str();
    c_synth->add_option("--height", synth.cfg.height)->capture_default_str();
    c_synth->add_option("--depths", synth.cfg.depths, "Channel count of each layer")->capture_default_str();
    c_synth->add_option("--background-rate", synth.cfg.background_rate)->capture_default_str();
    c_synth->add_option("--signal-channels", synth.cfg.signal_channels_per_class)->capture_default_str();
    c_synth->add_option("--signal-rate", synth.cfg.signal_rate)->capture_default_str();
    c_synth->add_option("--seed", synth.cfg.seed)->capture_default_str();
    c_synth->add_option("--out", synth.out, "Output directory")->required();

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train the head with triplet loss");
    c_train->add_option("--manifest", tr.manifest)->required();
    c_train->add_option("--config", tr.config, "TrainConfig JSON (all fields optional)");
    c_train->add_option("--out", tr.out, "Model JSON output")->required();
    c_train->add_option("--log", tr.log_path, "Append per-epoch JSON Lines summaries here");
    c_train->add_option("--family", tr.family, "sinh, exp or weibull")->capture_default_str();
    c_train->add_option("--out-dim", tr.out_dim, "Whitening output dimension (default: no reduction)");

    ExtractArgs ex;
    auto* c_extract = app.add_subcommand("extract", "Write a descriptor store for a manifest");
    c_extract->add_option("--model", ex.model)->required();
    c_extract->add_option("--manifest", ex.manifest)->required();
    c_extract->add_option("--out", ex.out)->required();
    c_extract->add_option("--split", ex.split, "all, train, query or db")->capture_default_str();

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "mAP of the query split against the db split");
    c_eval->add_option("--model", ev.model)->required();
    c_eval->add_option("--manifest", ev.manifest)->required();
    c_eval->add_option("--out", ev.out)->required();
    c_eval->add_option("--qe-alpha", ev.qe_alpha, "Query expansion exponent")->capture_default_str();
    c_eval->add_option("--qe-n", ev.qe_n, "Query expansion neighbours (0 disables)")->capture_default_str();
    c_eval->add_option("--compact", ev.compact, "Truncate descriptors to the first K components");
    c_eval->add_flag("--exclude-self", ev.exclude_self, "Drop the query's own id from its ranking");

    SeparabilityArgs sp;
    auto* c_sep = app.add_subcommand("analyze-separability", "KL divergence of matching vs non-matching distances");
    c_sep->add_option("--descriptors", sp.descriptors)->required();
    auto* o_pairs = c_sep->add_option("--pairs", sp.pairs, "JSON {matching: [[id,id]...], nonmatching: [...]}");
    auto* o_manifest = c_sep->add_option("--manifest", sp.manifest, "Derive pairs from class labels");
    o_pairs->excludes(o_manifest);
    c_sep->add_option("--bins", sp.bins)->capture_default_str();
    c_sep->add_option("--out", sp.out)->required();

    VerifyArgs vg;
    auto* c_verify = app.add_subcommand("verify-gradients", "Finite-difference check of every analytic gradient");
    c_verify->add_option("--seed", vg.seed)->capture_default_str();
    c_verify->add_option("--out", vg.out, "JSON report path");

    AppendixArgs ap;
    auto* c_app = app.add_subcommand("appendix-check", "Monte Carlo check of the exp-transformed exponential");
    c_app->add_option("--lambda", ap.lambda, "Exponential rate")->capture_default_str();
    c_app->add_option("--p", ap.p, "Exponent divisor")->capture_default_str();
    c_app->add_option("--samples", ap.samples)->capture_default_str();
    c_app->add_option("--seed", ap.seed)->capture_default_str();
    c_app->add_option("--out", ap.out, "JSON report path (default: standard output)");

    BaselineArgs bl;
    auto* c_base = app.add_subcommand("baseline", "Evaluate a DA, max or GeM pooling head");
    c_base->add_option("--kind", bl.kind, "da, max or gem")->capture_default_str();
    c_base->add_option("--gem-p", bl.gem_p)->capture_default_str();
    c_base->add_option("--manifest", bl.manifest)->required();
    c_base->add_option("--out", bl.out)->required();
    c_base->add_option("--out-dim", bl.out_dim);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    set_worker_threads(threads > 0 ? threads : threads_from_env());

    try {
        if (*c_synth) return run_synth(synth);
        if (*c_train) return run_train(tr);
        if (*c_extract) return run_extract(ex);
        if (*c_eval) return run_evaluate(ev);
        if (*c_sep) return run_separability(sp);
        if (*c_verify) return run_verify(vg);
        if (*c_app) return run_appendix(ap);
        if (*c_base) return run_baseline(bl);
    } catch (const IoError& e) {
        log(std::string("error: ") + e.what());
        return kExitIo;
    } catch (const actnet::Error& e) {
        log(std::string("error: ") + e.what());
        return kExitValidation;
    } catch (const std::filesystem::filesystem_error& e) {
        log(std::string("error: ") + e.what());
        return kExitIo;
    }
    return kExitUsage;
}
