#include "actnet/trainer.hpp"

#include <cmath>
#include <map>
#include <set>

namespace actnet {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) throw ParameterError("learning_rate must be >= 0");
    if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) throw ParameterError("weight_decay must be >= 0");
    if (!(momentum >= 0 && momentum < 1)) throw ParameterError("momentum must lie in [0, 1)");
    if (!(margin > 0) || !std::isfinite(margin)) throw ParameterError("margin must be positive");
    if (accumulation_size == 0) throw ParameterError("accumulation_size must be positive");
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("train config must be a JSON object");
    static const std::set<std::string> known = {"learning_rate", "weight_decay", "momentum",
                                                "margin", "triplets_per_epoch", "accumulation_size",
                                                "max_epochs", "seed"};
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw FormatError("train config: unknown field '" + key + "'");
    }
    TrainConfig c;
    try {
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
        if (j.contains("momentum")) c.momentum = j.at("momentum").get<double>();
        if (j.contains("margin")) c.margin = j.at("margin").get<double>();
        if (j.contains("triplets_per_epoch")) c.triplets_per_epoch = j.at("triplets_per_epoch").get<std::size_t>();
        if (j.contains("accumulation_size")) c.accumulation_size = j.at("accumulation_size").get<std::size_t>();
        if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},   {"weight_decay", c.weight_decay},
            {"momentum", c.momentum},             {"margin", c.margin},
            {"triplets_per_epoch", c.triplets_per_epoch},
            {"accumulation_size", c.accumulation_size},
            {"max_epochs", c.max_epochs},         {"seed", c.seed}};
}

std::vector<Triplet> mine_triplets(const Eigen::MatrixXd& descriptors,
                                   std::span<const std::int64_t> labels, std::size_t n,
                                   double margin, SeededRng& rng) {
    if (static_cast<std::size_t>(descriptors.rows()) != labels.size()) {
        throw ShapeError("mine_triplets: descriptor rows and labels differ in length");
    }
    std::map<std::int64_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    if (by_class.size() < 2) throw DataError("mining needs at least two classes");
    for (const auto& [label, members] : by_class) {
        if (members.size() < 2) {
            throw DataError("mining needs at least two images of class " + std::to_string(label));
        }
    }

    std::vector<Triplet> out;
    for (std::size_t s = 0; s < n; ++s) {
        const auto q = static_cast<std::size_t>(rng.uniform_index(labels.size()));
        const auto& same = by_class.at(labels[q]);
        // Uniform over the class without the query itself.
        auto pick = static_cast<std::size_t>(rng.uniform_index(same.size() - 1));
        std::size_t m = same[pick];
        if (m == q) m = same.back();

        const auto query = descriptors.row(static_cast<Eigen::Index>(q));
        std::size_t hardest = labels.size();
        double best = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == labels[q]) continue;
            const double d = (descriptors.row(static_cast<Eigen::Index>(i)) - query).squaredNorm();
            if (hardest == labels.size() || d < best) {
                best = d;
                hardest = i;
            }
        }
        const double loss = triplet_loss(query.transpose(),
                                         descriptors.row(static_cast<Eigen::Index>(m)).transpose(),
                                         descriptors.row(static_cast<Eigen::Index>(hardest)).transpose(),
                                         margin);
        if (loss > 0) out.push_back({q, m, hardest});
    }
    return out;
}

TripletStep triplet_step(const ModelState& model, std::span<const FeatureMap> query,
                         std::span<const FeatureMap> match, std::span<const FeatureMap> nonmatch,
                         double margin) {
    HeadCache cq, cm, cn;
    const Eigen::VectorXd aq = forward_head(query, model, &cq);
    const Eigen::VectorXd am = forward_head(match, model, &cm);
    const Eigen::VectorXd an = forward_head(nonmatch, model, &cn);

    TripletStep step;
    step.loss = triplet_loss(aq, am, an, margin);
    if (step.loss <= 0) {
        step.gradients = HeadGradients::zeros_like(model);
        return step;
    }
    const TripletLossGradients g = triplet_loss_gradients(aq, am, an, margin);
    step.gradients = backward_head(query, model, cq, g.d_query);
    step.gradients += backward_head(match, model, cm, g.d_match);
    step.gradients += backward_head(nonmatch, model, cn, g.d_nonmatch);
    return step;
}

void sgd_update(ModelState& model, OptimizerState& opt, const Eigen::VectorXd& gradient,
                const TrainConfig& cfg) {
    Eigen::VectorXd params = pack_parameters(model);
    if (gradient.size() != params.size()) throw ShapeError("gradient length differs from parameter count");
    for (Eigen::Index i = 0; i < gradient.size(); ++i) {
        if (!std::isfinite(gradient[i])) {
            throw NumericError("non-finite gradient for " + parameter_names(model)[static_cast<std::size_t>(i)]);
        }
    }
    if (opt.velocity.size() != params.size()) opt.velocity = Eigen::VectorXd::Zero(params.size());
    opt.velocity = cfg.momentum * opt.velocity + gradient + cfg.weight_decay * params;
    params -= cfg.learning_rate * opt.velocity;
    unpack_parameters(model, params);
    model.clamp_to_constraints();
}

std::size_t process_triplets(ModelState& model, OptimizerState& opt, const Dataset& data,
                             std::span<const std::size_t> split, std::span<const Triplet> triplets,
                             const TrainConfig& cfg) {
    cfg.validate();
    std::size_t updates = 0;
    std::size_t pending = 0;
    Eigen::VectorXd accumulated;
    for (const Triplet& t : triplets) {
        const TripletStep step = triplet_step(model, data.maps(split[t.query]), data.maps(split[t.match]),
                                              data.maps(split[t.nonmatch]), cfg.margin);
        const Eigen::VectorXd g = pack_gradients(model, step.gradients);
        if (pending == 0) {
            accumulated = g;
        } else {
            accumulated += g;
        }
        if (++pending == cfg.accumulation_size) {
            sgd_update(model, opt, accumulated, cfg);
            ++updates;
            pending = 0;
        }
    }
    if (pending > 0) {
        sgd_update(model, opt, accumulated, cfg);
        ++updates;
    }
    return updates;
}

nlohmann::json epoch_summary_to_json(const EpochSummary& s) {
    return {{"epoch", s.epoch},
            {"mined", s.mined},
            {"mean_loss", s.mean_loss},
            {"updates", s.updates},
            {"exp_clamps", s.exp_clamps}};
}

EpochSummary train_epoch(ModelState& model, const Dataset& data, std::span<const std::size_t> split,
                         const TrainConfig& cfg, OptimizerState& opt, SeededRng& rng,
                         std::size_t epoch_index) {
    cfg.validate();
    const std::uint64_t clamps_before = exp_clamp_count();

    const Eigen::MatrixXd descriptors = extract_descriptors(data, split, model);
    std::vector<std::int64_t> labels;
    labels.reserve(split.size());
    for (auto i : split) labels.push_back(data.entry(i).class_label);

    const std::vector<Triplet> triplets =
        mine_triplets(descriptors, labels, cfg.triplets_per_epoch, cfg.margin, rng);

    EpochSummary summary;
    summary.epoch = epoch_index;
    summary.mined = triplets.size();
    double total = 0;
    for (const Triplet& t : triplets) {
        total += triplet_loss(descriptors.row(static_cast<Eigen::Index>(t.query)).transpose(),
                              descriptors.row(static_cast<Eigen::Index>(t.match)).transpose(),
                              descriptors.row(static_cast<Eigen::Index>(t.nonmatch)).transpose(),
                              cfg.margin);
    }
    summary.mean_loss = triplets.empty() ? 0.0 : total / static_cast<double>(triplets.size());
    summary.updates = process_triplets(model, opt, data, split, triplets, cfg);
    summary.exp_clamps = exp_clamp_count() - clamps_before;
    return summary;
}

TrainResult train(ModelState model, const Dataset& data, std::span<const std::size_t> split,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    TrainResult result{std::move(model), {}};
    OptimizerState opt;
    SeededRng rng(cfg.seed);
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        EpochSummary s = train_epoch(result.model, data, split, cfg, opt, rng, epoch + 1);
        result.trace.push_back(s);
        if (on_epoch) on_epoch(s);
        if (s.mined == 0) break;
    }
    return result;
}

} // namespace actnet
