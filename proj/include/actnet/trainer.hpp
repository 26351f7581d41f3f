#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "actnet/aggregation.hpp"
#include "actnet/dataset.hpp"
#include "actnet/rng.hpp"
#include "actnet/triplet_loss.hpp"

namespace actnet {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 5e-4;
    double momentum = 0.9;
    double margin = 0.1;
    std::size_t triplets_per_epoch = 5000;
    std::size_t accumulation_size = 64;
    std::size_t max_epochs = 20;
    std::uint64_t seed = 42;

    void validate() const;
};

/// Every field optional; unknown fields are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& c);

/// Positions into the descriptor rows (or split index list) used for mining.
struct Triplet {
    std::size_t query = 0;
    std::size_t match = 0;
    std::size_t nonmatch = 0;

    bool operator==(const Triplet&) const = default;
};

/// SGD momentum buffer, one entry per packed parameter.
struct OptimizerState {
    Eigen::VectorXd velocity;
};

/// Samples n (query, random same-class match) pairs uniformly with
/// replacement, pairs each with the closest different-class row and keeps the
/// triplets with positive loss. Rows of `descriptors` align with `labels`.
std::vector<Triplet> mine_triplets(const Eigen::MatrixXd& descriptors,
                                   std::span<const std::int64_t> labels, std::size_t n,
                                   double margin, SeededRng& rng);

struct TripletStep {
    double loss = 0;
    HeadGradients gradients;
};

/// Loss of one triplet under `model` and its gradient with respect to every learnable.
TripletStep triplet_step(const ModelState& model, std::span<const FeatureMap> query,
                         std::span<const FeatureMap> match, std::span<const FeatureMap> nonmatch,
                         double margin);

/// velocity <- momentum * velocity + grad + weight_decay * param;
/// param <- param - lr * velocity; then re-clamp to the constraint sets.
void sgd_update(ModelState& model, OptimizerState& opt, const Eigen::VectorXd& gradient,
                const TrainConfig& cfg);

/// Processes triplets one at a time (indices into `split`), updating after
/// every accumulation_size triplets and once more for a remainder. Returns the
/// number of updates applied.
std::size_t process_triplets(ModelState& model, OptimizerState& opt, const Dataset& data,
                             std::span<const std::size_t> split, std::span<const Triplet> triplets,
                             const TrainConfig& cfg);

struct EpochSummary {
    std::size_t epoch = 0;
    std::size_t mined = 0;
    double mean_loss = 0;  // mean loss of the mined triplets under the pre-epoch model
    std::size_t updates = 0;
    std::uint64_t exp_clamps = 0;
};

nlohmann::json epoch_summary_to_json(const EpochSummary& s);

EpochSummary train_epoch(ModelState& model, const Dataset& data, std::span<const std::size_t> split,
                         const TrainConfig& cfg, OptimizerState& opt, SeededRng& rng,
                         std::size_t epoch_index = 0);

struct TrainResult {
    ModelState model;
    std::vector<EpochSummary> trace;
};

using EpochCallback = std::function<void(const EpochSummary&)>;

/// Runs up to max_epochs epochs, stopping early once an epoch mines nothing.
TrainResult train(ModelState model, const Dataset& data, std::span<const std::size_t> split,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

} // namespace actnet
