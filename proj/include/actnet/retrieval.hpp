#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "actnet/tensor.hpp"

namespace actnet {

using RelevanceMap = std::map<std::string, std::set<std::string>>;

/// Database of unit-norm descriptors (one row per id) with ground truth.
struct RetrievalIndex {
    std::vector<std::string> ids;
    Eigen::MatrixXd descriptors;
    RelevanceMap relevance;

    std::size_t size() const { return ids.size(); }
    Eigen::Index dim() const { return descriptors.cols(); }
    void validate() const;
};

struct RankedItem {
    std::string id;
    double distance = 0;
    std::size_t row = 0;
};

/// Ascending Euclidean distance, ties by ascending id.
std::vector<RankedItem> rank(const Eigen::VectorXd& query, const RetrievalIndex& index);

/// Mean over relevant items of precision at their rank. Relevant ids missing
/// from the ranking count as never retrieved.
double average_precision(std::span<const std::string> ranking, const std::set<std::string>& relevant);

struct QueryExpansionOptions {
    std::size_t n = 10;
    double alpha = 3.0;
};

struct EvalOptions {
    bool exclude_self = false;
    std::optional<Eigen::Index> compact_k;
    std::optional<QueryExpansionOptions> qe;
};

struct Query {
    std::string id;
    Eigen::VectorXd descriptor;
};

struct QueryResult {
    std::string id;
    double ap = 0;
};

struct EvalReport {
    double map = 0;
    std::vector<QueryResult> per_query;
    std::vector<std::string> skipped;  // queries without relevant items
    EvalOptions options;
};

nlohmann::json eval_report_to_json(const EvalReport& r);

/// normalize(query + sum_i max(0, <query, d_i>)^alpha * d_i) over the first
/// n ranked items (all of them when the ranking is shorter).
Eigen::VectorXd alpha_query_expansion(const Eigen::VectorXd& query,
                                      std::span<const RankedItem> ranking,
                                      const RetrievalIndex& index, std::size_t n_qe, double alpha_qe);

EvalReport mean_average_precision(const RetrievalIndex& index, std::span<const Query> queries,
                                  const EvalOptions& options = {});

inline constexpr std::size_t kDefaultSeparabilityBins = 100;
inline constexpr double kSeparabilitySmoothing = 1e-6;
inline constexpr double kMaxUnitDistance = 2.0;

struct SeparabilityReport {
    std::size_t bins = 0;
    std::vector<double> bin_edges;  // bins + 1 edges over [0, 2]
    std::vector<std::size_t> matching_histogram;
    std::vector<std::size_t> nonmatching_histogram;
    double kld = 0;
};

nlohmann::json separability_report_to_json(const SeparabilityReport& r);

using DescriptorPair = std::pair<Eigen::VectorXd, Eigen::VectorXd>;

/// Histograms of pair distances over [0, 2] and KLD(P(s|m) || P(s|n)) after
/// adding 1e-6 to every bin probability and renormalizing.
SeparabilityReport separability_from_distances(std::span<const double> matching,
                                               std::span<const double> nonmatching,
                                               std::size_t bins = kDefaultSeparabilityBins);

SeparabilityReport separability(std::span<const DescriptorPair> matching,
                                std::span<const DescriptorPair> nonmatching,
                                std::size_t bins = kDefaultSeparabilityBins);

/// Distances of all same-label and all different-label row pairs (i < j).
std::pair<std::vector<double>, std::vector<double>>
labelled_pair_distances(const Eigen::MatrixXd& descriptors, std::span<const std::int64_t> labels);

} // namespace actnet
