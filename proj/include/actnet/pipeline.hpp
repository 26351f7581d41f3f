#pragma once

#include <span>

#include "actnet/dataset.hpp"
#include "actnet/retrieval.hpp"

namespace actnet {

/// Index over the given rows; relevance of every query id is the set of
/// indexed ids sharing its class label.
RetrievalIndex build_index(const Dataset& data, std::span<const std::size_t> db,
                           const Eigen::MatrixXd& db_descriptors, std::span<const std::size_t> queries);

std::vector<Query> make_queries(const Dataset& data, std::span<const std::size_t> queries,
                                const Eigen::MatrixXd& query_descriptors);

/// mAP of the query split against the db split.
EvalReport evaluate_split(const Dataset& data, const Eigen::MatrixXd& query_descriptors,
                          const Eigen::MatrixXd& db_descriptors, const EvalOptions& options = {});

EvalReport evaluate_model(const Dataset& data, const ModelState& model, const EvalOptions& options = {});

/// Separability of all same-class vs different-class pairs among the rows.
SeparabilityReport separability_of(const Dataset& data, std::span<const std::size_t> rows,
                                   const Eigen::MatrixXd& descriptors,
                                   std::size_t bins = kDefaultSeparabilityBins);

} // namespace actnet
