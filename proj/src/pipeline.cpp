#include "actnet/pipeline.hpp"

namespace actnet {

RetrievalIndex build_index(const Dataset& data, std::span<const std::size_t> db,
                           const Eigen::MatrixXd& db_descriptors, std::span<const std::size_t> queries) {
    if (static_cast<Eigen::Index>(db.size()) != db_descriptors.rows()) {
        throw ShapeError("build_index: descriptor rows differ from db size");
    }
    RetrievalIndex index;
    index.descriptors = db_descriptors;
    for (auto i : db) index.ids.push_back(data.entry(i).id);
    for (auto q : queries) {
        auto& rel = index.relevance[data.entry(q).id];
        for (auto i : db) {
            if (i != q && data.entry(i).class_label == data.entry(q).class_label) rel.insert(data.entry(i).id);
        }
    }
    return index;
}

std::vector<Query> make_queries(const Dataset& data, std::span<const std::size_t> queries,
                                const Eigen::MatrixXd& query_descriptors) {
    std::vector<Query> out;
    out.reserve(queries.size());
    for (std::size_t r = 0; r < queries.size(); ++r) {
        out.push_back({data.entry(queries[r]).id, query_descriptors.row(static_cast<Eigen::Index>(r)).transpose()});
    }
    return out;
}

EvalReport evaluate_split(const Dataset& data, const Eigen::MatrixXd& query_descriptors,
                          const Eigen::MatrixXd& db_descriptors, const EvalOptions& options) {
    const auto queries = data.indices(Split::Query);
    const auto db = data.indices(Split::Db);
    const RetrievalIndex index = build_index(data, db, db_descriptors, queries);
    const auto qs = make_queries(data, queries, query_descriptors);
    return mean_average_precision(index, qs, options);
}

EvalReport evaluate_model(const Dataset& data, const ModelState& model, const EvalOptions& options) {
    const auto queries = data.indices(Split::Query);
    const auto db = data.indices(Split::Db);
    return evaluate_split(data, extract_descriptors(data, queries, model), extract_descriptors(data, db, model),
                          options);
}

SeparabilityReport separability_of(const Dataset& data, std::span<const std::size_t> rows,
                                   const Eigen::MatrixXd& descriptors, std::size_t bins) {
    std::vector<std::int64_t> labels;
    for (auto i : rows) labels.push_back(data.entry(i).class_label);
    const auto [matching, nonmatching] = labelled_pair_distances(descriptors, labels);
    return separability_from_distances(matching, nonmatching, bins);
}

} // namespace actnet
