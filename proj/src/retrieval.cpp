#include "actnet/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "actnet/aggregation.hpp"
#include "actnet/parallel.hpp"

namespace actnet {

void RetrievalIndex::validate() const {
    if (static_cast<Eigen::Index>(ids.size()) != descriptors.rows()) {
        throw ShapeError("retrieval index: id count differs from descriptor rows");
    }
    std::set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size()) throw DataError("retrieval index: duplicate ids");
    for (Eigen::Index r = 0; r < descriptors.rows(); ++r) {
        if (std::abs(descriptors.row(r).norm() - 1.0) > 1e-6) {
            throw DataError("retrieval index: descriptor '" + ids[static_cast<std::size_t>(r)] +
                            "' is not unit-norm");
        }
    }
    for (const auto& [q, rel] : relevance) {
        for (const auto& id : rel) {
            if (!unique.contains(id)) {
                throw DataError("relevance of '" + q + "' references unknown id '" + id + "'");
            }
        }
    }
}

std::vector<RankedItem> rank(const Eigen::VectorXd& query, const RetrievalIndex& index) {
    if (query.size() != index.dim()) {
        throw ShapeError("rank: query dimension " + std::to_string(query.size()) +
                         " differs from index dimension " + std::to_string(index.dim()));
    }
    std::vector<RankedItem> out(index.size());
    for (std::size_t r = 0; r < out.size(); ++r) {
        out[r] = {index.ids[r],
                  (index.descriptors.row(static_cast<Eigen::Index>(r)).transpose() - query).norm(), r};
    }
    std::sort(out.begin(), out.end(), [](const RankedItem& a, const RankedItem& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.id < b.id;
    });
    return out;
}

double average_precision(std::span<const std::string> ranking, const std::set<std::string>& relevant) {
    if (relevant.empty()) throw DataError("average_precision: empty relevant set");
    std::size_t hits = 0;
    double sum = 0;
    for (std::size_t k = 0; k < ranking.size(); ++k) {
        if (relevant.contains(ranking[k])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(relevant.size());
}

Eigen::VectorXd alpha_query_expansion(const Eigen::VectorXd& query,
                                      std::span<const RankedItem> ranking,
                                      const RetrievalIndex& index, std::size_t n_qe, double alpha_qe) {
    if (n_qe < 1) throw ParameterError("query expansion needs n_qe >= 1");
    Eigen::VectorXd expanded = query;
    const std::size_t n = std::min(n_qe, ranking.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto d = index.descriptors.row(static_cast<Eigen::Index>(ranking[i].row)).transpose();
        const double sim = std::max(0.0, query.dot(d));
        expanded += std::pow(sim, alpha_qe) * d;
    }
    const double norm = expanded.norm();
    if (!(norm >= kDegenerateNorm)) throw DegenerateDescriptorError("expanded query has zero norm");
    return expanded / norm;
}

namespace {

RetrievalIndex compact_index(const RetrievalIndex& index, Eigen::Index k) {
    RetrievalIndex out{index.ids, Eigen::MatrixXd(index.descriptors.rows(), k), index.relevance};
    for (Eigen::Index r = 0; r < index.descriptors.rows(); ++r) {
        out.descriptors.row(r) = compact_signature(index.descriptors.row(r).transpose(), k).transpose();
    }
    return out;
}

std::vector<std::string> ranked_ids(const std::vector<RankedItem>& ranking, const std::string& self,
                                    bool exclude_self) {
    std::vector<std::string> ids;
    ids.reserve(ranking.size());
    for (const auto& item : ranking) {
        if (exclude_self && item.id == self) continue;
        ids.push_back(item.id);
    }
    return ids;
}

} // namespace

EvalReport mean_average_precision(const RetrievalIndex& full_index, std::span<const Query> queries,
                                  const EvalOptions& options) {
    full_index.validate();
    const RetrievalIndex* index = &full_index;
    RetrievalIndex truncated;
    if (options.compact_k) {
        truncated = compact_index(full_index, *options.compact_k);
        index = &truncated;
    }

    std::vector<std::optional<double>> aps(queries.size());
    parallel_for(queries.size(), [&](std::size_t qi) {
        const Query& q = queries[qi];
        const auto rel = index->relevance.find(q.id);
        if (rel == index->relevance.end() || rel->second.empty()) return;
        Eigen::VectorXd descriptor =
            options.compact_k ? compact_signature(q.descriptor, *options.compact_k) : q.descriptor;
        auto ranking = rank(descriptor, *index);
        if (options.qe) {
            std::vector<RankedItem> neighbours;
            for (const auto& item : ranking) {
                if (options.exclude_self && item.id == q.id) continue;
                neighbours.push_back(item);
            }
            descriptor = alpha_query_expansion(descriptor, neighbours, *index, options.qe->n,
                                               options.qe->alpha);
            ranking = rank(descriptor, *index);
        }
        const auto ids = ranked_ids(ranking, q.id, options.exclude_self);
        aps[qi] = average_precision(ids, rel->second);
    });

    EvalReport report;
    report.options = options;
    double sum = 0;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        if (!aps[qi]) {
            std::cerr << "warning: query '" << queries[qi].id << "' has no relevant items; skipped\n";
            report.skipped.push_back(queries[qi].id);
            continue;
        }
        report.per_query.push_back({queries[qi].id, *aps[qi]});
        sum += *aps[qi];
    }
    if (report.per_query.empty()) throw EvaluationError("no valid queries to evaluate");
    report.map = sum / static_cast<double>(report.per_query.size());
    return report;
}

nlohmann::json eval_report_to_json(const EvalReport& r) {
    nlohmann::json opts = {{"exclude_self", r.options.exclude_self},
                           {"compact_k", nullptr},
                           {"qe", nullptr}};
    if (r.options.compact_k) opts["compact_k"] = *r.options.compact_k;
    if (r.options.qe) opts["qe"] = {{"n", r.options.qe->n}, {"alpha", r.options.qe->alpha}};
    nlohmann::json per_query = nlohmann::json::array();
    for (const auto& q : r.per_query) per_query.push_back({{"id", q.id}, {"ap", q.ap}});
    return {{"map", r.map}, {"per_query", per_query}, {"skipped", r.skipped}, {"options", opts}};
}

SeparabilityReport separability_from_distances(std::span<const double> matching,
                                               std::span<const double> nonmatching,
                                               std::size_t bins) {
    if (matching.empty() || nonmatching.empty()) throw DataError("separability needs non-empty pair lists");
    if (bins < 2) throw ParameterError("separability needs at least two bins");
    SeparabilityReport r;
    r.bins = bins;
    r.bin_edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
        r.bin_edges[b] = kMaxUnitDistance * static_cast<double>(b) / static_cast<double>(bins);
    }
    auto histogram = [bins](std::span<const double> distances) {
        std::vector<std::size_t> h(bins, 0);
        for (double d : distances) {
            if (!std::isfinite(d)) throw DataError("separability: non-finite distance");
            const double pos = d / kMaxUnitDistance * static_cast<double>(bins);
            const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
            ++h[b];
        }
        return h;
    };
    r.matching_histogram = histogram(matching);
    r.nonmatching_histogram = histogram(nonmatching);

    auto smoothed = [bins](const std::vector<std::size_t>& h, std::size_t total) {
        std::vector<double> p(bins);
        double z = 0;
        for (std::size_t b = 0; b < bins; ++b) {
            p[b] = static_cast<double>(h[b]) / static_cast<double>(total) + kSeparabilitySmoothing;
            z += p[b];
        }
        for (auto& v : p) v /= z;
        return p;
    };
    const auto pm = smoothed(r.matching_histogram, matching.size());
    const auto pn = smoothed(r.nonmatching_histogram, nonmatching.size());
    double kld = 0;
    for (std::size_t b = 0; b < bins; ++b) kld += pm[b] * std::log(pm[b] / pn[b]);
    r.kld = std::max(0.0, kld);
    return r;
}

SeparabilityReport separability(std::span<const DescriptorPair> matching,
                                std::span<const DescriptorPair> nonmatching, std::size_t bins) {
    auto distances = [](std::span<const DescriptorPair> pairs) {
        std::vector<double> d;
        d.reserve(pairs.size());
        for (const auto& [a, b] : pairs) d.push_back(euclidean_distance(a, b));
        return d;
    };
    const auto dm = distances(matching);
    const auto dn = distances(nonmatching);
    return separability_from_distances(dm, dn, bins);
}

std::pair<std::vector<double>, std::vector<double>>
labelled_pair_distances(const Eigen::MatrixXd& descriptors, std::span<const std::int64_t> labels) {
    if (static_cast<std::size_t>(descriptors.rows()) != labels.size()) {
        throw ShapeError("labelled_pair_distances: rows and labels differ in length");
    }
    std::pair<std::vector<double>, std::vector<double>> out;
    for (Eigen::Index i = 0; i < descriptors.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < descriptors.rows(); ++j) {
            const double d = (descriptors.row(i) - descriptors.row(j)).norm();
            if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
                out.first.push_back(d);
            } else {
                out.second.push_back(d);
            }
        }
    }
    return out;
}

nlohmann::json separability_report_to_json(const SeparabilityReport& r) {
    return {{"bins", r.bins},
            {"bin_edges", r.bin_edges},
            {"matching_histogram", r.matching_histogram},
            {"nonmatching_histogram", r.nonmatching_histogram},
            {"kld", r.kld}};
}

} // namespace actnet
