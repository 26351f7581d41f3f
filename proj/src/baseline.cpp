#include "actnet/baseline.hpp"

#include "actnet/parallel.hpp"

namespace actnet {

std::string_view baseline_name(BaselinePooling p) {
    switch (p) {
    case BaselinePooling::Average: return "da";
    case BaselinePooling::Max: return "max";
    case BaselinePooling::GeM: return "gem";
    }
    return "unknown";
}

BaselinePooling parse_baseline(std::string_view name) {
    if (name == "da") return BaselinePooling::Average;
    if (name == "max") return BaselinePooling::Max;
    if (name == "gem") return BaselinePooling::GeM;
    throw ParameterError("unknown baseline '" + std::string(name) + "' (expected da, max or gem)");
}

Eigen::VectorXd baseline_pool(std::span<const FeatureMap> maps, BaselinePooling pooling, double gem_p) {
    Eigen::Index dim = 0;
    for (const auto& m : maps) dim += static_cast<Eigen::Index>(m.depth());
    Eigen::VectorXd b(dim);
    Eigen::Index offset = 0;
    for (const auto& m : maps) {
        const auto d = static_cast<Eigen::Index>(m.depth());
        switch (pooling) {
        case BaselinePooling::Average: b.segment(offset, d) = global_average_pool(m); break;
        case BaselinePooling::Max: b.segment(offset, d) = global_max_pool(m); break;
        case BaselinePooling::GeM: b.segment(offset, d) = gem_pool(m, gem_p); break;
        }
        offset += d;
    }
    return b;
}

Eigen::VectorXd baseline_descriptor(std::span<const FeatureMap> maps, const BaselineHead& head) {
    const Eigen::VectorXd b = baseline_pool(maps, head.pooling, head.gem_p);
    if (b.size() != head.whitening.in_dim()) throw ShapeError("baseline input dimension differs from whitening");
    const Eigen::VectorXd d = head.whitening.apply(b);
    const double norm = d.norm();
    if (!(norm >= kDegenerateNorm)) throw DegenerateDescriptorError("baseline descriptor has zero norm");
    return d / norm;
}

BaselineHead fit_baseline(const Dataset& data, std::span<const std::size_t> fit_indices,
                          BaselinePooling pooling, double gem_p, std::optional<Eigen::Index> out_dim) {
    if (fit_indices.empty()) throw DataError("baseline whitening needs training images");
    BaselineHead head{pooling, gem_p, {}};
    std::vector<Eigen::VectorXd> rows(fit_indices.size());
    parallel_for(rows.size(), [&](std::size_t r) { rows[r] = baseline_pool(data.maps(fit_indices[r]), pooling, gem_p); });
    Eigen::MatrixXd samples(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) samples.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    head.whitening = fit_whitening(samples, out_dim.value_or(samples.cols()));
    return head;
}

Eigen::MatrixXd extract_baseline_descriptors(const Dataset& data, std::span<const std::size_t> indices,
                                             const BaselineHead& head) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), head.whitening.out_dim());
    parallel_for(indices.size(), [&](std::size_t r) {
        out.row(static_cast<Eigen::Index>(r)) = baseline_descriptor(data.maps(indices[r]), head).transpose();
    });
    return out;
}

} // namespace actnet
