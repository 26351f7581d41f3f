#include "actnet/dataset.hpp"

#include "actnet/parallel.hpp"

namespace actnet {

std::vector<std::size_t> Dataset::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        if (manifest.entries[i].split == split) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> Dataset::all_indices() const {
    std::vector<std::size_t> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
}

std::vector<std::size_t> Dataset::layer_depths() const {
    std::vector<std::size_t> depths;
    if (features.empty()) return depths;
    for (const auto& l : features.front().layers) depths.push_back(l.depth());
    return depths;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    Dataset d;
    d.manifest = read_manifest(manifest_path);
    d.features.resize(d.manifest.entries.size());
    parallel_for(d.features.size(), [&](std::size_t i) {
        d.features[i] = read_feature_file(d.manifest.resolve(d.manifest.entries[i]));
    });
    const auto depths = d.layer_depths();
    for (std::size_t i = 0; i < d.features.size(); ++i) {
        const auto& e = d.manifest.entries[i];
        if (d.features[i].image_id != e.id) {
            throw DataError("feature file '" + e.path + "' carries id '" + d.features[i].image_id +
                            "', manifest says '" + e.id + "'");
        }
        const auto& layers = d.features[i].layers;
        if (layers.size() != depths.size()) throw DataError("'" + e.id + "' has a different layer count");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (layers[l].depth() != depths[l]) {
                throw DataError("'" + e.id + "' layer " + std::to_string(l) + " has a different depth");
            }
        }
    }
    return d;
}

Eigen::MatrixXd extract_descriptors(const Dataset& data, std::span<const std::size_t> indices,
                                    const ModelState& model) {
    model.validate();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), model.whitening.out_dim());
    parallel_for(indices.size(), [&](std::size_t r) {
        out.row(static_cast<Eigen::Index>(r)) = forward_head(data.maps(indices[r]), model).transpose();
    });
    return out;
}

Eigen::MatrixXd extract_pre_projection(const Dataset& data, std::span<const std::size_t> indices,
                                       const ModelState& model) {
    model.validate();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), model.concatenated_dim());
    parallel_for(indices.size(), [&](std::size_t r) {
        out.row(static_cast<Eigen::Index>(r)) = pre_projection(data.maps(indices[r]), model).transpose();
    });
    return out;
}

ModelState initialize_model(const Dataset& data, std::span<const std::size_t> fit_indices,
                            ActivationFamily family, std::optional<Eigen::Index> out_dim) {
    ModelState m = ModelState::make(family, data.layer_depths());
    const Eigen::MatrixXd b = extract_pre_projection(data, fit_indices, m);
    m.whitening = fit_whitening(b, out_dim.value_or(m.concatenated_dim()));
    m.validate();
    return m;
}

} // namespace actnet
