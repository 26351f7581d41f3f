#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "actnet/aggregation.hpp"
#include "actnet/feature_io.hpp"

namespace actnet {

/// A manifest with every feature file loaded, entries and features aligned.
struct Dataset {
    Manifest manifest;
    std::vector<FeatureFile> features;

    std::size_t size() const { return features.size(); }
    const ManifestEntry& entry(std::size_t i) const { return manifest.entries[i]; }
    std::span<const FeatureMap> maps(std::size_t i) const { return features[i].layers; }

    /// Indices of entries in the given split, in manifest order.
    std::vector<std::size_t> indices(Split split) const;
    std::vector<std::size_t> all_indices() const;

    /// Depth of each layer, identical for every file.
    std::vector<std::size_t> layer_depths() const;
};

/// Loads and validates every file referenced by the manifest. All files must
/// share layer count and depths; the file's embedded id must match the entry.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Rows are forward_head descriptors of the selected images, in order.
Eigen::MatrixXd extract_descriptors(const Dataset& data, std::span<const std::size_t> indices,
                                    const ModelState& model);

/// Rows are the concatenated pre-whitening vectors b.
Eigen::MatrixXd extract_pre_projection(const Dataset& data, std::span<const std::size_t> indices,
                                       const ModelState& model);

/// Head with default parameters for `family`, whitening fitted on the given
/// images. out_dim defaults to the concatenated dimension.
ModelState initialize_model(const Dataset& data, std::span<const std::size_t> fit_indices,
                            ActivationFamily family, std::optional<Eigen::Index> out_dim = {});

} // namespace actnet
