#pragma once

#include <span>
#include <string_view>

#include "actnet/aggregation.hpp"
#include "actnet/dataset.hpp"

namespace actnet {

/// Reference heads without an activation layer: direct (average) aggregation,
/// max pooling and generalized mean pooling, each followed by the same
/// whitening and L2 normalization as the learnable head.
enum class BaselinePooling { Average, Max, GeM };

std::string_view baseline_name(BaselinePooling p);
BaselinePooling parse_baseline(std::string_view name);

struct BaselineHead {
    BaselinePooling pooling = BaselinePooling::Average;
    double gem_p = 3.0;
    WhiteningLayer whitening;
};

/// Concatenated per-layer pooled vectors.
Eigen::VectorXd baseline_pool(std::span<const FeatureMap> maps, BaselinePooling pooling, double gem_p);

Eigen::VectorXd baseline_descriptor(std::span<const FeatureMap> maps, const BaselineHead& head);

BaselineHead fit_baseline(const Dataset& data, std::span<const std::size_t> fit_indices,
                          BaselinePooling pooling, double gem_p = 3.0,
                          std::optional<Eigen::Index> out_dim = {});

Eigen::MatrixXd extract_baseline_descriptors(const Dataset& data, std::span<const std::size_t> indices,
                                             const BaselineHead& head);

} // namespace actnet
