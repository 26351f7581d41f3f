#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "actnet/feature_io.hpp"

namespace actnet {

/// Synthetic feature-map generator. Background responses are
/// Exponential(background_rate); each class owns a fixed set of signature
/// channels per layer in which every image carries 3-8 spikes of height
/// 1 + Exponential(signal_rate).
struct SynthConfig {
    std::size_t classes = 20;
    std::size_t images_per_class = 30;
    std::size_t width = 16;
    std::size_t height = 16;
    std::vector<std::size_t> depths{64, 32};
    double background_rate = 4.0;
    std::size_t signal_channels_per_class = 8;
    double signal_rate = 0.5;
    std::uint64_t seed = 42;

    void validate() const;
};

/// Per-class split: image 0 is the query, the next round(0.7 * n) images go
/// to the database (at most n - 1), the rest to training.
Split synthetic_split(std::size_t image_index, std::size_t images_per_class);

/// Signature channels of one class for one layer (sorted, distinct).
std::vector<std::size_t> signature_channels(const SynthConfig& c, std::size_t class_index,
                                            std::size_t layer);

/// Feature maps of one image, independent of every other image.
FeatureFile synthesize_image(const SynthConfig& c, std::size_t class_index, std::size_t image_index);

std::string synthetic_image_id(std::size_t class_index, std::size_t image_index);

/// Writes features/<id>.actf for every image plus manifest.jsonl into out_dir
/// and returns the manifest entries.
std::vector<ManifestEntry> generate_synthetic_dataset(const SynthConfig& c,
                                                      const std::filesystem::path& out_dir);

} // namespace actnet
