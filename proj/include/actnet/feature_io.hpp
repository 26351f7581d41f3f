#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "actnet/tensor.hpp"

namespace actnet {

/// One image's K feature maps, in stream order.
struct FeatureFile {
    std::string image_id;
    std::vector<FeatureMap> layers;
};

// ACTF v1, all integers little-endian:
//   "ACTF" | u32 version=1 | u32 id_len | id bytes (UTF-8) | u32 K |
//   K x (u32 W | u32 H | u32 D | W*H*D float32 values, channel-major layout)
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

std::vector<std::uint8_t> encode_feature_file(const FeatureFile& f);
FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes);

void write_feature_file(const FeatureFile& f, const std::filesystem::path& path);
FeatureFile read_feature_file(const std::filesystem::path& path);

enum class Split { Train, Query, Db };

std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct ManifestEntry {
    std::string id;
    std::int64_t class_label = 0;
    std::string path;  // relative to the manifest's directory
    Split split = Split::Train;
};

struct Manifest {
    std::filesystem::path directory;
    std::vector<ManifestEntry> entries;

    std::filesystem::path resolve(const ManifestEntry& e) const { return directory / e.path; }
};

/// JSON Lines, one object per entry with exactly id, class_label, path, split.
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

/// Id-keyed descriptor matrix, one row per id, all rows of equal dimension.
class DescriptorStore {
public:
    DescriptorStore() = default;

    void append(const std::string& id, const Eigen::VectorXd& v);

    std::size_t count() const { return ids_.size(); }
    Eigen::Index dim() const { return rows_.empty() ? 0 : rows_.front().size(); }
    bool empty() const { return ids_.empty(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const Eigen::VectorXd& descriptor(std::size_t i) const { return rows_.at(i); }

    /// count x dim matrix.
    Eigen::MatrixXd matrix() const;

    bool operator==(const DescriptorStore&) const = default;

private:
    std::vector<std::string> ids_;
    std::vector<Eigen::VectorXd> rows_;
};

// ACTD v1: "ACTD" | u32 version=1 | u32 count | u32 dim |
//   count x (u32 id_len | id bytes | dim x float64)
inline constexpr std::uint32_t kDescriptorFormatVersion = 1;

std::vector<std::uint8_t> encode_descriptors(const DescriptorStore& store);
DescriptorStore decode_descriptors(std::span<const std::uint8_t> bytes);

void write_descriptors(const DescriptorStore& store, const std::filesystem::path& path);
DescriptorStore read_descriptors(const std::filesystem::path& path);

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace actnet
