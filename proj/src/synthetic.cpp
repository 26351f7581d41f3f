#include "actnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "actnet/parallel.hpp"
#include "actnet/rng.hpp"

namespace actnet {

namespace {
constexpr std::uint64_t kSignatureStream = 0x5167'0000'0000ULL;
constexpr std::uint64_t kImageStream = 0x1A6E'0000'0000ULL;
constexpr std::size_t kMinSpikes = 3;
constexpr std::size_t kMaxSpikes = 8;
} // namespace

void SynthConfig::validate() const {
    if (classes == 0 || images_per_class == 0) throw ParameterError("synth: classes and images_per_class must be positive");
    if (width == 0 || height == 0) throw ParameterError("synth: spatial size must be positive");
    if (depths.empty()) throw ParameterError("synth: at least one layer depth is required");
    for (auto d : depths) {
        if (d < signal_channels_per_class || d == 0) {
            throw ParameterError("synth: signal_channels_per_class exceeds a layer depth");
        }
    }
    if (!(background_rate > 0) || !(signal_rate > 0)) throw ParameterError("synth: rates must be positive");
}

Split synthetic_split(std::size_t image_index, std::size_t images_per_class) {
    if (image_index == 0) return Split::Query;
    const auto db = std::min<std::size_t>(
        images_per_class - 1,
        static_cast<std::size_t>(std::lround(0.7 * static_cast<double>(images_per_class))));
    return image_index <= db ? Split::Db : Split::Train;
}

std::vector<std::size_t> signature_channels(const SynthConfig& c, std::size_t class_index,
                                            std::size_t layer) {
    SeededRng rng = SeededRng(c.seed).derive(kSignatureStream + class_index * 64 + layer);
    std::vector<std::size_t> channels(c.depths.at(layer));
    std::iota(channels.begin(), channels.end(), std::size_t{0});
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < c.signal_channels_per_class; ++i) {
        const auto j = i + rng.uniform_index(channels.size() - i);
        std::swap(channels[i], channels[j]);
    }
    channels.resize(c.signal_channels_per_class);
    std::sort(channels.begin(), channels.end());
    return channels;
}

std::string synthetic_image_id(std::size_t class_index, std::size_t image_index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "c%03zu_i%03zu", class_index, image_index);
    return buf;
}

FeatureFile synthesize_image(const SynthConfig& c, std::size_t class_index, std::size_t image_index) {
    c.validate();
    SeededRng rng = SeededRng(c.seed).derive(kImageStream + class_index * c.images_per_class + image_index);
    FeatureFile f;
    f.image_id = synthetic_image_id(class_index, image_index);
    const std::size_t plane = c.width * c.height;
    for (std::size_t layer = 0; layer < c.depths.size(); ++layer) {
        const std::size_t depth = c.depths[layer];
        Eigen::VectorXd values(static_cast<Eigen::Index>(plane * depth));
        for (Eigen::Index n = 0; n < values.size(); ++n) values[n] = rng.exponential(c.background_rate);
        for (std::size_t k : signature_channels(c, class_index, layer)) {
            const auto spikes = kMinSpikes + rng.uniform_index(kMaxSpikes - kMinSpikes + 1);
            for (std::size_t s = 0; s < spikes; ++s) {
                const auto pos = rng.uniform_index(plane);
                values[static_cast<Eigen::Index>(k * plane + pos)] += 1.0 + rng.exponential(c.signal_rate);
            }
        }
        // Stored as float32 on disk; round here so in-memory and on-disk data agree.
        values = values.cast<float>().cast<double>();
        f.layers.emplace_back(c.width, c.height, depth, std::move(values));
    }
    return f;
}

std::vector<ManifestEntry> generate_synthetic_dataset(const SynthConfig& c,
                                                      const std::filesystem::path& out_dir) {
    c.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "features", ec);
    if (ec) throw IoError("cannot create '" + (out_dir / "features").string() + "': " + ec.message());

    const std::size_t total = c.classes * c.images_per_class;
    std::vector<ManifestEntry> entries(total);
    parallel_for(total, [&](std::size_t n) {
        const std::size_t cls = n / c.images_per_class;
        const std::size_t img = n % c.images_per_class;
        FeatureFile f = synthesize_image(c, cls, img);
        const std::string rel = "features/" + f.image_id + ".actf";
        write_feature_file(f, out_dir / rel);
        entries[n] = {f.image_id, static_cast<std::int64_t>(cls), rel,
                      synthetic_split(img, c.images_per_class)};
    });
    write_manifest(entries, out_dir / "manifest.jsonl");
    return entries;
}

} // namespace actnet
