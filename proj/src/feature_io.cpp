#include "actnet/feature_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

namespace actnet {

namespace {

class ByteWriter {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void u64(std::uint64_t v) {
        for (int s = 0; s < 64; s += 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void string(const std::string& s) {
        u32(checked_u32(s.size(), "string length"));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

    static std::uint32_t checked_u32(std::size_t v, const char* what) {
        if (v > UINT32_MAX) throw FormatError(std::string(what) + " exceeds u32 range");
        return static_cast<std::uint32_t>(v);
    }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, const char* format)
        : data_(data), format_(format) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    [[noreturn]] void fail(const std::string& msg) const { fail_at(pos_, msg); }
    [[noreturn]] void fail_at(std::size_t offset, const std::string& msg) const {
        throw FormatError(std::string(format_) + " at offset " + std::to_string(offset) + ": " + msg);
    }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            fail("truncated while reading " + std::string(what) + " (need " + std::to_string(n) +
                 " bytes, " + std::to_string(remaining()) + " left)");
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::string string(const char* what) {
        const std::uint32_t n = u32(what);
        need(n, what);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void magic(const char (&expected)[5]) {
        need(4, "magic");
        if (std::memcmp(data_.data() + pos_, expected, 4) != 0) fail("bad magic");
        pos_ += 4;
    }
    void expect_end() const {
        if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
    }

private:
    std::span<const std::uint8_t> data_;
    const char* format_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode_feature_file(const FeatureFile& f) {
    if (f.layers.empty()) throw FormatError("ACTF: a feature file needs at least one layer");
    ByteWriter w;
    w.bytes("ACTF", 4);
    w.u32(kFeatureFormatVersion);
    w.string(f.image_id);
    w.u32(ByteWriter::checked_u32(f.layers.size(), "layer count"));
    for (const auto& layer : f.layers) {
        w.u32(ByteWriter::checked_u32(layer.width(), "width"));
        w.u32(ByteWriter::checked_u32(layer.height(), "height"));
        w.u32(ByteWriter::checked_u32(layer.depth(), "depth"));
        const auto& v = layer.values();
        for (Eigen::Index n = 0; n < v.size(); ++n) w.f32(static_cast<float>(v[n]));
    }
    return w.take();
}

FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "ACTF");
    r.magic("ACTF");
    const std::size_t version_at = r.offset();
    const std::uint32_t version = r.u32("version");
    if (version != kFeatureFormatVersion) {
        r.fail_at(version_at, "unsupported version " + std::to_string(version));
    }
    FeatureFile f;
    f.image_id = r.string("image id");
    const std::size_t k_at = r.offset();
    const std::uint32_t k = r.u32("layer count");
    if (k == 0) r.fail_at(k_at, "layer count is zero");
    for (std::uint32_t l = 0; l < k; ++l) {
        const std::size_t shape_at = r.offset();
        const std::uint64_t width = r.u32("width");
        const std::uint64_t height = r.u32("height");
        const std::uint64_t depth = r.u32("depth");
        if (width == 0 || height == 0 || depth == 0) r.fail_at(shape_at, "zero dimension in layer shape");
        const std::uint64_t available = r.remaining() / 4;
        const std::uint64_t plane = width * height;
        if (plane > available || depth > available / plane) {
            r.fail_at(shape_at, "layer " + std::to_string(l) + " shape " + std::to_string(width) + "x" +
                                    std::to_string(height) + "x" + std::to_string(depth) +
                                    " exceeds the remaining payload");
        }
        const std::uint64_t count = plane * depth;
        Eigen::VectorXd values(static_cast<Eigen::Index>(count));
        for (std::uint64_t n = 0; n < count; ++n) {
            const std::size_t value_at = r.offset();
            const float v = r.f32("value");
            if (!std::isfinite(v)) {
                r.fail_at(value_at, "layer " + std::to_string(l) + " value index " + std::to_string(n) +
                                        " is not finite");
            }
            if (v < 0.0f) {
                r.fail_at(value_at, "layer " + std::to_string(l) + " value index " + std::to_string(n) +
                                        " is negative");
            }
            values[static_cast<Eigen::Index>(n)] = v;
        }
        f.layers.emplace_back(width, height, depth, std::move(values));
    }
    r.expect_end();
    return f;
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
    return bytes;
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_feature_file(const FeatureFile& f, const std::filesystem::path& path) {
    write_binary_file(path, encode_feature_file(f));
}

FeatureFile read_feature_file(const std::filesystem::path& path) {
    const auto bytes = read_binary_file(path);
    try {
        return decode_feature_file(bytes);
    } catch (const FormatError& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
}

std::string_view split_name(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Query: return "query";
    case Split::Db: return "db";
    }
    return "unknown";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "query") return Split::Query;
    if (name == "db") return Split::Db;
    throw FormatError("unknown split '" + std::string(name) + "'");
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
    std::string text;
    for (const auto& e : entries) {
        nlohmann::ordered_json j = {{"id", e.id},
                                    {"class_label", e.class_label},
                                    {"path", e.path},
                                    {"split", std::string(split_name(e.split))}};
        text += j.dump();
        text += '\n';
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    Manifest m;
    m.directory = path.parent_path();
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(where + ": " + e.what());
        }
        if (!j.is_object() || j.size() != 4 || !j.contains("id") || !j.contains("class_label") ||
            !j.contains("path") || !j.contains("split")) {
            throw FormatError(where + ": entry must have exactly id, class_label, path, split");
        }
        ManifestEntry e;
        try {
            e.id = j.at("id").get<std::string>();
            e.class_label = j.at("class_label").get<std::int64_t>();
            e.path = j.at("path").get<std::string>();
            e.split = parse_split(j.at("split").get<std::string>());
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(where + ": " + ex.what());
        }
        const std::filesystem::path rel(e.path);
        if (e.path.empty() || rel.is_absolute()) {
            throw FormatError(where + ": path must be relative to the manifest directory");
        }
        for (const auto& part : rel) {
            if (part == "..") throw FormatError(where + ": path escapes the manifest directory");
        }
        if (!seen.insert(e.id).second) throw FormatError(where + ": duplicate id '" + e.id + "'");
        m.entries.push_back(std::move(e));
    }
    return m;
}

void DescriptorStore::append(const std::string& id, const Eigen::VectorXd& v) {
    if (v.size() == 0) throw ShapeError("descriptor store rejects empty descriptors");
    if (!rows_.empty() && v.size() != dim()) {
        throw ShapeError("descriptor '" + id + "' has dimension " + std::to_string(v.size()) +
                         ", store holds dimension " + std::to_string(dim()));
    }
    ids_.push_back(id);
    rows_.push_back(v);
}

Eigen::MatrixXd DescriptorStore::matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(count()), dim());
    for (std::size_t i = 0; i < rows_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows_[i].transpose();
    return m;
}

std::vector<std::uint8_t> encode_descriptors(const DescriptorStore& store) {
    ByteWriter w;
    w.bytes("ACTD", 4);
    w.u32(kDescriptorFormatVersion);
    w.u32(ByteWriter::checked_u32(store.count(), "descriptor count"));
    w.u32(ByteWriter::checked_u32(static_cast<std::size_t>(store.dim()), "descriptor dim"));
    for (std::size_t i = 0; i < store.count(); ++i) {
        w.string(store.ids()[i]);
        const auto& v = store.descriptor(i);
        for (Eigen::Index n = 0; n < v.size(); ++n) w.f64(v[n]);
    }
    return w.take();
}

DescriptorStore decode_descriptors(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "ACTD");
    r.magic("ACTD");
    const std::size_t version_at = r.offset();
    const std::uint32_t version = r.u32("version");
    if (version != kDescriptorFormatVersion) {
        r.fail_at(version_at, "unsupported version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32("count");
    const std::size_t dim_at = r.offset();
    const std::uint32_t dim = r.u32("dim");
    if (count > 0 && dim == 0) r.fail_at(dim_at, "zero dimension with non-empty store");
    DescriptorStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string id = r.string("id");
        if (std::uint64_t(dim) * 8 > r.remaining()) r.fail("truncated descriptor payload");
        Eigen::VectorXd v(dim);
        for (std::uint32_t n = 0; n < dim; ++n) v[n] = r.f64("value");
        store.append(id, v);
    }
    r.expect_end();
    return store;
}

void write_descriptors(const DescriptorStore& store, const std::filesystem::path& path) {
    write_binary_file(path, encode_descriptors(store));
}

DescriptorStore read_descriptors(const std::filesystem::path& path) {
    const auto bytes = read_binary_file(path);
    try {
        return decode_descriptors(bytes);
    } catch (const FormatError& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
}

} // namespace actnet
