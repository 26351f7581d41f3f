#include "actnet/model_io.hpp"

#include <fstream>
#include <sstream>

namespace actnet {

using nlohmann::json;

json model_to_json(const ModelState& m) {
    json streams = json::array();
    for (const auto& s : m.streams) {
        json js = {{"family", std::string(family_name(s.activation.family))},
                   {"alpha", s.activation.alpha},
                   {"beta", s.activation.beta}};
        if (s.activation.is_weibull()) {
            js["gamma"] = s.activation.gamma;
            js["zeta"] = s.activation.zeta;
        }
        js["power_p"] = s.power_p;
        js["power_lambda"] = s.power_lambda;
        streams.push_back(std::move(js));
    }
    json projection = json::array();
    for (Eigen::Index r = 0; r < m.whitening.projection.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.whitening.projection.cols(); ++c) {
            row.push_back(m.whitening.projection(r, c));
        }
        projection.push_back(std::move(row));
    }
    json bias = json::array();
    for (Eigen::Index c = 0; c < m.whitening.bias.size(); ++c) bias.push_back(m.whitening.bias[c]);

    return {{"format_version", kModelFormatVersion},
            {"streams", std::move(streams)},
            {"stream_input_depths", m.stream_input_depths},
            {"whitening", {{"projection", std::move(projection)}, {"bias", std::move(bias)}}}};
}

namespace {

double number_field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw FormatError(where + ": missing numeric field '" + key + "'");
    }
    return j.at(key).get<double>();
}

} // namespace

ModelState model_from_json(const json& j) {
    try {
        if (!j.is_object()) throw FormatError("model: document is not an object");
        if (!j.contains("format_version") || j.at("format_version") != kModelFormatVersion) {
            throw FormatError("model: format_version must be 1");
        }
        ModelState m;
        const json& streams = j.at("streams");
        if (!streams.is_array() || streams.empty()) {
            throw FormatError("model: 'streams' must be a non-empty array");
        }
        for (std::size_t s = 0; s < streams.size(); ++s) {
            const json& js = streams[s];
            const std::string where = "model.streams[" + std::to_string(s) + "]";
            StreamParams sp;
            sp.activation.family = parse_family(js.at("family").get<std::string>());
            sp.activation.alpha = number_field(js, "alpha", where);
            sp.activation.beta = number_field(js, "beta", where);
            if (sp.activation.is_weibull()) {
                sp.activation.gamma = number_field(js, "gamma", where);
                sp.activation.zeta = number_field(js, "zeta", where);
            } else {
                sp.activation.gamma = 0;
                sp.activation.zeta = 0;
            }
            sp.power_p = number_field(js, "power_p", where);
            sp.power_lambda = number_field(js, "power_lambda", where);
            m.streams.push_back(sp);
        }
        m.stream_input_depths = j.at("stream_input_depths").get<std::vector<std::size_t>>();

        const json& w = j.at("whitening");
        const json& proj = w.at("projection");
        const json& bias = w.at("bias");
        if (!proj.is_array() || proj.empty() || !proj[0].is_array()) {
            throw FormatError("model: whitening.projection must be a nested array");
        }
        const auto rows = static_cast<Eigen::Index>(proj.size());
        const auto cols = static_cast<Eigen::Index>(proj[0].size());
        m.whitening.projection.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (!proj[r].is_array() || static_cast<Eigen::Index>(proj[r].size()) != cols) {
                throw FormatError("model: whitening.projection is ragged");
            }
            for (Eigen::Index c = 0; c < cols; ++c) m.whitening.projection(r, c) = proj[r][c].get<double>();
        }
        m.whitening.bias.resize(static_cast<Eigen::Index>(bias.size()));
        for (std::size_t c = 0; c < bias.size(); ++c) {
            m.whitening.bias[static_cast<Eigen::Index>(c)] = bias[c].get<double>();
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("model: ") + e.what());
    }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
}

void save_model(const ModelState& m, const std::filesystem::path& path) {
    write_text_file(path, dump_json(model_to_json(m)));
}

ModelState load_model(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }

} // namespace actnet
