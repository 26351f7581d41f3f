#include "actnet/aggregation.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>

namespace actnet {

void StreamParams::validate() const {
    activation.validate();
    if (!std::isfinite(power_p) || power_p < kPowerPMin || power_p > kPowerPMax) {
        throw ParameterError("power_p must lie in [0.05, 1]");
    }
    if (!std::isfinite(power_lambda) || power_lambda <= 0) {
        throw ParameterError("power_lambda must be finite and positive");
    }
}

void StreamParams::clamp_to_constraints() {
    activation.clamp_to_constraints();
    power_p = std::clamp(power_p, kPowerPMin, kPowerPMax);
    power_lambda = std::max(power_lambda, kParamFloor);
}

WhiteningLayer WhiteningLayer::identity(Eigen::Index dim) {
    return {Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)};
}

void WhiteningLayer::validate() const {
    if (projection.rows() < 1 || projection.cols() < 1) {
        throw ShapeError("whitening projection must be non-empty");
    }
    if (projection.rows() > projection.cols()) {
        throw ShapeError("whitening out_dim exceeds in_dim");
    }
    if (bias.size() != projection.cols()) {
        throw ShapeError("whitening bias length differs from in_dim");
    }
    if (!projection.allFinite() || !bias.allFinite()) {
        throw ParameterError("whitening layer has non-finite entries");
    }
}

ModelState ModelState::make(ActivationFamily family, std::vector<std::size_t> depths) {
    ModelState m;
    m.streams.assign(depths.size(), StreamParams::defaults(family));
    m.stream_input_depths = std::move(depths);
    m.whitening = WhiteningLayer::identity(m.concatenated_dim());
    m.validate();
    return m;
}

Eigen::Index ModelState::concatenated_dim() const {
    return static_cast<Eigen::Index>(
        std::accumulate(stream_input_depths.begin(), stream_input_depths.end(), std::size_t{0}));
}

void ModelState::validate() const {
    if (streams.empty()) throw ShapeError("model needs at least one stream");
    if (streams.size() != stream_input_depths.size()) {
        throw ShapeError("model stream count differs from stream_input_depths");
    }
    for (auto d : stream_input_depths) {
        if (d == 0) throw ShapeError("stream input depth must be positive");
    }
    for (const auto& s : streams) s.validate();
    whitening.validate();
    if (whitening.in_dim() != concatenated_dim()) {
        throw ShapeError("whitening in_dim " + std::to_string(whitening.in_dim()) +
                         " differs from concatenated stream depth " +
                         std::to_string(concatenated_dim()));
    }
}

void ModelState::clamp_to_constraints() {
    for (auto& s : streams) s.clamp_to_constraints();
}

namespace {

void check_maps(std::span<const FeatureMap> maps, const ModelState& m) {
    if (maps.size() != m.streams.size()) {
        throw ShapeError("expected " + std::to_string(m.streams.size()) + " feature maps, got " +
                         std::to_string(maps.size()));
    }
    for (std::size_t s = 0; s < maps.size(); ++s) {
        if (maps[s].depth() != m.stream_input_depths[s]) {
            throw ShapeError("feature map " + std::to_string(s) + " has depth " +
                             std::to_string(maps[s].depth()) + ", stream expects " +
                             std::to_string(m.stream_input_depths[s]));
        }
    }
}

// Activation + average pooling, optionally collecting mean parameter partials.
Eigen::VectorXd pool_activated(const FeatureMap& t, const ActivationParams<double>& p,
                               StreamCache* cache) {
    p.validate();
    const auto depth = static_cast<Eigen::Index>(t.depth());
    const double inv = 1.0 / static_cast<double>(t.spatial_size());
    Eigen::VectorXd pooled(depth);
    if (cache) cache->mean_param_partials.setZero(depth, 4);
    for (Eigen::Index k = 0; k < depth; ++k) {
        const auto ch = t.channel(static_cast<std::size_t>(k));
        double acc = 0;
        double ga = 0, gb = 0, gg = 0, gz = 0;
        for (Eigen::Index n = 0; n < ch.size(); ++n) {
            const double x = ch[n];
            detail::check_input(x);
            const auto e = detail::evaluate_unchecked(x, p);
            acc += e.value;
            ga += e.grad.d_alpha;
            gb += e.grad.d_beta;
            gg += e.grad.d_gamma;
            gz += e.grad.d_zeta;
        }
        pooled[k] = acc * inv;
        if (cache) cache->mean_param_partials.row(k) << ga * inv, gb * inv, gg * inv, gz * inv;
    }
    return pooled;
}

} // namespace

Eigen::VectorXd forward_stream(const FeatureMap& t, const StreamParams& s) {
    s.validate();
    return power_normalize(pool_activated(t, s.activation, nullptr), s.power_p, s.power_lambda);
}

namespace {

Eigen::VectorXd concatenate_streams(std::span<const FeatureMap> maps, const ModelState& m,
                                    HeadCache* cache) {
    Eigen::VectorXd b(m.concatenated_dim());
    Eigen::Index offset = 0;
    if (cache) cache->streams.assign(maps.size(), {});
    for (std::size_t s = 0; s < maps.size(); ++s) {
        const auto& sp = m.streams[s];
        StreamCache* sc = cache ? &cache->streams[s] : nullptr;
        Eigen::VectorXd z = pool_activated(maps[s], sp.activation, sc);
        const auto d = z.size();
        b.segment(offset, d) = power_normalize(z, sp.power_p, sp.power_lambda);
        if (sc) sc->pooled = std::move(z);
        offset += d;
    }
    return b;
}

} // namespace

Eigen::VectorXd pre_projection(std::span<const FeatureMap> maps, const ModelState& m) {
    m.validate();
    check_maps(maps, m);
    return concatenate_streams(maps, m, nullptr);
}

Eigen::VectorXd forward_head(std::span<const FeatureMap> maps, const ModelState& m,
                             HeadCache* cache) {
    m.validate();
    check_maps(maps, m);
    if (cache) cache->valid = false;
    Eigen::VectorXd b = concatenate_streams(maps, m, cache);
    Eigen::VectorXd c = b + m.whitening.bias;
    Eigen::VectorXd d = m.whitening.projection * c;
    const double norm = d.norm();
    if (!(norm >= kDegenerateNorm)) {
        throw DegenerateDescriptorError("projected descriptor norm " + std::to_string(norm) +
                                        " is below 1e-12");
    }
    Eigen::VectorXd out = d / norm;
    if (cache) {
        cache->concatenated = std::move(b);
        cache->centered = std::move(c);
        cache->projected = std::move(d);
        cache->output = out;
        cache->norm = norm;
        cache->valid = true;
    }
    return out;
}

HeadGradients HeadGradients::zeros_like(const ModelState& m) {
    HeadGradients g;
    g.streams.assign(m.streams.size(), {});
    g.d_projection = Eigen::MatrixXd::Zero(m.whitening.out_dim(), m.whitening.in_dim());
    g.d_bias = Eigen::VectorXd::Zero(m.whitening.in_dim());
    return g;
}

HeadGradients& HeadGradients::operator+=(const HeadGradients& other) {
    if (other.streams.size() != streams.size() ||
        other.d_projection.rows() != d_projection.rows() ||
        other.d_projection.cols() != d_projection.cols()) {
        throw ShapeError("cannot accumulate gradients of differently shaped models");
    }
    for (std::size_t s = 0; s < streams.size(); ++s) {
        streams[s].d_alpha += other.streams[s].d_alpha;
        streams[s].d_beta += other.streams[s].d_beta;
        streams[s].d_gamma += other.streams[s].d_gamma;
        streams[s].d_zeta += other.streams[s].d_zeta;
        streams[s].d_power_p += other.streams[s].d_power_p;
        streams[s].d_power_lambda += other.streams[s].d_power_lambda;
    }
    d_projection += other.d_projection;
    d_bias += other.d_bias;
    return *this;
}

HeadGradients backward_head(std::span<const FeatureMap> maps, const ModelState& m,
                            const HeadCache& cache, const Eigen::VectorXd& upstream,
                            bool input_gradients) {
    if (!cache.valid) throw StateError("backward_head called without a forward cache");
    check_maps(maps, m);
    if (cache.streams.size() != m.streams.size() ||
        cache.centered.size() != m.whitening.in_dim()) {
        throw StateError("forward cache does not match the model");
    }
    if (upstream.size() != cache.output.size()) {
        throw ShapeError("upstream gradient has dimension " + std::to_string(upstream.size()) +
                         ", descriptor has " + std::to_string(cache.output.size()));
    }

    HeadGradients g = HeadGradients::zeros_like(m);

    // out = d / |d|
    const Eigen::VectorXd g_projected =
        (upstream - cache.output * cache.output.dot(upstream)) / cache.norm;
    g.d_projection.noalias() = g_projected * cache.centered.transpose();
    g.d_bias.noalias() = m.whitening.projection.transpose() * g_projected;
    const Eigen::VectorXd& g_concat = g.d_bias;

    if (input_gradients) g.d_maps.reserve(maps.size());
    Eigen::Index offset = 0;
    for (std::size_t s = 0; s < maps.size(); ++s) {
        const StreamParams& sp = m.streams[s];
        const StreamCache& sc = cache.streams[s];
        StreamGradients& sg = g.streams[s];
        const auto depth = sc.pooled.size();
        Eigen::VectorXd g_pooled(depth);
        for (Eigen::Index k = 0; k < depth; ++k) {
            const double gb = g_concat[offset + k];
            const double z = sc.pooled[k];
            const double zc = std::max(z, kPowerFloor);
            const double zp = std::pow(zc, sp.power_p);
            sg.d_power_lambda += gb * zp;
            sg.d_power_p += gb * sp.power_lambda * zp * std::log(zc);
            // Below the floor the normalized value is constant in z.
            g_pooled[k] = z >= kPowerFloor ? gb * sp.power_lambda * sp.power_p * zp / zc : 0.0;
        }
        const Eigen::Vector4d param_grads = sc.mean_param_partials.transpose() * g_pooled;
        sg.d_alpha = param_grads[0];
        sg.d_beta = param_grads[1];
        if (sp.activation.is_weibull()) {
            sg.d_gamma = param_grads[2];
            sg.d_zeta = param_grads[3];
        }
        if (input_gradients) {
            const FeatureMap& t = maps[s];
            const double inv = 1.0 / static_cast<double>(t.spatial_size());
            Eigen::VectorXd dx(static_cast<Eigen::Index>(t.size()));
            for (std::size_t k = 0; k < t.depth(); ++k) {
                const double scale = g_pooled[static_cast<Eigen::Index>(k)] * inv;
                const auto base = static_cast<Eigen::Index>(k * t.spatial_size());
                const auto ch = t.channel(k);
                for (Eigen::Index n = 0; n < ch.size(); ++n) {
                    dx[base + n] = scale * detail::evaluate_unchecked(ch[n], sp.activation).grad.d_input;
                }
            }
            g.d_maps.push_back(FeatureMap::unvalidated(t.width(), t.height(), t.depth(), std::move(dx)));
        }
        offset += depth;
    }
    return g;
}

WhiteningLayer fit_whitening(const Eigen::MatrixXd& samples, Eigen::Index out_dim, double epsilon) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index dim = samples.cols();
    if (out_dim < 1 || out_dim > dim) {
        throw ParameterError("whitening out_dim must lie in [1, " + std::to_string(dim) + "]");
    }
    if (n < out_dim + 1) {
        throw DataError("fit_whitening needs at least " + std::to_string(out_dim + 1) +
                        " samples, got " + std::to_string(n));
    }
    if (!samples.allFinite()) throw DataError("fit_whitening samples contain non-finite values");

    const Eigen::RowVectorXd mean = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");

    WhiteningLayer w;
    w.bias = -mean.transpose();
    w.projection.resize(out_dim, dim);
    // Eigen returns eigenvalues in ascending order.
    for (Eigen::Index r = 0; r < out_dim; ++r) {
        const Eigen::Index col = dim - 1 - r;
        const double ev = std::max(es.eigenvalues()[col], 0.0);
        w.projection.row(r) = es.eigenvectors().col(col).transpose() / std::sqrt(ev + epsilon);
    }
    return w;
}

Eigen::VectorXd compact_signature(const Eigen::VectorXd& d, Eigen::Index k) {
    if (k < 1 || k > d.size()) {
        throw ParameterError("compact_signature k=" + std::to_string(k) + " outside [1, " +
                             std::to_string(d.size()) + "]");
    }
    Eigen::VectorXd head = d.head(k);
    const double norm = head.norm();
    if (!(norm >= kDegenerateNorm)) {
        throw DegenerateDescriptorError("compact signature has zero norm");
    }
    return head / norm;
}

std::vector<std::string> parameter_names(const ModelState& m) {
    std::vector<std::string> names;
    for (std::size_t s = 0; s < m.streams.size(); ++s) {
        const std::string p = "stream[" + std::to_string(s) + "].";
        names.push_back(p + "alpha");
        names.push_back(p + "beta");
        if (m.streams[s].activation.is_weibull()) {
            names.push_back(p + "gamma");
            names.push_back(p + "zeta");
        }
        names.push_back(p + "power_p");
        names.push_back(p + "power_lambda");
    }
    for (Eigen::Index r = 0; r < m.whitening.out_dim(); ++r) {
        for (Eigen::Index c = 0; c < m.whitening.in_dim(); ++c) {
            names.push_back("whitening.projection[" + std::to_string(r) + "][" +
                            std::to_string(c) + "]");
        }
    }
    for (Eigen::Index c = 0; c < m.whitening.in_dim(); ++c) {
        names.push_back("whitening.bias[" + std::to_string(c) + "]");
    }
    return names;
}

namespace {

Eigen::Index parameter_count(const ModelState& m) {
    Eigen::Index n = 0;
    for (const auto& s : m.streams) n += static_cast<Eigen::Index>(s.activation.parameter_count()) + 2;
    return n + m.whitening.projection.size() + m.whitening.bias.size();
}

// Visits (stream scalars..., projection row-major, bias) in packing order.
template <typename StreamFn, typename MatrixFn, typename VectorFn>
void visit_layout(const ModelState& m, StreamFn&& on_stream, MatrixFn&& on_matrix,
                  VectorFn&& on_vector) {
    Eigen::Index pos = 0;
    for (std::size_t s = 0; s < m.streams.size(); ++s) {
        on_stream(s, pos);
        pos += static_cast<Eigen::Index>(m.streams[s].activation.parameter_count()) + 2;
    }
    on_matrix(pos);
    pos += m.whitening.projection.size();
    on_vector(pos);
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace

Eigen::VectorXd pack_parameters(const ModelState& m) {
    Eigen::VectorXd flat(parameter_count(m));
    const auto rows = m.whitening.out_dim(), cols = m.whitening.in_dim();
    visit_layout(
        m,
        [&](std::size_t s, Eigen::Index pos) {
            const auto& sp = m.streams[s];
            flat[pos++] = sp.activation.alpha;
            flat[pos++] = sp.activation.beta;
            if (sp.activation.is_weibull()) {
                flat[pos++] = sp.activation.gamma;
                flat[pos++] = sp.activation.zeta;
            }
            flat[pos++] = sp.power_p;
            flat[pos] = sp.power_lambda;
        },
        [&](Eigen::Index pos) {
            Eigen::Map<RowMajor>(flat.data() + pos, rows, cols) = m.whitening.projection;
        },
        [&](Eigen::Index pos) { flat.segment(pos, cols) = m.whitening.bias; });
    return flat;
}

void unpack_parameters(ModelState& m, const Eigen::VectorXd& flat) {
    if (flat.size() != parameter_count(m)) {
        throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) +
                         " entries, model has " + std::to_string(parameter_count(m)));
    }
    const auto rows = m.whitening.out_dim(), cols = m.whitening.in_dim();
    visit_layout(
        m,
        [&](std::size_t s, Eigen::Index pos) {
            auto& sp = m.streams[s];
            sp.activation.alpha = flat[pos++];
            sp.activation.beta = flat[pos++];
            if (sp.activation.is_weibull()) {
                sp.activation.gamma = flat[pos++];
                sp.activation.zeta = flat[pos++];
            }
            sp.power_p = flat[pos++];
            sp.power_lambda = flat[pos];
        },
        [&](Eigen::Index pos) {
            m.whitening.projection = Eigen::Map<const RowMajor>(flat.data() + pos, rows, cols);
        },
        [&](Eigen::Index pos) { m.whitening.bias = flat.segment(pos, cols); });
}

Eigen::VectorXd pack_gradients(const ModelState& m, const HeadGradients& g) {
    if (g.streams.size() != m.streams.size() || g.d_projection.rows() != m.whitening.out_dim() ||
        g.d_projection.cols() != m.whitening.in_dim()) {
        throw ShapeError("gradients do not match the model layout");
    }
    Eigen::VectorXd flat(parameter_count(m));
    const auto rows = m.whitening.out_dim(), cols = m.whitening.in_dim();
    visit_layout(
        m,
        [&](std::size_t s, Eigen::Index pos) {
            const auto& sg = g.streams[s];
            flat[pos++] = sg.d_alpha;
            flat[pos++] = sg.d_beta;
            if (m.streams[s].activation.is_weibull()) {
                flat[pos++] = sg.d_gamma;
                flat[pos++] = sg.d_zeta;
            }
            flat[pos++] = sg.d_power_p;
            flat[pos] = sg.d_power_lambda;
        },
        [&](Eigen::Index pos) {
            Eigen::Map<RowMajor>(flat.data() + pos, rows, cols) = g.d_projection;
        },
        [&](Eigen::Index pos) { flat.segment(pos, cols) = g.d_bias; });
    return flat;
}

} // namespace actnet
