#pragma once

#include <span>
#include <string>
#include <vector>

#include "actnet/activation.hpp"
#include "actnet/pooling.hpp"
#include "actnet/tensor.hpp"

namespace actnet {

inline constexpr double kPowerPMin = 0.05;
inline constexpr double kPowerPMax = 1.0;
inline constexpr double kDegenerateNorm = 1e-12;
inline constexpr double kWhiteningEpsilon = 1e-6;

/// Learnables of one aggregation stream: activation, then average pooling,
/// then lambda * z^p.
struct StreamParams {
    ActivationParams<double> activation = ActivationParams<double>::defaults(ActivationFamily::Weibull);
    double power_p = 0.5;
    double power_lambda = 1.0;

    static StreamParams defaults(ActivationFamily family) {
        return {ActivationParams<double>::defaults(family), 0.5, 1.0};
    }

    void validate() const;
    void clamp_to_constraints();
};

/// PCA+whitening as a fully connected layer: projection * (b + bias).
struct WhiteningLayer {
    Eigen::MatrixXd projection;  // out_dim x in_dim
    Eigen::VectorXd bias;        // in_dim

    static WhiteningLayer identity(Eigen::Index dim);

    Eigen::Index in_dim() const { return projection.cols(); }
    Eigen::Index out_dim() const { return projection.rows(); }

    template <typename Derived>
    Eigen::VectorXd apply(const Eigen::MatrixBase<Derived>& b) const {
        return projection * (b + bias);
    }

    void validate() const;
};

/// The full trainable head: K streams feeding one whitening layer.
struct ModelState {
    std::vector<StreamParams> streams;
    WhiteningLayer whitening;
    std::vector<std::size_t> stream_input_depths;

    /// Streams with the family defaults and an identity whitening layer.
    static ModelState make(ActivationFamily family, std::vector<std::size_t> depths);

    std::size_t stream_count() const { return streams.size(); }
    Eigen::Index concatenated_dim() const;
    void validate() const;
    void clamp_to_constraints();
};

Eigen::VectorXd forward_stream(const FeatureMap& t, const StreamParams& s);

/// Intermediates kept by forward_head for the backward pass.
struct StreamCache {
    Eigen::VectorXd pooled;  // z, before power normalization
    // Row k holds the spatial means of d(theta)/d(alpha, beta, gamma, zeta) over channel k.
    Eigen::Matrix<double, Eigen::Dynamic, 4> mean_param_partials;
};

struct HeadCache {
    std::vector<StreamCache> streams;
    Eigen::VectorXd concatenated;
    Eigen::VectorXd centered;
    Eigen::VectorXd projected;
    Eigen::VectorXd output;
    double norm = 0;
    bool valid = false;
};

/// Concatenated stream outputs b, before the whitening layer.
Eigen::VectorXd pre_projection(std::span<const FeatureMap> maps, const ModelState& m);

/// Unit-norm global descriptor. Fills `cache` when provided.
Eigen::VectorXd forward_head(std::span<const FeatureMap> maps, const ModelState& m,
                             HeadCache* cache = nullptr);

struct StreamGradients {
    double d_alpha = 0;
    double d_beta = 0;
    double d_gamma = 0;
    double d_zeta = 0;
    double d_power_p = 0;
    double d_power_lambda = 0;
};

struct HeadGradients {
    std::vector<StreamGradients> streams;
    Eigen::MatrixXd d_projection;
    Eigen::VectorXd d_bias;
    std::vector<FeatureMap> d_maps;  // empty unless input gradients were requested

    static HeadGradients zeros_like(const ModelState& m);
    HeadGradients& operator+=(const HeadGradients& other);
};

/// Gradients of a scalar loss with respect to every learnable of m, given
/// d(loss)/d(output). `cache` must come from forward_head on the same maps and model.
HeadGradients backward_head(std::span<const FeatureMap> maps, const ModelState& m,
                            const HeadCache& cache, const Eigen::VectorXd& upstream,
                            bool input_gradients = false);

/// Fits PCA+whitening to row samples: bias = -mean, rows of the projection are
/// the covariance eigenvectors (descending eigenvalue) scaled by 1/sqrt(ev + epsilon).
WhiteningLayer fit_whitening(const Eigen::MatrixXd& samples, Eigen::Index out_dim,
                             double epsilon = kWhiteningEpsilon);

/// First k components, re-normalized to unit length.
Eigen::VectorXd compact_signature(const Eigen::VectorXd& d, Eigen::Index k);

/// Flat parameter view used by the optimizer. Order per stream: alpha, beta,
/// [gamma, zeta,] power_p, power_lambda; then projection (row-major), then bias.
std::vector<std::string> parameter_names(const ModelState& m);
Eigen::VectorXd pack_parameters(const ModelState& m);
void unpack_parameters(ModelState& m, const Eigen::VectorXd& flat);
Eigen::VectorXd pack_gradients(const ModelState& m, const HeadGradients& g);

} // namespace actnet
