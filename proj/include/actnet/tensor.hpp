#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>

#include "actnet/errors.hpp"

namespace actnet {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Global descriptor (pooled, projected or final).
using Descriptor = Eigen::VectorXd;

/// Dense W x H x D activation tensor.
///
/// Storage is channel-major with row-major slices: value (i, j, k) for
/// column i, row j and channel k lives at k*H*W + j*W + i. Every value is
/// finite and non-negative.
template <typename Scalar>
class Tensor3 {
public:
    Tensor3() = default;

    Tensor3(std::size_t width, std::size_t height, std::size_t depth)
        : width_(width), height_(height), depth_(depth),
          values_(Vector<Scalar>::Zero(static_cast<Eigen::Index>(width * height * depth))) {
        check_shape();
    }

    Tensor3(std::size_t width, std::size_t height, std::size_t depth, Vector<Scalar> values)
        : width_(width), height_(height), depth_(depth), values_(std::move(values)) {
        check_shape();
        for (Eigen::Index n = 0; n < values_.size(); ++n) {
            if (!std::isfinite(values_[n]) || values_[n] < Scalar(0)) {
                throw InputError("feature map value at index " + std::to_string(n) +
                                 " is negative or non-finite");
            }
        }
    }

    /// Same layout, but values may be negative (used for gradient tensors).
    static Tensor3 unvalidated(std::size_t width, std::size_t height, std::size_t depth,
                               Vector<Scalar> values) {
        Tensor3 out;
        out.width_ = width;
        out.height_ = height;
        out.depth_ = depth;
        out.values_ = std::move(values);
        out.check_shape();
        return out;
    }

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::size_t depth() const { return depth_; }
    std::size_t spatial_size() const { return width_ * height_; }
    std::size_t size() const { return width_ * height_ * depth_; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return (k * height_ + j) * width_ + i;
    }

    Scalar operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return values_[static_cast<Eigen::Index>(index(i, j, k))];
    }

    const Vector<Scalar>& values() const { return values_; }

    /// Contiguous W*H slice of channel k.
    auto channel(std::size_t k) const {
        return values_.segment(static_cast<Eigen::Index>(k * spatial_size()),
                               static_cast<Eigen::Index>(spatial_size()));
    }

    bool same_shape(const Tensor3& other) const {
        return width_ == other.width_ && height_ == other.height_ && depth_ == other.depth_;
    }

    template <typename Other>
    Tensor3<Other> cast() const {
        Tensor3<Other> out(width_, height_, depth_);
        out.values_ = values_.template cast<Other>();
        return out;
    }

private:
    template <typename>
    friend class Tensor3;
    template <typename S, typename F>
    friend Tensor3<S> tensor_map(const Tensor3<S>& t, F&& f);

    void check_shape() const {
        if (width_ == 0 || height_ == 0 || depth_ == 0) {
            throw ShapeError("feature map dimensions must be positive");
        }
        if (static_cast<std::size_t>(values_.size()) != width_ * height_ * depth_) {
            throw ShapeError("feature map holds " + std::to_string(values_.size()) +
                             " values, expected " + std::to_string(width_ * height_ * depth_));
        }
    }

    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::size_t depth_ = 0;
    Vector<Scalar> values_;
};

using FeatureMap = Tensor3<double>;

/// Element-wise application of f. The output is not re-validated: f may map
/// outside the non-negative range (e.g. in gradient tensors).
template <typename Scalar, typename F>
Tensor3<Scalar> tensor_map(const Tensor3<Scalar>& t, F&& f) {
    Tensor3<Scalar> out;
    out.width_ = t.width_;
    out.height_ = t.height_;
    out.depth_ = t.depth_;
    out.values_ = t.values_.unaryExpr(std::forward<F>(f));
    return out;
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar euclidean_distance(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size()) {
        throw ShapeError("euclidean_distance: dimension mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
    }
    return (a - b).norm();
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar squared_distance(const Eigen::MatrixBase<DerivedA>& a,
                                           const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size()) {
        throw ShapeError("squared_distance: dimension mismatch");
    }
    return (a - b).squaredNorm();
}

} // namespace actnet
