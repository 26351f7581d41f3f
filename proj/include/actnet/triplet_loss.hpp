#pragma once

#include <algorithm>

#include "actnet/errors.hpp"
#include "actnet/tensor.hpp"

namespace actnet {

/// 0.5 * (t + |q - m|^2 - |q - n|^2) before the hinge.
template <typename DQ, typename DM, typename DN>
double triplet_hinge(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DM>& m,
                     const Eigen::MatrixBase<DN>& n, double margin) {
    if (q.size() != m.size() || q.size() != n.size()) throw ShapeError("triplet dimension mismatch");
    if (!(margin > 0)) throw ParameterError("triplet margin must be positive");
    return margin + (q - m).squaredNorm() - (q - n).squaredNorm();
}

/// L = 0.5 * max(0, t + |q - m|^2 - |q - n|^2).
template <typename DQ, typename DM, typename DN>
double triplet_loss(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DM>& m,
                    const Eigen::MatrixBase<DN>& n, double margin) {
    return 0.5 * std::max(0.0, triplet_hinge(q, m, n, margin));
}

struct TripletLossGradients {
    Eigen::VectorXd d_query;
    Eigen::VectorXd d_match;
    Eigen::VectorXd d_nonmatch;
};

/// Zero at and below the hinge.
template <typename DQ, typename DM, typename DN>
TripletLossGradients triplet_loss_gradients(const Eigen::MatrixBase<DQ>& q,
                                            const Eigen::MatrixBase<DM>& m,
                                            const Eigen::MatrixBase<DN>& n, double margin) {
    TripletLossGradients g;
    if (triplet_hinge(q, m, n, margin) <= 0) {
        g.d_query = Eigen::VectorXd::Zero(q.size());
        g.d_match = Eigen::VectorXd::Zero(q.size());
        g.d_nonmatch = Eigen::VectorXd::Zero(q.size());
        return g;
    }
    g.d_query = n - m;
    g.d_match = m - q;
    g.d_nonmatch = q - n;
    return g;
}

} // namespace actnet
