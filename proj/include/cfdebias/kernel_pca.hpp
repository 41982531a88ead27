#pragma once

#include <optional>

#include <Eigen/Dense>

#include "cfdebias/error.hpp"

namespace cfdebias {

enum class KernelKind { Rbf, Linear };

/// k(x, y) = exp(-|x - y|^2 / (2 sigma^2)) for Rbf, x . y for Linear.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar kernel_value(KernelKind kind, typename DerivedA::Scalar sigma,
                                       const Eigen::MatrixBase<DerivedA>& x, const Eigen::MatrixBase<DerivedB>& y)
{
    using Scalar = typename DerivedA::Scalar;
    if (kind == KernelKind::Linear)
        return x.dot(y);
    return std::exp(-(x - y).squaredNorm() / (Scalar(2) * sigma * sigma));
}

/// Kernel PCA over a fixed anchor set.
///
/// The N x N kernel matrix is double-centered before the symmetric
/// eigendecomposition. Each kept eigenvector u_k of the centered matrix
/// (eigenvalue mu_k = N lambda_k) is stored as a_k = u_k / sqrt(mu_k), so
/// that PC_k(x) = sum_i a_k[i] k~(anchor_i, x) is the projection of f(x) on
/// a unit-norm feature-space axis. Eigenvector signs are fixed by making
/// the largest-magnitude entry of each u_k positive.
struct KernelPcaModel {
    KernelKind kind = KernelKind::Rbf;
    double sigma = 1.0;               ///< RBF bandwidth (unused for Linear)
    Eigen::MatrixXd anchors;          ///< d x N
    Eigen::MatrixXd coeffs;           ///< N x K, column k is a_k
    Eigen::VectorXd eigenvalues;      ///< K eigenvalues of the centered kernel, descending
    Eigen::VectorXd kernel_col_means; ///< (1/N) sum_j K(anchor_j, anchor_i)
    double kernel_grand_mean = 0.0;   ///< (1/N^2) sum_ij K_ij

    Eigen::Index components() const { return coeffs.cols(); }
    Eigen::Index anchor_count() const { return anchors.cols(); }
};

/// Median of pairwise Euclidean distances between anchor columns.
double median_pairwise_distance(const Eigen::MatrixXd& anchors);

/// Fits on the columns of `anchors`. `sigma` defaults to the median
/// heuristic. Components whose eigenvalue is <= 1e-12 are dropped, so the
/// model may hold fewer than `top_k` components.
KernelPcaModel kernel_pca_fit(const Eigen::MatrixXd& anchors, KernelKind kind, std::optional<double> sigma,
                              Eigen::Index top_k);

/// Centered kernel vector k~(anchor_i, x), i = 1..N.
Eigen::VectorXd centered_kernel_vector(const KernelPcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// PC_k(x) for one component; throws IndexOutOfRange.
double kernel_pc(const KernelPcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Index k);

/// All K components of PC(x).
Eigen::VectorXd kernel_pcs(const KernelPcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Gradient of sum_k PC_k(x) with respect to x.
Eigen::VectorXd kernel_pc_sum_gradient(const KernelPcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

} // namespace cfdebias
