#include "cfdebias/kernel_pca.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

namespace cfdebias {

double median_pairwise_distance(const Eigen::MatrixXd& anchors)
{
    const Eigen::Index n = anchors.cols();
    if (n < 2)
        fail(ErrorCode::TooFewAnchors, "median distance needs at least two anchors");
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            d.push_back((anchors.col(i) - anchors.col(j)).norm());
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    if (d.size() % 2 == 1)
        return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(d.begin(), mid);
    return 0.5 * (lower + upper);
}

KernelPcaModel kernel_pca_fit(const Eigen::MatrixXd& anchors, KernelKind kind, std::optional<double> sigma,
                              Eigen::Index top_k)
{
    const Eigen::Index n = anchors.cols();
    if (n < 2)
        fail(ErrorCode::TooFewAnchors, "kernel PCA needs at least two anchors, got " + std::to_string(n));
    if (top_k < 1 || top_k > n)
        fail(ErrorCode::ConfigError, "top_k must be in [1, N]");

    KernelPcaModel model;
    model.kind = kind;
    model.anchors = anchors;
    if (kind == KernelKind::Rbf) {
        model.sigma = sigma ? *sigma : median_pairwise_distance(anchors);
        if (!(model.sigma > 0.0) || !std::isfinite(model.sigma))
            fail(ErrorCode::DegenerateKernel, "RBF bandwidth must be positive (anchors coincide?)");
    }

    Eigen::MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i)
            k(i, j) = k(j, i) = kernel_value(kind, model.sigma, anchors.col(i), anchors.col(j));

    model.kernel_col_means = k.colwise().mean().transpose();
    model.kernel_grand_mean = k.mean();
    // K' = K - 1K - K1 + 1K1
    Eigen::MatrixXd centered = k;
    centered.rowwise() -= model.kernel_col_means.transpose();
    centered.colwise() -= model.kernel_col_means;
    centered.array() += model.kernel_grand_mean;
    centered = 0.5 * (centered + centered.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(centered);
    if (solver.info() != Eigen::Success)
        fail(ErrorCode::DegenerateKernel, "symmetric eigensolver did not converge");
    // ascending order from the solver; walk from the top
    const Eigen::VectorXd& values = solver.eigenvalues();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = n - 1; c >= 0 && static_cast<Eigen::Index>(keep.size()) < top_k; --c)
        if (values[c] > 1e-12)
            keep.push_back(c);
    if (keep.empty())
        fail(ErrorCode::DegenerateKernel, "all centered kernel eigenvalues are <= 1e-12");

    const auto kept = static_cast<Eigen::Index>(keep.size());
    model.coeffs.resize(n, kept);
    model.eigenvalues.resize(kept);
    for (Eigen::Index c = 0; c < kept; ++c) {
        Eigen::VectorXd u = solver.eigenvectors().col(keep[static_cast<std::size_t>(c)]);
        Eigen::Index arg = 0;
        u.cwiseAbs().maxCoeff(&arg);
        if (u[arg] < 0.0)
            u = -u;
        const double mu = values[keep[static_cast<std::size_t>(c)]];
        model.eigenvalues[c] = mu;
        model.coeffs.col(c) = u / std::sqrt(mu);
    }
    return model;
}

Eigen::VectorXd centered_kernel_vector(const KernelPcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    if (x.size() != model.anchors.rows())
        fail(ErrorCode::ShapeMismatch, "kernel PCA input has wrong dimension");
    const Eigen::Index n = model.anchor_count();
    Eigen::VectorXd kx(n);
    for (Eigen::Index i = 0; i < n; ++i)
        kx[i] = kernel_value(model.kind, model.sigma, model.anchors.col(i), x);
    const double mean = kx.mean();
    return (kx.array() - mean - model.kernel_col_means.array() + model.kernel_grand_mean).matrix();
}

double kernel_pc(const KernelPcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Index k)
{
    if (k < 0 || k >= model.components())
        fail(ErrorCode::IndexOutOfRange, "component " + std::to_string(k) + " of " +
                                             std::to_string(model.components()));
    return model.coeffs.col(k).dot(centered_kernel_vector(model, x));
}

Eigen::VectorXd kernel_pcs(const KernelPcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    return model.coeffs.transpose() * centered_kernel_vector(model, x);
}

Eigen::VectorXd kernel_pc_sum_gradient(const KernelPcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    // d/dx of sum_i c_i k~_i(x) with k~_i = k_i - mean_j k_j - const:
    // sum_i (c_i - mean(c)) dk_i/dx, where c = sum_k a_k
    const Eigen::VectorXd c = model.coeffs.rowwise().sum();
    const Eigen::VectorXd w = (c.array() - c.mean()).matrix();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index i = 0; i < model.anchor_count(); ++i) {
        if (model.kind == KernelKind::Linear) {
            grad += w[i] * model.anchors.col(i);
        } else {
            const double kv = kernel_value(model.kind, model.sigma, model.anchors.col(i), x);
            grad += w[i] * kv / (model.sigma * model.sigma) * (model.anchors.col(i) - x);
        }
    }
    return grad;
}

} // namespace cfdebias
