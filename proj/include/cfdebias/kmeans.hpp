#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace cfdebias {

struct KMeansConfig {
    Eigen::Index restarts = 10;
    Eigen::Index max_iterations = 100;
    std::uint64_t seed = 0;
};

struct KMeansResult {
    std::vector<Eigen::Index> labels;
    Eigen::MatrixXd centroids; ///< d x k
    double inertia = 0.0;
    Eigen::Index iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding over the columns of `points`;
/// the restart with the lowest inertia wins (earliest on ties). Iteration
/// stops when no assignment changes.
KMeansResult kmeans(const Eigen::MatrixXd& points, Eigen::Index k, const KMeansConfig& config);

} // namespace cfdebias
