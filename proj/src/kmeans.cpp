#include "cfdebias/kmeans.hpp"

#include <limits>
#include <random>

#include "cfdebias/error.hpp"

namespace cfdebias {

namespace {

using Index = Eigen::Index;

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& x, Index k, std::mt19937_64& rng)
{
    const Index n = x.cols();
    Eigen::MatrixXd c(x.rows(), k);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    c.col(0) = x.col(pick(rng));
    Eigen::VectorXd d2 = (x.colwise() - c.col(0)).colwise().squaredNorm().transpose();
    for (Index j = 1; j < k; ++j) {
        const double total = d2.sum();
        Index chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng);
            chosen = n - 1;
            for (Index i = 0; i < n; ++i) {
                r -= d2[i];
                if (r < 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        c.col(j) = x.col(chosen);
        d2 = d2.cwiseMin((x.colwise() - c.col(j)).colwise().squaredNorm().transpose());
    }
    return c;
}

KMeansResult lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd centroids, Index max_iterations)
{
    const Index n = x.cols();
    const Index k = centroids.cols();
    KMeansResult r;
    r.labels.assign(static_cast<std::size_t>(n), -1);
    for (Index it = 0; it < max_iterations; ++it) {
        bool changed = false;
        for (Index i = 0; i < n; ++i) {
            Index best = 0;
            (centroids.colwise() - x.col(i)).colwise().squaredNorm().minCoeff(&best);
            if (r.labels[static_cast<std::size_t>(i)] != best) {
                r.labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        r.iterations = it + 1;
        if (!changed)
            break;

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(x.rows(), k);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
        for (Index i = 0; i < n; ++i) {
            sums.col(r.labels[static_cast<std::size_t>(i)]) += x.col(i);
            counts[r.labels[static_cast<std::size_t>(i)]] += 1.0;
        }
        for (Index j = 0; j < k; ++j) {
            if (counts[j] > 0.0) {
                centroids.col(j) = sums.col(j) / counts[j];
            } else {
                // re-seed an empty cluster at the worst-fit point
                Index far = 0;
                Eigen::VectorXd dist(n);
                for (Index i = 0; i < n; ++i)
                    dist[i] = (x.col(i) - centroids.col(r.labels[static_cast<std::size_t>(i)])).squaredNorm();
                dist.maxCoeff(&far);
                centroids.col(j) = x.col(far);
            }
        }
    }
    r.inertia = 0.0;
    for (Index i = 0; i < n; ++i)
        r.inertia += (x.col(i) - centroids.col(r.labels[static_cast<std::size_t>(i)])).squaredNorm();
    r.centroids = std::move(centroids);
    return r;
}

} // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, Index k, const KMeansConfig& config)
{
    if (k < 1 || k > points.cols())
        fail(ErrorCode::ConfigError, "k-means needs 1 <= k <= number of points");
    if (config.restarts < 1 || config.max_iterations < 1)
        fail(ErrorCode::ConfigError, "k-means restarts and iterations must be >= 1");
    std::mt19937_64 rng(config.seed);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (Index r = 0; r < config.restarts; ++r) {
        auto run = lloyd(points, seed_plus_plus(points, k, rng), config.max_iterations);
        if (run.inertia < best.inertia)
            best = std::move(run);
    }
    return best;
}

} // namespace cfdebias
