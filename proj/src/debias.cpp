#include "cfdebias/debias.hpp"

#include <Eigen/Eigenvalues>

#include "cfdebias/counterfactual.hpp"

namespace cfdebias {

std::string_view to_string(DebiasMethod m)
{
    switch (m) {
    case DebiasMethod::Original: return "original";
    case DebiasMethod::Cf: return "cf";
    case DebiasMethod::CfLa: return "cf-la";
    case DebiasMethod::CfKa: return "cf-ka";
    case DebiasMethod::Hard: return "hard";
    }
    return "original";
}

std::optional<DebiasMethod> parse_debias_method(std::string_view s)
{
    for (auto m : {DebiasMethod::Original, DebiasMethod::Cf, DebiasMethod::CfLa, DebiasMethod::CfKa,
                   DebiasMethod::Hard})
        if (to_string(m) == s)
            return m;
    return std::nullopt;
}

NeutralReconstruction reconstruct_with_counterfactual(const ModelParams& params, const Eigen::MatrixXd& words)
{
    const LatentBatch latent = encode_batch(params, words);
    const Index n = words.cols();
    Eigen::MatrixXd z(params.latent_dim(), n), z_cf(params.latent_dim(), n);
    z << latent.semantic, latent.gender;
    z_cf << latent.semantic, generate_counterfactual(params.generator, latent.gender);
    return {mlp_apply(params.decoder, z), mlp_apply(params.decoder, z_cf)};
}

DebiasedTable postprocess(const EmbeddingTable& table, const VocabularyPartition& partition,
                          const ModelParams& params, DebiasMethod method)
{
    if (params.encoder.parameter_count() == 0 || params.generator.parameter_count() == 0)
        fail(ErrorCode::MissingParams, "post-processing needs trained encoder, decoder, classifier and generator");
    params.validate();
    if (params.embedding_dim() != table.dim())
        fail(ErrorCode::CheckpointMismatch, "model embedding width " + std::to_string(params.embedding_dim()) +
                                                " differs from table dimension " + std::to_string(table.dim()));
    if (static_cast<Index>(partition.roles().size()) != table.size())
        fail(ErrorCode::ShapeMismatch, "partition does not describe this table");

    Eigen::MatrixXd out(table.dim(), table.size());
    constexpr Index kChunk = 4096;
    for (Index begin = 0; begin < table.size(); begin += kChunk) {
        const Index len = std::min(kChunk, table.size() - begin);
        const Eigen::MatrixXd words = table.vectors().middleCols(begin, len);
        const auto rec = reconstruct_with_counterfactual(params, words);
        for (Index j = 0; j < len; ++j) {
            if (partition.role(begin + j) == WordRole::Neutral)
                out.col(begin + j) = (rec.counterfactual.col(j) + rec.original.col(j)) / 2.0;
            else
                out.col(begin + j) = rec.original.col(j);
        }
    }
    return {EmbeddingTable(table.words(), std::move(out)), method, checksum(table), 0};
}

Eigen::MatrixXd gender_subspace(const EmbeddingTable& table, std::span<const WordPair> pairs, Index components)
{
    if (pairs.empty())
        fail(ErrorCode::EmptyPairSet, "gender subspace needs at least one pair");
    if (components < 1 || components > table.dim())
        fail(ErrorCode::ConfigError, "subspace components must be in [1, d]");
    // the centred set {+-(w_m - w_f)/2} has zero mean, so its covariance is
    // proportional to sum diff diff^T
    Eigen::MatrixXd diffs(table.dim(), static_cast<Index>(pairs.size()));
    for (std::size_t i = 0; i < pairs.size(); ++i)
        diffs.col(static_cast<Index>(i)) = 0.5 * (table.vector(pairs[i].masculine) - table.vector(pairs[i].feminine));
    const Eigen::MatrixXd scatter = diffs * diffs.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scatter);
    const Index d = table.dim();
    if (solver.info() != Eigen::Success || !(solver.eigenvalues()[d - 1] > 1e-12 * std::max(1.0, scatter.trace())))
        fail(ErrorCode::DegenerateDirection, "pair differences carry no variance");
    if (components > 1 && !(solver.eigenvalues()[d - components] > 0.0))
        fail(ErrorCode::DegenerateDirection, "fewer non-degenerate gender directions than requested");
    return solver.eigenvectors().rightCols(components).rowwise().reverse();
}

DebiasedTable hard_debias(const EmbeddingTable& table, std::span<const WordPair> pairs,
                          std::span<const Index> neutral, Index components)
{
    const Eigen::MatrixXd basis = gender_subspace(table, pairs, components);
    Eigen::MatrixXd out = table.vectors();
    Index zeroed = 0;
    for (Index i : neutral) {
        const Eigen::VectorXd w = table.vector(i);
        Eigen::VectorXd projected = w - basis * (basis.transpose() * w);
        const double norm = projected.norm();
        // treat a residual at rounding level as exact parallelism
        if (norm <= 1e-12 * std::max(1.0, w.norm())) {
            projected.setZero();
            ++zeroed;
        } else {
            projected *= w.norm() / norm;
        }
        out.col(i) = projected;
    }
    return {EmbeddingTable(table.words(), std::move(out)), DebiasMethod::Hard, checksum(table), zeroed};
}

} // namespace cfdebias
