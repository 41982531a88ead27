#include "cfdebias/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace cfdebias {

void CfWeights::validate() const
{
    for (double w : {mo, mi, la, ka})
        if (!std::isfinite(w) || w < 0.0)
            fail(ErrorCode::ConfigError, "counterfactual weights must be finite and non-negative");
    if (alignment == Alignment::Kernel && top_k < 1)
        fail(ErrorCode::ConfigError, "kernel alignment needs top_k >= 1");
    if (rbf_sigma && !(*rbf_sigma > 0.0))
        fail(ErrorCode::ConfigError, "RBF bandwidth must be positive");
}

Eigen::MatrixXd reconstructed_differences(const ModelParams& params, const EmbeddingTable& table,
                                          std::span<const WordPair> pairs)
{
    std::vector<Index> fem, masc;
    for (const auto& p : pairs) {
        fem.push_back(p.feminine);
        masc.push_back(p.masculine);
    }
    return reconstruct(params, table.gather(masc)) - reconstruct(params, table.gather(fem));
}

Eigen::VectorXd gender_direction(const ModelParams& params, const EmbeddingTable& table,
                                 std::span<const WordPair> pairs)
{
    if (pairs.empty())
        fail(ErrorCode::EmptyPairSet, "gender direction needs at least one pair");
    return reconstructed_differences(params, table, pairs).rowwise().mean();
}

Eigen::MatrixXd generate_counterfactual(const MlpParams& generator, const Eigen::MatrixXd& gender_latent)
{
    return mlp_apply(generator, gender_latent);
}

AlignmentModel prepare_alignment(const ModelParams& params, const EmbeddingTable& table,
                                 std::span<const WordPair> pairs, const CfWeights& weights, KernelKind kernel)
{
    AlignmentModel model;
    switch (weights.alignment) {
    case Alignment::None:
        break;
    case Alignment::Linear:
        model.direction = gender_direction(params, table, pairs);
        break;
    case Alignment::Kernel: {
        if (pairs.empty())
            fail(ErrorCode::EmptyPairSet, "kernel alignment needs anchor pairs");
        const Eigen::MatrixXd anchors = reconstructed_differences(params, table, pairs);
        const Index top_k = std::min<Index>(weights.top_k, anchors.cols());
        model.kernel = kernel_pca_fit(anchors, kernel, weights.rbf_sigma, top_k);
        break;
    }
    }
    return model;
}

namespace {

template <bool WithGradient>
CfGradients evaluate_cf(const EmbeddingTable& table, std::span<const Index> neutral, const ModelParams& params,
                        const CfWeights& weights, const AlignmentModel& alignment)
{
    if (neutral.empty())
        fail(ErrorCode::EmptyBatch, "counterfactual batch has no neutral words");
    if (weights.alignment == Alignment::Linear && !alignment.direction)
        fail(ErrorCode::MissingAlignmentModel, "linear alignment requested without a gender direction");
    if (weights.alignment == Alignment::Kernel && !alignment.kernel)
        fail(ErrorCode::MissingAlignmentModel, "kernel alignment requested without a kernel PCA model");

    const Index k = params.gender_dim;
    const Eigen::MatrixXd words = table.gather(neutral);
    const LatentBatch latent = encode_batch(params, words);
    const Index n = words.cols();

    CfGradients out;
    const Eigen::MatrixXd p_orig = mlp_apply(params.classifier, latent.gender);
    const auto gen = mlp_forward(params.generator, latent.gender);
    const Eigen::MatrixXd& flipped = gen.output;

    // modification: C_r(flipped) should read 1 - C_r(original)
    const auto cls = mlp_forward(params.classifier, flipped);
    const Eigen::MatrixXd mo_residual = cls.output - (Eigen::MatrixXd::Ones(1, n) - p_orig);
    out.loss.mo = mo_residual.squaredNorm();

    // minimal change
    const Eigen::MatrixXd mi_residual = flipped - latent.gender;
    out.loss.mi = mi_residual.squaredNorm();

    Eigen::MatrixXd d_flipped;
    if constexpr (WithGradient) {
        d_flipped = mlp_backward(params.classifier, cls.cache, Eigen::MatrixXd(2.0 * weights.mo * mo_residual)).dx;
        d_flipped += 2.0 * weights.mi * mi_residual;
    }

    double align_weight = 0.0;
    if (weights.alignment != Alignment::None) {
        Eigen::MatrixXd z_orig(params.latent_dim(), n), z_cf(params.latent_dim(), n);
        z_orig << latent.semantic, latent.gender;
        z_cf << latent.semantic, flipped;
        const Eigen::MatrixXd w_orig = mlp_apply(params.decoder, z_orig);
        const auto dec_cf = mlp_forward(params.decoder, z_cf);
        const Eigen::MatrixXd shift = w_orig - dec_cf.output;

        Eigen::MatrixXd d_wcf(shift.rows(), n);
        if (weights.alignment == Alignment::Linear) {
            align_weight = weights.la;
            const Eigen::VectorXd& v = *alignment.direction;
            if (v.size() != shift.rows())
                fail(ErrorCode::ShapeMismatch, "gender direction length differs from embedding dimension");
            for (Index j = 0; j < n; ++j) {
                const double s = v.dot(shift.col(j));
                out.loss.align -= std::abs(s);
                // d(-|s|)/d shift = -sign(s) v ; shift = w_orig - w_cf
                const double sign = (s > 0.0) - (s < 0.0);
                d_wcf.col(j) = align_weight * sign * v;
            }
        } else {
            align_weight = weights.ka;
            const KernelPcaModel& kpca = *alignment.kernel;
            for (Index j = 0; j < n; ++j) {
                out.loss.align -= kernel_pcs(kpca, shift.col(j)).sum();
                if constexpr (WithGradient)
                    d_wcf.col(j) = align_weight * kernel_pc_sum_gradient(kpca, shift.col(j));
            }
        }
        if constexpr (WithGradient)
            d_flipped += mlp_backward(params.decoder, dec_cf.cache, d_wcf).dx.bottomRows(k);
    }

    out.loss.total = weights.mo * out.loss.mo + weights.mi * out.loss.mi + align_weight * out.loss.align;
    if constexpr (WithGradient)
        out.generator = mlp_backward(params.generator, gen.cache, d_flipped).grads;
    return out;
}

} // namespace

CfComponents loss_cf(const EmbeddingTable& table, std::span<const Index> neutral, const ModelParams& params,
                     const CfWeights& weights, const AlignmentModel& alignment)
{
    return evaluate_cf<false>(table, neutral, params, weights, alignment).loss;
}

CfGradients loss_cf_gradients(const EmbeddingTable& table, std::span<const Index> neutral,
                              const ModelParams& params, const CfWeights& weights, const AlignmentModel& alignment)
{
    return evaluate_cf<true>(table, neutral, params, weights, alignment);
}

// --- training ---------------------------------------------------------------------

CounterfactualTrainer::CounterfactualTrainer(const EmbeddingTable& table, const VocabularyPartition& partition,
                                             ModelParams& params, const CfWeights& weights,
                                             const CounterfactualConfig& config, std::mt19937_64& rng)
    : table_(table), partition_(partition), params_(params), weights_(weights), config_(config), rng_(rng),
      opt_(params.generator, config.adam), order_(partition.neutral())
{
    weights_.validate();
    params_.validate();
    if (config_.batch_size < 1)
        fail(ErrorCode::ConfigError, "batch size must be >= 1");
    if (order_.empty())
        fail(ErrorCode::EmptyBatch, "no neutral words to train the counterfactual generator on");
    refresh_alignment();
}

void CounterfactualTrainer::refresh_alignment()
{
    alignment_ = prepare_alignment(params_, table_, partition_.train_pairs(), weights_, config_.kernel);
}

CfComponents CounterfactualTrainer::run_epoch(double schedule_weight)
{
    std::shuffle(order_.begin(), order_.end(), rng_);
    CfComponents epoch_loss;
    const auto bs = static_cast<std::size_t>(config_.batch_size);
    for (std::size_t begin = 0, step = 0; begin < order_.size(); begin += bs, ++step) {
        const auto len = std::min(bs, order_.size() - begin);
        const std::span<const Index> batch(order_.data() + begin, len);
        auto g = loss_cf_gradients(table_, batch, params_, weights_, alignment_);
        if (!std::isfinite(g.loss.total))
            fail(ErrorCode::NonFiniteLoss, "counterfactual loss is not finite at epoch " + std::to_string(epoch_) +
                                               ", step " + std::to_string(step));
        epoch_loss += g.loss;
        g.generator *= schedule_weight / static_cast<double>(len);
        opt_.step(params_.generator, g.generator);
    }
    ++epoch_;
    return epoch_loss;
}

std::vector<CfEpoch> train_counterfactual(const EmbeddingTable& table, const VocabularyPartition& partition,
                                          ModelParams& params, const CfWeights& weights,
                                          const CounterfactualConfig& config, std::mt19937_64& rng)
{
    if (config.epochs < 1)
        fail(ErrorCode::ConfigError, "counterfactual epochs must be >= 1");
    CounterfactualTrainer trainer(table, partition, params, weights, config, rng);
    std::vector<CfEpoch> trace;
    for (Index e = 0; e < config.epochs; ++e)
        trace.push_back({e, trainer.run_epoch()});
    return trace;
}

void write_cf_trace(std::ostream& out, const std::vector<CfEpoch>& trace)
{
    out << "epoch,L_total,L_mo,L_mi,L_align\n";
    char buf[160];
    for (const auto& e : trace) {
        std::snprintf(buf, sizeof buf, "%lld,%.10g,%.10g,%.10g,%.10g\n", static_cast<long long>(e.epoch),
                      e.loss.total, e.loss.mo, e.loss.mi, e.loss.align);
        out << buf;
    }
}

} // namespace cfdebias
