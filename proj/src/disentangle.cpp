#include "cfdebias/disentangle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace cfdebias {

namespace {

std::vector<Index> batch_rows(const LdBatch& batch)
{
    std::vector<Index> rows;
    rows.reserve(static_cast<std::size_t>(batch.word_count()));
    for (const auto& p : batch.pairs)
        rows.push_back(p.feminine);
    for (const auto& p : batch.pairs)
        rows.push_back(p.masculine);
    rows.insert(rows.end(), batch.neutral.begin(), batch.neutral.end());
    return rows;
}

struct BceTerm {
    double loss;
    double grad; // d loss / d p
};

// Masculine words carry label 1, feminine words label 0.
BceTerm bce(double p, bool masculine)
{
    const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
    const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    if (masculine)
        return {-std::log(pc), clamped ? 0.0 : -1.0 / pc};
    return {-std::log(1.0 - pc), clamped ? 0.0 : 1.0 / (1.0 - pc)};
}

} // namespace

void DisentangleWeights::validate() const
{
    for (double w : {se, ge, di, re, adversarial})
        if (!std::isfinite(w) || w < 0.0)
            fail(ErrorCode::ConfigError, "disentanglement weights must be finite and non-negative");
}

LdComponents loss_ld(const EmbeddingTable& table, const LdBatch& batch, const ModelParams& params,
                     const DisentangleWeights& weights, const MlpParams* target_encoder)
{
    const Index n_pairs = static_cast<Index>(batch.pairs.size());
    if (batch.word_count() == 0)
        fail(ErrorCode::EmptyBatch, "disentanglement batch has no words");
    const auto rows = batch_rows(batch);
    const Eigen::MatrixXd words = table.gather(rows);
    const Eigen::MatrixXd z = mlp_apply(params.encoder, words);
    const Index s = params.semantic_dim();
    const Index k = params.gender_dim;

    LdComponents c;
    if (n_pairs > 0) {
        c.se = (z.block(0, n_pairs, s, n_pairs) - z.block(0, 0, s, n_pairs)).squaredNorm();
        const Eigen::MatrixXd p = mlp_apply(params.classifier, Eigen::MatrixXd(z.block(s, 0, k, 2 * n_pairs)));
        for (Index j = 0; j < 2 * n_pairs; ++j)
            c.ge += bce(p(0, j), j >= n_pairs).loss;
    }

    Eigen::MatrixXd target = z.bottomRows(k);
    if (target_encoder)
        target = mlp_apply(*target_encoder, words).bottomRows(k);
    c.di = (mlp_apply(params.adversary, Eigen::MatrixXd(z.topRows(s))) - target).squaredNorm();
    c.re = (mlp_apply(params.decoder, z) - words).squaredNorm();
    c.total = weights.se * c.se + weights.ge * c.ge + weights.di * c.di + weights.re * c.re;
    return c;
}

LdGradients loss_ld_gradients(const EmbeddingTable& table, const LdBatch& batch, const ModelParams& params,
                              const DisentangleWeights& weights, GrlMode mode)
{
    const Index n_pairs = static_cast<Index>(batch.pairs.size());
    const Index n_words = batch.word_count();
    if (n_words == 0)
        fail(ErrorCode::EmptyBatch, "disentanglement batch has no words");
    const auto rows = batch_rows(batch);
    const Eigen::MatrixXd words = table.gather(rows);
    const Index s = params.semantic_dim();
    const Index k = params.gender_dim;

    const auto enc = mlp_forward(params.encoder, words);
    const Eigen::MatrixXd& z = enc.output;
    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(z.rows(), n_words);

    LdGradients g;
    g.classifier = Gradient::zeros_like(params.classifier);

    if (n_pairs > 0) {
        // siamese semantic equality
        const Eigen::MatrixXd diff = z.block(0, n_pairs, s, n_pairs) - z.block(0, 0, s, n_pairs);
        g.loss.se = diff.squaredNorm();
        dz.block(0, n_pairs, s, n_pairs) += 2.0 * weights.se * diff;
        dz.block(0, 0, s, n_pairs) -= 2.0 * weights.se * diff;

        // gender classification on z^g of pair members
        const auto cls = mlp_forward(params.classifier, Eigen::MatrixXd(z.block(s, 0, k, 2 * n_pairs)));
        Eigen::MatrixXd dp(1, 2 * n_pairs);
        for (Index j = 0; j < 2 * n_pairs; ++j) {
            const auto term = bce(cls.output(0, j), j >= n_pairs);
            g.loss.ge += term.loss;
            dp(0, j) = weights.ge * term.grad;
        }
        auto back = mlp_backward(params.classifier, cls.cache, dp);
        g.classifier = std::move(back.grads);
        dz.block(s, 0, k, 2 * n_pairs) += back.dx;
    }

    // adversary regresses z^g (held constant) from z^s behind the GRL
    {
        const auto adv = mlp_forward(params.adversary, Eigen::MatrixXd(z.topRows(s)));
        const Eigen::MatrixXd residual = adv.output - z.bottomRows(k);
        g.loss.di = residual.squaredNorm();
        auto back = mlp_backward(params.adversary, adv.cache, Eigen::MatrixXd(2.0 * residual));
        g.adversary = std::move(back.grads);
        g.adversary *= weights.di;
        if (mode == GrlMode::Enabled)
            dz.topRows(s) += grl_backward(back.dx, weights.adversarial);
    }

    // reconstruction
    {
        const auto dec = mlp_forward(params.decoder, z);
        const Eigen::MatrixXd residual = dec.output - words;
        g.loss.re = residual.squaredNorm();
        auto back = mlp_backward(params.decoder, dec.cache, Eigen::MatrixXd(2.0 * weights.re * residual));
        g.decoder = std::move(back.grads);
        dz += back.dx;
    }

    g.encoder = mlp_backward(params.encoder, enc.cache, dz).grads;
    g.loss.total = weights.se * g.loss.se + weights.ge * g.loss.ge + weights.di * g.loss.di + weights.re * g.loss.re;
    return g;
}

Gradient semantic_adversary_gradient(const EmbeddingTable& table, const LdBatch& batch, const ModelParams& params)
{
    if (batch.word_count() == 0)
        fail(ErrorCode::EmptyBatch, "disentanglement batch has no words");
    const Eigen::MatrixXd words = table.gather(batch_rows(batch));
    const Index s = params.semantic_dim();
    const Index k = params.gender_dim;

    const auto enc = mlp_forward(params.encoder, words);
    const auto adv = mlp_forward(params.adversary, Eigen::MatrixXd(enc.output.topRows(s)));
    const Eigen::MatrixXd residual = adv.output - enc.output.bottomRows(k);
    const auto back = mlp_backward(params.adversary, adv.cache, Eigen::MatrixXd(2.0 * residual));

    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(enc.output.rows(), enc.output.cols());
    dz.topRows(s) = back.dx;
    return mlp_backward(params.encoder, enc.cache, dz).grads;
}

// --- training ---------------------------------------------------------------------

DisentangleTrainer::DisentangleTrainer(const EmbeddingTable& table, const VocabularyPartition& partition,
                                       ModelParams& params, const DisentangleWeights& weights,
                                       const DisentangleConfig& config, std::mt19937_64& rng)
    : table_(table), partition_(partition), params_(params), weights_(weights), config_(config), rng_(rng),
      opt_encoder_(params.encoder, config.adam), opt_decoder_(params.decoder, config.adam),
      opt_classifier_(params.classifier, config.adam), opt_adversary_(params.adversary, config.adam),
      neutral_order_(partition.neutral()), pair_stream_(partition.train_pairs())
{
    weights_.validate();
    params_.validate();
    if (config_.batching.batch_size < 1 || config_.batching.pair_batch_size < 1)
        fail(ErrorCode::ConfigError, "batch sizes must be >= 1");
    if (params_.embedding_dim() != table_.dim())
        fail(ErrorCode::ShapeMismatch, "encoder input width differs from embedding dimension");
    if (neutral_order_.empty() && pair_stream_.empty())
        fail(ErrorCode::EmptyBatch, "no training pairs and no neutral words");
    pair_cursor_ = pair_stream_.size(); // forces a shuffle on first draw
}

LdBatch DisentangleTrainer::next_batch(Index step, Index)
{
    LdBatch batch;
    const auto bs = static_cast<std::size_t>(config_.batching.batch_size);
    const auto begin = static_cast<std::size_t>(step) * bs;
    if (begin < neutral_order_.size()) {
        const auto end = std::min(neutral_order_.size(), begin + bs);
        batch.neutral.assign(neutral_order_.begin() + static_cast<std::ptrdiff_t>(begin),
                             neutral_order_.begin() + static_cast<std::ptrdiff_t>(end));
    }
    const auto want = std::min(pair_stream_.size(), static_cast<std::size_t>(config_.batching.pair_batch_size));
    while (batch.pairs.size() < want) {
        if (pair_cursor_ >= pair_stream_.size()) {
            std::shuffle(pair_stream_.begin(), pair_stream_.end(), rng_);
            pair_cursor_ = 0;
        }
        batch.pairs.push_back(pair_stream_[pair_cursor_++]);
    }
    return batch;
}

LdComponents DisentangleTrainer::run_epoch(double schedule_weight)
{
    std::shuffle(neutral_order_.begin(), neutral_order_.end(), rng_);
    const auto ceil_div = [](std::size_t a, std::size_t b) { return static_cast<Index>((a + b - 1) / b); };
    const Index steps =
        std::max<Index>({Index{1},
                         ceil_div(neutral_order_.size(), static_cast<std::size_t>(config_.batching.batch_size)),
                         ceil_div(pair_stream_.size(), static_cast<std::size_t>(config_.batching.pair_batch_size))});

    LdComponents epoch_loss;
    for (Index step = 0; step < steps; ++step) {
        const LdBatch batch = next_batch(step, steps);
        auto g = loss_ld_gradients(table_, batch, params_, weights_, config_.grl);
        if (!std::isfinite(g.loss.total))
            fail(ErrorCode::NonFiniteLoss,
                 "disentanglement loss is not finite at epoch " + std::to_string(epoch_) + ", step " +
                     std::to_string(step));
        epoch_loss += g.loss;
        const double scale = schedule_weight / static_cast<double>(batch.word_count());
        g.encoder *= scale;
        g.decoder *= scale;
        g.classifier *= scale;
        g.adversary *= scale;
        opt_encoder_.step(params_.encoder, g.encoder);
        opt_decoder_.step(params_.decoder, g.decoder);
        if (!batch.pairs.empty())
            opt_classifier_.step(params_.classifier, g.classifier);
        opt_adversary_.step(params_.adversary, g.adversary);
    }
    ++epoch_;
    return epoch_loss;
}

std::vector<LdEpoch> train_disentangle(const EmbeddingTable& table, const VocabularyPartition& partition,
                                       ModelParams& params, const DisentangleWeights& weights,
                                       const DisentangleConfig& config, std::mt19937_64& rng)
{
    if (config.epochs < 1)
        fail(ErrorCode::ConfigError, "disentanglement epochs must be >= 1");
    DisentangleTrainer trainer(table, partition, params, weights, config, rng);
    std::vector<LdEpoch> trace;
    trace.reserve(static_cast<std::size_t>(config.epochs));
    for (Index e = 0; e < config.epochs; ++e)
        trace.push_back({e, trainer.run_epoch()});
    return trace;
}

void write_ld_trace(std::ostream& out, const std::vector<LdEpoch>& trace)
{
    out << "epoch,L_total,L_se,L_ge,L_di,L_re\n";
    char buf[160];
    for (const auto& e : trace) {
        std::snprintf(buf, sizeof buf, "%lld,%.10g,%.10g,%.10g,%.10g,%.10g\n", static_cast<long long>(e.epoch),
                      e.loss.total, e.loss.se, e.loss.ge, e.loss.di, e.loss.re);
        out << buf;
    }
}

} // namespace cfdebias
