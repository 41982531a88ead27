#pragma once

#include <iosfwd>
#include <random>
#include <vector>

#include "cfdebias/embedding_store.hpp"
#include "cfdebias/model.hpp"
#include "cfdebias/nn.hpp"

namespace cfdebias {

struct DisentangleWeights {
    double se = 1.0;          ///< siamese semantic equality
    double ge = 1.0;          ///< gender classification
    double di = 1.0;          ///< adversary regression (C_a side)
    double re = 1.0;          ///< reconstruction
    double adversarial = 1.0; ///< lambda_a, gradient reversal strength

    void validate() const;
};

/// Whether the reversed L_di gradient reaches the semantic encoder path.
/// `Disabled` is the GRL-free baseline: C_a still learns, the encoder never
/// sees L_di.
enum class GrlMode { Enabled, Disabled };

/// A minibatch: training pairs plus accompanying neutral words.
struct LdBatch {
    std::vector<WordPair> pairs;
    std::vector<Index> neutral;

    Index word_count() const { return 2 * static_cast<Index>(pairs.size()) + static_cast<Index>(neutral.size()); }
};

struct LdComponents {
    double total = 0.0;
    double se = 0.0;
    double ge = 0.0;
    double di = 0.0;
    double re = 0.0;

    LdComponents& operator+=(const LdComponents& o)
    {
        total += o.total;
        se += o.se;
        ge += o.ge;
        di += o.di;
        re += o.re;
        return *this;
    }
};

/// BCE probabilities are clamped to [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-7;

/// Batch losses, summed over the batch (not averaged).
///
/// L_se over pairs, L_ge over pair members (masculine label 1, feminine 0),
/// L_di and L_re over every word in the batch. The regression target z^g of
/// L_di is treated as a constant. When `target_encoder` is given, that
/// constant is computed with it instead of `params.encoder`; the gradient
/// checker uses this to freeze the target while perturbing the encoder.
LdComponents loss_ld(const EmbeddingTable& table, const LdBatch& batch, const ModelParams& params,
                     const DisentangleWeights& weights, const MlpParams* target_encoder = nullptr);

struct LdGradients {
    LdComponents loss;
    Gradient encoder;
    Gradient decoder;
    Gradient classifier;
    Gradient adversary;
};

/// Loss and per-network gradients with gradient-reversal routing:
///   C_r, D      : ordinary gradients of lambda_ge L_ge, lambda_re L_re
///   C_a         : ordinary gradient of lambda_di L_di
///   E           : ordinary gradients of lambda_se L_se + lambda_ge L_ge +
///                 lambda_re L_re, plus -lambda_a dL_di/dz^s through the GRL
LdGradients loss_ld_gradients(const EmbeddingTable& table, const LdBatch& batch, const ModelParams& params,
                              const DisentangleWeights& weights, GrlMode mode = GrlMode::Enabled);

/// Unreversed, unweighted dL_di/d(encoder) through the z^s path only.
Gradient semantic_adversary_gradient(const EmbeddingTable& table, const LdBatch& batch, const ModelParams& params);

struct BatchConfig {
    Index batch_size = 256;     ///< neutral words per step
    Index pair_batch_size = 64; ///< training pairs per step
};

struct DisentangleConfig {
    Index epochs = 1;
    BatchConfig batching;
    AdamConfig adam;
    GrlMode grl = GrlMode::Enabled;
};

struct LdEpoch {
    Index epoch;
    LdComponents loss;
};

/// Runs phase-1 epochs against a model owned by the caller.
///
/// Each epoch visits every neutral word once (shuffled, `batch_size` per
/// step) and draws pairs from a reshuffled cyclic stream of the training
/// pairs. Gradients are averaged over the words of a step before the Adam
/// update.
class DisentangleTrainer {
public:
    DisentangleTrainer(const EmbeddingTable& table, const VocabularyPartition& partition, ModelParams& params,
                       const DisentangleWeights& weights, const DisentangleConfig& config, std::mt19937_64& rng);

    /// One epoch; `schedule_weight` multiplies every gradient (the lambda of
    /// the overall two-phase objective).
    LdComponents run_epoch(double schedule_weight = 1.0);
    Index epochs_run() const { return epoch_; }

private:
    LdBatch next_batch(Index step, Index steps);

    const EmbeddingTable& table_;
    const VocabularyPartition& partition_;
    ModelParams& params_;
    DisentangleWeights weights_;
    DisentangleConfig config_;
    std::mt19937_64& rng_;

    MlpOptimizer<double> opt_encoder_, opt_decoder_, opt_classifier_, opt_adversary_;
    std::vector<Index> neutral_order_;
    std::vector<WordPair> pair_stream_;
    std::size_t pair_cursor_ = 0;
    Index epoch_ = 0;
};

std::vector<LdEpoch> train_disentangle(const EmbeddingTable& table, const VocabularyPartition& partition,
                                       ModelParams& params, const DisentangleWeights& weights,
                                       const DisentangleConfig& config, std::mt19937_64& rng);

/// CSV with header `epoch,L_total,L_se,L_ge,L_di,L_re`.
void write_ld_trace(std::ostream& out, const std::vector<LdEpoch>& trace);

} // namespace cfdebias
