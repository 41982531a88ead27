#pragma once

#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cfdebias/embedding_store.hpp"
#include "cfdebias/kernel_pca.hpp"
#include "cfdebias/model.hpp"
#include "cfdebias/nn.hpp"

namespace cfdebias {

enum class Alignment { None, Linear, Kernel };

struct CfWeights {
    double mo = 1.0; ///< modification
    double mi = 1.0; ///< minimal change
    Alignment alignment = Alignment::None;
    double la = 1.0; ///< linear alignment weight
    double ka = 1.0; ///< kernel alignment weight
    Index top_k = 5;
    std::optional<double> rbf_sigma; ///< nullopt: median heuristic

    void validate() const;
};

/// v_g = mean over pairs of (D(E(w_m)) - D(E(w_f))).
Eigen::VectorXd gender_direction(const ModelParams& params, const EmbeddingTable& table,
                                 std::span<const WordPair> pairs);

/// Reconstructed pair differences D(E(w_m)) - D(E(w_f)), one column per pair.
Eigen::MatrixXd reconstructed_differences(const ModelParams& params, const EmbeddingTable& table,
                                          std::span<const WordPair> pairs);

/// C_g applied column-wise to k x B gender latents.
Eigen::MatrixXd generate_counterfactual(const MlpParams& generator, const Eigen::MatrixXd& gender_latent);

/// Whatever the chosen alignment variant needs, prepared from frozen
/// reconstructions of the training pairs.
struct AlignmentModel {
    std::optional<Eigen::VectorXd> direction;
    std::optional<KernelPcaModel> kernel;
};

AlignmentModel prepare_alignment(const ModelParams& params, const EmbeddingTable& table,
                                 std::span<const WordPair> pairs, const CfWeights& weights,
                                 KernelKind kernel = KernelKind::Rbf);

struct CfComponents {
    double total = 0.0;
    double mo = 0.0;
    double mi = 0.0;
    double align = 0.0; ///< L_la or L_ka (unweighted), 0 without alignment

    CfComponents& operator+=(const CfComponents& o)
    {
        total += o.total;
        mo += o.mo;
        mi += o.mi;
        align += o.align;
        return *this;
    }
};

struct CfGradients {
    CfComponents loss;
    Gradient generator;
};

/// Counterfactual losses over a batch of neutral words, summed:
///   L_mo = sum (C_r(C_g(z^g)) - (1 - C_r(z^g)))^2
///   L_mi = sum |C_g(z^g) - z^g|^2
///   L_la = -sum |v_g . (w_n - w_cf)|
///   L_ka = -sum_k sum_n PC_k(w_n - w_cf)
/// where w_n = D([z^s, z^g]) and w_cf = D([z^s, C_g(z^g)]).
CfComponents loss_cf(const EmbeddingTable& table, std::span<const Index> neutral, const ModelParams& params,
                     const CfWeights& weights, const AlignmentModel& alignment);

/// Same losses with the gradient for C_g; every other network is frozen and
/// only passes gradients through.
CfGradients loss_cf_gradients(const EmbeddingTable& table, std::span<const Index> neutral,
                              const ModelParams& params, const CfWeights& weights, const AlignmentModel& alignment);

struct CounterfactualConfig {
    Index epochs = 1;
    Index batch_size = 256;
    AdamConfig adam;
    KernelKind kernel = KernelKind::Rbf;
};

struct CfEpoch {
    Index epoch;
    CfComponents loss;
};

/// Phase-2 trainer. Only C_g is updated. The alignment model is fit from
/// the current reconstructions when the trainer is built and again on
/// `refresh_alignment()`.
class CounterfactualTrainer {
public:
    CounterfactualTrainer(const EmbeddingTable& table, const VocabularyPartition& partition, ModelParams& params,
                          const CfWeights& weights, const CounterfactualConfig& config, std::mt19937_64& rng);

    CfComponents run_epoch(double schedule_weight = 1.0);
    void refresh_alignment();
    const AlignmentModel& alignment() const { return alignment_; }

private:
    const EmbeddingTable& table_;
    const VocabularyPartition& partition_;
    ModelParams& params_;
    CfWeights weights_;
    CounterfactualConfig config_;
    std::mt19937_64& rng_;
    MlpOptimizer<double> opt_;
    AlignmentModel alignment_;
    std::vector<Index> order_;
    Index epoch_ = 0;
};

std::vector<CfEpoch> train_counterfactual(const EmbeddingTable& table, const VocabularyPartition& partition,
                                          ModelParams& params, const CfWeights& weights,
                                          const CounterfactualConfig& config, std::mt19937_64& rng);

/// CSV with header `epoch,L_total,L_mo,L_mi,L_align`.
void write_cf_trace(std::ostream& out, const std::vector<CfEpoch>& trace);

} // namespace cfdebias
