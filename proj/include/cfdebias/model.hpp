#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "cfdebias/embedding_store.hpp"
#include "cfdebias/nn.hpp"

namespace cfdebias {

/// Split latent code z = [z^s, z^g].
struct LatentCode {
    Eigen::VectorXd semantic;
    Eigen::VectorXd gender;

    Eigen::VectorXd joined() const
    {
        Eigen::VectorXd z(semantic.size() + gender.size());
        z << semantic, gender;
        return z;
    }
};

struct ModelDims {
    Index embedding_dim = 300;
    Index latent_dim = 300; ///< l
    Index gender_dim = 5;   ///< k
    Index hidden_encoder = 300;
    Index hidden_decoder = 300;
    Index hidden_classifier = 300;
    Index hidden_adversary = 300;
    Index hidden_generator = 300;

    Index semantic_dim() const { return latent_dim - gender_dim; }
    void validate() const;
};

/// The five networks of the debiasing model.
///
/// encoder    E  : d -> l      (tanh output)
/// decoder    D  : l -> d      (linear output)
/// classifier C_r: k -> 1      (sigmoid output)
/// adversary  C_a: l-k -> k    (tanh output, behind the gradient reversal)
/// generator  C_g: k -> k      (tanh output)
struct ModelParams {
    MlpParams encoder;
    MlpParams decoder;
    MlpParams classifier;
    MlpParams adversary;
    MlpParams generator;
    Index gender_dim = 0;

    Index embedding_dim() const { return encoder.inputs(); }
    Index latent_dim() const { return encoder.outputs(); }
    Index semantic_dim() const { return latent_dim() - gender_dim; }

    /// Xavier-uniform initialization from a single generator, in the fixed
    /// order E, D, C_r, C_a, C_g.
    static ModelParams initialize(const ModelDims& dims, std::mt19937_64& rng);

    /// Throws ShapeMismatch if the five networks do not compose.
    void validate() const;
};

LatentCode encode(const MlpParams& encoder, Index gender_dim, const Eigen::VectorXd& w);
Eigen::VectorXd decode(const MlpParams& decoder, const LatentCode& z);

/// Batched encode: columns of `words` are embeddings.
struct LatentBatch {
    Eigen::MatrixXd semantic; ///< (l-k) x B
    Eigen::MatrixXd gender;   ///< k x B
};
LatentBatch encode_batch(const ModelParams& params, const Eigen::MatrixXd& words);

/// D(E(w)) for every column.
Eigen::MatrixXd reconstruct(const ModelParams& params, const Eigen::MatrixXd& words);

/// FNV-1a over all parameter bytes of one network.
std::uint64_t checksum(const MlpParams& net);

} // namespace cfdebias
