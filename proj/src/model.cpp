#include "cfdebias/model.hpp"

#include <string>

namespace cfdebias {

void ModelDims::validate() const
{
    auto positive = [](Index v, const char* name) {
        if (v <= 0)
            fail(ErrorCode::ConfigError, std::string(name) + " must be positive");
    };
    positive(embedding_dim, "embedding dimension");
    positive(gender_dim, "gender latent dimension");
    positive(hidden_encoder, "encoder hidden width");
    positive(hidden_decoder, "decoder hidden width");
    positive(hidden_classifier, "classifier hidden width");
    positive(hidden_adversary, "adversary hidden width");
    positive(hidden_generator, "generator hidden width");
    if (semantic_dim() <= 0)
        fail(ErrorCode::ConfigError, "latent dimension must exceed the gender dimension");
}

ModelParams ModelParams::initialize(const ModelDims& dims, std::mt19937_64& rng)
{
    dims.validate();
    ModelParams p;
    p.gender_dim = dims.gender_dim;
    p.encoder = MlpParams::xavier(dims.embedding_dim, dims.hidden_encoder, dims.latent_dim, Activation::Tanh, rng);
    p.decoder = MlpParams::xavier(dims.latent_dim, dims.hidden_decoder, dims.embedding_dim, Activation::Linear, rng);
    p.classifier = MlpParams::xavier(dims.gender_dim, dims.hidden_classifier, 1, Activation::Sigmoid, rng);
    p.adversary =
        MlpParams::xavier(dims.semantic_dim(), dims.hidden_adversary, dims.gender_dim, Activation::Tanh, rng);
    p.generator = MlpParams::xavier(dims.gender_dim, dims.hidden_generator, dims.gender_dim, Activation::Tanh, rng);
    return p;
}

void ModelParams::validate() const
{
    auto check = [](bool ok, const char* what) {
        if (!ok)
            fail(ErrorCode::ShapeMismatch, what);
    };
    check(encoder.shapes_consistent() && decoder.shapes_consistent() && classifier.shapes_consistent() &&
              adversary.shapes_consistent() && generator.shapes_consistent(),
          "inconsistent network shapes");
    check(gender_dim > 0 && semantic_dim() > 0, "latent split out of range");
    check(decoder.inputs() == latent_dim() && decoder.outputs() == embedding_dim(), "decoder does not invert encoder");
    check(classifier.inputs() == gender_dim && classifier.outputs() == 1, "classifier shape");
    check(adversary.inputs() == semantic_dim() && adversary.outputs() == gender_dim, "adversary shape");
    check(generator.inputs() == gender_dim && generator.outputs() == gender_dim, "generator shape");
}

LatentCode encode(const MlpParams& encoder, Index gender_dim, const Eigen::VectorXd& w)
{
    if (gender_dim <= 0 || gender_dim >= encoder.outputs())
        fail(ErrorCode::ShapeMismatch, "gender dimension must lie strictly inside the latent size");
    const Eigen::VectorXd z = mlp_apply(encoder, Eigen::MatrixXd(w)).col(0);
    const Index s = z.size() - gender_dim;
    return {z.head(s), z.tail(gender_dim)};
}

Eigen::VectorXd decode(const MlpParams& decoder, const LatentCode& z)
{
    return mlp_apply(decoder, Eigen::MatrixXd(z.joined())).col(0);
}

LatentBatch encode_batch(const ModelParams& params, const Eigen::MatrixXd& words)
{
    const Eigen::MatrixXd z = mlp_apply(params.encoder, words);
    return {z.topRows(params.semantic_dim()), z.bottomRows(params.gender_dim)};
}

Eigen::MatrixXd reconstruct(const ModelParams& params, const Eigen::MatrixXd& words)
{
    return mlp_apply(params.decoder, mlp_apply(params.encoder, words));
}

std::uint64_t checksum(const MlpParams& net)
{
    std::uint64_t h = 1469598103934665603ull;
    const Eigen::VectorXd flat = net.flatten();
    const auto* p = reinterpret_cast<const unsigned char*>(flat.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(flat.size()) * sizeof(double); ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace cfdebias
