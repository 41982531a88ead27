#include "cfdebias/gradient_audit.hpp"

#include <functional>
#include <random>

#include "cfdebias/counterfactual.hpp"
#include "cfdebias/disentangle.hpp"
#include "cfdebias/model.hpp"

namespace cfdebias {

namespace {

struct Fixture {
    EmbeddingTable table;
    ModelParams params;
    LdBatch batch;
    std::vector<WordPair> pairs;
    std::vector<Index> neutral;
};

Fixture make_fixture(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.8);
    std::uniform_real_distribution<double> bias(-0.3, 0.3);

    const Index d = 4;
    Eigen::MatrixXd vectors(d, 10);
    for (Index j = 0; j < vectors.cols(); ++j)
        for (Index i = 0; i < d; ++i)
            vectors(i, j) = normal(rng);
    std::vector<std::string> words = {"f0", "m0", "f1", "m1", "f2", "m2", "n0", "n1", "n2", "n3"};

    Fixture f;
    f.table = EmbeddingTable(std::move(words), std::move(vectors));
    ModelDims dims;
    dims.embedding_dim = d;
    dims.latent_dim = 5;
    dims.gender_dim = 2;
    dims.hidden_encoder = dims.hidden_decoder = dims.hidden_classifier = dims.hidden_adversary =
        dims.hidden_generator = 3;
    f.params = ModelParams::initialize(dims, rng);
    for (MlpParams* net : {&f.params.encoder, &f.params.decoder, &f.params.classifier, &f.params.adversary,
                           &f.params.generator}) {
        for (Index i = 0; i < net->b1.size(); ++i)
            net->b1[i] = bias(rng);
        for (Index i = 0; i < net->b2.size(); ++i)
            net->b2[i] = bias(rng);
    }
    f.pairs = {{0, 1}, {2, 3}, {4, 5}};
    f.neutral = {6, 7, 8, 9};
    f.batch = {f.pairs, f.neutral};
    return f;
}

using NetPtr = MlpParams ModelParams::*;

} // namespace

std::vector<GradientCheck> gradient_audit(std::uint64_t seed, double tolerance, double h)
{
    const Fixture fx = make_fixture(seed);
    std::vector<GradientCheck> out;

    auto check = [&](std::string name, NetPtr net, const Gradient& analytic,
                     const std::function<double(const ModelParams&)>& loss, double sign = 1.0) {
        const Eigen::VectorXd flat = (fx.params.*net).flatten();
        auto probe = [&](const Eigen::VectorXd& v) {
            ModelParams q = fx.params;
            (q.*net).assign(v);
            return loss(q);
        };
        const auto report = finite_diff_check(probe, flat, sign * analytic.flatten(), h);
        out.push_back({std::move(name), report.max_relative_error, flat.size(),
                       report.max_relative_error <= tolerance});
    };

    auto only = [](double se, double ge, double di, double re, double a) {
        DisentangleWeights w;
        w.se = se;
        w.ge = ge;
        w.di = di;
        w.re = re;
        w.adversarial = a;
        return w;
    };
    const MlpParams* frozen_target = &fx.params.encoder;
    auto ld = [&](const DisentangleWeights& w) {
        return [&fx, w, frozen_target](const ModelParams& q) {
            return loss_ld(fx.table, fx.batch, q, w, frozen_target).total;
        };
    };

    {
        const auto w = only(1, 0, 0, 0, 0);
        check("L_se/encoder", &ModelParams::encoder, loss_ld_gradients(fx.table, fx.batch, fx.params, w).encoder, ld(w));
    }
    {
        const auto w = only(0, 1, 0, 0, 0);
        const auto g = loss_ld_gradients(fx.table, fx.batch, fx.params, w);
        check("L_ge/encoder", &ModelParams::encoder, g.encoder, ld(w));
        check("L_ge/classifier", &ModelParams::classifier, g.classifier, ld(w));
    }
    {
        const auto w = only(0, 0, 1, 0, 0);
        check("L_di/adversary", &ModelParams::adversary,
              loss_ld_gradients(fx.table, fx.batch, fx.params, w).adversary, ld(w));
    }
    {
        // reversed branch: the encoder receives -lambda_a dL_di/dtheta
        const double lambda_a = 0.75;
        const auto g = loss_ld_gradients(fx.table, fx.batch, fx.params, only(0, 0, 0, 0, lambda_a));
        check("L_di/encoder (reversed)", &ModelParams::encoder, g.encoder, ld(only(0, 0, 1, 0, 0)), -1.0 / lambda_a);
    }
    {
        const auto w = only(0, 0, 0, 1, 0);
        const auto g = loss_ld_gradients(fx.table, fx.batch, fx.params, w);
        check("L_re/encoder", &ModelParams::encoder, g.encoder, ld(w));
        check("L_re/decoder", &ModelParams::decoder, g.decoder, ld(w));
    }
    {
        const auto w = only(0.7, 1.3, 0.9, 1.1, 0.6);
        const auto g = loss_ld_gradients(fx.table, fx.batch, fx.params, w, GrlMode::Disabled);
        Gradient encoder = g.encoder;
        Gradient adversarial = semantic_adversary_gradient(fx.table, fx.batch, fx.params);
        adversarial *= w.di;
        encoder += adversarial;
        check("L_ld/encoder", &ModelParams::encoder, encoder, ld(w));
        check("L_ld/decoder", &ModelParams::decoder, g.decoder, ld(w));
        check("L_ld/classifier", &ModelParams::classifier, g.classifier, ld(w));
        check("L_ld/adversary", &ModelParams::adversary, g.adversary, ld(w));
    }

    auto cf_check = [&](std::string name, CfWeights w, KernelKind kind = KernelKind::Rbf) {
        const AlignmentModel alignment = prepare_alignment(fx.params, fx.table, fx.pairs, w, kind);
        const auto g = loss_cf_gradients(fx.table, fx.neutral, fx.params, w, alignment);
        check(std::move(name), &ModelParams::generator, g.generator, [&fx, w, &alignment](const ModelParams& q) {
            return loss_cf(fx.table, fx.neutral, q, w, alignment).total;
        });
    };
    {
        CfWeights w;
        w.mi = 0.0;
        cf_check("L_mo/generator", w);
    }
    {
        CfWeights w;
        w.mo = 0.0;
        cf_check("L_mi/generator", w);
    }
    {
        CfWeights w;
        w.mo = w.mi = 0.0;
        w.alignment = Alignment::Linear;
        cf_check("L_la/generator", w);
    }
    {
        CfWeights w;
        w.mo = w.mi = 0.0;
        w.alignment = Alignment::Kernel;
        w.top_k = 2;
        cf_check("L_ka/generator", w);
    }
    return out;
}

} // namespace cfdebias
