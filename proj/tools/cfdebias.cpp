#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cfdebias/config.hpp"
#include "cfdebias/error.hpp"
#include "cfdebias/pipeline.hpp"
#include "cfdebias/synthetic.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code(cfdebias::ErrorCategory c)
{
    switch (c) {
    case cfdebias::ErrorCategory::Config: return kExitConfig;
    case cfdebias::ErrorCategory::Numeric: return kExitNumeric;
    default: return kExitData;
    }
}

cfdebias::PipelineConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides)
{
    cfdebias::PipelineConfig config = path.empty() ? cfdebias::PipelineConfig{} : cfdebias::load_config(path);
    cfdebias::apply_overrides(config, overrides);
    config.validate();
    return config;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"cfdebias: counterfactual debiasing of word embeddings"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    auto add_config = [&](CLI::App* cmd, bool required) {
        auto* opt = cmd->add_option("--config,-c", config_path, "key = value config file");
        if (required)
            opt->required();
        cmd->add_option("--set", overrides, "override a config key (key=value); repeatable");
    };

    auto* train = app.add_subcommand("train", "run both training phases and write a checkpoint");
    add_config(train, true);

    std::optional<std::string> checkpoint;
    std::string variant;
    auto* debias = app.add_subcommand("debias", "write a debiased embedding table");
    add_config(debias, true);
    debias->add_option("--checkpoint", checkpoint, "trained model (cf variants)");
    debias->add_option("--variant", variant, "cf | cf-la | cf-ka | hard")->required();

    std::string original, debiased;
    auto* eval = app.add_subcommand("eval", "bias report for a table against the original");
    add_config(eval, true);
    eval->add_option("--original", original, "original embedding file")->required();
    eval->add_option("--debiased", debiased, "embedding file to evaluate")->required();
    eval->add_option("--checkpoint", checkpoint, "trained model, enables the classifier metric");

    auto* grads = app.add_subcommand("check-gradients", "finite-difference audit of every loss gradient");
    add_config(grads, false);

    auto* show = app.add_subcommand("show-config", "print the resolved configuration");
    add_config(show, false);

    std::string synth_dir;
    cfdebias::SyntheticSpec spec;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "write a planted-bias synthetic corpus");
    synth->add_option("--out", synth_dir, "output directory")->required();
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--words", spec.words, "vocabulary size");
    synth->add_option("--dim", spec.dim, "embedding dimension");
    synth->add_option("--pairs", spec.pairs, "gender word pairs");
    synth->add_option("--leakage", spec.leakage, "std of the neutral-word gender component");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*synth) {
            cfdebias::write_synthetic_corpus(cfdebias::make_synthetic_corpus(spec, synth_seed), synth_dir);
            std::cout << "wrote synthetic corpus to " << synth_dir << '\n';
            return 0;
        }
        const auto config = resolve_config(config_path, overrides);
        if (*train) {
            cfdebias::cmd_train(config, std::cout);
        } else if (*debias) {
            const auto method = cfdebias::parse_debias_method(variant);
            if (!method)
                cfdebias::fail(cfdebias::ErrorCode::ConfigError, "unknown variant '" + variant + "'");
            cfdebias::cmd_debias(config, checkpoint ? std::optional<std::filesystem::path>(*checkpoint) : std::nullopt,
                                 *method, std::cout);
        } else if (*eval) {
            cfdebias::cmd_eval(config, original, debiased,
                               checkpoint ? std::optional<std::filesystem::path>(*checkpoint) : std::nullopt,
                               std::cout);
        } else if (*grads) {
            if (!cfdebias::cmd_check_gradients(config, std::cout))
                return kExitNumeric;
        } else if (*show) {
            std::cout << cfdebias::canonical_text(config) << "# hash " << cfdebias::config_hash(config) << '\n';
        }
    } catch (const cfdebias::Error& e) {
        std::cerr << "cfdebias: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "cfdebias: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
