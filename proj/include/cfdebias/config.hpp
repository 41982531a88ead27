#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfdebias/counterfactual.hpp"
#include "cfdebias/disentangle.hpp"
#include "cfdebias/model.hpp"

namespace cfdebias {

/// Everything a pipeline run depends on.
///
/// Config files hold one `key = value` per line; `#` starts a comment.
/// Relative paths are resolved against the directory of the config file.
/// See `config_keys()` for the schema.
struct PipelineConfig {
    // resources
    std::filesystem::path embeddings;
    std::filesystem::path pairs;
    std::filesystem::path sembias;
    std::filesystem::path weat;
    std::filesystem::path professions;
    std::filesystem::path output_dir = ".";

    // model
    Index latent_dim = 300;
    Index gender_dim = 5;
    Index hidden_encoder = 300;
    Index hidden_decoder = 300;
    Index hidden_classifier = 300;
    Index hidden_adversary = 300;
    Index hidden_generator = 300;

    DisentangleWeights ld;
    CfWeights cf;

    // optimisation
    double lr = 1e-5;
    Index batch_size = 256;
    Index pair_batch_size = 64;
    Index epochs_disentangle = 100;
    Index epochs_counterfactual = 100;
    Index t_ramp = 0; ///< 0: strict two-phase schedule
    GrlMode grl = GrlMode::Enabled;

    // data split
    Index test_pairs = 53;
    std::uint64_t seed = 0;

    // evaluation
    std::string anchor_masculine = "he";
    std::string anchor_feminine = "she";
    bool sembias_dot = false;
    Index weat_max_partitions = 100000;
    Index cluster_per_side = 500;
    Index kmeans_restarts = 10;
    Index neighbor_k = 100;
    Index pc_top = 30;

    // baseline
    Index hard_components = 1;

    ModelDims dims(Index embedding_dim) const;
    DisentangleConfig disentangle_config() const;
    CounterfactualConfig counterfactual_config() const;

    /// Throws ConfigError on any out-of-range value.
    void validate() const;
};

struct ConfigKey {
    std::string_view name;
    std::string_view help;
};

/// Every recognised key with a one-line description.
std::span<const ConfigKey> config_keys();

/// Sets one key from its text form; throws ConfigError.
void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value,
                      const std::filesystem::path& base_dir = {});

/// Applies `key=value` overrides in order.
void apply_overrides(PipelineConfig& config, std::span<const std::string> overrides);

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// All keys in schema order, `key = value`, one per line. Loading this text
/// reproduces the configuration.
std::string canonical_text(const PipelineConfig& config);

/// FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

} // namespace cfdebias
