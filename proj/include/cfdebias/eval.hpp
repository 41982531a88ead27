#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfdebias/embedding_store.hpp"
#include "cfdebias/kmeans.hpp"
#include "cfdebias/model.hpp"

namespace cfdebias {

using TokenPair = std::pair<std::string, std::string>;

// --- Sembias --------------------------------------------------------------------

/// Four candidate pairs, in the fixed order definition, stereotype, none, none.
/// The first token of each pair fills the masculine-role slot.
struct SembiasInstance {
    std::string id;
    std::array<TokenPair, 4> pairs;
};

enum class SembiasCategory { Definition = 0, Stereotype = 1, None = 2 };

/// Nine tab-separated fields per line:
/// id, def_m, def_f, stereo_m, stereo_f, none1_a, none1_b, none2_a, none2_b.
std::vector<SembiasInstance> read_sembias(const std::filesystem::path& path);

enum class AlignmentMetric { Cosine, Dot };

struct SembiasResult {
    double definition_pct = 0.0;
    double stereotype_pct = 0.0;
    double none_pct = 0.0;
    Index scored = 0;
    Index skipped = 0; ///< instances with an out-of-vocabulary token
    Index ties = 0;    ///< instances whose maximum was shared (first in order wins)
};

/// Per instance, scores every pair difference a - b against the anchor
/// difference and tallies the category of the best-aligned pair.
SembiasResult sembias_eval(const EmbeddingTable& table, std::span<const SembiasInstance> instances,
                           const TokenPair& anchor = {"he", "she"},
                           AlignmentMetric metric = AlignmentMetric::Cosine);

// --- WEAT -----------------------------------------------------------------------

struct WeatSpec {
    std::string name;
    std::vector<std::string> targets1, targets2, attributes1, attributes2;
};

/// JSON object of named categories, each {"T1": [...], "T2": [...], "A1": [...], "A2": [...]}.
std::vector<WeatSpec> read_weat_specs(const std::filesystem::path& path);

struct WeatResult {
    std::string name;
    std::optional<double> effect_size; ///< empty when every association score is equal
    double p_value = 1.0;
    double statistic = 0.0;
    bool exhaustive = true;
    Index partitions = 0;
    Index dropped_tokens = 0;
};

/// Auto enumerates every partition when C(n1 + n2, n1) <= max_partitions and
/// samples otherwise; Sampled always draws `max_partitions` partitions.
enum class WeatMode { Auto, Sampled };

/// Permutation test on precomputed association scores s(t) of the two
/// target sets. d uses the population standard deviation; p counts the
/// equal-size partitions (the observed one included) whose |S| reaches the
/// observed |S|. Sampled partitions are seeded and uniform.
WeatResult weat_from_scores(std::span<const double> scores1, std::span<const double> scores2,
                            Index max_partitions = 100000, std::uint64_t seed = 0, WeatMode mode = WeatMode::Auto);

/// s(t) = mean cos(t, A1) - mean cos(t, A2).
double weat_association(const EmbeddingTable& table, Index target, std::span<const Index> attributes1,
                        std::span<const Index> attributes2);

WeatResult weat(const EmbeddingTable& table, const WeatSpec& spec, Index max_partitions = 100000,
                std::uint64_t seed = 0, WeatMode mode = WeatMode::Auto);

// --- clustering / neighbour diagnostics ---------------------------------------

/// The 2n most gender-biased words of a reference table by dot product with
/// the anchor difference: the first n are the top (masculine-biased), the
/// last n the bottom (feminine-biased).
struct BiasedPool {
    std::vector<Index> words;
    std::vector<std::uint8_t> masculine; ///< 1 for masculine-biased, 0 for feminine-biased
};

BiasedPool select_biased_words(const EmbeddingTable& original, const TokenPair& anchor, Index n_per_side,
                               std::span<const std::string> exclude = {});

/// Two-means clustering of the pool on `eval`; agreement with the bias
/// labels, maximised over the two label assignments.
double cluster_accuracy(const EmbeddingTable& eval, const BiasedPool& pool, const KMeansConfig& config);

double cluster_bias_test(const EmbeddingTable& original, const EmbeddingTable& eval, const TokenPair& anchor,
                         Index n_per_side = 500, const KMeansConfig& config = {},
                         std::span<const std::string> exclude = {});

struct NeighborCorrelation {
    double pearson_r = 0.0;
    std::vector<std::string> words;
    std::vector<double> original_bias;      ///< x: dot(w, anchor difference) in the original table
    std::vector<double> masculine_fraction; ///< y: share of masculine-biased words among eval neighbours
};

/// For each resolvable profession word, relates its original bias to the
/// masculine share of its `k` nearest pool members in `eval`.
NeighborCorrelation neighbor_bias_correlation(const EmbeddingTable& original, const EmbeddingTable& eval,
                                              std::span<const std::string> professions, const BiasedPool& pool,
                                              const TokenPair& anchor = {"he", "she"}, Index k = 100);

double pearson(std::span<const double> x, std::span<const double> y);

// --- variance profile ---------------------------------------------------------

struct PcProfile {
    std::vector<double> proportions; ///< top eigenvalues / sum of all eigenvalues
    double gini = 0.0;
};

/// sum_i sum_j |p_i - p_j| / (2 n sum p).
double gini_index(std::span<const double> values);

PcProfile pc_variance_profile(const EmbeddingTable& table, std::span<const WordPair> pairs, Index top = 30);

// --- classifier -----------------------------------------------------------------

struct ClassifierAccuracy {
    double masculine = 0.0;
    double feminine = 0.0;
    Index masculine_count = 0;
    Index feminine_count = 0;
};

/// Masculine correct when C_r(z^g) > 0.5, feminine correct when < 0.5.
ClassifierAccuracy classifier_accuracy_from_scores(std::span<const double> masculine_scores,
                                                   std::span<const double> feminine_scores);

ClassifierAccuracy gender_classifier_accuracy(const ModelParams& params, const EmbeddingTable& table,
                                              std::span<const WordPair> test_pairs);

std::vector<std::string> read_token_list(const std::filesystem::path& path);

} // namespace cfdebias
