#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cfdebias/embedding_store.hpp"

namespace cfdebias {

/// Planted-bias corpus: a random unit direction g; every pair is
/// base +- offset * g; every neutral word is base + c g with c ~ N(0, leakage^2).
/// Base vectors have i.i.d. N(0, base_scale^2) coordinates. The first pair
/// is ("she", "he").
struct SyntheticSpec {
    Index words = 500;
    Index dim = 50;
    Index pairs = 50;
    double offset = 1.0;
    double base_scale = 0.15;
    double leakage = 0.5;
    Index professions = 40; ///< neutral words listed as professions
};

struct SyntheticCorpus {
    EmbeddingTable table;
    std::vector<std::pair<std::string, std::string>> pairs; ///< (feminine, masculine)
    std::vector<std::string> professions;
    Eigen::VectorXd direction;
    std::vector<double> leakage; ///< c per neutral word, in table order
};

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed);

/// Writes embeddings.txt, pairs.tsv and professions.txt into `dir`.
void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

} // namespace cfdebias
