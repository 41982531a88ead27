#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "cfdebias/embedding_store.hpp"
#include "cfdebias/model.hpp"

namespace cfdebias {

enum class DebiasMethod { Original, Cf, CfLa, CfKa, Hard };

std::string_view to_string(DebiasMethod m);
std::optional<DebiasMethod> parse_debias_method(std::string_view s);

struct DebiasedTable {
    EmbeddingTable table;
    DebiasMethod method = DebiasMethod::Original;
    std::uint64_t source_checksum = 0;
    Index zeroed_rows = 0; ///< Hard-Debias rows that projected to exactly zero
};

/// Neutral words move to the midpoint of D(E(w)) and D([z^s, C_g(z^g)]);
/// feminine and masculine words become their plain reconstruction D(E(w)).
/// `method` only tags the result (Cf, CfLa or CfKa).
DebiasedTable postprocess(const EmbeddingTable& table, const VocabularyPartition& partition,
                          const ModelParams& params, DebiasMethod method = DebiasMethod::Cf);

/// Both reconstructions of every column of `words`.
struct NeutralReconstruction {
    Eigen::MatrixXd original;       ///< D([z^s, z^g])
    Eigen::MatrixXd counterfactual; ///< D([z^s, C_g(z^g)])
};
NeutralReconstruction reconstruct_with_counterfactual(const ModelParams& params, const Eigen::MatrixXd& words);

/// Orthonormal basis (d x c) of the gender subspace: top principal directions
/// of the pair-centred members {+-(w_m - w_f)/2}.
Eigen::MatrixXd gender_subspace(const EmbeddingTable& table, std::span<const WordPair> pairs, Index components = 1);

/// Hard-Debias baseline: neutral words lose their gender-subspace component
/// and are rescaled to their original norm; gendered words are untouched.
/// A neutral vector lying inside the subspace becomes zero (counted in
/// `zeroed_rows`).
DebiasedTable hard_debias(const EmbeddingTable& table, std::span<const WordPair> pairs,
                          std::span<const Index> neutral, Index components = 1);

} // namespace cfdebias
