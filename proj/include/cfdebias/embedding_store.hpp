#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cfdebias {

using Index = Eigen::Index;

/// Vocabulary-indexed dense word vectors.
///
/// Vectors are stored column-wise: `vectors().col(i)` is the embedding of
/// `words()[i]`, so batches of words gather into contiguous d x B blocks.
/// The table is immutable once constructed.
class EmbeddingTable {
public:
    EmbeddingTable() = default;

    /// Takes ownership of `words` and the d x |V| matrix `vectors`. Throws on
    /// duplicate tokens, shape disagreement, or non-finite entries.
    EmbeddingTable(std::vector<std::string> words, Eigen::MatrixXd vectors);

    Index size() const noexcept { return static_cast<Index>(words_.size()); }
    Index dim() const noexcept { return vectors_.rows(); }
    bool empty() const noexcept { return words_.empty(); }

    const std::vector<std::string>& words() const noexcept { return words_; }
    const std::string& word(Index i) const { return words_[static_cast<std::size_t>(i)]; }
    const Eigen::MatrixXd& vectors() const noexcept { return vectors_; }
    Eigen::MatrixXd::ConstColXpr vector(Index i) const { return vectors_.col(i); }

    std::optional<Index> find(std::string_view token) const;
    bool contains(std::string_view token) const { return find(token).has_value(); }
    /// Throws UnknownToken.
    Index index_of(std::string_view token) const;

    /// Gathers the listed rows into a d x n matrix.
    Eigen::MatrixXd gather(std::span<const Index> rows) const;

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
    };

    std::vector<std::string> words_;
    std::unordered_map<std::string, Index, Hash, std::equal_to<>> index_;
    Eigen::MatrixXd vectors_;
};

struct LoadReport {
    Index duplicates = 0;   ///< repeated tokens dropped (first occurrence wins)
    bool had_header = false; ///< a `count dim` header line was consumed
};

/// Reads GloVe / fastText `.vec` text: `token v1 ... vd` per line.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               std::optional<Index> expected_dim = std::nullopt,
                               LoadReport* report = nullptr);
EmbeddingTable read_embeddings(std::istream& in, std::optional<Index> expected_dim = std::nullopt,
                               LoadReport* report = nullptr);

/// Values are written with 6 significant digits (`%.6g`), so a round trip
/// is exact to a relative 5e-7 of each coordinate.
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
void write_embeddings(const EmbeddingTable& table, std::ostream& out);

/// FNV-1a over tokens and raw vector bytes.
std::uint64_t checksum(const EmbeddingTable& table);

// --- vocabulary partition -------------------------------------------------

enum class WordRole : std::uint8_t { Neutral, Feminine, Masculine };

struct WordPair {
    Index feminine;
    Index masculine;
    friend bool operator==(const WordPair&, const WordPair&) = default;
};

/// Train/test split rule: a fixed number of test pairs, or a fraction.
struct SplitRule {
    enum class Kind { Count, Fraction } kind = Kind::Count;
    double value = 0.0;

    static SplitRule count(Index n) { return {Kind::Count, static_cast<double>(n)}; }
    static SplitRule fraction(double f) { return {Kind::Fraction, f}; }

    Index test_count(Index total) const;
};

class VocabularyPartition {
public:
    VocabularyPartition() = default;

    WordRole role(Index word) const { return roles_[static_cast<std::size_t>(word)]; }
    const std::vector<WordRole>& roles() const noexcept { return roles_; }

    const std::vector<Index>& feminine() const noexcept { return feminine_; }
    const std::vector<Index>& masculine() const noexcept { return masculine_; }
    const std::vector<Index>& neutral() const noexcept { return neutral_; }

    const std::vector<WordPair>& pairs() const noexcept { return pairs_; }
    const std::vector<WordPair>& train_pairs() const noexcept { return train_; }
    const std::vector<WordPair>& test_pairs() const noexcept { return test_; }

    /// Pairs dropped because a member was out of vocabulary or would have
    /// broken disjointness of the feminine and masculine sets.
    Index skipped_pairs() const noexcept { return skipped_; }

private:
    friend VocabularyPartition make_partition(const EmbeddingTable&,
                                              std::span<const std::pair<std::string, std::string>>,
                                              SplitRule, std::uint64_t);

    std::vector<WordRole> roles_;
    std::vector<Index> feminine_, masculine_, neutral_;
    std::vector<WordPair> pairs_, train_, test_;
    Index skipped_ = 0;
};

/// Reads `feminine<TAB>masculine` lines; `#` lines and blank lines ignored.
std::vector<std::pair<std::string, std::string>> read_pair_file(const std::filesystem::path& path);

VocabularyPartition make_partition(const EmbeddingTable& table,
                                   std::span<const std::pair<std::string, std::string>> pairs,
                                   SplitRule split, std::uint64_t seed);

VocabularyPartition load_partition(const EmbeddingTable& table, const std::filesystem::path& pairs_path,
                                   SplitRule split, std::uint64_t seed);

// --- neighbours -------------------------------------------------------------

struct Neighbor {
    Index index;
    std::string token;
    double similarity;
};

double cosine(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

/// Top-k by cosine similarity, query excluded, ties by vocabulary index.
std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, std::string_view query, Index k,
                                        std::optional<std::span<const Index>> restrict_to = std::nullopt);

} // namespace cfdebias
