#include "cfdebias/embedding_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include "cfdebias/error.hpp"

namespace cfdebias {

namespace {

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t'))
            ++pos;
        if (pos >= line.size())
            break;
        std::size_t end = pos;
        while (end < line.size() && line[end] != ' ' && line[end] != '\t')
            ++end;
        out.push_back(line.substr(pos, end - pos));
        pos = end;
    }
    return out;
}

bool parse_double(std::string_view s, double& out)
{
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_integer(std::string_view s, long long& out)
{
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

void strip_cr(std::string& line)
{
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
}

} // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, Eigen::MatrixXd vectors)
    : words_(std::move(words)), vectors_(std::move(vectors))
{
    if (static_cast<Index>(words_.size()) != vectors_.cols())
        fail(ErrorCode::DimensionMismatch, "word count " + std::to_string(words_.size()) +
                                               " does not match vector count " +
                                               std::to_string(vectors_.cols()));
    if (!vectors_.allFinite())
        fail(ErrorCode::ParseError, "embedding table contains non-finite values");
    index_.reserve(words_.size());
    for (Index i = 0; i < static_cast<Index>(words_.size()); ++i) {
        if (!index_.emplace(words_[static_cast<std::size_t>(i)], i).second)
            fail(ErrorCode::ParseError, "duplicate token '" + words_[static_cast<std::size_t>(i)] + "'");
    }
}

std::optional<Index> EmbeddingTable::find(std::string_view token) const
{
    auto it = index_.find(token);
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

Index EmbeddingTable::index_of(std::string_view token) const
{
    if (auto i = find(token))
        return *i;
    fail(ErrorCode::UnknownToken, "'" + std::string(token) + "' is not in the vocabulary");
}

Eigen::MatrixXd EmbeddingTable::gather(std::span<const Index> rows) const
{
    Eigen::MatrixXd out(dim(), static_cast<Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        out.col(static_cast<Index>(j)) = vectors_.col(rows[j]);
    return out;
}

EmbeddingTable read_embeddings(std::istream& in, std::optional<Index> expected_dim, LoadReport* report)
{
    LoadReport local;
    std::vector<std::string> words;
    std::vector<double> values;
    std::unordered_set<std::string> seen;
    std::optional<Index> dim = expected_dim;
    bool first_record = true;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        const auto fields = split_fields(line);
        if (fields.empty())
            continue;

        if (first_record) {
            first_record = false;
            long long count = 0, header_dim = 0;
            if (fields.size() == 2 && parse_integer(fields[0], count) && parse_integer(fields[1], header_dim)) {
                local.had_header = true;
                if (header_dim <= 0)
                    throw ParseError(ErrorCode::ParseError, line_no, "header declares non-positive dimension");
                if (dim && *dim != header_dim)
                    throw ParseError(ErrorCode::DimensionMismatch, line_no,
                                     "header dimension " + std::to_string(header_dim) + " != expected " +
                                         std::to_string(*dim));
                dim = static_cast<Index>(header_dim);
                continue;
            }
        }

        const auto n_values = static_cast<Index>(fields.size()) - 1;
        if (!dim) {
            if (n_values <= 0)
                throw ParseError(ErrorCode::DimensionMismatch, line_no, "record has no vector components");
            dim = n_values;
        }
        if (n_values != *dim)
            throw ParseError(ErrorCode::DimensionMismatch, line_no,
                             "expected " + std::to_string(*dim) + " values, found " + std::to_string(n_values));

        std::string token(fields[0]);
        if (!seen.insert(token).second) {
            ++local.duplicates;
            continue;
        }
        for (Index j = 1; j <= n_values; ++j) {
            double v = 0.0;
            const auto field = fields[static_cast<std::size_t>(j)];
            if (!parse_double(field, v) || !std::isfinite(v))
                throw ParseError(ErrorCode::ParseError, line_no,
                                 "field " + std::to_string(j) + " ('" + std::string(field) + "') is not a finite number");
            values.push_back(v);
        }
        words.push_back(std::move(token));
    }

    if (words.empty())
        fail(ErrorCode::EmptyFile, "no embedding records found");

    Eigen::MatrixXd vectors = Eigen::Map<const Eigen::MatrixXd>(values.data(), *dim, static_cast<Index>(words.size()));
    if (report)
        *report = local;
    return EmbeddingTable(std::move(words), std::move(vectors));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::optional<Index> expected_dim,
                               LoadReport* report)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::IoError, "cannot open " + path.string());
    return read_embeddings(in, expected_dim, report);
}

void write_embeddings(const EmbeddingTable& table, std::ostream& out)
{
    if (table.empty())
        fail(ErrorCode::EmptyTable, "refusing to write an empty table");
    char buf[32];
    for (Index i = 0; i < table.size(); ++i) {
        out << table.word(i);
        for (Index j = 0; j < table.dim(); ++j) {
            std::snprintf(buf, sizeof buf, " %.6g", table.vectors()(j, i));
            out << buf;
        }
        out << '\n';
    }
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path)
{
    if (table.empty())
        fail(ErrorCode::EmptyTable, "refusing to write an empty table");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    write_embeddings(table, out);
    out.flush();
    if (!out)
        fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::uint64_t checksum(const EmbeddingTable& table)
{
    std::uint64_t h = kFnvOffset;
    for (const auto& w : table.words()) {
        fnv_mix(h, w.data(), w.size());
        fnv_mix(h, "\n", 1);
    }
    const auto& v = table.vectors();
    fnv_mix(h, v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
    return h;
}

// --- partition ----------------------------------------------------------------

Index SplitRule::test_count(Index total) const
{
    if (kind == Kind::Count) {
        if (value < 0)
            fail(ErrorCode::ConfigError, "negative test pair count");
        return std::min<Index>(total, static_cast<Index>(value));
    }
    if (value < 0.0 || value > 1.0)
        fail(ErrorCode::ConfigError, "test fraction must be in [0, 1]");
    return static_cast<Index>(std::llround(value * static_cast<double>(total)));
}

std::vector<std::pair<std::string, std::string>> read_pair_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty() || line.front() == '#')
            continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
            throw ParseError(ErrorCode::ParseError, line_no, "expected 'feminine<TAB>masculine'");
        std::string f = line.substr(0, tab);
        std::string m = line.substr(tab + 1);
        if (f.empty() || m.empty())
            throw ParseError(ErrorCode::ParseError, line_no, "empty token in pair");
        out.emplace_back(std::move(f), std::move(m));
    }
    return out;
}

VocabularyPartition make_partition(const EmbeddingTable& table,
                                   std::span<const std::pair<std::string, std::string>> pairs, SplitRule split,
                                   std::uint64_t seed)
{
    VocabularyPartition p;
    p.roles_.assign(static_cast<std::size_t>(table.size()), WordRole::Neutral);

    std::unordered_set<std::uint64_t> seen_pairs;
    for (const auto& [fem, masc] : pairs) {
        const auto fi = table.find(fem);
        const auto mi = table.find(masc);
        if (!fi || !mi || *fi == *mi) {
            ++p.skipped_;
            continue;
        }
        const auto fr = p.roles_[static_cast<std::size_t>(*fi)];
        const auto mr = p.roles_[static_cast<std::size_t>(*mi)];
        const auto key = static_cast<std::uint64_t>(*fi) * static_cast<std::uint64_t>(table.size()) +
                         static_cast<std::uint64_t>(*mi);
        if (fr == WordRole::Masculine || mr == WordRole::Feminine || !seen_pairs.insert(key).second) {
            ++p.skipped_;
            continue;
        }
        p.roles_[static_cast<std::size_t>(*fi)] = WordRole::Feminine;
        p.roles_[static_cast<std::size_t>(*mi)] = WordRole::Masculine;
        p.pairs_.push_back({*fi, *mi});
    }
    if (p.pairs_.empty())
        fail(ErrorCode::NoValidPairs, "none of the " + std::to_string(pairs.size()) + " pairs resolved in the vocabulary");

    for (Index i = 0; i < table.size(); ++i) {
        switch (p.roles_[static_cast<std::size_t>(i)]) {
        case WordRole::Feminine: p.feminine_.push_back(i); break;
        case WordRole::Masculine: p.masculine_.push_back(i); break;
        case WordRole::Neutral: p.neutral_.push_back(i); break;
        }
    }

    const auto n = static_cast<Index>(p.pairs_.size());
    const Index n_test = split.test_count(n);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> is_test(static_cast<std::size_t>(n), false);
    for (Index i = 0; i < n_test; ++i)
        is_test[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    for (Index i = 0; i < n; ++i)
        (is_test[static_cast<std::size_t>(i)] ? p.test_ : p.train_).push_back(p.pairs_[static_cast<std::size_t>(i)]);
    return p;
}

VocabularyPartition load_partition(const EmbeddingTable& table, const std::filesystem::path& pairs_path,
                                   SplitRule split, std::uint64_t seed)
{
    const auto pairs = read_pair_file(pairs_path);
    return make_partition(table, pairs, split, seed);
}

// --- neighbours -------------------------------------------------------------------

double cosine(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b)
{
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        return 0.0;
    return a.dot(b) / (na * nb);
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, std::string_view query, Index k,
                                        std::optional<std::span<const Index>> restrict_to)
{
    if (k < 1)
        fail(ErrorCode::ConfigError, "k must be >= 1");
    const Index q = table.index_of(query);

    std::vector<Index> candidates;
    if (restrict_to) {
        candidates.assign(restrict_to->begin(), restrict_to->end());
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    } else {
        candidates.resize(static_cast<std::size_t>(table.size()));
        std::iota(candidates.begin(), candidates.end(), Index{0});
    }
    std::erase(candidates, q);

    std::vector<std::pair<double, Index>> scored;
    scored.reserve(candidates.size());
    const auto qv = table.vector(q);
    for (Index c : candidates)
        scored.emplace_back(cosine(qv, table.vector(c)), c);

    const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const auto& a, const auto& b) {
                          return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    std::vector<Neighbor> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
        out.push_back({scored[i].second, table.word(scored[i].second), scored[i].first});
    return out;
}

} // namespace cfdebias
