#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"

#include "cfdebias/embedding_store.hpp"
#include "cfdebias/error.hpp"
#include "support.hpp"

using namespace cfdebias;

namespace {

EmbeddingTable parse(const std::string& text, std::optional<Index> dim = std::nullopt, LoadReport* report = nullptr)
{
    std::istringstream in(text);
    return read_embeddings(in, dim, report);
}

template <typename F>
std::size_t parse_error_line(F&& f)
{
    try {
        f();
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

} // namespace

TEST_CASE("load: single record with expected dimension")
{
    const auto t = parse("cat 0.1 -0.2 0.3\n", 3);
    REQUIRE(t.size() == 1);
    CHECK(t.dim() == 3);
    const auto v = t.vector(t.index_of("cat"));
    CHECK(v[0] == doctest::Approx(0.1));
    CHECK(v[1] == doctest::Approx(-0.2));
    CHECK(v[2] == doctest::Approx(0.3));
}

TEST_CASE("load: malformed records report their line")
{
    SUBCASE("non-numeric field")
    {
        CHECK(parse_error_line([] { parse("dog 1 2 3\ncat 0.1 xx 0.3\n"); }) == 2);
        CHECK_THROWS_AS(parse("cat 0.1 xx 0.3\n"), ParseError);
    }
    SUBCASE("wrong component count")
    {
        try {
            parse("a 1 2 3\nb 1 2\n");
            FAIL("expected DimensionMismatch");
        } catch (const ParseError& e) {
            CHECK(e.code() == ErrorCode::DimensionMismatch);
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("expected dimension disagrees with the first record")
    {
        try {
            parse("a 1 2\n", 3);
            FAIL("expected DimensionMismatch");
        } catch (const ParseError& e) {
            CHECK(e.code() == ErrorCode::DimensionMismatch);
            CHECK(e.line() == 1);
        }
    }
    SUBCASE("non-finite value")
    {
        CHECK(parse_error_line([] { parse("a 1 2\nb nan 1\n"); }) == 2);
    }
}

TEST_CASE("load: empty input")
{
    try {
        parse("\n\n");
        FAIL("expected EmptyFile");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyFile);
    }
}

TEST_CASE("load: fastText header and duplicate tokens")
{
    LoadReport report;
    const auto t = parse("3 2\na 1 2\nb 3 4\na 5 6\n", std::nullopt, &report);
    CHECK(report.had_header);
    CHECK(report.duplicates == 1);
    REQUIRE(t.size() == 2);
    CHECK(t.vector(t.index_of("a"))[0] == 1.0); // first occurrence wins
}

TEST_CASE("load: tokens are byte-exact")
{
    const auto t = parse("Cat 1 0\ncat 0 1\n");
    CHECK(t.size() == 2);
    CHECK(t.index_of("Cat") != t.index_of("cat"));
    CHECK_THROWS_AS(t.index_of("CAT"), Error);
}

TEST_CASE("table construction rejects duplicates and non-finite entries")
{
    CHECK_THROWS_AS(EmbeddingTable({"a", "a"}, Eigen::MatrixXd::Zero(2, 2)), Error);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 1);
    bad(1, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(EmbeddingTable({"a"}, bad), Error);
}

TEST_CASE("save: documented text format")
{
    Eigen::MatrixXd v(2, 1);
    v << 1, 2;
    std::ostringstream out;
    write_embeddings(EmbeddingTable({"a"}, v), out);
    CHECK(out.str() == "a 1 2\n");
}

TEST_CASE("save: empty table is refused")
{
    std::ostringstream out;
    try {
        write_embeddings(EmbeddingTable{}, out);
        FAIL("expected EmptyTable");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyTable);
    }
}

TEST_CASE("save/load round trip on a random 10x5 table stays within 1e-5")
{
    const auto t = testing::random_table(5, 10, 11);
    const auto dir = testing::scratch_dir("roundtrip");
    save_embeddings(t, dir / "t.txt");
    const auto back = load_embeddings(dir / "t.txt");
    REQUIRE(back.words() == t.words());
    CHECK((back.vectors() - t.vectors()).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("property: load-save-load is idempotent up to serialized precision")
{
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        std::mt19937_64 rng(seed);
        const Index d = 1 + static_cast<Index>(rng() % 8);
        const Index n = 1 + static_cast<Index>(rng() % 30);
        const double scale = std::pow(10.0, static_cast<double>(rng() % 5) - 2.0);
        const auto t = testing::random_table(d, n, seed, scale);
        std::stringstream first;
        write_embeddings(t, first);
        const auto once = read_embeddings(first);
        std::stringstream second;
        write_embeddings(once, second);
        CHECK(first.str() == second.str());
        const double tol = 5e-6 * std::max(1.0, t.vectors().cwiseAbs().maxCoeff());
        CHECK((once.vectors() - t.vectors()).cwiseAbs().maxCoeff() <= tol);
    }
}

// --- partition ---------------------------------------------------------------------

TEST_CASE("partition: pair members land in their gender sets")
{
    const auto t = parse("she 1 0\nhe 0 1\ncat 1 1\n");
    const std::vector<std::pair<std::string, std::string>> pairs = {{"she", "he"}};
    const auto p = make_partition(t, pairs, SplitRule::count(0), 1);
    CHECK(p.role(t.index_of("she")) == WordRole::Feminine);
    CHECK(p.role(t.index_of("he")) == WordRole::Masculine);
    CHECK(p.role(t.index_of("cat")) == WordRole::Neutral);
    REQUIRE(p.pairs().size() == 1);
    CHECK(p.pairs()[0] == WordPair{t.index_of("she"), t.index_of("he")});
}

TEST_CASE("partition: out-of-vocabulary pairs are skipped")
{
    const auto t = parse("she 1 0\nhe 0 1\ncat 1 1\n");
    const std::vector<std::pair<std::string, std::string>> pairs = {{"she", "he"}, {"queen", "king"}};
    const auto p = make_partition(t, pairs, SplitRule::count(0), 1);
    CHECK(p.pairs().size() == 1);
    CHECK(p.skipped_pairs() == 1);
    CHECK(p.neutral().size() == 1);

    const std::vector<std::pair<std::string, std::string>> none = {{"queen", "king"}};
    try {
        make_partition(t, none, SplitRule::count(0), 1);
        FAIL("expected NoValidPairs");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoValidPairs);
    }
}

TEST_CASE("partition: 196 pairs with 53 held out leaves 143 for training")
{
    std::vector<std::string> words;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int i = 0; i < 196; ++i) {
        pairs.emplace_back("f" + std::to_string(i), "m" + std::to_string(i));
        words.push_back(pairs.back().first);
        words.push_back(pairs.back().second);
    }
    words.push_back("neutral");
    const EmbeddingTable t(words, Eigen::MatrixXd::Ones(2, static_cast<Index>(words.size())));
    const auto p = make_partition(t, pairs, SplitRule::count(53), 3);
    CHECK(p.train_pairs().size() == 143);
    CHECK(p.test_pairs().size() == 53);
}

TEST_CASE("pair file: tab-separated with comments")
{
    const auto dir = testing::scratch_dir("pairs");
    testing::write_text(dir / "p.tsv", "# comment\nshe\the\n\nqueen\tking\n");
    const auto pairs = read_pair_file(dir / "p.tsv");
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[1] == std::pair<std::string, std::string>{"queen", "king"});
    testing::write_text(dir / "bad.tsv", "she he\n");
    CHECK_THROWS_AS(read_pair_file(dir / "bad.tsv"), ParseError);
}

TEST_CASE("property: partitions are disjoint, cover the vocabulary and split the pairs")
{
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        std::mt19937_64 rng(seed);
        const Index n = 5 + static_cast<Index>(rng() % 40);
        const auto t = testing::random_table(2, n, seed);
        std::vector<std::pair<std::string, std::string>> pairs;
        const int n_pairs = 1 + static_cast<int>(rng() % 15);
        for (int i = 0; i < n_pairs; ++i) {
            // some pairs reuse tokens or reach outside the vocabulary
            auto token = [&] {
                const auto j = static_cast<Index>(rng() % static_cast<std::uint64_t>(n + 3));
                return j < n ? t.word(j) : "oov" + std::to_string(j);
            };
            pairs.emplace_back(token(), token());
        }
        VocabularyPartition p;
        try {
            p = make_partition(t, pairs, SplitRule::fraction(0.3), seed);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NoValidPairs);
            continue;
        }
        std::set<Index> f(p.feminine().begin(), p.feminine().end());
        std::set<Index> m(p.masculine().begin(), p.masculine().end());
        std::set<Index> u(p.neutral().begin(), p.neutral().end());
        CHECK(f.size() + m.size() + u.size() == static_cast<std::size_t>(n));
        std::set<Index> all = f;
        all.insert(m.begin(), m.end());
        all.insert(u.begin(), u.end());
        CHECK(all.size() == static_cast<std::size_t>(n));
        for (const auto& pair : p.pairs()) {
            CHECK(f.count(pair.feminine) == 1);
            CHECK(m.count(pair.masculine) == 1);
        }
        CHECK(p.train_pairs().size() + p.test_pairs().size() == p.pairs().size());
        for (const auto& tp : p.test_pairs())
            CHECK(std::find(p.train_pairs().begin(), p.train_pairs().end(), tp) == p.train_pairs().end());
        CHECK(static_cast<Index>(p.pairs().size()) + p.skipped_pairs() == n_pairs);
    }
}

TEST_CASE("partition split is deterministic in the seed")
{
    const auto t = testing::random_table(2, 40, 5);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (Index i = 0; i < 20; ++i)
        pairs.emplace_back(t.word(2 * i), t.word(2 * i + 1));
    const auto a = make_partition(t, pairs, SplitRule::count(6), 9);
    const auto b = make_partition(t, pairs, SplitRule::count(6), 9);
    CHECK(a.test_pairs() == b.test_pairs());
}

// --- neighbours --------------------------------------------------------------------

TEST_CASE("neighbours: orthogonal table")
{
    Eigen::MatrixXd v(3, 3);
    v << 1, 1, 0, //
        0, 1, 0,  //
        0, 0, 1;
    const EmbeddingTable t({"a", "b", "c"}, v);
    const auto nn = nearest_neighbors(t, "a", 1);
    REQUIRE(nn.size() == 1);
    CHECK(nn[0].token == "b");
    CHECK(nn[0].similarity == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("neighbours: k beyond the candidate set returns every candidate")
{
    const auto t = testing::random_table(3, 4, 2);
    CHECK(nearest_neighbors(t, "t0", 10).size() == 3);
    CHECK_THROWS_AS(nearest_neighbors(t, "missing", 1), Error);
}

TEST_CASE("neighbours: random 50-word table matches a brute-force scan")
{
    const auto t = testing::random_table(6, 50, 3);
    const Index q = 17;
    std::vector<std::pair<double, Index>> scan;
    for (Index j = 0; j < t.size(); ++j) {
        if (j == q)
            continue;
        const double c = t.vector(q).dot(t.vector(j)) / (t.vector(q).norm() * t.vector(j).norm());
        scan.emplace_back(-c, j);
    }
    std::sort(scan.begin(), scan.end());
    const auto nn = nearest_neighbors(t, t.word(q), 5);
    REQUIRE(nn.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(nn[i].index == scan[i].second);
        CHECK(nn[i].similarity == doctest::Approx(-scan[i].first).epsilon(1e-12));
    }
}

TEST_CASE("property: neighbour lists are sorted, exclude the query and respect restriction")
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        std::mt19937_64 rng(seed);
        const Index n = 2 + static_cast<Index>(rng() % 40);
        const auto t = testing::random_table(1 + static_cast<Index>(rng() % 5), n, seed);
        const Index q = static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
        const Index k = 1 + static_cast<Index>(rng() % 10);
        std::vector<Index> pool;
        for (Index j = 0; j < n; j += 2)
            pool.push_back(j);
        for (const bool restricted : {false, true}) {
            const auto nn = restricted ? nearest_neighbors(t, t.word(q), k, std::span<const Index>(pool))
                                       : nearest_neighbors(t, t.word(q), k);
            CHECK(static_cast<Index>(nn.size()) <= k);
            for (std::size_t i = 0; i < nn.size(); ++i) {
                CHECK(nn[i].index != q);
                if (restricted)
                    CHECK(nn[i].index % 2 == 0);
                if (i > 0) {
                    CHECK(nn[i - 1].similarity >= nn[i].similarity);
                    if (nn[i - 1].similarity == nn[i].similarity)
                        CHECK(nn[i - 1].index < nn[i].index);
                }
            }
        }
    }
}

TEST_CASE("cosine of a zero vector is zero")
{
    CHECK(cosine(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)) == 0.0);
}
