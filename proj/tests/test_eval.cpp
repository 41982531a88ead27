#include <algorithm>
#include <numeric>
#include <random>

#include <Eigen/SVD>

#include "doctest.h"

#include "cfdebias/error.hpp"
#include "cfdebias/eval.hpp"
#include "cfdebias/kmeans.hpp"
#include "support.hpp"

using namespace cfdebias;

namespace {

template <typename F>
ErrorCode code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::ConfigError;
}

struct Builder {
    std::vector<std::string> words;
    std::vector<Eigen::VectorXd> vectors;

    void add(std::string w, Eigen::VectorXd v)
    {
        words.push_back(std::move(w));
        vectors.push_back(std::move(v));
    }
    EmbeddingTable build() const
    {
        Eigen::MatrixXd m(vectors.front().size(), static_cast<Index>(vectors.size()));
        for (std::size_t i = 0; i < vectors.size(); ++i)
            m.col(static_cast<Index>(i)) = vectors[i];
        return {words, m};
    }
};

Eigen::VectorXd vec2(double x, double y)
{
    return Eigen::Vector2d(x, y);
}

/// he = e0, she = 0, o = 0; a-words carry the pair differences.
EmbeddingTable sembias_table()
{
    Builder b;
    b.add("he", vec2(1, 0));
    b.add("she", vec2(0, 0));
    b.add("o", vec2(0, 0));
    const std::vector<std::pair<std::string, Eigen::VectorXd>> deltas = {
        {"a1", vec2(1, 1)},  {"a2", vec2(1, 0)},  {"a3", vec2(0, 1)},  {"a4", vec2(-1, 0)},
        {"b1", vec2(2, 0)},  {"b2", vec2(1, 1)},  {"b3", vec2(0, 1)},  {"b4", vec2(1, -2)},
        {"c1", vec2(0, 1)},  {"c2", vec2(-1, 1)}, {"c3", vec2(1, -1)}, {"c4", vec2(0, -1)},
    };
    for (const auto& [w, v] : deltas)
        b.add(w, v);
    return b.build();
}

const char* kSembiasFixture = "i1\ta1\to\ta2\to\ta3\to\ta4\to\n"
                              "i2\tb1\to\tb2\to\tb3\to\tb4\to\n"
                              "i3\tc1\to\tc2\to\tc3\to\tc4\to\n"
                              "i4\tmissing\to\ta2\to\ta3\to\ta4\to\n";

/// Words x0..: random d-dim vectors; he = e0, she = -e0.
EmbeddingTable anchored_table(Index d, Index n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Builder b;
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(d);
    e0[0] = 1.0;
    b.add("he", e0);
    b.add("she", -e0);
    for (Index i = 0; i < n; ++i) {
        Eigen::VectorXd v(d);
        for (Index j = 0; j < d; ++j)
            v[j] = normal(rng);
        b.add("x" + std::to_string(i), v);
    }
    return b.build();
}

EmbeddingTable with_vectors(const EmbeddingTable& table, Eigen::MatrixXd vectors)
{
    return {table.words(), std::move(vectors)};
}

} // namespace

// --- Sembias ----------------------------------------------------------------------

TEST_CASE("Sembias: forced argmax gives 100 / 0 / 0")
{
    // every definitional difference equals he - she; all others are orthogonal to it
    Builder b;
    Eigen::VectorXd he = Eigen::VectorXd::Zero(3), she = Eigen::VectorXd::Zero(3);
    he << 0.5, 0.1, 0.2;
    she << -0.5, 0.1, 0.2;
    b.add("he", he);
    b.add("she", she);
    std::vector<SembiasInstance> instances;
    for (int i = 0; i < 5; ++i) {
        const std::string s = std::to_string(i);
        Eigen::VectorXd base = Eigen::VectorXd::Constant(3, 0.1 * i);
        b.add("dm" + s, base + (he - she));
        b.add("df" + s, base);
        Eigen::VectorXd off(3);
        off << 0, 1 + i, -(i % 2);
        b.add("sm" + s, base + off);
        b.add("sf" + s, base);
        b.add("nm" + s, base + Eigen::Vector3d(0, 0, 2));
        b.add("nf" + s, base);
        b.add("om" + s, base + Eigen::Vector3d(0, -1, 0));
        b.add("of" + s, base);
        instances.push_back({s, {TokenPair{"dm" + s, "df" + s}, TokenPair{"sm" + s, "sf" + s},
                                 TokenPair{"nm" + s, "nf" + s}, TokenPair{"om" + s, "of" + s}}});
    }
    const auto r = sembias_eval(b.build(), instances);
    CHECK(r.definition_pct == 100.0);
    CHECK(r.stereotype_pct == 0.0);
    CHECK(r.none_pct == 0.0);
    CHECK(r.scored == 5);
    CHECK(r.ties == 0);
}

TEST_CASE("Sembias: three-instance fixture matches hand scoring")
{
    const auto dir = testing::scratch_dir("sembias");
    testing::write_text(dir / "sembias.tsv", kSembiasFixture);
    const auto instances = read_sembias(dir / "sembias.tsv");
    REQUIRE(instances.size() == 4);
    CHECK(instances[1].id == "i2");
    CHECK(instances[1].pairs[3] == TokenPair{"b4", "o"});
    const auto table = sembias_table();

    // cosines: i1 (0.71, 1, 0, -1) -> stereotype; i2 (1, 0.71, 0, 0.45) -> definition;
    // i3 (0, -0.71, 0.71, 0) -> none
    const auto cos = sembias_eval(table, instances);
    CHECK(cos.scored == 3);
    CHECK(cos.skipped == 1);
    CHECK(cos.ties == 0);
    CHECK(cos.definition_pct == doctest::Approx(100.0 / 3.0));
    CHECK(cos.stereotype_pct == doctest::Approx(100.0 / 3.0));
    CHECK(cos.none_pct == doctest::Approx(100.0 / 3.0));

    // dots: i1 (1, 1, 0, -1) tie -> definition; i2 (2, 1, 0, 1) -> definition; i3 (0, -1, 1, 0) -> none
    const auto dot = sembias_eval(table, instances, {"he", "she"}, AlignmentMetric::Dot);
    CHECK(dot.ties == 1);
    CHECK(dot.definition_pct == doctest::Approx(200.0 / 3.0));
    CHECK(dot.stereotype_pct == 0.0);
    CHECK(dot.none_pct == doctest::Approx(100.0 / 3.0));
    CHECK(dot.definition_pct + dot.stereotype_pct + dot.none_pct == doctest::Approx(100.0).epsilon(1e-14));
}

TEST_CASE("Sembias: errors")
{
    const auto dir = testing::scratch_dir("sembias_err");
    testing::write_text(dir / "bad.tsv", "i1\ta\tb\tc\td\te\tf\tg\th\ni2\ta\tb\n");
    try {
        read_sembias(dir / "bad.tsv");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    const auto table = sembias_table();
    const std::vector<SembiasInstance> none;
    CHECK(code_of([&] { sembias_eval(table, none, {"king", "she"}); }) == ErrorCode::MissingAnchor);
    CHECK(code_of([&] { sembias_eval(table, none); }) == ErrorCode::MissingResource);
}

// --- WEAT ------------------------------------------------------------------------

TEST_CASE("WEAT: two-dimensional toy")
{
    Builder b;
    b.add("t1a", vec2(1, 0));
    b.add("t1b", vec2(1, 0));
    b.add("t2a", vec2(-1, 0));
    b.add("t2b", vec2(-1, 0));
    b.add("a1", vec2(1, 0));
    b.add("a2", vec2(-1, 0));
    const auto table = b.build();
    const WeatSpec spec{"toy", {"t1a", "t1b"}, {"t2a", "t2b"}, {"a1"}, {"a2"}};

    const auto r = weat(table, spec);
    REQUIRE(r.effect_size.has_value());
    CHECK(*r.effect_size == 2.0);
    CHECK(r.p_value == 2.0 / 6.0);
    CHECK(r.exhaustive);
    CHECK(r.partitions == 6);
    CHECK(r.statistic == 8.0);

    const auto sampled = weat(table, spec, 100000, 7, WeatMode::Sampled);
    CHECK_FALSE(sampled.exhaustive);
    CHECK(sampled.partitions == 100000);
    CHECK(std::abs(sampled.p_value - 2.0 / 6.0) <= 0.02);
}

TEST_CASE("WEAT: identical association scores leave d undefined")
{
    const std::vector<double> s = {0.3, 0.3, 0.3};
    const auto r = weat_from_scores(s, s);
    CHECK_FALSE(r.effect_size.has_value());
    CHECK(r.p_value == 1.0);
}

TEST_CASE("WEAT: sampling switches on above the partition budget")
{
    const std::vector<double> s1 = {0.9, 0.4, 0.3, 0.8, 0.5};
    const std::vector<double> s2 = {-0.2, 0.1, 0.0, -0.4, 0.2};
    const auto exact = weat_from_scores(s1, s2, 252);
    CHECK(exact.exhaustive);
    CHECK(exact.partitions == 252);
    const auto sampled = weat_from_scores(s1, s2, 251, 3);
    CHECK_FALSE(sampled.exhaustive);
    CHECK(sampled.partitions == 251);
    CHECK(weat_from_scores(s1, s2, 251, 3).p_value == sampled.p_value);
}

TEST_CASE("property: WEAT swap and relabel identities")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 4);
        std::vector<double> s1(n), s2(n);
        for (auto& v : s1)
            v = normal(rng) + 0.5;
        for (auto& v : s2)
            v = normal(rng);
        const auto r = weat_from_scores(s1, s2);
        const auto swapped = weat_from_scores(s2, s1);
        CHECK(*swapped.effect_size == doctest::Approx(-*r.effect_size).epsilon(1e-14));
        CHECK(swapped.p_value == r.p_value);
        CHECK(r.p_value >= 0.0);
        CHECK(r.p_value <= 1.0);
        CHECK(std::abs(*r.effect_size) <= 2.0 + 1e-12);

        // negating every score (A1 <-> A2) together with the target swap keeps d
        std::vector<double> n1(n), n2(n);
        std::transform(s2.begin(), s2.end(), n1.begin(), std::negate<>());
        std::transform(s1.begin(), s1.end(), n2.begin(), std::negate<>());
        CHECK(*weat_from_scores(n1, n2).effect_size == doctest::Approx(*r.effect_size).epsilon(1e-14));

        // enumeration order: permuting within each set leaves p unchanged
        std::shuffle(s1.begin(), s1.end(), rng);
        std::shuffle(s2.begin(), s2.end(), rng);
        CHECK(weat_from_scores(s1, s2).p_value == r.p_value);
    }
}

TEST_CASE("WEAT: spec file and unresolved tokens")
{
    const auto dir = testing::scratch_dir("weat");
    testing::write_text(dir / "weat.json",
                        R"({"toy": {"T1": ["t1a", "t1b", "ghost"], "T2": ["t2a", "t2b", "t2a"],)"
                        R"( "A1": ["a1"], "A2": ["a2", "nope"]}})");
    const auto specs = read_weat_specs(dir / "weat.json");
    REQUIRE(specs.size() == 1);
    CHECK(specs[0].name == "toy");
    CHECK(specs[0].targets1.size() == 3);

    Builder b;
    b.add("t1a", vec2(1, 0.1));
    b.add("t1b", vec2(1, -0.2));
    b.add("t2a", vec2(-1, 0.3));
    b.add("t2b", vec2(-1, 0));
    b.add("a1", vec2(1, 0));
    b.add("a2", vec2(-1, 0));
    const auto r = weat(b.build(), specs[0]);
    CHECK(r.dropped_tokens == 2);
    CHECK(r.name == "toy");

    testing::write_text(dir / "uneven.json", R"({"x": {"T1": ["a"], "T2": [], "A1": ["a"], "A2": ["b"]}})");
    CHECK(code_of([&] { read_weat_specs(dir / "uneven.json"); }) == ErrorCode::ParseError);
    testing::write_text(dir / "broken.json", "{");
    CHECK(code_of([&] { read_weat_specs(dir / "broken.json"); }) == ErrorCode::ParseError);
    const WeatSpec empty{"e", {"ghost"}, {"t2a"}, {"a1"}, {"a2"}};
    CHECK(code_of([&] { weat(b.build(), empty); }) == ErrorCode::InsufficientVocabulary);
}

// --- clustering -----------------------------------------------------------------

TEST_CASE("k-means separates two blobs and is seed-deterministic")
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 0.3);
    Eigen::MatrixXd pts(2, 40);
    for (Index j = 0; j < 40; ++j)
        pts.col(j) << (j < 20 ? -3.0 : 3.0) + normal(rng), normal(rng);
    const auto r = kmeans(pts, 2, KMeansConfig{});
    for (Index j = 1; j < 40; ++j)
        CHECK((r.labels[static_cast<std::size_t>(j)] == r.labels[0]) == (j < 20));
    const auto again = kmeans(pts, 2, KMeansConfig{});
    CHECK(again.labels == r.labels);
    CHECK(again.inertia == r.inertia);
    CHECK(code_of([&] { kmeans(pts, 41, KMeansConfig{}); }) == ErrorCode::ConfigError);
}

TEST_CASE("cluster test: planted clusters are recovered")
{
    const auto original = anchored_table(10, 1200, 2);
    const auto pool = select_biased_words(original, {"he", "she"}, 500);
    REQUIRE(pool.words.size() == 1000);
    // the top of the pool really is the most masculine by dot product
    CHECK(original.vector(pool.words.front())[0] >= original.vector(pool.words[499])[0]);
    CHECK(original.vector(pool.words[499])[0] > original.vector(pool.words[500])[0]);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd planted = original.vectors();
    for (std::size_t i = 0; i < pool.words.size(); ++i) {
        const Index w = pool.words[i];
        for (Index j = 0; j < planted.rows(); ++j)
            planted(j, w) = normal(rng);
        planted(1, w) += pool.masculine[i] ? 8.0 : -8.0;
    }
    CHECK(cluster_bias_test(original, with_vectors(original, planted), {"he", "she"}, 500) >= 0.99);
}

TEST_CASE("cluster test: one isotropic Gaussian gives chance accuracy")
{
    const auto original = anchored_table(10, 1200, 4);
    const auto noise = anchored_table(10, 1200, 5);
    const double acc = cluster_bias_test(original, with_vectors(original, noise.vectors()), {"he", "she"}, 500);
    CHECK(acc >= 0.5);
    CHECK(acc <= 0.62);
}

TEST_CASE("cluster test: errors")
{
    const auto small = anchored_table(3, 7, 6);
    CHECK(code_of([&] { select_biased_words(small, {"he", "she"}, 4); }) == ErrorCode::InsufficientVocabulary);
    CHECK(code_of([&] { select_biased_words(small, {"king", "she"}, 2); }) == ErrorCode::MissingAnchor);
    const std::vector<std::string> exclude = {"x0", "x1"};
    const auto pool = select_biased_words(small, {"he", "she"}, 1 + 1, exclude);
    for (Index w : pool.words) {
        CHECK(small.word(w) != "x0");
        CHECK(small.word(w) != "x1");
    }
}

// --- neighbour correlation ------------------------------------------------------

TEST_CASE("neighbour correlation: separated genders give r near 1")
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::uniform_real_distribution<double> magnitude(0.7, 1.0);
    Builder b;
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(4);
    e0[0] = 1.0;
    b.add("he", e0);
    b.add("she", -e0);
    auto jitter = [&](double x0) {
        Eigen::VectorXd v(4);
        v << x0, noise(rng), noise(rng), noise(rng);
        return v;
    };
    for (int i = 0; i < 50; ++i)
        b.add("m" + std::to_string(i), jitter(3.0));
    for (int i = 0; i < 50; ++i)
        b.add("f" + std::to_string(i), jitter(-3.0));
    std::vector<std::string> professions;
    for (int i = 0; i < 20; ++i) {
        const std::string w = "p" + std::to_string(i);
        b.add(w, jitter(i % 2 ? magnitude(rng) : -magnitude(rng)));
        professions.push_back(w);
    }
    const auto table = b.build();
    const std::vector<std::string> exclude(professions);
    const auto pool = select_biased_words(table, {"he", "she"}, 50, exclude);
    const auto r = neighbor_bias_correlation(table, table, professions, pool, {"he", "she"}, 10);
    CHECK(r.words.size() == 20);
    CHECK(r.pearson_r >= 0.95);
}

TEST_CASE("neighbour correlation: shuffled neighbour pools give r near 0")
{
    // each profession is handed another profession's eval vector, and so its neighbour pool
    const auto table = anchored_table(50, 2000, 8);
    std::vector<std::string> professions;
    std::vector<Index> columns;
    for (int i = 1000; i < 1400; ++i) {
        professions.push_back("x" + std::to_string(i));
        columns.push_back(table.index_of(professions.back()));
    }
    const auto pool = select_biased_words(table, {"he", "she"}, 200, professions);
    std::vector<Index> shuffled = columns;
    std::mt19937_64 rng(9);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    Eigen::MatrixXd v = table.vectors();
    for (std::size_t i = 0; i < columns.size(); ++i)
        v.col(columns[i]) = table.vector(shuffled[i]);
    const auto eval = with_vectors(table, v);

    const auto own = neighbor_bias_correlation(table, table, professions, pool, {"he", "she"}, 100);
    const auto null = neighbor_bias_correlation(table, eval, professions, pool, {"he", "she"}, 100);
    CHECK(own.pearson_r > 0.5);
    CHECK(std::abs(null.pearson_r) <= 0.15);
}

TEST_CASE("neighbour correlation: too few professions")
{
    const auto table = anchored_table(4, 40, 10);
    const auto pool = select_biased_words(table, {"he", "she"}, 5);
    const std::vector<std::string> professions = {"x1", "ghost", "phantom"};
    CHECK(code_of([&] { neighbor_bias_correlation(table, table, professions, pool); }) ==
          ErrorCode::TooFewProfessions);
}

TEST_CASE("property: Pearson r is bounded and affine invariant")
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> positive(0.1, 10.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(15), y(15);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = normal(rng);
            y[i] = 0.5 * x[i] + normal(rng);
        }
        const double r = pearson(x, y);
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
        const double a = positive(rng), c = normal(rng);
        std::vector<double> x2(x.size());
        std::transform(x.begin(), x.end(), x2.begin(), [&](double v) { return a * v + c; });
        CHECK(pearson(x2, y) == doctest::Approx(r).epsilon(1e-12));
    }
    const std::vector<double> flat = {1, 1, 1};
    const std::vector<double> any = {1, 2, 3};
    CHECK(code_of([&] { pearson(flat, any); }) == ErrorCode::ZeroVariance);
}

// --- variance profile -----------------------------------------------------------

TEST_CASE("Gini index closed forms")
{
    std::vector<double> one_hot(30, 0.0);
    one_hot[0] = 1.0;
    CHECK(gini_index(one_hot) == doctest::Approx(29.0 / 30.0).epsilon(1e-15));
    const std::vector<double> uniform(30, 1.0 / 30.0);
    CHECK(gini_index(uniform) == 0.0);
}

TEST_CASE("property: Gini index lies in [0, (n - 1) / n]")
{
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> p(1 + static_cast<std::size_t>(trial));
        for (auto& v : p)
            v = u(rng);
        const double g = gini_index(p);
        const double n = static_cast<double>(p.size());
        CHECK(g >= 0.0);
        CHECK(g <= (n - 1.0) / n + 1e-15);
    }
}

TEST_CASE("PC variance profile matches an SVD of the centred differences")
{
    const auto table = testing::random_table(35, 80, 13);
    std::vector<WordPair> pairs;
    for (Index i = 0; i < 40; ++i)
        pairs.push_back({2 * i, 2 * i + 1});
    const auto profile = pc_variance_profile(table, pairs, 30);
    REQUIRE(profile.proportions.size() == 30);

    Eigen::MatrixXd diffs(35, 40);
    for (Index i = 0; i < 40; ++i)
        diffs.col(i) = table.vector(2 * i + 1) - table.vector(2 * i);
    const Eigen::MatrixXd centered = diffs.colwise() - diffs.rowwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    const Eigen::VectorXd s2 = svd.singularValues().array().square();
    for (Index i = 0; i < 30; ++i)
        CHECK(std::abs(profile.proportions[static_cast<std::size_t>(i)] - s2[i] / s2.sum()) <= 1e-8);
    CHECK(profile.gini == doctest::Approx(gini_index(profile.proportions)));
    CHECK(code_of([&] { pc_variance_profile(table, std::span(pairs).first(29), 30); }) == ErrorCode::TooFewPairs);
}

// --- classifier -----------------------------------------------------------------

TEST_CASE("classifier accuracy: hand-counted fixture")
{
    const std::vector<double> masc = {0.9, 0.4, 0.6, 0.5};
    const std::vector<double> fem = {0.1, 0.7, 0.5, 0.2};
    const auto acc = classifier_accuracy_from_scores(masc, fem);
    CHECK(acc.masculine == 0.5);
    CHECK(acc.feminine == 0.5);
    CHECK(acc.masculine_count == 4);
    const std::vector<double> none;
    CHECK(code_of([&] { classifier_accuracy_from_scores(none, fem); }) == ErrorCode::EmptyTestSet);
}

TEST_CASE("classifier accuracy: a classifier constant at one")
{
    const auto table = testing::random_table(4, 8, 14);
    auto params = testing::formula_model(4, 5, 2, 3);
    params.classifier = MlpParams::zeros(2, 3, 1, Activation::Sigmoid);
    params.classifier.b2[0] = 50.0;
    const std::vector<WordPair> pairs = {{0, 1}, {2, 3}, {4, 5}};
    const auto acc = gender_classifier_accuracy(params, table, pairs);
    CHECK(acc.masculine == 1.0);
    CHECK(acc.feminine == 0.0);
    CHECK(code_of([&] { gender_classifier_accuracy(params, table, std::vector<WordPair>{}); }) ==
          ErrorCode::EmptyTestSet);
}

TEST_CASE("token lists skip comments and blanks")
{
    const auto dir = testing::scratch_dir("tokens");
    testing::write_text(dir / "p.txt", "# professions\nnurse\n\n  doctor \r\n");
    CHECK(read_token_list(dir / "p.txt") == std::vector<std::string>{"nurse", "doctor"});
    CHECK(code_of([&] { read_token_list(dir / "absent.txt"); }) == ErrorCode::IoError);
}
