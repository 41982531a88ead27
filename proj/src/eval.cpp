#include "cfdebias/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include <Eigen/Eigenvalues>
#include "json.hpp"

#include "cfdebias/error.hpp"

namespace cfdebias {

namespace {

std::vector<std::string> split_tabs(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos)
            break;
        start = tab + 1;
    }
    return out;
}

Eigen::VectorXd anchor_difference(const EmbeddingTable& table, const TokenPair& anchor)
{
    const auto a = table.find(anchor.first);
    const auto b = table.find(anchor.second);
    if (!a || !b)
        fail(ErrorCode::MissingAnchor, "anchor pair (" + anchor.first + ", " + anchor.second + ") not in vocabulary");
    return table.vector(*a) - table.vector(*b);
}

std::vector<Index> resolve(const EmbeddingTable& table, std::span<const std::string> tokens, Index& dropped)
{
    std::vector<Index> out;
    for (const auto& t : tokens) {
        if (auto i = table.find(t))
            out.push_back(*i);
        else
            ++dropped;
    }
    return out;
}

} // namespace

// --- Sembias --------------------------------------------------------------------

std::vector<SembiasInstance> read_sembias(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<SembiasInstance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        const auto f = split_tabs(line);
        if (f.size() != 9)
            throw ParseError(ErrorCode::ParseError, line_no,
                             "Sembias record needs 9 tab-separated fields, found " + std::to_string(f.size()));
        SembiasInstance inst;
        inst.id = f[0];
        for (std::size_t p = 0; p < 4; ++p)
            inst.pairs[p] = {f[1 + 2 * p], f[2 + 2 * p]};
        out.push_back(std::move(inst));
    }
    return out;
}

SembiasResult sembias_eval(const EmbeddingTable& table, std::span<const SembiasInstance> instances,
                           const TokenPair& anchor, AlignmentMetric metric)
{
    const Eigen::VectorXd direction = anchor_difference(table, anchor);
    constexpr std::array<SembiasCategory, 4> kCategory = {SembiasCategory::Definition, SembiasCategory::Stereotype,
                                                          SembiasCategory::None, SembiasCategory::None};
    SembiasResult r;
    std::array<Index, 3> tally{};
    for (const auto& inst : instances) {
        std::array<double, 4> score{};
        bool resolvable = true;
        for (std::size_t p = 0; p < 4 && resolvable; ++p) {
            const auto a = table.find(inst.pairs[p].first);
            const auto b = table.find(inst.pairs[p].second);
            if (!a || !b) {
                resolvable = false;
                break;
            }
            const Eigen::VectorXd delta = table.vector(*a) - table.vector(*b);
            score[p] = metric == AlignmentMetric::Cosine ? cosine(delta, direction) : delta.dot(direction);
        }
        if (!resolvable) {
            ++r.skipped;
            continue;
        }
        std::size_t best = 0;
        for (std::size_t p = 1; p < 4; ++p)
            if (score[p] > score[best])
                best = p;
        for (std::size_t p = 0; p < 4; ++p)
            if (p != best && score[p] == score[best]) {
                ++r.ties;
                break;
            }
        ++tally[static_cast<std::size_t>(kCategory[best])];
        ++r.scored;
    }
    if (r.scored == 0)
        fail(ErrorCode::MissingResource, "no Sembias instance could be scored");
    const double n = static_cast<double>(r.scored);
    r.definition_pct = 100.0 * static_cast<double>(tally[0]) / n;
    r.stereotype_pct = 100.0 * static_cast<double>(tally[1]) / n;
    r.none_pct = 100.0 * static_cast<double>(tally[2]) / n;
    return r;
}

// --- WEAT -----------------------------------------------------------------------

std::vector<WeatSpec> read_weat_specs(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::IoError, "cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, "WEAT spec " + path.string() + ": " + e.what());
    }
    if (!doc.is_object())
        fail(ErrorCode::ParseError, "WEAT spec must be a JSON object of named categories");
    std::vector<WeatSpec> out;
    for (const auto& [name, body] : doc.items()) {
        WeatSpec spec;
        spec.name = name;
        try {
            spec.targets1 = body.at("T1").get<std::vector<std::string>>();
            spec.targets2 = body.at("T2").get<std::vector<std::string>>();
            spec.attributes1 = body.at("A1").get<std::vector<std::string>>();
            spec.attributes2 = body.at("A2").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ParseError, "WEAT category '" + name + "': " + e.what());
        }
        if (spec.targets1.empty() || spec.targets1.size() != spec.targets2.size())
            fail(ErrorCode::ParseError, "WEAT category '" + name + "' needs non-empty T1 and T2 of equal size");
        out.push_back(std::move(spec));
    }
    return out;
}

WeatResult weat_from_scores(std::span<const double> scores1, std::span<const double> scores2, Index max_partitions,
                            std::uint64_t seed, WeatMode mode)
{
    if (scores1.empty() || scores2.empty())
        fail(ErrorCode::InsufficientVocabulary, "WEAT needs both target sets non-empty");
    if (max_partitions < 1)
        fail(ErrorCode::ConfigError, "max_partitions must be >= 1");

    std::vector<double> all(scores1.begin(), scores1.end());
    all.insert(all.end(), scores2.begin(), scores2.end());
    const auto n1 = scores1.size();
    const auto n = all.size();

    WeatResult r;
    const double sum1 = std::accumulate(scores1.begin(), scores1.end(), 0.0);
    const double sum2 = std::accumulate(scores2.begin(), scores2.end(), 0.0);
    const double total = sum1 + sum2;
    r.statistic = sum1 - sum2;

    const double mean = total / static_cast<double>(n);
    double var = 0.0;
    double scale = 0.0;
    for (double s : all) {
        var += (s - mean) * (s - mean);
        scale = std::max(scale, std::abs(s));
    }
    const double stddev = std::sqrt(var / static_cast<double>(n));
    if (stddev > 1e-12 * std::max(1.0, scale))
        r.effect_size = (sum1 / static_cast<double>(n1) - sum2 / static_cast<double>(scores2.size())) / stddev;

    const double observed = std::abs(r.statistic);
    const double tol = 1e-12 * (1.0 + std::accumulate(all.begin(), all.end(), 0.0,
                                                      [](double acc, double s) { return acc + std::abs(s); }));
    auto reaches = [&](double subset_sum) { return std::abs(2.0 * subset_sum - total) >= observed - tol; };

    // C(n, n1), capped once it exceeds the budget
    double combos = 1.0;
    for (std::size_t i = 0; i < n1; ++i) {
        combos = combos * static_cast<double>(n - i) / static_cast<double>(i + 1);
        if (combos > static_cast<double>(max_partitions))
            break;
    }
    combos = std::round(combos);

    Index hits = 0;
    if (mode == WeatMode::Auto && combos <= static_cast<double>(max_partitions)) {
        r.exhaustive = true;
        std::vector<std::size_t> pick(n1);
        std::iota(pick.begin(), pick.end(), std::size_t{0});
        while (true) {
            double s = 0.0;
            for (auto i : pick)
                s += all[i];
            hits += reaches(s) ? 1 : 0;
            ++r.partitions;
            // next combination in lexicographic order
            std::size_t i = n1;
            while (i > 0 && pick[i - 1] == n - n1 + (i - 1))
                --i;
            if (i == 0)
                break;
            ++pick[i - 1];
            for (std::size_t j = i; j < n1; ++j)
                pick[j] = pick[j - 1] + 1;
        }
    } else {
        r.exhaustive = false;
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (Index m = 0; m < max_partitions; ++m) {
            // partial Fisher-Yates: the first n1 slots form a uniform subset
            for (std::size_t i = 0; i < n1; ++i) {
                std::uniform_int_distribution<std::size_t> u(i, n - 1);
                std::swap(idx[i], idx[u(rng)]);
            }
            double s = 0.0;
            for (std::size_t i = 0; i < n1; ++i)
                s += all[idx[i]];
            hits += reaches(s) ? 1 : 0;
        }
        r.partitions = max_partitions;
    }
    r.p_value = static_cast<double>(hits) / static_cast<double>(r.partitions);
    return r;
}

double weat_association(const EmbeddingTable& table, Index target, std::span<const Index> attributes1,
                        std::span<const Index> attributes2)
{
    const auto t = table.vector(target);
    auto mean_cos = [&](std::span<const Index> set) {
        double acc = 0.0;
        for (Index a : set)
            acc += cosine(t, table.vector(a));
        return acc / static_cast<double>(set.size());
    };
    return mean_cos(attributes1) - mean_cos(attributes2);
}

WeatResult weat(const EmbeddingTable& table, const WeatSpec& spec, Index max_partitions, std::uint64_t seed,
                WeatMode mode)
{
    Index dropped = 0;
    const auto t1 = resolve(table, spec.targets1, dropped);
    const auto t2 = resolve(table, spec.targets2, dropped);
    const auto a1 = resolve(table, spec.attributes1, dropped);
    const auto a2 = resolve(table, spec.attributes2, dropped);
    if (t1.empty() || t2.empty() || a1.empty() || a2.empty())
        fail(ErrorCode::InsufficientVocabulary, "WEAT category '" + spec.name + "' has an empty set after resolution");

    std::vector<double> s1, s2;
    for (Index t : t1)
        s1.push_back(weat_association(table, t, a1, a2));
    for (Index t : t2)
        s2.push_back(weat_association(table, t, a1, a2));
    WeatResult r = weat_from_scores(s1, s2, max_partitions, seed, mode);
    r.name = spec.name;
    r.dropped_tokens = dropped;
    return r;
}

// --- clustering / neighbours --------------------------------------------------------

BiasedPool select_biased_words(const EmbeddingTable& original, const TokenPair& anchor, Index n_per_side,
                               std::span<const std::string> exclude)
{
    if (n_per_side < 2)
        fail(ErrorCode::ConfigError, "need at least 2 biased words per side");
    const Eigen::VectorXd direction = anchor_difference(original, anchor);
    std::unordered_set<Index> skip{original.index_of(anchor.first), original.index_of(anchor.second)};
    for (const auto& w : exclude)
        if (auto i = original.find(w))
            skip.insert(*i);

    std::vector<std::pair<double, Index>> scored;
    for (Index i = 0; i < original.size(); ++i)
        if (!skip.contains(i))
            scored.emplace_back(original.vector(i).dot(direction), i);
    if (static_cast<Index>(scored.size()) < 2 * n_per_side)
        fail(ErrorCode::InsufficientVocabulary, "only " + std::to_string(scored.size()) +
                                                    " candidate words for " + std::to_string(2 * n_per_side) +
                                                    " biased slots");
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });

    BiasedPool pool;
    const auto n = static_cast<std::size_t>(n_per_side);
    for (std::size_t i = 0; i < n; ++i) {
        pool.words.push_back(scored[i].second);
        pool.masculine.push_back(1);
    }
    for (std::size_t i = scored.size() - n; i < scored.size(); ++i) {
        pool.words.push_back(scored[i].second);
        pool.masculine.push_back(0);
    }
    return pool;
}

double cluster_accuracy(const EmbeddingTable& eval, const BiasedPool& pool, const KMeansConfig& config)
{
    if (pool.words.size() < 4)
        fail(ErrorCode::InsufficientVocabulary, "cluster test needs at least 2 words per side");
    const auto result = kmeans(eval.gather(pool.words), 2, config);
    Index agree = 0;
    for (std::size_t i = 0; i < pool.words.size(); ++i)
        agree += (result.labels[i] == 1) == (pool.masculine[i] == 1) ? 1 : 0;
    const double a = static_cast<double>(agree) / static_cast<double>(pool.words.size());
    return std::max(a, 1.0 - a);
}

double cluster_bias_test(const EmbeddingTable& original, const EmbeddingTable& eval, const TokenPair& anchor,
                         Index n_per_side, const KMeansConfig& config, std::span<const std::string> exclude)
{
    if (original.words() != eval.words())
        fail(ErrorCode::ShapeMismatch, "original and evaluated tables must share their vocabulary");
    return cluster_accuracy(eval, select_biased_words(original, anchor, n_per_side, exclude), config);
}

double pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        fail(ErrorCode::ShapeMismatch, "Pearson correlation needs two equal-length samples");
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Index>(x.size()));
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Index>(y.size()));
    const Eigen::VectorXd xc = xv.array() - xv.mean();
    const Eigen::VectorXd yc = yv.array() - yv.mean();
    const double denom = xc.norm() * yc.norm();
    if (!(denom > 0.0))
        fail(ErrorCode::ZeroVariance, "Pearson correlation undefined for a constant sample");
    return std::clamp(xc.dot(yc) / denom, -1.0, 1.0);
}

NeighborCorrelation neighbor_bias_correlation(const EmbeddingTable& original, const EmbeddingTable& eval,
                                              std::span<const std::string> professions, const BiasedPool& pool,
                                              const TokenPair& anchor, Index k)
{
    if (original.words() != eval.words())
        fail(ErrorCode::ShapeMismatch, "original and evaluated tables must share their vocabulary");
    if (k < 1)
        fail(ErrorCode::ConfigError, "neighbour count must be >= 1");
    const Eigen::VectorXd direction = anchor_difference(original, anchor);
    std::vector<std::uint8_t> is_masc(static_cast<std::size_t>(eval.size()), 0);
    for (std::size_t i = 0; i < pool.words.size(); ++i)
        is_masc[static_cast<std::size_t>(pool.words[i])] = pool.masculine[i];

    NeighborCorrelation out;
    for (const auto& word : professions) {
        const auto idx = original.find(word);
        if (!idx)
            continue;
        const auto neighbours = nearest_neighbors(eval, word, k, std::span<const Index>(pool.words));
        if (neighbours.empty())
            continue;
        double masc = 0.0;
        for (const auto& nb : neighbours)
            masc += is_masc[static_cast<std::size_t>(nb.index)];
        out.words.push_back(word);
        out.original_bias.push_back(original.vector(*idx).dot(direction));
        out.masculine_fraction.push_back(masc / static_cast<double>(neighbours.size()));
    }
    if (out.words.size() < 3)
        fail(ErrorCode::TooFewProfessions, "only " + std::to_string(out.words.size()) + " profession words resolved");
    out.pearson_r = pearson(out.original_bias, out.masculine_fraction);
    return out;
}

// --- variance profile -----------------------------------------------------------

double gini_index(std::span<const double> values)
{
    if (values.empty())
        return 0.0;
    double sum = 0.0, pairwise = 0.0;
    for (double a : values) {
        sum += a;
        for (double b : values)
            pairwise += std::abs(a - b);
    }
    if (!(sum > 0.0))
        fail(ErrorCode::ZeroVariance, "Gini index undefined for an all-zero vector");
    return pairwise / (2.0 * static_cast<double>(values.size()) * sum);
}

PcProfile pc_variance_profile(const EmbeddingTable& table, std::span<const WordPair> pairs, Index top)
{
    if (top < 1)
        fail(ErrorCode::ConfigError, "top must be >= 1");
    if (static_cast<Index>(pairs.size()) < top)
        fail(ErrorCode::TooFewPairs, std::to_string(pairs.size()) + " pairs for " + std::to_string(top) + " components");
    if (table.dim() < top)
        fail(ErrorCode::TooFewPairs, "embedding dimension is below the requested component count");

    Eigen::MatrixXd diffs(table.dim(), static_cast<Index>(pairs.size()));
    for (std::size_t i = 0; i < pairs.size(); ++i)
        diffs.col(static_cast<Index>(i)) = table.vector(pairs[i].masculine) - table.vector(pairs[i].feminine);
    const Eigen::MatrixXd centered = diffs.colwise() - diffs.rowwise().mean();
    const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(diffs.cols() - 1 > 0 ? diffs.cols() - 1 : 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd values = solver.eigenvalues().cwiseMax(0.0).reverse();
    const double sum = values.sum();
    if (!(sum > 0.0))
        fail(ErrorCode::ZeroVariance, "pair differences carry no variance");

    PcProfile profile;
    for (Index i = 0; i < top; ++i)
        profile.proportions.push_back(values[i] / sum);
    profile.gini = gini_index(profile.proportions);
    return profile;
}

// --- classifier --------------------------------------------------------------------

ClassifierAccuracy classifier_accuracy_from_scores(std::span<const double> masculine_scores,
                                                   std::span<const double> feminine_scores)
{
    if (masculine_scores.empty() || feminine_scores.empty())
        fail(ErrorCode::EmptyTestSet, "classifier accuracy needs test words of both genders");
    ClassifierAccuracy acc;
    acc.masculine_count = static_cast<Index>(masculine_scores.size());
    acc.feminine_count = static_cast<Index>(feminine_scores.size());
    acc.masculine = static_cast<double>(std::count_if(masculine_scores.begin(), masculine_scores.end(),
                                                      [](double p) { return p > 0.5; })) /
                    static_cast<double>(acc.masculine_count);
    acc.feminine = static_cast<double>(std::count_if(feminine_scores.begin(), feminine_scores.end(),
                                                     [](double p) { return p < 0.5; })) /
                   static_cast<double>(acc.feminine_count);
    return acc;
}

ClassifierAccuracy gender_classifier_accuracy(const ModelParams& params, const EmbeddingTable& table,
                                              std::span<const WordPair> test_pairs)
{
    if (test_pairs.empty())
        fail(ErrorCode::EmptyTestSet, "no held-out pairs");
    std::vector<Index> masc, fem;
    for (const auto& p : test_pairs) {
        masc.push_back(p.masculine);
        fem.push_back(p.feminine);
    }
    auto scores = [&](const std::vector<Index>& rows) {
        const Eigen::MatrixXd p = mlp_apply(params.classifier, encode_batch(params, table.gather(rows)).gender);
        return std::vector<double>(p.data(), p.data() + p.size());
    };
    return classifier_accuracy_from_scores(scores(masc), scores(fem));
}

std::vector<std::string> read_token_list(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos || line[b] == '#')
            continue;
        const auto e = line.find_last_not_of(" \t");
        out.push_back(line.substr(b, e - b + 1));
    }
    return out;
}

} // namespace cfdebias
