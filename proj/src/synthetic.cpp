#include "cfdebias/synthetic.hpp"

#include <fstream>
#include <random>

#include "cfdebias/error.hpp"

namespace cfdebias {

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed)
{
    if (spec.dim < 2 || spec.pairs < 1 || spec.words < 2 * spec.pairs + 1)
        fail(ErrorCode::ConfigError, "synthetic corpus needs dim >= 2 and room for every pair plus a neutral word");
    const Index n_neutral = spec.words - 2 * spec.pairs;
    if (spec.professions < 0 || spec.professions > n_neutral)
        fail(ErrorCode::ConfigError, "more professions than neutral words");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto gaussian = [&](Index n, double scale) {
        Eigen::VectorXd v(n);
        for (Index i = 0; i < n; ++i)
            v[i] = scale * normal(rng);
        return v;
    };

    SyntheticCorpus c;
    c.direction = gaussian(spec.dim, 1.0).normalized();

    std::vector<std::string> words;
    Eigen::MatrixXd vectors(spec.dim, spec.words);
    Index col = 0;
    for (Index p = 0; p < spec.pairs; ++p) {
        const Eigen::VectorXd base = gaussian(spec.dim, spec.base_scale);
        std::string f = p == 0 ? "she" : "f" + std::to_string(p);
        std::string m = p == 0 ? "he" : "m" + std::to_string(p);
        vectors.col(col++) = base - spec.offset * c.direction;
        vectors.col(col++) = base + spec.offset * c.direction;
        c.pairs.emplace_back(f, m);
        words.push_back(std::move(f));
        words.push_back(std::move(m));
    }
    for (Index i = 0; i < n_neutral; ++i) {
        const double leak = spec.leakage * normal(rng);
        vectors.col(col++) = gaussian(spec.dim, spec.base_scale) + leak * c.direction;
        c.leakage.push_back(leak);
        words.push_back("n" + std::to_string(i));
        if (i < spec.professions)
            c.professions.push_back(words.back());
    }
    c.table = EmbeddingTable(std::move(words), std::move(vectors));
    return c;
}

void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    save_embeddings(corpus.table, dir / "embeddings.txt");
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::trunc);
        if (!out)
            fail(ErrorCode::IoError, "cannot write " + p.string());
        return out;
    };
    auto pairs = open(dir / "pairs.tsv");
    for (const auto& [f, m] : corpus.pairs)
        pairs << f << '\t' << m << '\n';
    auto professions = open(dir / "professions.txt");
    for (const auto& w : corpus.professions)
        professions << w << '\n';
}

} // namespace cfdebias
