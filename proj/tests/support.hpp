#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cfdebias/embedding_store.hpp"
#include "cfdebias/model.hpp"

namespace testing {

using cfdebias::Activation;
using cfdebias::Index;
using cfdebias::MlpParams;

/// Closed-form network shared with tests/oracles/reference.py: entry idx in
/// the order w1 (row-major), b1, w2 (row-major), b2 is scale sin(offset + 0.37 idx).
inline MlpParams formula_net(Index n_in, Index hidden, Index n_out, Activation act, double offset,
                             double scale = 0.5)
{
    MlpParams p = MlpParams::zeros(n_in, hidden, n_out, act);
    Index idx = 0;
    auto next = [&] { return scale * std::sin(offset + 0.37 * static_cast<double>(idx++)); };
    for (Index i = 0; i < hidden; ++i)
        for (Index j = 0; j < n_in; ++j)
            p.w1(i, j) = next();
    for (Index i = 0; i < hidden; ++i)
        p.b1[i] = next();
    for (Index i = 0; i < n_out; ++i)
        for (Index j = 0; j < hidden; ++j)
            p.w2(i, j) = next();
    for (Index i = 0; i < n_out; ++i)
        p.b2[i] = next();
    return p;
}

/// Word j, coordinate i: 0.8 cos(0.5 + 1.3 j + 0.71 i). Words are w0, w1, ...
inline cfdebias::EmbeddingTable formula_table(Index d, Index n)
{
    Eigen::MatrixXd v(d, n);
    std::vector<std::string> words;
    for (Index j = 0; j < n; ++j) {
        words.push_back("w" + std::to_string(j));
        for (Index i = 0; i < d; ++i)
            v(i, j) = 0.8 * std::cos(0.5 + 1.3 * static_cast<double>(j) + 0.71 * static_cast<double>(i));
    }
    return {std::move(words), std::move(v)};
}

inline cfdebias::ModelParams formula_model(Index d, Index l, Index k, Index h)
{
    cfdebias::ModelParams m;
    m.gender_dim = k;
    m.encoder = formula_net(d, h, l, Activation::Tanh, 0.1);
    m.decoder = formula_net(l, h, d, Activation::Linear, 0.2);
    m.classifier = formula_net(k, h, 1, Activation::Sigmoid, 0.3);
    m.adversary = formula_net(l - k, h, k, Activation::Tanh, 0.4);
    m.generator = formula_net(k, h, k, Activation::Tanh, 0.5);
    return m;
}

inline cfdebias::EmbeddingTable random_table(Index d, Index n, std::uint64_t seed, double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::MatrixXd v(d, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < d; ++i)
            v(i, j) = normal(rng);
    std::vector<std::string> words;
    for (Index j = 0; j < n; ++j)
        words.push_back("t" + std::to_string(j));
    return {std::move(words), std::move(v)};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("cfdebias_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace testing
