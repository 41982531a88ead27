#include "cfdebias/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "cfdebias/error.hpp"
#include "cfdebias/hash.hpp"

namespace cfdebias {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected)
{
    fail(ErrorCode::ConfigError,
         "key '" + std::string(key) + "': cannot use '" + std::string(value) + "', expected " + std::string(expected));
}

Index parse_index(std::string_view key, std::string_view v)
{
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        bad_value(key, v, "an integer");
    return static_cast<Index>(out);
}

std::uint64_t parse_u64(std::string_view key, std::string_view v)
{
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        bad_value(key, v, "a non-negative integer");
    return out;
}

double parse_double(std::string_view key, std::string_view v)
{
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
        bad_value(key, v, "a finite number");
    return out;
}

std::string fmt_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::filesystem::path resolve_path(std::string_view v, const std::filesystem::path& base)
{
    std::filesystem::path p{std::string(v)};
    if (p.empty() || p.is_absolute() || base.empty())
        return p;
    return base / p;
}

struct Entry {
    ConfigKey key;
    std::function<void(PipelineConfig&, std::string_view, const std::filesystem::path&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Entry path_entry(std::string_view name, std::string_view help, T PipelineConfig::*member)
{
    return {{name, help},
            [member](PipelineConfig& c, std::string_view v, const std::filesystem::path& base) {
                c.*member = resolve_path(v, base);
            },
            [member](const PipelineConfig& c) { return (c.*member).string(); }};
}

Entry index_entry(std::string_view name, std::string_view help, std::function<Index&(PipelineConfig&)> ref)
{
    return {{name, help},
            [ref, name](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                ref(c) = parse_index(name, v);
            },
            [ref](const PipelineConfig& c) { return std::to_string(ref(const_cast<PipelineConfig&>(c))); }};
}

Entry double_entry(std::string_view name, std::string_view help, std::function<double&(PipelineConfig&)> ref)
{
    return {{name, help},
            [ref, name](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                ref(c) = parse_double(name, v);
            },
            [ref](const PipelineConfig& c) { return fmt_double(ref(const_cast<PipelineConfig&>(c))); }};
}

const std::vector<Entry>& entries()
{
    static const std::vector<Entry> table = [] {
        std::vector<Entry> e;
        e.push_back(path_entry("embeddings", "embedding text file", &PipelineConfig::embeddings));
        e.push_back(path_entry("pairs", "feminine<TAB>masculine pair file", &PipelineConfig::pairs));
        e.push_back(path_entry("sembias", "Sembias TSV", &PipelineConfig::sembias));
        e.push_back(path_entry("weat", "WEAT category JSON", &PipelineConfig::weat));
        e.push_back(path_entry("professions", "profession token list", &PipelineConfig::professions));
        e.push_back(path_entry("output_dir", "directory for every artifact", &PipelineConfig::output_dir));

        e.push_back(index_entry("latent_dim", "latent size l", [](PipelineConfig& c) -> Index& { return c.latent_dim; }));
        e.push_back(index_entry("gender_dim", "gender latent size k", [](PipelineConfig& c) -> Index& { return c.gender_dim; }));
        e.push_back(index_entry("hidden_encoder", "encoder hidden width",
                                [](PipelineConfig& c) -> Index& { return c.hidden_encoder; }));
        e.push_back(index_entry("hidden_decoder", "decoder hidden width",
                                [](PipelineConfig& c) -> Index& { return c.hidden_decoder; }));
        e.push_back(index_entry("hidden_classifier", "gender classifier hidden width",
                                [](PipelineConfig& c) -> Index& { return c.hidden_classifier; }));
        e.push_back(index_entry("hidden_adversary", "adversary hidden width",
                                [](PipelineConfig& c) -> Index& { return c.hidden_adversary; }));
        e.push_back(index_entry("hidden_generator", "counterfactual generator hidden width",
                                [](PipelineConfig& c) -> Index& { return c.hidden_generator; }));

        e.push_back(double_entry("lambda_se", "semantic equality weight", [](PipelineConfig& c) -> double& { return c.ld.se; }));
        e.push_back(double_entry("lambda_ge", "gender classification weight", [](PipelineConfig& c) -> double& { return c.ld.ge; }));
        e.push_back(double_entry("lambda_di", "adversary weight", [](PipelineConfig& c) -> double& { return c.ld.di; }));
        e.push_back(double_entry("lambda_re", "reconstruction weight", [](PipelineConfig& c) -> double& { return c.ld.re; }));
        e.push_back(double_entry("lambda_a", "gradient reversal strength",
                                 [](PipelineConfig& c) -> double& { return c.ld.adversarial; }));
        e.push_back({{"grl", "on | off"},
                     [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                         if (v == "on")
                             c.grl = GrlMode::Enabled;
                         else if (v == "off")
                             c.grl = GrlMode::Disabled;
                         else
                             bad_value("grl", v, "on or off");
                     },
                     [](const PipelineConfig& c) { return std::string(c.grl == GrlMode::Enabled ? "on" : "off"); }});

        e.push_back(double_entry("lambda_mo", "modification weight", [](PipelineConfig& c) -> double& { return c.cf.mo; }));
        e.push_back(double_entry("lambda_mi", "minimal-change weight", [](PipelineConfig& c) -> double& { return c.cf.mi; }));
        e.push_back({{"alignment", "none | linear | kernel"},
                     [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                         if (v == "none")
                             c.cf.alignment = Alignment::None;
                         else if (v == "linear")
                             c.cf.alignment = Alignment::Linear;
                         else if (v == "kernel")
                             c.cf.alignment = Alignment::Kernel;
                         else
                             bad_value("alignment", v, "none, linear or kernel");
                     },
                     [](const PipelineConfig& c) {
                         switch (c.cf.alignment) {
                         case Alignment::Linear: return std::string("linear");
                         case Alignment::Kernel: return std::string("kernel");
                         default: return std::string("none");
                         }
                     }});
        e.push_back(double_entry("lambda_la", "linear alignment weight", [](PipelineConfig& c) -> double& { return c.cf.la; }));
        e.push_back(double_entry("lambda_ka", "kernel alignment weight", [](PipelineConfig& c) -> double& { return c.cf.ka; }));
        e.push_back(index_entry("top_k", "kernel principal components", [](PipelineConfig& c) -> Index& { return c.cf.top_k; }));
        e.push_back({{"rbf_sigma", "RBF bandwidth or 'median'"},
                     [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                         if (v == "median")
                             c.cf.rbf_sigma.reset();
                         else
                             c.cf.rbf_sigma = parse_double("rbf_sigma", v);
                     },
                     [](const PipelineConfig& c) { return c.cf.rbf_sigma ? fmt_double(*c.cf.rbf_sigma) : "median"; }});

        e.push_back(double_entry("lr", "Adam learning rate", [](PipelineConfig& c) -> double& { return c.lr; }));
        e.push_back(index_entry("batch_size", "neutral words per step", [](PipelineConfig& c) -> Index& { return c.batch_size; }));
        e.push_back(index_entry("pair_batch_size", "training pairs per phase-1 step",
                                [](PipelineConfig& c) -> Index& { return c.pair_batch_size; }));
        e.push_back(index_entry("epochs_disentangle", "phase-1 epochs",
                                [](PipelineConfig& c) -> Index& { return c.epochs_disentangle; }));
        e.push_back(index_entry("epochs_counterfactual", "phase-2 epochs",
                                [](PipelineConfig& c) -> Index& { return c.epochs_counterfactual; }));
        e.push_back(index_entry("t_ramp", "linear schedule length in epochs, 0 for two phases",
                                [](PipelineConfig& c) -> Index& { return c.t_ramp; }));
        e.push_back(index_entry("test_pairs", "held-out pair count", [](PipelineConfig& c) -> Index& { return c.test_pairs; }));
        e.push_back({{"seed", "master seed"},
                     [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                         c.seed = parse_u64("seed", v);
                     },
                     [](const PipelineConfig& c) { return std::to_string(c.seed); }});

        e.push_back({{"anchor_masculine", "masculine anchor token"},
                     [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) { c.anchor_masculine = v; },
                     [](const PipelineConfig& c) { return c.anchor_masculine; }});
        e.push_back({{"anchor_feminine", "feminine anchor token"},
                     [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) { c.anchor_feminine = v; },
                     [](const PipelineConfig& c) { return c.anchor_feminine; }});
        e.push_back({{"sembias_metric", "cosine | dot"},
                     [](PipelineConfig& c, std::string_view v, const std::filesystem::path&) {
                         if (v == "cosine")
                             c.sembias_dot = false;
                         else if (v == "dot")
                             c.sembias_dot = true;
                         else
                             bad_value("sembias_metric", v, "cosine or dot");
                     },
                     [](const PipelineConfig& c) { return std::string(c.sembias_dot ? "dot" : "cosine"); }});
        e.push_back(index_entry("weat_max_partitions", "exhaustive/sampled cutoff",
                                [](PipelineConfig& c) -> Index& { return c.weat_max_partitions; }));
        e.push_back(index_entry("cluster_per_side", "biased words per gender",
                                [](PipelineConfig& c) -> Index& { return c.cluster_per_side; }));
        e.push_back(index_entry("kmeans_restarts", "k-means restarts",
                                [](PipelineConfig& c) -> Index& { return c.kmeans_restarts; }));
        e.push_back(index_entry("neighbor_k", "neighbours per profession word",
                                [](PipelineConfig& c) -> Index& { return c.neighbor_k; }));
        e.push_back(index_entry("pc_top", "principal components in the variance profile",
                                [](PipelineConfig& c) -> Index& { return c.pc_top; }));
        e.push_back(index_entry("hard_components", "Hard-Debias subspace size",
                                [](PipelineConfig& c) -> Index& { return c.hard_components; }));
        return e;
    }();
    return table;
}

const Entry& entry(std::string_view key)
{
    for (const auto& e : entries())
        if (e.key.name == key)
            return e;
    fail(ErrorCode::ConfigError, "unknown key '" + std::string(key) + "'");
}

} // namespace

ModelDims PipelineConfig::dims(Index embedding_dim) const
{
    ModelDims d;
    d.embedding_dim = embedding_dim;
    d.latent_dim = latent_dim;
    d.gender_dim = gender_dim;
    d.hidden_encoder = hidden_encoder;
    d.hidden_decoder = hidden_decoder;
    d.hidden_classifier = hidden_classifier;
    d.hidden_adversary = hidden_adversary;
    d.hidden_generator = hidden_generator;
    return d;
}

DisentangleConfig PipelineConfig::disentangle_config() const
{
    DisentangleConfig c;
    c.epochs = epochs_disentangle;
    c.batching = {batch_size, pair_batch_size};
    c.adam.lr = lr;
    c.grl = grl;
    return c;
}

CounterfactualConfig PipelineConfig::counterfactual_config() const
{
    CounterfactualConfig c;
    c.epochs = epochs_counterfactual;
    c.batch_size = batch_size;
    c.adam.lr = lr;
    return c;
}

void PipelineConfig::validate() const
{
    auto require = [](bool ok, const std::string& what) {
        if (!ok)
            fail(ErrorCode::ConfigError, what);
    };
    require(gender_dim >= 1 && latent_dim > gender_dim, "need latent_dim > gender_dim >= 1");
    require(hidden_encoder >= 1 && hidden_decoder >= 1 && hidden_classifier >= 1 && hidden_adversary >= 1 &&
                hidden_generator >= 1,
            "hidden widths must be >= 1");
    ld.validate();
    cf.validate();
    require(lr > 0.0, "lr must be positive");
    require(batch_size >= 1 && pair_batch_size >= 1, "batch sizes must be >= 1");
    require(epochs_disentangle >= 1 && epochs_counterfactual >= 1, "epochs must be >= 1 for both phases");
    require(t_ramp >= 0, "t_ramp must be >= 0");
    require(test_pairs >= 0, "test_pairs must be >= 0");
    require(!anchor_masculine.empty() && !anchor_feminine.empty() && anchor_masculine != anchor_feminine,
            "anchor tokens must be distinct and non-empty");
    require(weat_max_partitions >= 1, "weat_max_partitions must be >= 1");
    require(cluster_per_side >= 2, "cluster_per_side must be >= 2");
    require(kmeans_restarts >= 1, "kmeans_restarts must be >= 1");
    require(neighbor_k >= 1, "neighbor_k must be >= 1");
    require(pc_top >= 1, "pc_top must be >= 1");
    require(hard_components >= 1, "hard_components must be >= 1");
}

std::span<const ConfigKey> config_keys()
{
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& e : entries())
            k.push_back(e.key);
        return k;
    }();
    return keys;
}

void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value,
                      const std::filesystem::path& base_dir)
{
    entry(trim(key)).set(config, trim(value), base_dir);
}

void apply_overrides(PipelineConfig& config, std::span<const std::string> overrides)
{
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::ConfigError, "override '" + o + "' is not key=value");
        set_config_value(config, std::string_view(o).substr(0, eq), std::string_view(o).substr(eq + 1));
    }
}

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir)
{
    PipelineConfig config;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        ++line_no;
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
        try {
            set_config_value(config, line.substr(0, eq), line.substr(eq + 1), base_dir);
        } catch (const Error& e) {
            fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::ConfigError, "cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::string canonical_text(const PipelineConfig& config)
{
    std::string out;
    for (const auto& e : entries()) {
        out += e.key.name;
        out += " = ";
        out += e.get(config);
        out += '\n';
    }
    return out;
}

std::string config_hash(const PipelineConfig& config)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_text(config))));
    return buf;
}

} // namespace cfdebias
