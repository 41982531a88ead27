#include "cfdebias/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "cfdebias/checkpoint.hpp"
#include "cfdebias/error.hpp"
#include "cfdebias/eval.hpp"

namespace cfdebias {

namespace {

using Json = nlohmann::ordered_json;

void require_file(const std::filesystem::path& p, const char* key)
{
    if (p.empty())
        fail(ErrorCode::ConfigError, std::string("'") + key + "' is not set");
    if (!std::filesystem::is_regular_file(p))
        fail(ErrorCode::ConfigError, std::string("'") + key + "' does not name a file: " + p.string());
}

bool resource_present(const std::filesystem::path& p)
{
    return !p.empty() && std::filesystem::is_regular_file(p);
}

std::ofstream open_output(const std::filesystem::path& p)
{
    std::ofstream out(p, std::ios::trunc);
    if (!out)
        fail(ErrorCode::IoError, "cannot write " + p.string());
    return out;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fixed(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

Alignment expected_alignment(DebiasMethod m)
{
    switch (m) {
    case DebiasMethod::CfLa: return Alignment::Linear;
    case DebiasMethod::CfKa: return Alignment::Kernel;
    default: return Alignment::None;
    }
}

void print_ld(std::ostream& log, const LdComponents& c)
{
    log << "phase 1 final: L_total=" << c.total << " L_se=" << c.se << " L_ge=" << c.ge << " L_di=" << c.di
        << " L_re=" << c.re << '\n';
}

void print_cf(std::ostream& log, const CfComponents& c)
{
    log << "phase 2 final: L_total=" << c.total << " L_mo=" << c.mo << " L_mi=" << c.mi << " L_align=" << c.align
        << '\n';
}

/// Runs one metric; a missing resource or a library error becomes a string
/// entry instead of aborting the report.
template <typename F>
Json run_metric(bool resource_ok, F&& f)
{
    if (!resource_ok)
        return "skipped: missing resource";
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MissingResource || e.code() == ErrorCode::IoError)
            return "skipped: missing resource";
        return std::string("error: ") + e.what();
    }
}

} // namespace

Dataset load_dataset(const PipelineConfig& config)
{
    require_file(config.embeddings, "embeddings");
    require_file(config.pairs, "pairs");
    Dataset d;
    d.table = load_embeddings(config.embeddings);
    d.partition = load_partition(d.table, config.pairs, SplitRule::count(config.test_pairs), config.seed);
    return d;
}

TrainOutcome train_model(const PipelineConfig& config, const Dataset& data)
{
    config.validate();
    if (data.partition.train_pairs().empty())
        fail(ErrorCode::EmptyPairSet, "no training pairs remain after the held-out split");
    std::mt19937_64 rng(config.seed);
    TrainOutcome out;
    out.params = ModelParams::initialize(config.dims(data.table.dim()), rng);

    const auto ld_config = config.disentangle_config();
    const auto cf_config = config.counterfactual_config();

    if (config.t_ramp == 0) {
        out.disentangle_trace = train_disentangle(data.table, data.partition, out.params, config.ld, ld_config, rng);
        out.counterfactual_trace =
            train_counterfactual(data.table, data.partition, out.params, config.cf, cf_config, rng);
        return out;
    }

    DisentangleTrainer phase1(data.table, data.partition, out.params, config.ld, ld_config, rng);
    std::optional<CounterfactualTrainer> phase2;
    const Index total = config.epochs_disentangle + config.epochs_counterfactual;
    for (Index e = 0; e < total; ++e) {
        const double lambda = std::max(0.0, 1.0 - static_cast<double>(e) / static_cast<double>(config.t_ramp));
        if (lambda > 0.0)
            out.disentangle_trace.push_back({e, phase1.run_epoch(lambda)});
        if (lambda < 1.0) {
            if (!phase2)
                phase2.emplace(data.table, data.partition, out.params, config.cf, cf_config, rng);
            else if (lambda > 0.0)
                phase2->refresh_alignment();
            out.counterfactual_trace.push_back({e, phase2->run_epoch(1.0 - lambda)});
        }
    }
    return out;
}

std::filesystem::path cmd_train(const PipelineConfig& config, std::ostream& log)
{
    config.validate();
    const Dataset data = load_dataset(config);
    log << "loaded " << data.table.size() << " words (d=" << data.table.dim() << "), "
        << data.partition.train_pairs().size() << " training pairs, " << data.partition.test_pairs().size()
        << " held-out pairs, " << data.partition.skipped_pairs() << " pairs skipped\n";

    const TrainOutcome result = train_model(config, data);

    std::filesystem::create_directories(config.output_dir);
    const auto ckpt_path = config.output_dir / "model.ckpt";
    save_checkpoint({result.params, config.seed, canonical_text(config)}, ckpt_path);
    {
        auto out = open_output(config.output_dir / "disentangle_trace.csv");
        write_ld_trace(out, result.disentangle_trace);
    }
    {
        auto out = open_output(config.output_dir / "counterfactual_trace.csv");
        write_cf_trace(out, result.counterfactual_trace);
    }
    if (!result.disentangle_trace.empty())
        print_ld(log, result.disentangle_trace.back().loss);
    if (!result.counterfactual_trace.empty())
        print_cf(log, result.counterfactual_trace.back().loss);
    log << "checkpoint: " << ckpt_path.string() << '\n';
    return ckpt_path;
}

std::filesystem::path cmd_debias(const PipelineConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                                 DebiasMethod variant, std::ostream& log)
{
    config.validate();
    if (variant == DebiasMethod::Original)
        fail(ErrorCode::ConfigError, "variant must be one of cf, cf-la, cf-ka, hard");
    if (variant != DebiasMethod::Hard && !checkpoint)
        fail(ErrorCode::ConfigError, "variant " + std::string(to_string(variant)) + " needs --checkpoint");
    const Dataset data = load_dataset(config);

    Json meta;
    meta["method"] = std::string(to_string(variant));
    meta["seed"] = config.seed;
    meta["config_hash"] = config_hash(config);

    DebiasedTable result;
    if (variant == DebiasMethod::Hard) {
        result = hard_debias(data.table, data.partition.pairs(), data.partition.neutral(), config.hard_components);
        meta["components"] = config.hard_components;
        if (result.zeroed_rows > 0)
            log << "warning: " << result.zeroed_rows << " neutral vectors lay inside the gender subspace and became zero\n";
    } else {
        const Checkpoint ckpt = load_checkpoint(*checkpoint);
        if (ckpt.params.embedding_dim() != data.table.dim())
            fail(ErrorCode::CheckpointMismatch, "checkpoint expects d=" + std::to_string(ckpt.params.embedding_dim()) +
                                                    ", table has d=" + std::to_string(data.table.dim()));
        const PipelineConfig trained = parse_config(ckpt.config_text);
        if (trained.cf.alignment != expected_alignment(variant))
            fail(ErrorCode::CheckpointMismatch, "checkpoint was trained with a different alignment than variant " +
                                                    std::string(to_string(variant)));
        result = postprocess(data.table, data.partition, ckpt.params, variant);
        meta["checkpoint_seed"] = ckpt.seed;
        meta["checkpoint_config_hash"] = config_hash(trained);
    }
    meta["source_checksum"] = hex64(result.source_checksum);
    meta["zeroed_rows"] = result.zeroed_rows;

    std::filesystem::create_directories(config.output_dir);
    const auto path = config.output_dir / ("debiased_" + std::string(to_string(variant)) + ".txt");
    save_embeddings(result.table, path);
    auto sidecar = open_output(std::filesystem::path(path).replace_extension(".json"));
    sidecar << meta.dump(2) << '\n';
    log << "wrote " << path.string() << '\n';
    return path;
}

std::filesystem::path cmd_eval(const PipelineConfig& config, const std::filesystem::path& original,
                               const std::filesystem::path& evaluated,
                               const std::optional<std::filesystem::path>& checkpoint, std::ostream& log)
{
    config.validate();
    const EmbeddingTable base = load_embeddings(original);
    const EmbeddingTable table = load_embeddings(evaluated);
    if (base.words() != table.words())
        fail(ErrorCode::ShapeMismatch, "original and evaluated tables must list the same words in the same order");

    const TokenPair anchor{config.anchor_masculine, config.anchor_feminine};
    const bool have_pairs = resource_present(config.pairs);
    std::optional<VocabularyPartition> partition;
    std::vector<std::string> gendered;
    if (have_pairs) {
        partition = load_partition(base, config.pairs, SplitRule::count(config.test_pairs), config.seed);
        for (const auto& p : partition->pairs()) {
            gendered.push_back(base.word(p.feminine));
            gendered.push_back(base.word(p.masculine));
        }
    }

    Json report;
    report["config_hash"] = config_hash(config);
    report["seed"] = config.seed;
    report["original_checksum"] = hex64(checksum(base));
    report["evaluated_checksum"] = hex64(checksum(table));

    std::ostringstream text;
    text << "bias report  config " << config_hash(config) << "  seed " << config.seed << "\n\n";
    auto text_status = [&](const char* name, const Json& j) {
        if (j.is_string()) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "%-22s %s\n", name, j.get<std::string>().c_str());
            text << buf;
            return false;
        }
        return true;
    };

    report["sembias"] = run_metric(resource_present(config.sembias), [&] {
        const auto instances = read_sembias(config.sembias);
        const auto r = sembias_eval(table, instances, anchor,
                                    config.sembias_dot ? AlignmentMetric::Dot : AlignmentMetric::Cosine);
        return Json{{"definition_pct", r.definition_pct}, {"stereotype_pct", r.stereotype_pct},
                    {"none_pct", r.none_pct},             {"scored", r.scored},
                    {"skipped", r.skipped},               {"ties", r.ties}};
    });
    if (text_status("sembias", report["sembias"])) {
        const auto& s = report["sembias"];
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-22s def %7.2f  stereo %7.2f  none %7.2f  (%lld scored)\n", "sembias",
                      s["definition_pct"].get<double>(), s["stereotype_pct"].get<double>(),
                      s["none_pct"].get<double>(), static_cast<long long>(s["scored"].get<Index>()));
        text << buf;
    }

    report["weat"] = run_metric(resource_present(config.weat), [&] {
        Json list = Json::array();
        for (const auto& spec : read_weat_specs(config.weat)) {
            Json entry;
            entry["name"] = spec.name;
            try {
                const auto r = weat(table, spec, config.weat_max_partitions, config.seed);
                entry["effect_size"] = r.effect_size ? Json(*r.effect_size) : Json("undefined: zero variance");
                entry["p_value"] = r.p_value;
                entry["statistic"] = r.statistic;
                entry["exhaustive"] = r.exhaustive;
                entry["partitions"] = r.partitions;
                entry["dropped_tokens"] = r.dropped_tokens;
            } catch (const Error& e) {
                entry["error"] = e.what();
            }
            list.push_back(entry);
        }
        return list;
    });
    if (text_status("weat", report["weat"])) {
        for (const auto& w : report["weat"]) {
            char buf[256];
            const std::string label = "weat " + w["name"].get<std::string>();
            if (w.contains("error"))
                std::snprintf(buf, sizeof buf, "%-22s error: %s\n", label.c_str(),
                              w["error"].get<std::string>().c_str());
            else
                std::snprintf(buf, sizeof buf, "%-22s d %8s  p %.4f\n", label.c_str(),
                              w["effect_size"].is_number() ? fixed(w["effect_size"].get<double>(), 3).c_str()
                                                           : "n/a",
                              w["p_value"].get<double>());
            text << buf;
        }
    }

    std::optional<BiasedPool> pool;
    report["cluster"] = run_metric(true, [&] {
        KMeansConfig km;
        km.restarts = config.kmeans_restarts;
        km.seed = config.seed;
        pool = select_biased_words(base, anchor, config.cluster_per_side, gendered);
        return Json{{"accuracy", cluster_accuracy(table, *pool, km)}, {"n_per_side", config.cluster_per_side}};
    });
    if (text_status("cluster", report["cluster"]))
        text << "cluster                accuracy " << fixed(report["cluster"]["accuracy"].get<double>()) << '\n';

    std::optional<NeighborCorrelation> neighbors;
    report["neighbor"] = run_metric(resource_present(config.professions), [&] {
        const auto professions = read_token_list(config.professions);
        if (!pool)
            pool = select_biased_words(base, anchor, config.cluster_per_side, gendered);
        neighbors = neighbor_bias_correlation(base, table, professions, *pool, anchor, config.neighbor_k);
        return Json{{"pearson_r", neighbors->pearson_r},
                    {"k", config.neighbor_k},
                    {"professions", static_cast<Index>(neighbors->words.size())}};
    });
    if (text_status("neighbor", report["neighbor"]))
        text << "neighbor               pearson r " << fixed(report["neighbor"]["pearson_r"].get<double>()) << '\n';

    std::optional<PcProfile> profile;
    report["pc_profile"] = run_metric(have_pairs, [&] {
        profile = pc_variance_profile(table, partition->pairs(), config.pc_top);
        return Json{{"proportions", profile->proportions}, {"gini", profile->gini}};
    });
    if (text_status("pc_profile", report["pc_profile"]))
        text << "pc_profile             gini " << fixed(profile->gini) << "  top-1 " << fixed(profile->proportions[0])
             << '\n';

    report["classifier"] = run_metric(have_pairs && checkpoint && std::filesystem::is_regular_file(*checkpoint), [&] {
        const Checkpoint ckpt = load_checkpoint(*checkpoint);
        if (ckpt.params.embedding_dim() != base.dim())
            fail(ErrorCode::CheckpointMismatch, "checkpoint dimension differs from the table");
        const auto acc = gender_classifier_accuracy(ckpt.params, base, partition->test_pairs());
        return Json{{"masculine", acc.masculine},
                    {"feminine", acc.feminine},
                    {"masculine_count", acc.masculine_count},
                    {"feminine_count", acc.feminine_count}};
    });
    if (text_status("classifier", report["classifier"]))
        text << "classifier             masculine " << fixed(report["classifier"]["masculine"].get<double>())
             << "  feminine " << fixed(report["classifier"]["feminine"].get<double>()) << '\n';

    std::filesystem::create_directories(config.output_dir);
    const auto json_path = config.output_dir / "report.json";
    open_output(json_path) << report.dump(2) << '\n';
    open_output(config.output_dir / "report.txt") << text.str();
    {
        auto csv = open_output(config.output_dir / "neighbors.csv");
        csv << "word,original_bias,masculine_fraction\n";
        if (neighbors)
            for (std::size_t i = 0; i < neighbors->words.size(); ++i) {
                char buf[160];
                std::snprintf(buf, sizeof buf, ",%.10g,%.10g\n", neighbors->original_bias[i],
                              neighbors->masculine_fraction[i]);
                csv << neighbors->words[i] << buf;
            }
    }
    {
        auto csv = open_output(config.output_dir / "pc_variance.csv");
        csv << "component,proportion\n";
        if (profile)
            for (std::size_t i = 0; i < profile->proportions.size(); ++i) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i + 1, profile->proportions[i]);
                csv << buf;
            }
    }
    log << text.str();
    return json_path;
}

bool cmd_check_gradients(const PipelineConfig& config, std::ostream& log)
{
    bool ok = true;
    for (const auto& c : gradient_audit(config.seed)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-26s %5lld params  max rel err %.3e  %s\n", c.name.c_str(),
                      static_cast<long long>(c.parameters), c.max_relative_error, c.passed ? "ok" : "FAIL");
        log << buf;
        ok = ok && c.passed;
    }
    return ok;
}

} // namespace cfdebias
