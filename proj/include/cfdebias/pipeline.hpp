#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "cfdebias/config.hpp"
#include "cfdebias/counterfactual.hpp"
#include "cfdebias/debias.hpp"
#include "cfdebias/disentangle.hpp"
#include "cfdebias/embedding_store.hpp"
#include "cfdebias/gradient_audit.hpp"

namespace cfdebias {

struct Dataset {
    EmbeddingTable table;
    VocabularyPartition partition;
};

/// Loads the embedding table and pair partition named by the config.
/// Missing paths are configuration errors.
Dataset load_dataset(const PipelineConfig& config);

struct TrainOutcome {
    ModelParams params;
    std::vector<LdEpoch> disentangle_trace;
    std::vector<CfEpoch> counterfactual_trace;
};

/// Both training phases from one generator seeded with `config.seed`.
///
/// With t_ramp = 0 the phases run back to back. Otherwise the run spans
/// epochs_disentangle + epochs_counterfactual epochs; at epoch e the weight
/// lambda = max(0, 1 - e / t_ramp) scales a phase-1 step and 1 - lambda a
/// phase-2 step, and the alignment model is refit while phase 1 still moves
/// the encoder and decoder.
TrainOutcome train_model(const PipelineConfig& config, const Dataset& data);

/// Writes model.ckpt, disentangle_trace.csv and counterfactual_trace.csv
/// into the output directory. Returns the checkpoint path.
std::filesystem::path cmd_train(const PipelineConfig& config, std::ostream& log);

/// Writes debiased_<variant>.txt and its .json sidecar. Returns the table path.
std::filesystem::path cmd_debias(const PipelineConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                                 DebiasMethod variant, std::ostream& log);

/// Writes report.json, report.txt, neighbors.csv and pc_variance.csv.
/// A metric whose resource is absent is reported as
/// "skipped: missing resource"; any other metric failure is reported as
/// "error: ..." and the remaining metrics still run. Returns the JSON path.
std::filesystem::path cmd_eval(const PipelineConfig& config, const std::filesystem::path& original,
                               const std::filesystem::path& evaluated,
                               const std::optional<std::filesystem::path>& checkpoint, std::ostream& log);

/// Runs the gradient audit with the config seed; true when every check passes.
bool cmd_check_gradients(const PipelineConfig& config, std::ostream& log);

} // namespace cfdebias
