#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pauselab/insertion.hpp"
#include "pauselab/model.hpp"
#include "pauselab/taskgen.hpp"
#include "pauselab/vocab.hpp"

namespace pauselab {

/// Token-level view of a dataset split. Targets carry a trailing EOS.
struct EncodedDataset {
    Vocab vocab;
    std::vector<Example> examples;
    std::vector<std::string> gold_answers;  // text after the '####' marker
    std::vector<DataRecord> records;
};

EncodedDataset encode_dataset(const DatasetFile& file, const Vocab& vocab);

struct TrainConfig {
    int epochs = 10;
    int batch_size = 4;
    double learning_rate = 1.0;
    double momentum = 0.0;
    double clip_norm = 1.0;      // 0 disables
    double weight_decay = 0.0;
    std::uint64_t seed = 1;
    int eval_every = 0;  // steps; 0 = epoch boundaries only
    std::string checkpoint_path;

    void validate() const;
};

struct StepRecord {
    int step = 0;
    double loss = 0.0;
    long contributing_positions = 0;
    long forward_count = 0;   // cumulative batch-level forward passes
    long backward_count = 0;  // cumulative batch-level backward passes
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<double> epoch_val_loss;
    std::vector<std::pair<int, double>> step_val_loss;  // (step, loss) when eval_every > 0
    std::vector<std::string> warnings;
    long forward_count = 0;
    long backward_count = 0;
    int best_epoch = -1;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int steps_per_epoch = 0;
};

struct TrainResult {
    Model<float> model;  // lowest-validation-loss snapshot (final params if no val set)
    TrainLog log;
};

/// Fine-tunes a fresh model under the given strategy. Validation loss (used
/// for best-checkpoint selection) applies the same insertion strategy to the
/// val split. Bit-deterministic for fixed (datasets, strategy, train_cfg,
/// model_cfg).
TrainResult train(const EncodedDataset& train_set, const EncodedDataset* val_set,
                  const StrategyConfig& strategy, const TrainConfig& train_cfg, const ModelConfig& model_cfg);

/// Per-example insertion sites for the whole split. DIT runs one clean
/// forward pass per example (counted in batch units via forward_count).
std::vector<std::vector<int>> refresh_sites(const EncodedDataset& dataset, const Model<float>& model,
                                            const StrategyConfig& strategy, std::mt19937_64& strategy_rng,
                                            int batch_size, long* forward_count);

/// Mean masked NLL over a split with no insertion (plain target loss).
double clean_eval_loss(const Model<float>& model, const EncodedDataset& dataset,
                       std::vector<std::string>* warnings = nullptr);

/// JSONL export of an injected split: one record per example with ids,
/// ignore set, loss span, sites, and the strategy name.
void export_injected_jsonl(const EncodedDataset& dataset, const std::vector<std::vector<int>>& sites,
                           const StrategyConfig& strategy, int max_seq_len, const std::string& path);

}  // namespace pauselab
