#pragma once

#include <string>
#include <vector>

#include "pauselab/eval.hpp"
#include "pauselab/report.hpp"
#include "pauselab/runconfig.hpp"

namespace pauselab {

struct RunOutcome {
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double mean_train_loss = 0.0;
    TrainLog log;
    EvalReport eval;
    LowestKResult lowest_k;
    std::string checkpoint_path;
};

/// Loads or generates the configured task data and encodes all splits with
/// the task vocabulary.
struct PreparedData {
    Vocab vocab;
    EncodedDataset train, val, test;
};

PreparedData prepare_data(const RunConfig& cfg);

/// One full run: train on the config's task under its strategy, evaluate,
/// analyze, and write checkpoint + reports into out_dir. Pure function of
/// (cfg, seed).
RunOutcome run_experiment(const RunConfig& cfg, std::uint64_t seed, const PreparedData* data = nullptr);

/// Runs each strategy with the same data and seed, then writes
/// comparison.csv and comparison.svg into out_dir.
std::vector<RunOutcome> run_strategy_comparison(const RunConfig& base,
                                                const std::vector<StrategyConfig>& strategies,
                                                std::uint64_t seed);

enum class SweepAxis { PauseCount, BlockLen };

SweepAxis sweep_axis_from_string(const std::string& name);
std::string to_string(SweepAxis axis);

/// Runs every (value, seed) cell, continuing past failed cells. Emits
/// sweep.csv, sweep.svg, and one injected-dataset JSONL per value.
std::vector<SweepRow> run_sweep(const RunConfig& base, SweepAxis axis, const std::vector<int>& values);

}  // namespace pauselab
