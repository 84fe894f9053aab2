#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pauselab/insertion.hpp"
#include "pauselab/model.hpp"
#include "pauselab/taskgen.hpp"
#include "pauselab/trainer.hpp"

namespace pauselab {

/// Everything one reproducible experiment needs. Parsed from a flat
/// `key = value` config file; see docs in README for the key list.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    StrategyConfig strategy;
    TaskSpec task;
    std::string data_dir;  // when set, load train/val/test.jsonl instead of generating
    std::string out_dir = "out";
    std::vector<std::uint64_t> seeds = {1};
    int lowest_k = 20;
    bool ban_pause = false;

    void validate() const;
    /// Fully resolved key-value view, embedded in every emitted artifact.
    std::map<std::string, std::string> to_key_values() const;
    std::string to_json() const;
};

/// Parses the flat config format: one `key = value` per line, '#' comments.
/// Unknown keys are an error. The PAUSELAB_OUT_DIR environment variable
/// overrides out_dir.
RunConfig parse_run_config_file(const std::string& path);
RunConfig parse_run_config_lines(const std::vector<std::string>& lines);

}  // namespace pauselab
