#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pauselab {

struct DataRecord {
    std::string prefix;
    std::string target;
};

struct DatasetFile {
    std::vector<DataRecord> records;
    std::string split;
};

struct TaskSpec {
    std::string task = "annotated-arithmetic";  // or "chain-copy"
    int n_train = 2000;
    int n_val = 200;
    int n_test = 200;
    int digits = 1;
    int steps = 1;
    std::uint64_t seed = 1;

    void validate() const;
};

struct GeneratedData {
    DatasetFile train, val, test;
    std::vector<std::string> alphabet;
    std::vector<std::string> warnings;
};

/// Surface alphabet for a task name, stable across runs.
std::vector<std::string> task_alphabet(const std::string& task);

/// Targets follow "x = <<3+4=7>>7. #### 7"; every annotation is
/// arithmetic-correct and splits are disjoint by operand tuple while the
/// tuple space supports the requested counts (warnings flag the fallback).
GeneratedData gen_annotated_arithmetic(const TaskSpec& spec);

/// Target repeats the prefix symbols reversed, then "#### <concatenation>".
GeneratedData gen_chain_copy(const TaskSpec& spec);

/// Dispatch on spec.task.
GeneratedData generate_task(const TaskSpec& spec);

DatasetFile load_jsonl(const std::string& path);
void save_jsonl(const DatasetFile& dataset, const std::string& path);

/// Records whose target does not contain exactly one '####' marker.
std::vector<std::string> validate_dataset(const DatasetFile& dataset);

/// Manifest JSON with counts, seed, task, and a content checksum.
void save_manifest(const GeneratedData& data, const TaskSpec& spec, const std::string& path);

}  // namespace pauselab
