#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pauselab/insertion.hpp"
#include "pauselab/model.hpp"
#include "pauselab/trainer.hpp"

namespace pauselab {

/// Substring after the LAST '####' marker, whitespace-trimmed.
std::optional<std::string> extract_answer(const std::string& text);

struct EvalRow {
    int id = 0;
    std::string generated_text;
    std::string extracted_answer;  // empty when absent
    std::string gold_answer;
    bool answer_found = false;
    bool correct = false;
    bool overflow = false;  // generation could not fit in max_seq_len
};

struct EvalReport {
    double accuracy = 0.0;
    std::vector<EvalRow> rows;
};

/// Greedy generation per example, exact string match after extraction.
/// APPD appends its pause block to the test prefix; every other strategy
/// leaves the prefix untouched. PAUSE is stripped before extraction.
EvalReport evaluate(const Model<float>& model, const EncodedDataset& dataset, const StrategyConfig& strategy,
                    DecodeFlags flags = {});

struct LogProbRecord {
    int id = 0;
    std::vector<double> lowest_k;  // ascending
    double mean_lowest_k = 0.0;
    bool correct = false;
};

struct LowestKSummary {
    int k = 0;
    long correct_count = 0;
    long incorrect_count = 0;
    double correct_mean = 0.0;
    double correct_variance = 0.0;
    double incorrect_mean = 0.0;
    double incorrect_variance = 0.0;
};

struct LowestKResult {
    std::vector<LogProbRecord> records;
    LowestKSummary summary;
};

/// Per generated token, log p(chosen); per example, the k smallest.
/// Correctness uses the same generation as evaluate().
LowestKResult lowest_k_stats(const Model<float>& model, const EncodedDataset& dataset, int k,
                             const StrategyConfig& strategy, DecodeFlags flags = {});

}  // namespace pauselab
