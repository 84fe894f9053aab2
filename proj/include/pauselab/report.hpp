#pragma once

#include <string>
#include <vector>

#include "pauselab/eval.hpp"
#include "pauselab/trainer.hpp"

namespace pauselab {

/// Deterministic float rendering shared by every report writer.
std::string format_real(double v);

void write_trainlog_csv(const TrainLog& log, const std::string& path);
void write_eval_csv(const EvalReport& report, const std::string& path);
void write_logprobs_csv(const LowestKResult& result, const std::string& path);

/// Loss curve and lowest-k distribution for one labeled run.
struct RunSeries {
    std::string label;
    std::vector<double> losses;          // per training step
    std::vector<double> lowest_k_means;  // per evaluated example
};

/// Self-contained SVG overlaying loss curves and lowest-k histograms for up
/// to two runs.
void write_comparison_svg(const std::vector<RunSeries>& runs, const std::string& path);

struct SweepRow {
    std::string axis;
    int value = 0;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double mean_loss = 0.0;
    bool failed = false;
    std::string error;
};

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

/// Two-curve SVG: accuracy and mean loss against the swept axis value.
void write_sweep_svg(const std::vector<SweepRow>& rows, const std::string& axis, const std::string& path);

}  // namespace pauselab
