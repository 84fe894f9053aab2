#include "pauselab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pauselab {

namespace {

std::string trim(const std::string& s) {
    const auto lo = s.find_first_not_of(" \t\n\r");
    if (lo == std::string::npos) return "";
    const auto hi = s.find_last_not_of(" \t\n\r");
    return s.substr(lo, hi - lo + 1);
}

struct Generation {
    std::vector<TokenId> continuation;
    std::vector<double> step_logprobs;
    bool overflow = false;
};

Generation generate_for_example(const Model<float>& model, const Example& ex,
                                const StrategyConfig& strategy, DecodeFlags flags) {
    Generation g;
    std::vector<TokenId> prefix = ex.prefix_ids;
    if (strategy.kind == StrategyKind::Appd)
        prefix.insert(prefix.end(),
                      static_cast<std::size_t>(strategy.effective_sites() * strategy.block_len), kPauseId);
    const int room = model.config.max_seq_len - static_cast<int>(prefix.size());
    if (room <= 0) {
        g.overflow = true;
        return g;
    }
    const int budget = static_cast<int>(ex.target_ids.size()) + 16;
    const int max_new = std::min(room, budget);
    const std::vector<TokenId> full = generate(model, prefix, max_new, flags, &g.step_logprobs);
    g.continuation.assign(full.begin() + static_cast<std::ptrdiff_t>(prefix.size()), full.end());
    // Ran out of room without producing EOS: flag, the answer may be cut off.
    if (max_new == room && static_cast<int>(g.continuation.size()) == room &&
        (g.continuation.empty() || g.continuation.back() != kEosId))
        g.overflow = true;
    return g;
}

}  // namespace

std::optional<std::string> extract_answer(const std::string& text) {
    const std::size_t pos = text.rfind("####");
    if (pos == std::string::npos) return std::nullopt;
    return trim(text.substr(pos + 4));
}

EvalReport evaluate(const Model<float>& model, const EncodedDataset& dataset, const StrategyConfig& strategy,
                    DecodeFlags flags) {
    if (dataset.examples.empty()) throw std::invalid_argument("cannot evaluate an empty dataset");
    EvalReport report;
    long correct = 0;
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
        EvalRow row;
        row.id = static_cast<int>(i);
        row.gold_answer = dataset.gold_answers[i];
        const Generation g = generate_for_example(model, dataset.examples[i], strategy, flags);
        row.overflow = g.overflow;
        row.generated_text = dataset.vocab.decode(g.continuation, /*strip_special=*/true);
        if (const auto answer = extract_answer(row.generated_text)) {
            row.answer_found = true;
            row.extracted_answer = *answer;
            row.correct = !g.overflow && row.extracted_answer == row.gold_answer;
        }
        if (row.correct) ++correct;
        report.rows.push_back(std::move(row));
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(report.rows.size());
    return report;
}

LowestKResult lowest_k_stats(const Model<float>& model, const EncodedDataset& dataset, int k,
                             const StrategyConfig& strategy, DecodeFlags flags) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (dataset.examples.empty()) throw std::invalid_argument("cannot analyze an empty dataset");

    LowestKResult result;
    result.summary.k = k;
    double sum_c = 0, sumsq_c = 0, sum_i = 0, sumsq_i = 0;
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
        const Generation g = generate_for_example(model, dataset.examples[i], strategy, flags);
        const std::string text = dataset.vocab.decode(g.continuation, /*strip_special=*/true);
        const auto answer = extract_answer(text);

        LogProbRecord rec;
        rec.id = static_cast<int>(i);
        rec.correct = answer && !g.overflow && *answer == dataset.gold_answers[i];
        rec.lowest_k = g.step_logprobs;
        std::sort(rec.lowest_k.begin(), rec.lowest_k.end());
        if (static_cast<int>(rec.lowest_k.size()) > k) rec.lowest_k.resize(static_cast<std::size_t>(k));
        if (!rec.lowest_k.empty()) {
            double sum = 0;
            for (double v : rec.lowest_k) sum += v;
            rec.mean_lowest_k = sum / static_cast<double>(rec.lowest_k.size());
        }
        if (rec.correct) {
            ++result.summary.correct_count;
            sum_c += rec.mean_lowest_k;
            sumsq_c += rec.mean_lowest_k * rec.mean_lowest_k;
        } else {
            ++result.summary.incorrect_count;
            sum_i += rec.mean_lowest_k;
            sumsq_i += rec.mean_lowest_k * rec.mean_lowest_k;
        }
        result.records.push_back(std::move(rec));
    }

    auto finalize = [](long n, double sum, double sumsq, double& mean, double& var) {
        if (n == 0) return;
        mean = sum / static_cast<double>(n);
        var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
    };
    finalize(result.summary.correct_count, sum_c, sumsq_c, result.summary.correct_mean,
             result.summary.correct_variance);
    finalize(result.summary.incorrect_count, sum_i, sumsq_i, result.summary.incorrect_mean,
             result.summary.incorrect_variance);
    return result;
}

}  // namespace pauselab
