#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pauselab/tokens.hpp"
#include "pauselab/vocab.hpp"

namespace pauselab {

/// One fine-tuning unit: conditioning prefix plus the target being learned.
/// By convention the target ends with EOS when it comes from a dataset.
struct Example {
    std::vector<TokenId> prefix_ids;
    std::vector<TokenId> target_ids;
};

enum class StrategyKind { Sft, Dit, Ran, Appd, Aaw, Mf, Mb, Sb };
enum class RefreshMode { Once, PerEpoch, PerStep };

std::string to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(const std::string& name);
std::string to_string(RefreshMode mode);
RefreshMode refresh_mode_from_string(const std::string& name);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::Sft;
    int num_sites = 5;  // M; ignored by AAW/MF/MB/SB, forced 0 by SFT
    int block_len = 1;  // consecutive pauses per site
    RefreshMode refresh = RefreshMode::PerStep;
    bool pause_in_loss = false;
    std::uint64_t rng_seed = 0;

    /// Throws std::invalid_argument on inconsistent settings.
    void validate() const;
    /// M after applying per-kind rules (0 for SFT).
    int effective_sites() const;
    bool is_likelihood_based() const { return kind == StrategyKind::Dit; }
};

/// Full training sequence with its masking metadata. Positions are context
/// indices k (0-based): the loss at k predicts ids[k+1].
struct InjectedExample {
    std::vector<TokenId> ids;     // prefix + injected target
    std::vector<int> sites;       // original target indices, sorted, may repeat
    std::vector<int> ignore_set;  // sorted
    int loss_lo = 0;
    int loss_hi = 0;
};

/// M positions (0-based target indices) with the smallest log-likelihood;
/// ties broken toward the smaller index. Sorted, deduplicated.
std::vector<int> select_positions_dit(const std::vector<double>& loglikes, int m);

/// M distinct uniform positions in [0, target_len).
std::vector<int> select_positions_ran(std::mt19937_64& rng, int target_len, int m);

/// A single site at target position 0 with multiplicity M.
std::vector<int> select_positions_appd(int m);

/// One site after every word: a non-space, non-special token followed by
/// whitespace, a special, or the end of the target.
std::vector<int> select_positions_aaw(const std::vector<TokenId>& target_ids, const Vocab& vocab);

enum class HeuristicRule { Mf, Mb, Sb };

/// MF: before each '<<' whose nearest preceding non-space token is '='.
/// MB: after each '>>'.
/// SB: after each sentence-final '.' occurring before the '####' marker.
std::vector<int> select_positions_heuristic(const std::vector<TokenId>& target_ids, const Vocab& vocab,
                                            HeuristicRule rule);

/// Inserts block_len PAUSE ids immediately before each site's target token
/// (repeated sites stack). Throws std::length_error if the result exceeds
/// max_seq_len.
InjectedExample inject(const Example& example, const std::vector<int>& sites, const StrategyConfig& cfg,
                       int max_seq_len);

/// Site selection dispatch for strategies that do not need log-likelihoods.
std::vector<int> select_positions_rule_based(const StrategyConfig& cfg, std::mt19937_64& rng,
                                             const std::vector<TokenId>& target_ids, const Vocab& vocab);

/// Removes every PAUSE id; inverse of inject up to metadata.
std::vector<TokenId> strip_pause(const std::vector<TokenId>& ids);

}  // namespace pauselab
