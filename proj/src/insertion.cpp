#include "pauselab/insertion.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace pauselab {

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Sft: return "sft";
        case StrategyKind::Dit: return "dit";
        case StrategyKind::Ran: return "ran";
        case StrategyKind::Appd: return "appd";
        case StrategyKind::Aaw: return "aaw";
        case StrategyKind::Mf: return "mf";
        case StrategyKind::Mb: return "mb";
        case StrategyKind::Sb: return "sb";
    }
    return "?";
}

StrategyKind strategy_kind_from_string(const std::string& name) {
    if (name == "sft") return StrategyKind::Sft;
    if (name == "dit") return StrategyKind::Dit;
    if (name == "ran") return StrategyKind::Ran;
    if (name == "appd") return StrategyKind::Appd;
    if (name == "aaw") return StrategyKind::Aaw;
    if (name == "mf") return StrategyKind::Mf;
    if (name == "mb") return StrategyKind::Mb;
    if (name == "sb") return StrategyKind::Sb;
    throw std::invalid_argument("unknown strategy kind: '" + name + "'");
}

std::string to_string(RefreshMode mode) {
    switch (mode) {
        case RefreshMode::Once: return "once";
        case RefreshMode::PerEpoch: return "per_epoch";
        case RefreshMode::PerStep: return "per_step";
    }
    return "?";
}

RefreshMode refresh_mode_from_string(const std::string& name) {
    if (name == "once") return RefreshMode::Once;
    if (name == "per_epoch") return RefreshMode::PerEpoch;
    if (name == "per_step") return RefreshMode::PerStep;
    throw std::invalid_argument("unknown refresh mode: '" + name + "'");
}

void StrategyConfig::validate() const {
    if (num_sites < 0) throw std::invalid_argument("num_sites must be >= 0");
    if (block_len < 1) throw std::invalid_argument("block_len must be >= 1");
}

int StrategyConfig::effective_sites() const {
    return kind == StrategyKind::Sft ? 0 : num_sites;
}

std::vector<int> select_positions_dit(const std::vector<double>& loglikes, int m) {
    const int n = static_cast<int>(loglikes.size());
    if (m < 0) throw std::invalid_argument("m must be >= 0");
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&loglikes](int a, int b) { return loglikes[static_cast<std::size_t>(a)] <
                                                        loglikes[static_cast<std::size_t>(b)]; });
    order.resize(static_cast<std::size_t>(std::min(m, n)));
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    return order;
}

std::vector<int> select_positions_ran(std::mt19937_64& rng, int target_len, int m) {
    if (m > target_len)
        throw std::invalid_argument("cannot place " + std::to_string(m) + " distinct sites in a target of length " +
                                    std::to_string(target_len));
    std::vector<int> pool(static_cast<std::size_t>(target_len));
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates keeps draws deterministic and independent of m's order.
    for (int i = 0; i < m; ++i) {
        const int j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(target_len - i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(m));
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::vector<int> select_positions_appd(int m) {
    return std::vector<int>(static_cast<std::size_t>(std::max(0, m)), 0);
}

std::vector<int> select_positions_aaw(const std::vector<TokenId>& target_ids, const Vocab& vocab) {
    std::vector<int> sites;
    const int n = static_cast<int>(target_ids.size());
    for (int i = 0; i < n; ++i) {
        const TokenId id = target_ids[static_cast<std::size_t>(i)];
        if (vocab.is_special(id) || vocab.is_whitespace(id)) continue;
        const bool at_word_end =
            i + 1 == n || vocab.is_whitespace(target_ids[static_cast<std::size_t>(i + 1)]) ||
            vocab.is_special(target_ids[static_cast<std::size_t>(i + 1)]);
        if (at_word_end) sites.push_back(i + 1);
    }
    return sites;
}

std::vector<int> select_positions_heuristic(const std::vector<TokenId>& target_ids, const Vocab& vocab,
                                            HeuristicRule rule) {
    std::vector<int> sites;
    const int n = static_cast<int>(target_ids.size());
    auto surface = [&](int i) -> const std::string& { return vocab.surface(target_ids[static_cast<std::size_t>(i)]); };

    if (rule == HeuristicRule::Mf) {
        std::string last_nonspace;
        for (int i = 0; i < n; ++i) {
            const TokenId id = target_ids[static_cast<std::size_t>(i)];
            if (vocab.is_whitespace(id)) continue;
            if (!vocab.is_special(id) && surface(i) == "<<" && last_nonspace == "=") sites.push_back(i);
            last_nonspace = vocab.is_special(id) ? std::string() : surface(i);
        }
    } else if (rule == HeuristicRule::Mb) {
        for (int i = 0; i < n; ++i) {
            const TokenId id = target_ids[static_cast<std::size_t>(i)];
            if (!vocab.is_special(id) && surface(i) == ">>") sites.push_back(i + 1);
        }
    } else {
        int hash_pos = n;
        for (int i = 0; i < n; ++i) {
            const TokenId id = target_ids[static_cast<std::size_t>(i)];
            if (!vocab.is_special(id) && surface(i) == "####") {
                hash_pos = i;
                break;
            }
        }
        for (int i = 0; i < hash_pos; ++i) {
            const TokenId id = target_ids[static_cast<std::size_t>(i)];
            if (vocab.is_special(id) || surface(i) != ".") continue;
            const bool sentence_final =
                i + 1 == n || vocab.is_whitespace(target_ids[static_cast<std::size_t>(i + 1)]) ||
                vocab.is_special(target_ids[static_cast<std::size_t>(i + 1)]);
            if (sentence_final) sites.push_back(i + 1);
        }
    }
    return sites;
}

std::vector<int> select_positions_rule_based(const StrategyConfig& cfg, std::mt19937_64& rng,
                                             const std::vector<TokenId>& target_ids, const Vocab& vocab) {
    const int target_len = static_cast<int>(target_ids.size());
    switch (cfg.kind) {
        case StrategyKind::Sft: return {};
        case StrategyKind::Ran: return select_positions_ran(rng, target_len, cfg.num_sites);
        case StrategyKind::Appd: return select_positions_appd(cfg.num_sites);
        case StrategyKind::Aaw: return select_positions_aaw(target_ids, vocab);
        case StrategyKind::Mf: return select_positions_heuristic(target_ids, vocab, HeuristicRule::Mf);
        case StrategyKind::Mb: return select_positions_heuristic(target_ids, vocab, HeuristicRule::Mb);
        case StrategyKind::Sb: return select_positions_heuristic(target_ids, vocab, HeuristicRule::Sb);
        case StrategyKind::Dit:
            throw std::logic_error("DIT site selection needs token log-likelihoods");
    }
    return {};
}

InjectedExample inject(const Example& example, const std::vector<int>& sites, const StrategyConfig& cfg,
                       int max_seq_len) {
    cfg.validate();
    if (example.prefix_ids.empty() || example.target_ids.empty())
        throw std::invalid_argument("example prefix and target must be non-empty");
    const int target_len = static_cast<int>(example.target_ids.size());
    std::vector<int> sorted_sites = sites;
    std::sort(sorted_sites.begin(), sorted_sites.end());
    for (int s : sorted_sites)
        if (s < 0 || s > target_len)
            throw std::invalid_argument("insertion site " + std::to_string(s) + " outside target of length " +
                                        std::to_string(target_len));

    InjectedExample out;
    out.sites = sorted_sites;
    out.ids = example.prefix_ids;
    std::size_t next_site = 0;
    for (int idx = 0; idx <= target_len; ++idx) {
        while (next_site < sorted_sites.size() && sorted_sites[next_site] == idx) {
            out.ids.insert(out.ids.end(), static_cast<std::size_t>(cfg.block_len), kPauseId);
            ++next_site;
        }
        if (idx < target_len) out.ids.push_back(example.target_ids[static_cast<std::size_t>(idx)]);
    }
    if (static_cast<int>(out.ids.size()) > max_seq_len)
        throw std::length_error("injected sequence of length " + std::to_string(out.ids.size()) +
                                " exceeds max_seq_len " + std::to_string(max_seq_len));

    out.loss_lo = static_cast<int>(example.prefix_ids.size()) - 1;
    out.loss_hi = static_cast<int>(out.ids.size()) - 1;
    if (!cfg.pause_in_loss) {
        for (int k = out.loss_lo; k < out.loss_hi; ++k)
            if (out.ids[static_cast<std::size_t>(k + 1)] == kPauseId) out.ignore_set.push_back(k);
    }
    return out;
}

std::vector<TokenId> strip_pause(const std::vector<TokenId>& ids) {
    std::vector<TokenId> out;
    out.reserve(ids.size());
    for (TokenId id : ids)
        if (id != kPauseId) out.push_back(id);
    return out;
}

}  // namespace pauselab
