#include "pauselab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace pauselab {

namespace {

std::string extract_gold(const std::string& target) {
    const std::size_t pos = target.rfind("####");
    if (pos == std::string::npos) return "";
    std::string answer = target.substr(pos + 4);
    const auto lo = answer.find_first_not_of(" \t\n\r");
    if (lo == std::string::npos) return "";
    const auto hi = answer.find_last_not_of(" \t\n\r");
    return answer.substr(lo, hi - lo + 1);
}

LossItem to_loss_item(const InjectedExample& inj) {
    return {inj.ids, inj.ignore_set, inj.loss_lo, inj.loss_hi};
}

long batches_for(std::size_t n, int batch_size) {
    return static_cast<long>((n + static_cast<std::size_t>(batch_size) - 1) /
                             static_cast<std::size_t>(batch_size));
}

}  // namespace

EncodedDataset encode_dataset(const DatasetFile& file, const Vocab& vocab) {
    EncodedDataset out;
    out.vocab = vocab;
    out.records = file.records;
    out.examples.reserve(file.records.size());
    out.gold_answers.reserve(file.records.size());
    for (const DataRecord& rec : file.records) {
        Example ex;
        ex.prefix_ids.push_back(kBosId);
        const std::vector<TokenId> prefix = vocab.encode(rec.prefix);
        ex.prefix_ids.insert(ex.prefix_ids.end(), prefix.begin(), prefix.end());
        ex.target_ids = vocab.encode(rec.target);
        ex.target_ids.push_back(kEosId);
        out.examples.push_back(std::move(ex));
        out.gold_answers.push_back(extract_gold(rec.target));
    }
    return out;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be > 0");
}

std::vector<std::vector<int>> refresh_sites(const EncodedDataset& dataset, const Model<float>& model,
                                            const StrategyConfig& strategy, std::mt19937_64& strategy_rng,
                                            int batch_size, long* forward_count) {
    std::vector<std::vector<int>> sites(dataset.examples.size());
    const int m = strategy.effective_sites();
    if (strategy.is_likelihood_based()) {
        if (m > 0) {
            for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
                const Example& ex = dataset.examples[i];
                std::vector<TokenId> ids = ex.prefix_ids;
                ids.insert(ids.end(), ex.target_ids.begin(), ex.target_ids.end());
                const int lo = static_cast<int>(ex.prefix_ids.size()) - 1;
                const int hi = static_cast<int>(ids.size()) - 1;
                // loglikes[j] is the likelihood of target token j
                const std::vector<double> ll = token_log_likelihoods(model, ids, lo, hi);
                sites[i] = select_positions_dit(ll, m);
            }
            if (forward_count) *forward_count += batches_for(dataset.examples.size(), batch_size);
        }
    } else {
        for (std::size_t i = 0; i < dataset.examples.size(); ++i)
            sites[i] = select_positions_rule_based(strategy, strategy_rng, dataset.examples[i].target_ids,
                                                   dataset.vocab);
    }
    return sites;
}

double clean_eval_loss(const Model<float>& model, const EncodedDataset& dataset,
                       std::vector<std::string>* warnings) {
    double total = 0.0;
    long positions = 0;
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
        const Example& ex = dataset.examples[i];
        LossItem item;
        item.ids = ex.prefix_ids;
        item.ids.insert(item.ids.end(), ex.target_ids.begin(), ex.target_ids.end());
        if (static_cast<int>(item.ids.size()) > model.config.max_seq_len) {
            if (warnings)
                warnings->push_back("eval: example " + std::to_string(i) + " exceeds max_seq_len, skipped");
            continue;
        }
        item.loss_lo = static_cast<int>(ex.prefix_ids.size()) - 1;
        item.loss_hi = static_cast<int>(item.ids.size()) - 1;
        const LossValue lv = masked_nll(model, item);
        total += lv.mean_nll * static_cast<double>(lv.contributing_positions);
        positions += lv.contributing_positions;
    }
    if (positions == 0) throw std::runtime_error("no evaluable positions in dataset");
    return total / static_cast<double>(positions);
}

namespace {

// Validation loss under the training strategy: sites are refreshed on the val
// split with the current model, so pause-trained models are scored on the
// kind of sequence they are trained on. Reduces to the clean loss when the
// strategy inserts nothing.
double strategy_val_loss(const Model<float>& model, const EncodedDataset& dataset,
                         const StrategyConfig& strategy, int max_seq_len) {
    if (strategy.effective_sites() == 0) return clean_eval_loss(model, dataset);
    std::mt19937_64 rng(strategy.rng_seed ^ 0xa5a5a5a55a5a5a5aULL);
    const std::vector<std::vector<int>> sites = refresh_sites(dataset, model, strategy, rng, 1, nullptr);
    double total = 0.0;
    long positions = 0;
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
        InjectedExample inj;
        try {
            inj = inject(dataset.examples[i], sites[i], strategy, max_seq_len);
        } catch (const std::length_error&) {
            continue;
        }
        const LossValue lv = masked_nll(model, to_loss_item(inj));
        total += lv.mean_nll * static_cast<double>(lv.contributing_positions);
        positions += lv.contributing_positions;
    }
    if (positions == 0) throw std::runtime_error("no evaluable positions in dataset");
    return total / static_cast<double>(positions);
}

}  // namespace

TrainResult train(const EncodedDataset& train_set, const EncodedDataset* val_set,
                  const StrategyConfig& strategy, const TrainConfig& train_cfg, const ModelConfig& model_cfg) {
    strategy.validate();
    train_cfg.validate();
    model_cfg.validate();
    if (train_set.examples.empty()) throw std::invalid_argument("empty training set");

    TrainResult result;
    result.model = init_params<float>(model_cfg, train_cfg.seed);
    TrainLog& log = result.log;
    log.steps_per_epoch = static_cast<int>(batches_for(train_set.examples.size(), train_cfg.batch_size));

    SgdState<float> opt;
    opt.momentum = train_cfg.momentum;
    opt.clip_norm = train_cfg.clip_norm;
    opt.weight_decay = train_cfg.weight_decay;

    std::mt19937_64 strategy_rng(strategy.rng_seed);
    std::mt19937_64 shuffle_rng(train_cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const int m = strategy.effective_sites();
    const bool per_step = strategy.refresh == RefreshMode::PerStep && m > 0;
    const bool rule_static = !strategy.is_likelihood_based() && strategy.kind != StrategyKind::Ran;

    std::vector<std::vector<int>> site_cache;
    if (rule_static)
        site_cache = refresh_sites(train_set, result.model, strategy, strategy_rng, train_cfg.batch_size,
                                   &log.forward_count);

    Model<float> best_model = result.model;
    int step = 0;
    std::vector<std::size_t> order(train_set.examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        if (!rule_static && m > 0 &&
            ((strategy.refresh == RefreshMode::Once && epoch == 1) ||
             strategy.refresh == RefreshMode::PerEpoch))
            site_cache = refresh_sites(train_set, result.model, strategy, strategy_rng, train_cfg.batch_size,
                                       &log.forward_count);

        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train_cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(train_cfg.batch_size));

            std::vector<std::size_t> batch_idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(end));
            std::vector<std::vector<int>> batch_sites(batch_idx.size());
            if (per_step) {
                if (strategy.is_likelihood_based()) {
                    for (std::size_t bi = 0; bi < batch_idx.size(); ++bi) {
                        const Example& ex = train_set.examples[batch_idx[bi]];
                        std::vector<TokenId> ids = ex.prefix_ids;
                        ids.insert(ids.end(), ex.target_ids.begin(), ex.target_ids.end());
                        const int lo = static_cast<int>(ex.prefix_ids.size()) - 1;
                        const int hi = static_cast<int>(ids.size()) - 1;
                        batch_sites[bi] = select_positions_dit(token_log_likelihoods(result.model, ids, lo, hi), m);
                    }
                    log.forward_count += 1;  // the site-identification pass
                } else {
                    for (std::size_t bi = 0; bi < batch_idx.size(); ++bi)
                        batch_sites[bi] = select_positions_rule_based(
                            strategy, strategy_rng, train_set.examples[batch_idx[bi]].target_ids, train_set.vocab);
                }
            } else if (m > 0) {
                for (std::size_t bi = 0; bi < batch_idx.size(); ++bi) batch_sites[bi] = site_cache[batch_idx[bi]];
            }

            std::vector<LossItem> batch;
            for (std::size_t bi = 0; bi < batch_idx.size(); ++bi) {
                try {
                    batch.push_back(to_loss_item(inject(train_set.examples[batch_idx[bi]], batch_sites[bi],
                                                        strategy, model_cfg.max_seq_len)));
                } catch (const std::length_error& e) {
                    log.warnings.push_back("step " + std::to_string(step + 1) + ": skipped example " +
                                           std::to_string(batch_idx[bi]) + ": " + e.what());
                }
            }
            if (batch.empty()) {
                log.warnings.push_back("step " + std::to_string(step + 1) + ": empty batch after skips");
                continue;
            }

            LossValue loss;
            try {
                loss = backward_and_step(result.model, batch, opt, train_cfg.learning_rate);
            } catch (const std::runtime_error& e) {
                log.warnings.push_back("step " + std::to_string(step + 1) + ": aborted: " + e.what());
                result.model = best_model;  // last good checkpoint
                return result;
            }
            log.forward_count += 1;
            log.backward_count += 1;
            ++step;
            log.steps.push_back({step, loss.mean_nll, loss.contributing_positions, log.forward_count,
                                 log.backward_count});

            if (val_set && train_cfg.eval_every > 0 && step % train_cfg.eval_every == 0)
                log.step_val_loss.emplace_back(
                    step, strategy_val_loss(result.model, *val_set, strategy, model_cfg.max_seq_len));
        }

        if (val_set) {
            const double vloss = strategy_val_loss(result.model, *val_set, strategy, model_cfg.max_seq_len);
            log.epoch_val_loss.push_back(vloss);
            if (vloss < log.best_val_loss) {
                log.best_val_loss = vloss;
                log.best_epoch = epoch;
                best_model = result.model;
            }
        }
    }

    if (val_set) result.model = best_model;
    return result;
}

void export_injected_jsonl(const EncodedDataset& dataset, const std::vector<std::vector<int>>& sites,
                           const StrategyConfig& strategy, int max_seq_len, const std::string& path) {
    if (sites.size() != dataset.examples.size())
        throw std::invalid_argument("sites list does not match dataset size");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open injected dataset for writing: " + path);
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
        const InjectedExample inj = inject(dataset.examples[i], sites[i], strategy, max_seq_len);
        nlohmann::json j;
        j["ids"] = inj.ids;
        j["ignore"] = inj.ignore_set;
        j["loss_span"] = {inj.loss_lo, inj.loss_hi};
        j["sites"] = inj.sites;
        j["strategy"] = to_string(strategy.kind);
        out << j.dump() << "\n";
    }
}

}  // namespace pauselab
