#include "pauselab/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "pauselab/checkpoint.hpp"

namespace pauselab {

namespace {

namespace fs = std::filesystem;

void write_summary_json(const std::string& path, const RunConfig& cfg, const RunOutcome& outcome) {
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(cfg.to_json());
    j["seed"] = outcome.seed;
    j["accuracy"] = outcome.accuracy;
    j["mean_train_loss"] = outcome.mean_train_loss;
    j["steps"] = outcome.log.steps.size();
    j["forward_count"] = outcome.log.forward_count;
    j["backward_count"] = outcome.log.backward_count;
    j["best_epoch"] = outcome.log.best_epoch;
    j["best_val_loss"] = outcome.log.best_val_loss;
    j["warnings"] = outcome.log.warnings;
    j["lowest_k"] = {{"k", outcome.lowest_k.summary.k},
                     {"correct_count", outcome.lowest_k.summary.correct_count},
                     {"incorrect_count", outcome.lowest_k.summary.incorrect_count},
                     {"correct_mean", outcome.lowest_k.summary.correct_mean},
                     {"correct_variance", outcome.lowest_k.summary.correct_variance},
                     {"incorrect_mean", outcome.lowest_k.summary.incorrect_mean},
                     {"incorrect_variance", outcome.lowest_k.summary.incorrect_variance}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open summary for writing: " + path);
    out << j.dump(2) << "\n";
}

std::string run_tag(const StrategyConfig& strategy, std::uint64_t seed) {
    return to_string(strategy.kind) + "_seed" + std::to_string(seed);
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
    PreparedData out;
    DatasetFile train, val, test;
    std::vector<std::string> alphabet;
    if (!cfg.data_dir.empty()) {
        train = load_jsonl(cfg.data_dir + "/train.jsonl");
        val = load_jsonl(cfg.data_dir + "/val.jsonl");
        test = load_jsonl(cfg.data_dir + "/test.jsonl");
        out.vocab = Vocab::load_json(cfg.data_dir + "/vocab.json");
    } else {
        GeneratedData gen = generate_task(cfg.task);
        train = std::move(gen.train);
        val = std::move(gen.val);
        test = std::move(gen.test);
        out.vocab = Vocab::build(gen.alphabet);
    }
    out.train = encode_dataset(train, out.vocab);
    out.val = encode_dataset(val, out.vocab);
    out.test = encode_dataset(test, out.vocab);
    return out;
}

RunOutcome run_experiment(const RunConfig& cfg, std::uint64_t seed, const PreparedData* data) {
    RunConfig resolved = cfg;
    PreparedData local;
    if (!data) {
        local = prepare_data(cfg);
        data = &local;
    }
    resolved.model.vocab_size = data->vocab.size();
    resolved.validate();

    TrainConfig train_cfg = resolved.train;
    train_cfg.seed = seed;
    StrategyConfig strategy = resolved.strategy;
    if (strategy.rng_seed == 0) strategy.rng_seed = seed * 7919 + 17;

    RunOutcome outcome;
    outcome.seed = seed;

    TrainResult trained = train(data->train, &data->val, strategy, train_cfg, resolved.model);
    outcome.log = std::move(trained.log);
    double loss_sum = 0;
    for (const StepRecord& s : outcome.log.steps) loss_sum += s.loss;
    outcome.mean_train_loss = outcome.log.steps.empty() ? 0.0 : loss_sum / static_cast<double>(outcome.log.steps.size());

    const DecodeFlags flags{resolved.ban_pause};
    outcome.eval = evaluate(trained.model, data->test, strategy, flags);
    outcome.accuracy = outcome.eval.accuracy;
    outcome.lowest_k = lowest_k_stats(trained.model, data->test, resolved.lowest_k, strategy, flags);

    fs::create_directories(resolved.out_dir);
    const std::string tag = run_tag(strategy, seed);
    outcome.checkpoint_path = resolved.out_dir + "/checkpoint_" + tag + ".bin";
    nlohmann::json provenance;
    provenance["config"] = nlohmann::json::parse(resolved.to_json());
    provenance["seed"] = seed;
    save_checkpoint(outcome.checkpoint_path, trained.model, data->vocab, provenance.dump());

    write_trainlog_csv(outcome.log, resolved.out_dir + "/trainlog_" + tag + ".csv");
    write_eval_csv(outcome.eval, resolved.out_dir + "/eval_" + tag + ".csv");
    write_logprobs_csv(outcome.lowest_k, resolved.out_dir + "/logprobs_" + tag + ".csv");
    write_summary_json(resolved.out_dir + "/summary_" + tag + ".json", resolved, outcome);
    return outcome;
}

std::vector<RunOutcome> run_strategy_comparison(const RunConfig& base,
                                                const std::vector<StrategyConfig>& strategies,
                                                std::uint64_t seed) {
    const PreparedData data = prepare_data(base);
    std::vector<RunOutcome> outcomes;
    std::vector<RunSeries> series;
    for (const StrategyConfig& strategy : strategies) {
        RunConfig cfg = base;
        cfg.strategy = strategy;
        RunOutcome outcome = run_experiment(cfg, seed, &data);
        RunSeries rs;
        rs.label = to_string(strategy.kind);
        for (const StepRecord& s : outcome.log.steps) rs.losses.push_back(s.loss);
        for (const LogProbRecord& r : outcome.lowest_k.records) rs.lowest_k_means.push_back(r.mean_lowest_k);
        series.push_back(std::move(rs));
        outcomes.push_back(std::move(outcome));
    }

    fs::create_directories(base.out_dir);
    {
        std::ofstream out(base.out_dir + "/comparison.csv");
        if (!out) throw std::runtime_error("cannot write comparison.csv");
        out << "strategy,seed,accuracy,mean_train_loss,steps\n";
        for (std::size_t i = 0; i < outcomes.size(); ++i)
            out << to_string(strategies[i].kind) << "," << seed << "," << format_real(outcomes[i].accuracy)
                << "," << format_real(outcomes[i].mean_train_loss) << "," << outcomes[i].log.steps.size()
                << "\n";
    }
    if (series.size() > 2) series.resize(2);
    write_comparison_svg(series, base.out_dir + "/comparison.svg");
    return outcomes;
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    if (name == "pause_count") return SweepAxis::PauseCount;
    if (name == "block_len") return SweepAxis::BlockLen;
    throw std::invalid_argument("unknown sweep axis: '" + name + "' (expected pause_count or block_len)");
}

std::string to_string(SweepAxis axis) {
    return axis == SweepAxis::PauseCount ? "pause_count" : "block_len";
}

std::vector<SweepRow> run_sweep(const RunConfig& base, SweepAxis axis, const std::vector<int>& values) {
    std::vector<int> unique_values = values;
    std::sort(unique_values.begin(), unique_values.end());
    unique_values.erase(std::unique(unique_values.begin(), unique_values.end()), unique_values.end());
    for (int v : unique_values)
        if (v < 1) throw std::invalid_argument("sweep values must be positive");

    const PreparedData data = prepare_data(base);
    std::vector<SweepRow> rows;
    fs::create_directories(base.out_dir);

    for (int value : unique_values) {
        RunConfig cfg = base;
        cfg.out_dir = base.out_dir + "/" + to_string(axis) + "_" + std::to_string(value);
        if (axis == SweepAxis::PauseCount)
            cfg.strategy.num_sites = value;
        else
            cfg.strategy.block_len = value;

        // Injected view of the training split for this cell (initial model).
        try {
            StrategyConfig strategy = cfg.strategy;
            if (strategy.rng_seed == 0) strategy.rng_seed = cfg.seeds.front() * 7919 + 17;
            ModelConfig mc = cfg.model;
            mc.vocab_size = data.vocab.size();
            const Model<float> initial = init_params<float>(mc, cfg.seeds.front());
            std::mt19937_64 rng(strategy.rng_seed);
            long fwd = 0;
            const auto sites = refresh_sites(data.train, initial, strategy, rng, cfg.train.batch_size, &fwd);
            export_injected_jsonl(data.train, sites, strategy, mc.max_seq_len,
                                  base.out_dir + "/" + to_string(axis) + "_" + std::to_string(value) +
                                      "_injected.jsonl");
        } catch (const std::exception& e) {
            rows.push_back({to_string(axis), value, 0, 0.0, 0.0, true,
                            std::string("injected export failed: ") + e.what()});
            continue;
        }

        for (std::uint64_t seed : base.seeds) {
            SweepRow row;
            row.axis = to_string(axis);
            row.value = value;
            row.seed = seed;
            try {
                const RunOutcome outcome = run_experiment(cfg, seed, &data);
                row.accuracy = outcome.accuracy;
                row.mean_loss = outcome.mean_train_loss;
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
            rows.push_back(std::move(row));
        }
    }

    write_sweep_csv(rows, base.out_dir + "/sweep.csv");
    write_sweep_svg(rows, to_string(axis), base.out_dir + "/sweep.svg");
    return rows;
}

}  // namespace pauselab
