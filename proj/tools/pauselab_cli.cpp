#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pauselab/checkpoint.hpp"
#include "pauselab/eval.hpp"
#include "pauselab/harness.hpp"
#include "pauselab/report.hpp"
#include "pauselab/runconfig.hpp"
#include "pauselab/taskgen.hpp"

namespace fs = std::filesystem;
using namespace pauselab;

namespace {

int cmd_gen_data(const TaskSpec& spec, const std::string& out_dir) {
    const GeneratedData data = generate_task(spec);
    fs::create_directories(out_dir);
    save_jsonl(data.train, out_dir + "/train.jsonl");
    save_jsonl(data.val, out_dir + "/val.jsonl");
    save_jsonl(data.test, out_dir + "/test.jsonl");
    Vocab::build(data.alphabet).save_json(out_dir + "/vocab.json");
    save_manifest(data, spec, out_dir + "/manifest.json");
    std::cout << "wrote " << data.train.records.size() << "/" << data.val.records.size() << "/"
              << data.test.records.size() << " train/val/test records to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& strategy_override,
              std::int64_t seed_override) {
    RunConfig cfg = parse_run_config_file(config_path);
    if (!strategy_override.empty()) cfg.strategy.kind = strategy_kind_from_string(strategy_override);
    if (cfg.strategy.kind == StrategyKind::Sft) cfg.strategy.num_sites = 0;
    std::vector<std::uint64_t> seeds = cfg.seeds;
    if (seed_override >= 0) seeds = {static_cast<std::uint64_t>(seed_override)};

    const PreparedData data = prepare_data(cfg);
    for (std::uint64_t seed : seeds) {
        const RunOutcome outcome = run_experiment(cfg, seed, &data);
        std::cout << to_string(cfg.strategy.kind) << " seed " << seed << ": accuracy "
                  << format_real(outcome.accuracy) << ", best val loss " << format_real(outcome.log.best_val_loss)
                  << ", checkpoint " << outcome.checkpoint_path << "\n";
    }
    return 0;
}

StrategyConfig eval_strategy(const std::string& kind, int m, int block_len) {
    StrategyConfig strategy;
    strategy.kind = strategy_kind_from_string(kind);
    strategy.num_sites = strategy.kind == StrategyKind::Sft ? 0 : m;
    strategy.block_len = block_len;
    return strategy;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path, const std::string& kind, int m,
             int block_len, bool ban_pause, const std::string& out_path) {
    const Checkpoint<float> ckpt = load_checkpoint<float>(checkpoint_path);
    const EncodedDataset dataset = encode_dataset(load_jsonl(data_path), ckpt.vocab);
    const EvalReport report = evaluate(ckpt.model, dataset, eval_strategy(kind, m, block_len), {ban_pause});
    if (!out_path.empty()) write_eval_csv(report, out_path);
    std::cout << "accuracy " << format_real(report.accuracy) << " over " << report.rows.size() << " examples\n";
    return 0;
}

int cmd_analyze(const std::string& checkpoint_path, const std::string& data_path, int k,
                const std::string& kind, int m, int block_len, bool ban_pause, const std::string& out_path) {
    const Checkpoint<float> ckpt = load_checkpoint<float>(checkpoint_path);
    const EncodedDataset dataset = encode_dataset(load_jsonl(data_path), ckpt.vocab);
    const LowestKResult result =
        lowest_k_stats(ckpt.model, dataset, k, eval_strategy(kind, m, block_len), {ban_pause});
    if (!out_path.empty()) write_logprobs_csv(result, out_path);
    std::cout << "k=" << result.summary.k << " correct n=" << result.summary.correct_count << " mean "
              << format_real(result.summary.correct_mean) << " var "
              << format_real(result.summary.correct_variance) << "; incorrect n="
              << result.summary.incorrect_count << " mean " << format_real(result.summary.incorrect_mean)
              << " var " << format_real(result.summary.incorrect_variance) << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& axis_name,
               const std::vector<int>& values) {
    RunConfig cfg = parse_run_config_file(config_path);
    const SweepAxis axis = sweep_axis_from_string(axis_name);
    const std::vector<SweepRow> rows = run_sweep(cfg, axis, values);
    int failed = 0;
    for (const SweepRow& row : rows) {
        std::cout << row.axis << "=" << row.value << " seed " << row.seed << ": ";
        if (row.failed) {
            std::cout << "FAILED (" << row.error << ")\n";
            ++failed;
        } else {
            std::cout << "accuracy " << format_real(row.accuracy) << ", mean loss "
                      << format_real(row.mean_loss) << "\n";
        }
    }
    std::cout << "results: " << cfg.out_dir << "/sweep.csv\n";
    return failed == 0 ? 0 : 1;
}

int cmd_gradcheck(int layers, int heads, int d_model, int d_ff, double epsilon) {
    ModelConfig cfg;
    cfg.num_layers = layers;
    cfg.num_heads = heads;
    cfg.d_model = d_model;
    cfg.d_ff = d_ff;
    cfg.vocab_size = 16;
    cfg.max_seq_len = 16;
    cfg.precision = Precision::Double;
    const Model<double> model = init_params<double>(cfg, 7);

    LossItem item;
    item.ids = {kBosId, 5, 9, kPauseId, 12, 7, kEosId};
    item.loss_lo = 1;
    item.loss_hi = 6;
    item.ignore_set = {2};  // the position whose next token is PAUSE
    const double err = grad_check(model, item, epsilon, 12, 99);
    std::cout << "max relative error " << format_real(err) << "\n";
    return err < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pause-token fine-tuning laboratory"};
    app.require_subcommand(1);

    // gen-data
    TaskSpec spec;
    std::string gen_out = "data";
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic task dataset");
    gen->add_option("--task", spec.task, "annotated-arithmetic or chain-copy");
    gen->add_option("--n-train", spec.n_train);
    gen->add_option("--n-val", spec.n_val);
    gen->add_option("--n-test", spec.n_test);
    gen->add_option("--digits", spec.digits);
    gen->add_option("--steps", spec.steps);
    gen->add_option("--seed", spec.seed);
    gen->add_option("--out", gen_out, "output directory");

    // train
    std::string train_config, train_strategy;
    std::int64_t train_seed = -1;
    auto* tr = app.add_subcommand("train", "fine-tune under a strategy from a config file");
    tr->add_option("--config", train_config, "run config path")->required();
    tr->add_option("--strategy", train_strategy, "override strategy.kind");
    tr->add_option("--seed", train_seed, "override the seed list with one seed");

    // eval
    std::string eval_ckpt, eval_data, eval_kind = "sft", eval_out;
    int eval_m = 5, eval_block = 1;
    bool eval_ban_pause = false;
    auto* ev = app.add_subcommand("eval", "exact-match accuracy of a checkpoint on a JSONL dataset");
    ev->add_option("--checkpoint", eval_ckpt)->required();
    ev->add_option("--data", eval_data, "JSONL with prefix/target records")->required();
    ev->add_option("--strategy", eval_kind, "inference-time strategy (appd appends pauses)");
    ev->add_option("--m", eval_m);
    ev->add_option("--block-len", eval_block);
    ev->add_flag("--ban-pause", eval_ban_pause);
    ev->add_option("--out", eval_out, "eval CSV path");

    // analyze
    std::string an_ckpt, an_data, an_kind = "sft", an_out;
    int an_k = 20, an_m = 5, an_block = 1;
    bool an_ban_pause = false;
    auto* an = app.add_subcommand("analyze", "lowest-k log-probability statistics");
    an->add_option("--checkpoint", an_ckpt)->required();
    an->add_option("--data", an_data)->required();
    an->add_option("--k", an_k);
    an->add_option("--strategy", an_kind);
    an->add_option("--m", an_m);
    an->add_option("--block-len", an_block);
    an->add_flag("--ban-pause", an_ban_pause);
    an->add_option("--out", an_out, "logprobs CSV path");

    // ablate
    std::string ab_config, ab_axis = "pause_count";
    std::vector<int> ab_values = {1, 3, 5, 7, 10};
    auto* ab = app.add_subcommand("ablate", "sweep pause_count or block_len over a value grid");
    ab->add_option("--config", ab_config)->required();
    ab->add_option("--axis", ab_axis, "pause_count or block_len");
    ab->add_option("--values", ab_values, "grid values")->delimiter(',');

    // gradcheck
    int gc_layers = 1, gc_heads = 2, gc_d_model = 8, gc_d_ff = 16;
    double gc_eps = 1e-5;
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the loss gradients");
    gc->add_option("--layers", gc_layers);
    gc->add_option("--heads", gc_heads);
    gc->add_option("--d-model", gc_d_model);
    gc->add_option("--d-ff", gc_d_ff);
    gc->add_option("--eps", gc_eps);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(spec, gen_out);
        if (tr->parsed()) return cmd_train(train_config, train_strategy, train_seed);
        if (ev->parsed())
            return cmd_eval(eval_ckpt, eval_data, eval_kind, eval_m, eval_block, eval_ban_pause, eval_out);
        if (an->parsed())
            return cmd_analyze(an_ckpt, an_data, an_k, an_kind, an_m, an_block, an_ban_pause, an_out);
        if (ab->parsed()) return cmd_ablate(ab_config, ab_axis, ab_values);
        if (gc->parsed()) return cmd_gradcheck(gc_layers, gc_heads, gc_d_model, gc_d_ff, gc_eps);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
