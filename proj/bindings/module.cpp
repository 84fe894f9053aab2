#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pauselab/checkpoint.hpp"
#include "pauselab/eval.hpp"
#include "pauselab/harness.hpp"
#include "pauselab/runconfig.hpp"
#include "pauselab/taskgen.hpp"

namespace py = pybind11;
using namespace pauselab;

PYBIND11_MODULE(pauselab, m) {
    m.doc() = "pause-token fine-tuning laboratory";

    m.attr("PAUSE_ID") = kPauseId;
    m.attr("BOS_ID") = kBosId;
    m.attr("EOS_ID") = kEosId;
    m.attr("PAD_ID") = kPadId;

    py::class_<Vocab>(m, "Vocab")
        .def_static("build", &Vocab::build, py::arg("alphabet"))
        .def_static("load_json", &Vocab::load_json, py::arg("path"))
        .def("save_json", &Vocab::save_json, py::arg("path"))
        .def("size", &Vocab::size)
        .def("surface", &Vocab::surface, py::arg("id"))
        .def("encode", &Vocab::encode, py::arg("text"))
        .def("decode", &Vocab::decode, py::arg("ids"), py::arg("strip_special") = true)
        .def("token_list", &Vocab::token_list);

    py::enum_<Precision>(m, "Precision").value("single", Precision::Single).value("double", Precision::Double);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("num_layers", &ModelConfig::num_layers)
        .def_readwrite("num_heads", &ModelConfig::num_heads)
        .def_readwrite("d_model", &ModelConfig::d_model)
        .def_readwrite("d_ff", &ModelConfig::d_ff)
        .def_readwrite("vocab_size", &ModelConfig::vocab_size)
        .def_readwrite("max_seq_len", &ModelConfig::max_seq_len)
        .def_readwrite("init_scale", &ModelConfig::init_scale)
        .def("validate", &ModelConfig::validate);

    py::class_<Model<float>>(m, "Model")
        .def_readonly("config", &Model<float>::config)
        .def("num_parameters", &Model<float>::num_parameters);

    py::class_<LossItem>(m, "LossItem")
        .def(py::init<>())
        .def_readwrite("ids", &LossItem::ids)
        .def_readwrite("ignore_set", &LossItem::ignore_set)
        .def_readwrite("loss_lo", &LossItem::loss_lo)
        .def_readwrite("loss_hi", &LossItem::loss_hi);

    py::class_<LossValue>(m, "LossValue")
        .def_readonly("mean_nll", &LossValue::mean_nll)
        .def_readonly("contributing_positions", &LossValue::contributing_positions);

    m.def("init_params", &init_params<float>, py::arg("config"), py::arg("seed"));
    m.def("token_log_likelihoods", &token_log_likelihoods<float>, py::arg("model"), py::arg("ids"),
          py::arg("lo"), py::arg("hi"));
    m.def("masked_nll", &masked_nll<float>, py::arg("model"), py::arg("item"));
    m.def(
        "generate",
        [](const Model<float>& model, const std::vector<TokenId>& prefix, int max_new, bool ban_pause) {
            std::vector<double> logprobs;
            auto ids = generate(model, prefix, max_new, DecodeFlags{ban_pause}, &logprobs);
            return py::make_tuple(ids, logprobs);
        },
        py::arg("model"), py::arg("prefix_ids"), py::arg("max_new"), py::arg("ban_pause") = false,
        "Greedy continuation; returns (ids, per-token chosen log-probs).");
    m.def(
        "grad_check",
        [](const ModelConfig& cfg, const LossItem& item, double epsilon, int samples, std::uint64_t seed) {
            ModelConfig dcfg = cfg;
            dcfg.precision = Precision::Double;
            return grad_check(init_params<double>(dcfg, seed), item, epsilon, samples, seed);
        },
        py::arg("config"), py::arg("item"), py::arg("epsilon") = 1e-5, py::arg("samples_per_tensor") = 8,
        py::arg("seed") = 7, "Finite-difference gradient check on a double-precision model.");

    py::enum_<StrategyKind>(m, "StrategyKind")
        .value("sft", StrategyKind::Sft)
        .value("dit", StrategyKind::Dit)
        .value("ran", StrategyKind::Ran)
        .value("appd", StrategyKind::Appd)
        .value("aaw", StrategyKind::Aaw)
        .value("mf", StrategyKind::Mf)
        .value("mb", StrategyKind::Mb)
        .value("sb", StrategyKind::Sb);

    py::enum_<RefreshMode>(m, "RefreshMode")
        .value("once", RefreshMode::Once)
        .value("per_epoch", RefreshMode::PerEpoch)
        .value("per_step", RefreshMode::PerStep);

    py::class_<StrategyConfig>(m, "StrategyConfig")
        .def(py::init<>())
        .def_readwrite("kind", &StrategyConfig::kind)
        .def_readwrite("num_sites", &StrategyConfig::num_sites)
        .def_readwrite("block_len", &StrategyConfig::block_len)
        .def_readwrite("refresh", &StrategyConfig::refresh)
        .def_readwrite("pause_in_loss", &StrategyConfig::pause_in_loss)
        .def_readwrite("rng_seed", &StrategyConfig::rng_seed)
        .def("validate", &StrategyConfig::validate)
        .def("effective_sites", &StrategyConfig::effective_sites);

    py::class_<Example>(m, "Example")
        .def(py::init<>())
        .def_readwrite("prefix_ids", &Example::prefix_ids)
        .def_readwrite("target_ids", &Example::target_ids);

    py::class_<InjectedExample>(m, "InjectedExample")
        .def_readonly("ids", &InjectedExample::ids)
        .def_readonly("sites", &InjectedExample::sites)
        .def_readonly("ignore_set", &InjectedExample::ignore_set)
        .def_readonly("loss_lo", &InjectedExample::loss_lo)
        .def_readonly("loss_hi", &InjectedExample::loss_hi);

    m.def("select_positions_dit", &select_positions_dit, py::arg("loglikes"), py::arg("m"));
    m.def(
        "select_positions_ran",
        [](std::uint64_t seed, int target_len, int m) {
            std::mt19937_64 rng(seed);
            return select_positions_ran(rng, target_len, m);
        },
        py::arg("seed"), py::arg("target_len"), py::arg("m"));
    m.def("select_positions_appd", &select_positions_appd, py::arg("m"));
    m.def("select_positions_aaw", &select_positions_aaw, py::arg("target_ids"), py::arg("vocab"));
    m.def(
        "select_positions_rule_based",
        [](const StrategyConfig& cfg, std::uint64_t seed, const std::vector<TokenId>& target_ids,
           const Vocab& vocab) {
            std::mt19937_64 rng(seed);
            return select_positions_rule_based(cfg, rng, target_ids, vocab);
        },
        py::arg("strategy"), py::arg("seed"), py::arg("target_ids"), py::arg("vocab"));
    m.def("inject", &inject, py::arg("example"), py::arg("sites"), py::arg("strategy"),
          py::arg("max_seq_len"));
    m.def("strip_pause", &strip_pause, py::arg("ids"));

    py::class_<TaskSpec>(m, "TaskSpec")
        .def(py::init<>())
        .def_readwrite("task", &TaskSpec::task)
        .def_readwrite("n_train", &TaskSpec::n_train)
        .def_readwrite("n_val", &TaskSpec::n_val)
        .def_readwrite("n_test", &TaskSpec::n_test)
        .def_readwrite("digits", &TaskSpec::digits)
        .def_readwrite("steps", &TaskSpec::steps)
        .def_readwrite("seed", &TaskSpec::seed);

    py::class_<DataRecord>(m, "DataRecord")
        .def(py::init<>())
        .def_readwrite("prefix", &DataRecord::prefix)
        .def_readwrite("target", &DataRecord::target);

    py::class_<DatasetFile>(m, "DatasetFile")
        .def(py::init<>())
        .def_readwrite("records", &DatasetFile::records)
        .def_readwrite("split", &DatasetFile::split);

    py::class_<GeneratedData>(m, "GeneratedData")
        .def_readonly("train", &GeneratedData::train)
        .def_readonly("val", &GeneratedData::val)
        .def_readonly("test", &GeneratedData::test)
        .def_readonly("alphabet", &GeneratedData::alphabet)
        .def_readonly("warnings", &GeneratedData::warnings);

    m.def("generate_task", &generate_task, py::arg("spec"));
    m.def("load_jsonl", &load_jsonl, py::arg("path"));
    m.def("save_jsonl", &save_jsonl, py::arg("dataset"), py::arg("path"));

    py::class_<EncodedDataset>(m, "EncodedDataset")
        .def_readonly("examples", &EncodedDataset::examples)
        .def_readonly("gold_answers", &EncodedDataset::gold_answers);
    m.def("encode_dataset", &encode_dataset, py::arg("file"), py::arg("vocab"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("clip_norm", &TrainConfig::clip_norm)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("eval_every", &TrainConfig::eval_every);

    py::class_<StepRecord>(m, "StepRecord")
        .def_readonly("step", &StepRecord::step)
        .def_readonly("loss", &StepRecord::loss)
        .def_readonly("contributing_positions", &StepRecord::contributing_positions)
        .def_readonly("forward_count", &StepRecord::forward_count)
        .def_readonly("backward_count", &StepRecord::backward_count);

    py::class_<TrainLog>(m, "TrainLog")
        .def_readonly("steps", &TrainLog::steps)
        .def_readonly("epoch_val_loss", &TrainLog::epoch_val_loss)
        .def_readonly("warnings", &TrainLog::warnings)
        .def_readonly("forward_count", &TrainLog::forward_count)
        .def_readonly("backward_count", &TrainLog::backward_count)
        .def_readonly("best_epoch", &TrainLog::best_epoch)
        .def_readonly("best_val_loss", &TrainLog::best_val_loss)
        .def_readonly("steps_per_epoch", &TrainLog::steps_per_epoch);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("model", &TrainResult::model)
        .def_readonly("log", &TrainResult::log);

    m.def(
        "train",
        [](const EncodedDataset& train_set, const EncodedDataset* val_set, const StrategyConfig& strategy,
           const TrainConfig& train_cfg, const ModelConfig& model_cfg) {
            return train(train_set, val_set, strategy, train_cfg, model_cfg);
        },
        py::arg("train_set"), py::arg("val_set") = nullptr, py::arg("strategy") = StrategyConfig{},
        py::arg("train_cfg") = TrainConfig{}, py::arg("model_cfg") = ModelConfig{});

    py::class_<EvalRow>(m, "EvalRow")
        .def_readonly("id", &EvalRow::id)
        .def_readonly("generated_text", &EvalRow::generated_text)
        .def_readonly("extracted_answer", &EvalRow::extracted_answer)
        .def_readonly("gold_answer", &EvalRow::gold_answer)
        .def_readonly("answer_found", &EvalRow::answer_found)
        .def_readonly("correct", &EvalRow::correct)
        .def_readonly("overflow", &EvalRow::overflow);

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("accuracy", &EvalReport::accuracy)
        .def_readonly("rows", &EvalReport::rows);

    m.def(
        "evaluate",
        [](const Model<float>& model, const EncodedDataset& dataset, const StrategyConfig& strategy,
           bool ban_pause) { return evaluate(model, dataset, strategy, DecodeFlags{ban_pause}); },
        py::arg("model"), py::arg("dataset"), py::arg("strategy") = StrategyConfig{},
        py::arg("ban_pause") = false);

    py::class_<LogProbRecord>(m, "LogProbRecord")
        .def_readonly("id", &LogProbRecord::id)
        .def_readonly("lowest_k", &LogProbRecord::lowest_k)
        .def_readonly("mean_lowest_k", &LogProbRecord::mean_lowest_k)
        .def_readonly("correct", &LogProbRecord::correct);

    py::class_<LowestKSummary>(m, "LowestKSummary")
        .def_readonly("k", &LowestKSummary::k)
        .def_readonly("correct_count", &LowestKSummary::correct_count)
        .def_readonly("incorrect_count", &LowestKSummary::incorrect_count)
        .def_readonly("correct_mean", &LowestKSummary::correct_mean)
        .def_readonly("correct_variance", &LowestKSummary::correct_variance)
        .def_readonly("incorrect_mean", &LowestKSummary::incorrect_mean)
        .def_readonly("incorrect_variance", &LowestKSummary::incorrect_variance);

    py::class_<LowestKResult>(m, "LowestKResult")
        .def_readonly("records", &LowestKResult::records)
        .def_readonly("summary", &LowestKResult::summary);

    m.def(
        "lowest_k_stats",
        [](const Model<float>& model, const EncodedDataset& dataset, int k, const StrategyConfig& strategy,
           bool ban_pause) { return lowest_k_stats(model, dataset, k, strategy, DecodeFlags{ban_pause}); },
        py::arg("model"), py::arg("dataset"), py::arg("k") = 20, py::arg("strategy") = StrategyConfig{},
        py::arg("ban_pause") = false);

    m.def(
        "save_checkpoint",
        [](const std::string& path, const Model<float>& model, const Vocab& vocab,
           const std::string& provenance_json) { save_checkpoint(path, model, vocab, provenance_json); },
        py::arg("path"), py::arg("model"), py::arg("vocab"), py::arg("provenance_json") = "{}");
    m.def(
        "load_checkpoint",
        [](const std::string& path) {
            Checkpoint<float> ckpt = load_checkpoint<float>(path);
            return py::make_tuple(std::move(ckpt.model), std::move(ckpt.vocab), ckpt.provenance_json);
        },
        py::arg("path"), "Returns (model, vocab, provenance_json).");

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("model", &RunConfig::model)
        .def_readwrite("train", &RunConfig::train)
        .def_readwrite("strategy", &RunConfig::strategy)
        .def_readwrite("task", &RunConfig::task)
        .def_readwrite("data_dir", &RunConfig::data_dir)
        .def_readwrite("out_dir", &RunConfig::out_dir)
        .def_readwrite("seeds", &RunConfig::seeds)
        .def_readwrite("lowest_k", &RunConfig::lowest_k)
        .def_readwrite("ban_pause", &RunConfig::ban_pause);
    m.def("parse_run_config_file", &parse_run_config_file, py::arg("path"));
    m.def("parse_run_config_lines", &parse_run_config_lines, py::arg("lines"));

    py::class_<RunOutcome>(m, "RunOutcome")
        .def_readonly("seed", &RunOutcome::seed)
        .def_readonly("accuracy", &RunOutcome::accuracy)
        .def_readonly("mean_train_loss", &RunOutcome::mean_train_loss)
        .def_readonly("log", &RunOutcome::log)
        .def_readonly("eval", &RunOutcome::eval)
        .def_readonly("lowest_k", &RunOutcome::lowest_k)
        .def_readonly("checkpoint_path", &RunOutcome::checkpoint_path);
    m.def(
        "run_experiment",
        [](const RunConfig& cfg, std::uint64_t seed) { return run_experiment(cfg, seed); }, py::arg("cfg"),
        py::arg("seed"));
}
