#include "pauselab/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pauselab {

namespace {

std::string trim(const std::string& s) {
    const auto lo = s.find_first_not_of(" \t\r");
    if (lo == std::string::npos) return "";
    const auto hi = s.find_last_not_of(" \t\r");
    return s.substr(lo, hi - lo + 1);
}

long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected integer, got '" + value + "'");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& key, const std::string& value) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (part.empty()) continue;
        seeds.push_back(static_cast<std::uint64_t>(parse_int(key, part)));
    }
    if (seeds.empty()) throw std::invalid_argument("config key '" + key + "': empty seed list");
    return seeds;
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    train.validate();
    strategy.validate();
    if (data_dir.empty()) task.validate();
    if (seeds.empty()) throw std::invalid_argument("seeds must be non-empty");
    if (lowest_k < 1) throw std::invalid_argument("lowest_k must be >= 1");
}

std::map<std::string, std::string> RunConfig::to_key_values() const {
    std::map<std::string, std::string> kv;
    kv["model.num_layers"] = std::to_string(model.num_layers);
    kv["model.num_heads"] = std::to_string(model.num_heads);
    kv["model.d_model"] = std::to_string(model.d_model);
    kv["model.d_ff"] = std::to_string(model.d_ff);
    kv["model.max_seq_len"] = std::to_string(model.max_seq_len);
    kv["model.init_scale"] = std::to_string(model.init_scale);
    kv["train.epochs"] = std::to_string(train.epochs);
    kv["train.batch_size"] = std::to_string(train.batch_size);
    kv["train.learning_rate"] = std::to_string(train.learning_rate);
    kv["train.momentum"] = std::to_string(train.momentum);
    kv["train.clip_norm"] = std::to_string(train.clip_norm);
    kv["train.weight_decay"] = std::to_string(train.weight_decay);
    kv["train.eval_every"] = std::to_string(train.eval_every);
    kv["strategy.kind"] = to_string(strategy.kind);
    kv["strategy.m"] = std::to_string(strategy.num_sites);
    kv["strategy.block_len"] = std::to_string(strategy.block_len);
    kv["strategy.refresh"] = to_string(strategy.refresh);
    kv["strategy.pause_in_loss"] = strategy.pause_in_loss ? "true" : "false";
    kv["task"] = task.task;
    kv["task.n_train"] = std::to_string(task.n_train);
    kv["task.n_val"] = std::to_string(task.n_val);
    kv["task.n_test"] = std::to_string(task.n_test);
    kv["task.digits"] = std::to_string(task.digits);
    kv["task.steps"] = std::to_string(task.steps);
    kv["task.seed"] = std::to_string(task.seed);
    kv["data_dir"] = data_dir;
    kv["out_dir"] = out_dir;
    kv["lowest_k"] = std::to_string(lowest_k);
    kv["ban_pause"] = ban_pause ? "true" : "false";
    std::string s;
    for (std::uint64_t seed : seeds) s += (s.empty() ? "" : ",") + std::to_string(seed);
    kv["seeds"] = s;
    return kv;
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    for (const auto& [k, v] : to_key_values()) j[k] = v;
    return j.dump();
}

RunConfig parse_run_config_lines(const std::vector<std::string>& lines) {
    RunConfig cfg;
    int line_no = 0;
    for (const std::string& raw : lines) {
        ++line_no;
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "model.num_layers") cfg.model.num_layers = static_cast<int>(parse_int(key, value));
        else if (key == "model.num_heads") cfg.model.num_heads = static_cast<int>(parse_int(key, value));
        else if (key == "model.d_model") cfg.model.d_model = static_cast<int>(parse_int(key, value));
        else if (key == "model.d_ff") cfg.model.d_ff = static_cast<int>(parse_int(key, value));
        else if (key == "model.max_seq_len") cfg.model.max_seq_len = static_cast<int>(parse_int(key, value));
        else if (key == "model.init_scale") cfg.model.init_scale = parse_real(key, value);
        else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(parse_int(key, value));
        else if (key == "train.batch_size") cfg.train.batch_size = static_cast<int>(parse_int(key, value));
        else if (key == "train.learning_rate") cfg.train.learning_rate = parse_real(key, value);
        else if (key == "train.momentum") cfg.train.momentum = parse_real(key, value);
        else if (key == "train.clip_norm") cfg.train.clip_norm = parse_real(key, value);
        else if (key == "train.weight_decay") cfg.train.weight_decay = parse_real(key, value);
        else if (key == "train.eval_every") cfg.train.eval_every = static_cast<int>(parse_int(key, value));
        else if (key == "strategy.kind") cfg.strategy.kind = strategy_kind_from_string(value);
        else if (key == "strategy.m") cfg.strategy.num_sites = static_cast<int>(parse_int(key, value));
        else if (key == "strategy.block_len") cfg.strategy.block_len = static_cast<int>(parse_int(key, value));
        else if (key == "strategy.refresh") cfg.strategy.refresh = refresh_mode_from_string(value);
        else if (key == "strategy.pause_in_loss") cfg.strategy.pause_in_loss = parse_bool(key, value);
        else if (key == "task") cfg.task.task = value;
        else if (key == "task.n_train") cfg.task.n_train = static_cast<int>(parse_int(key, value));
        else if (key == "task.n_val") cfg.task.n_val = static_cast<int>(parse_int(key, value));
        else if (key == "task.n_test") cfg.task.n_test = static_cast<int>(parse_int(key, value));
        else if (key == "task.digits") cfg.task.digits = static_cast<int>(parse_int(key, value));
        else if (key == "task.steps") cfg.task.steps = static_cast<int>(parse_int(key, value));
        else if (key == "task.seed") cfg.task.seed = static_cast<std::uint64_t>(parse_int(key, value));
        else if (key == "data_dir") cfg.data_dir = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "seeds") cfg.seeds = parse_seed_list(key, value);
        else if (key == "lowest_k") cfg.lowest_k = static_cast<int>(parse_int(key, value));
        else if (key == "ban_pause") cfg.ban_pause = parse_bool(key, value);
        else throw std::invalid_argument("unknown config key '" + key + "' at line " + std::to_string(line_no));
    }
    if (const char* env = std::getenv("PAUSELAB_OUT_DIR"); env && *env) cfg.out_dir = env;
    return cfg;
}

RunConfig parse_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return parse_run_config_lines(lines);
}

}  // namespace pauselab
