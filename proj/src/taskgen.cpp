#include "pauselab/taskgen.hpp"

#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace pauselab {

namespace {

constexpr const char* kStepVars = "xyzuv";

std::uint64_t fnv1a(const std::string& s, std::uint64_t h) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct ArithmeticStep {
    std::vector<char> ops;       // op before operand i (ops[0] applies to the chained-in value)
    std::vector<long> operands;  // fresh operands of this step
};

struct ArithmeticTuple {
    long first = 0;
    std::vector<ArithmeticStep> steps;

    std::string key() const {
        std::string k = std::to_string(first);
        for (const ArithmeticStep& st : steps) {
            k += "|";
            for (std::size_t i = 0; i < st.operands.size(); ++i)
                k += st.ops[i] + std::to_string(st.operands[i]);
        }
        return k;
    }
};

// Expression text without spaces, annotation style: "3+4-2".
std::string expr_text(long start, const ArithmeticStep& st) {
    std::string e = std::to_string(start);
    for (std::size_t i = 0; i < st.operands.size(); ++i) {
        e += st.ops[i];
        e += std::to_string(st.operands[i]);
    }
    return e;
}

long eval_step(long start, const ArithmeticStep& st) {
    long v = start;
    for (std::size_t i = 0; i < st.operands.size(); ++i) {
        if (st.ops[i] == '+')
            v += st.operands[i];
        else
            v -= st.operands[i];
    }
    return v;
}

DataRecord render_arithmetic(const ArithmeticTuple& tuple) {
    DataRecord rec;
    // Prefix: "3 + 4 - 2 then - 1 ="
    rec.prefix = std::to_string(tuple.first);
    bool first_step = true;
    for (const ArithmeticStep& st : tuple.steps) {
        if (!first_step) rec.prefix += " then";
        for (std::size_t i = 0; i < st.operands.size(); ++i) {
            rec.prefix += " ";
            rec.prefix += st.ops[i];
            rec.prefix += " " + std::to_string(st.operands[i]);
        }
        first_step = false;
    }
    rec.prefix += " =";

    // Target: "x = <<3+4-2=5>>5. y = <<5-1=4>>4. #### 4"
    long value = tuple.first;
    for (std::size_t s = 0; s < tuple.steps.size(); ++s) {
        const ArithmeticStep& st = tuple.steps[s];
        const long start = value;
        const std::string expr = expr_text(start, st);
        value = eval_step(start, st);
        rec.target += std::string(1, kStepVars[s]) + " = <<" + expr + "=" + std::to_string(value) + ">>" +
                      std::to_string(value) + ". ";
    }
    rec.target += "#### " + std::to_string(value);
    return rec;
}

}  // namespace

void TaskSpec::validate() const {
    if (task != "annotated-arithmetic" && task != "chain-copy")
        throw std::invalid_argument("unknown task: '" + task + "'");
    if (n_train < 1 || n_val < 1 || n_test < 1) throw std::invalid_argument("split counts must be >= 1");
    if (digits < 1 || digits > 4) throw std::invalid_argument("digits must be in [1, 4]");
    if (steps < 1 || steps > 5) throw std::invalid_argument("steps must be in [1, 5]");
}

std::vector<std::string> task_alphabet(const std::string& task) {
    if (task == "annotated-arithmetic") {
        std::vector<std::string> a = {"+", "-", "=", "<<", ">>", "####", " ", ".", "then"};
        for (char c = '0'; c <= '9'; ++c) a.emplace_back(1, c);
        for (const char* p = kStepVars; *p; ++p) a.emplace_back(1, *p);
        return a;
    }
    if (task == "chain-copy") {
        std::vector<std::string> a = {" ", "####"};
        for (char c = 'a'; c <= 'j'; ++c) a.emplace_back(1, c);
        return a;
    }
    throw std::invalid_argument("unknown task: '" + task + "'");
}

GeneratedData gen_annotated_arithmetic(const TaskSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const long operand_max = [&spec] {
        long m = 1;
        for (int i = 0; i < spec.digits; ++i) m *= 10;
        return m;
    }();

    const int total = spec.n_train + spec.n_val + spec.n_test;
    std::set<std::string> seen;
    std::vector<DataRecord> records;
    records.reserve(static_cast<std::size_t>(total));

    // Tuples are unique while the space allows it; once draws stop finding
    // fresh tuples the generator falls back to sampling with repetition so
    // small configurations (e.g. digits=1, steps=1) can still fill the
    // requested counts.
    bool allow_repeats = false;
    long stale_attempts = 0;
    while (static_cast<int>(records.size()) < total) {
        if (!allow_repeats && ++stale_attempts > 20000) allow_repeats = true;
        ArithmeticTuple tuple;
        tuple.first = static_cast<long>(rng() % static_cast<std::uint64_t>(operand_max));
        bool feasible = true;
        long value = tuple.first;
        for (int s = 0; s < spec.steps && feasible; ++s) {
            ArithmeticStep st;
            const char op = (rng() % 2 == 0) ? '+' : '-';
            const long operand = static_cast<long>(rng() % static_cast<std::uint64_t>(operand_max));
            st.ops.push_back(op);
            st.operands.push_back(operand);
            value = (op == '+') ? value + operand : value - operand;
            if (value < 0) feasible = false;  // keep all partials non-negative
            tuple.steps.push_back(std::move(st));
        }
        if (!feasible) continue;
        if (!allow_repeats && !seen.insert(tuple.key()).second) continue;
        stale_attempts = 0;
        records.push_back(render_arithmetic(tuple));
    }

    GeneratedData out;
    if (allow_repeats)
        out.warnings.push_back("operand tuple space smaller than requested counts; splits share tuples");
    out.alphabet = task_alphabet(spec.task);
    out.train.split = "train";
    out.val.split = "val";
    out.test.split = "test";
    out.train.records.assign(records.begin(), records.begin() + spec.n_train);
    out.val.records.assign(records.begin() + spec.n_train, records.begin() + spec.n_train + spec.n_val);
    out.test.records.assign(records.begin() + spec.n_train + spec.n_val, records.end());
    return out;
}

GeneratedData gen_chain_copy(const TaskSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const int seq_len = spec.steps + 2;
    const int alpha = 10;  // symbols a..j

    const int total = spec.n_train + spec.n_val + spec.n_test;
    std::set<std::string> seen;
    std::vector<DataRecord> records;
    long attempts = 0;
    const long max_attempts = 1000L * total + 100000L;
    while (static_cast<int>(records.size()) < total) {
        if (++attempts > max_attempts)
            throw std::runtime_error("symbol tuple space exhausted; reduce split sizes or raise steps");
        std::string symbols;
        for (int i = 0; i < seq_len; ++i) symbols += static_cast<char>('a' + rng() % alpha);
        if (!seen.insert(symbols).second) continue;

        DataRecord rec;
        std::string reversed(symbols.rbegin(), symbols.rend());
        for (int i = 0; i < seq_len; ++i) {
            if (i) rec.prefix += " ";
            rec.prefix += symbols[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i < seq_len; ++i) {
            if (i) rec.target += " ";
            rec.target += reversed[static_cast<std::size_t>(i)];
        }
        rec.target += " #### " + reversed;
        records.push_back(std::move(rec));
    }

    GeneratedData out;
    out.alphabet = task_alphabet(spec.task);
    out.train.split = "train";
    out.val.split = "val";
    out.test.split = "test";
    out.train.records.assign(records.begin(), records.begin() + spec.n_train);
    out.val.records.assign(records.begin() + spec.n_train, records.begin() + spec.n_train + spec.n_val);
    out.test.records.assign(records.begin() + spec.n_train + spec.n_val, records.end());
    return out;
}

GeneratedData generate_task(const TaskSpec& spec) {
    spec.validate();
    return spec.task == "annotated-arithmetic" ? gen_annotated_arithmetic(spec) : gen_chain_copy(spec);
}

DatasetFile load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    DatasetFile out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        if (!j.contains("prefix") || !j["prefix"].is_string())
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": missing string field \"prefix\"");
        if (!j.contains("target") || !j["target"].is_string())
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": missing string field \"target\"");
        out.records.push_back({j["prefix"].get<std::string>(), j["target"].get<std::string>()});
    }
    return out;
}

void save_jsonl(const DatasetFile& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open dataset file for writing: " + path);
    for (const DataRecord& rec : dataset.records) {
        nlohmann::json j;
        j["prefix"] = rec.prefix;
        j["target"] = rec.target;
        out << j.dump() << "\n";
    }
}

std::vector<std::string> validate_dataset(const DatasetFile& dataset) {
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const std::string& t = dataset.records[i].target;
        std::size_t count = 0, pos = 0;
        while ((pos = t.find("####", pos)) != std::string::npos) {
            ++count;
            pos += 4;
        }
        if (count != 1)
            warnings.push_back("record " + std::to_string(i) + ": expected exactly one '####' marker, found " +
                               std::to_string(count));
    }
    return warnings;
}

void save_manifest(const GeneratedData& data, const TaskSpec& spec, const std::string& path) {
    std::uint64_t checksum = 1469598103934665603ULL;
    for (const DatasetFile* split : {&data.train, &data.val, &data.test})
        for (const DataRecord& rec : split->records) checksum = fnv1a(rec.target, fnv1a(rec.prefix, checksum));

    nlohmann::json j;
    j["task"] = spec.task;
    j["seed"] = spec.seed;
    j["digits"] = spec.digits;
    j["steps"] = spec.steps;
    j["n_train"] = data.train.records.size();
    j["n_val"] = data.val.records.size();
    j["n_test"] = data.test.records.size();
    j["checksum"] = checksum;
    j["warnings"] = data.warnings;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open manifest for writing: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace pauselab
