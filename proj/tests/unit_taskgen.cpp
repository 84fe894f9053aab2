#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "pauselab/taskgen.hpp"

using namespace pauselab;

namespace {

// Independent left-to-right evaluation of an annotation expression "3+4-2".
long eval_expr(const std::string& expr) {
    std::size_t i = 0;
    auto number = [&] {
        long v = 0;
        REQUIRE(i < expr.size());
        REQUIRE(std::isdigit(static_cast<unsigned char>(expr[i])));
        while (i < expr.size() && std::isdigit(static_cast<unsigned char>(expr[i])))
            v = v * 10 + (expr[i++] - '0');
        return v;
    };
    long v = number();
    while (i < expr.size()) {
        const char op = expr[i++];
        REQUIRE((op == '+' || op == '-'));
        v = (op == '+') ? v + number() : v - number();
    }
    return v;
}

// Re-checks every "<<expr=v>>v" annotation and the final "#### answer".
void check_annotations(const DataRecord& rec) {
    std::size_t pos = 0;
    long last = -1;
    while ((pos = rec.target.find("<<", pos)) != std::string::npos) {
        const std::size_t eq = rec.target.find('=', pos);
        const std::size_t close = rec.target.find(">>", pos);
        REQUIRE(eq != std::string::npos);
        REQUIRE(close != std::string::npos);
        // The rightmost '=' inside the annotation separates expr from value.
        std::size_t last_eq = eq;
        for (std::size_t j = eq + 1; j < close; ++j)
            if (rec.target[j] == '=') last_eq = j;
        const std::string expr = rec.target.substr(pos + 2, last_eq - pos - 2);
        const std::string value = rec.target.substr(last_eq + 1, close - last_eq - 1);
        last = eval_expr(expr);
        CHECK(std::to_string(last) == value);
        pos = close + 2;
    }
    const std::size_t marker = rec.target.rfind("####");
    REQUIRE(marker != std::string::npos);
    CHECK(rec.target.substr(marker + 5) == std::to_string(last));
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("task spec validation") {
    TaskSpec spec;
    spec.task = "bogus";
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = TaskSpec{};
    spec.digits = 5;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = TaskSpec{};
    spec.n_val = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    CHECK_THROWS_AS(task_alphabet("bogus"), std::invalid_argument);
}

TEST_CASE("steps=1 records follow the two-operand template") {
    TaskSpec spec;
    spec.n_train = 50;
    spec.n_val = 5;
    spec.n_test = 5;
    const GeneratedData data = gen_annotated_arithmetic(spec);
    for (const DataRecord& rec : data.train.records) {
        // "a + b =" or "a - b ="
        CHECK(rec.prefix.find('=') == rec.prefix.size() - 1);
        CHECK((rec.prefix.find('+') != std::string::npos || rec.prefix.find('-') != std::string::npos));
        CHECK(rec.target.rfind("x = <<", 0) == 0);
        CHECK(rec.target.find("####") != std::string::npos);
        check_annotations(rec);
    }
}

TEST_CASE("every annotation in a multi-step dataset re-evaluates correctly") {
    TaskSpec spec;
    spec.n_train = 60;
    spec.n_val = 5;
    spec.n_test = 5;
    spec.digits = 2;
    spec.steps = 3;
    const GeneratedData data = gen_annotated_arithmetic(spec);
    CHECK(data.warnings.empty());
    for (const DatasetFile* split : {&data.train, &data.val, &data.test})
        for (const DataRecord& rec : split->records) check_annotations(rec);
}

TEST_CASE("generation is deterministic in the seed") {
    TaskSpec spec;
    spec.n_train = 40;
    spec.n_val = 4;
    spec.n_test = 4;
    spec.seed = 77;
    const GeneratedData a = generate_task(spec);
    const GeneratedData b = generate_task(spec);
    REQUIRE(a.train.records.size() == b.train.records.size());
    for (std::size_t i = 0; i < a.train.records.size(); ++i) {
        CHECK(a.train.records[i].prefix == b.train.records[i].prefix);
        CHECK(a.train.records[i].target == b.train.records[i].target);
    }
    spec.seed = 78;
    const GeneratedData c = generate_task(spec);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.train.records.size(); ++i)
        any_diff |= a.train.records[i].prefix != c.train.records[i].prefix;
    CHECK(any_diff);
}

TEST_CASE("splits are disjoint by operand tuple when the space allows") {
    TaskSpec spec;
    spec.n_train = 300;
    spec.n_val = 30;
    spec.n_test = 30;
    spec.digits = 2;  // ~10k feasible two-operand tuples
    const GeneratedData data = gen_annotated_arithmetic(spec);
    CHECK(data.warnings.empty());
    std::set<std::string> seen;
    for (const DatasetFile* split : {&data.train, &data.val, &data.test})
        for (const DataRecord& rec : split->records) CHECK(seen.insert(rec.prefix).second);
}

TEST_CASE("an exhausted tuple space falls back to repetition with a warning") {
    TaskSpec spec;  // digits=1, steps=1: ~155 feasible tuples < 2400 requested
    const GeneratedData data = gen_annotated_arithmetic(spec);
    REQUIRE(data.warnings.size() == 1);
    CHECK(data.warnings[0].find("tuple space") != std::string::npos);
    CHECK(static_cast<int>(data.train.records.size()) == spec.n_train);
    CHECK(static_cast<int>(data.test.records.size()) == spec.n_test);
    std::set<std::string> distinct;
    for (const DataRecord& rec : data.train.records) distinct.insert(rec.prefix);
    CHECK(distinct.size() < data.train.records.size());  // repetition happened
    for (const DataRecord& rec : data.test.records) check_annotations(rec);
}

TEST_CASE("partials never go negative") {
    TaskSpec spec;
    spec.n_train = 100;
    spec.n_val = 5;
    spec.n_test = 5;
    spec.steps = 4;
    const GeneratedData data = gen_annotated_arithmetic(spec);
    for (const DataRecord& rec : data.train.records) CHECK(rec.target.find("=-") == std::string::npos);
}

TEST_CASE("chain-copy targets reverse the prefix") {
    TaskSpec spec;
    spec.task = "chain-copy";
    spec.n_train = 40;
    spec.n_val = 4;
    spec.n_test = 4;
    spec.steps = 3;
    const GeneratedData data = gen_chain_copy(spec);
    for (const DataRecord& rec : data.train.records) {
        std::string symbols;
        for (char c : rec.prefix)
            if (c != ' ') symbols += c;
        const std::string reversed(symbols.rbegin(), symbols.rend());
        const std::size_t marker = rec.target.find(" #### ");
        REQUIRE(marker != std::string::npos);
        std::string spelled;
        for (std::size_t i = 0; i < marker; ++i)
            if (rec.target[i] != ' ') spelled += rec.target[i];
        CHECK(spelled == reversed);
        CHECK(rec.target.substr(marker + 6) == reversed);
    }
}

TEST_CASE("jsonl round-trip preserves records") {
    TaskSpec spec;
    spec.n_train = 20;
    spec.n_val = 2;
    spec.n_test = 2;
    const GeneratedData data = generate_task(spec);
    const std::string path = tmp_path("pauselab_taskgen_rt.jsonl");
    save_jsonl(data.train, path);
    const DatasetFile loaded = load_jsonl(path);
    REQUIRE(loaded.records.size() == data.train.records.size());
    for (std::size_t i = 0; i < loaded.records.size(); ++i) {
        CHECK(loaded.records[i].prefix == data.train.records[i].prefix);
        CHECK(loaded.records[i].target == data.train.records[i].target);
    }
    std::remove(path.c_str());
}

TEST_CASE("malformed jsonl errors name the file and line") {
    const std::string path = tmp_path("pauselab_taskgen_bad.jsonl");
    {
        std::ofstream out(path);
        out << R"({"prefix": "1 + 1 =", "target": "#### 2"})" << "\n";
        out << "not json\n";
    }
    try {
        load_jsonl(path);
        FAIL("expected throw");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find(path) != std::string::npos);
        CHECK(msg.find(":2") != std::string::npos);
    }
    {
        std::ofstream out(path);
        out << R"({"prefix": "1 + 1 ="})" << "\n";
    }
    CHECK_THROWS_AS(load_jsonl(path), std::runtime_error);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_jsonl(tmp_path("pauselab_no_such_file.jsonl")), std::runtime_error);
}

TEST_CASE("dataset validation flags targets without exactly one marker") {
    DatasetFile f;
    f.records.push_back({"p", "x = <<1+1=2>>2. #### 2"});
    f.records.push_back({"p", "no marker here"});
    f.records.push_back({"p", "#### 1 then #### 2"});
    const std::vector<std::string> warnings = validate_dataset(f);
    REQUIRE(warnings.size() == 2);
    CHECK(warnings[0].find("record 1") != std::string::npos);
    CHECK(warnings[1].find("record 2") != std::string::npos);
}

TEST_CASE("manifest is deterministic and carries generator warnings") {
    TaskSpec spec;
    spec.n_train = 30;
    spec.n_val = 3;
    spec.n_test = 3;
    spec.digits = 2;
    const GeneratedData data = generate_task(spec);
    const std::string p1 = tmp_path("pauselab_manifest1.json");
    const std::string p2 = tmp_path("pauselab_manifest2.json");
    save_manifest(data, spec, p1);
    save_manifest(generate_task(spec), spec, p2);
    std::ifstream a(p1), b(p2);
    const std::string s1((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    CHECK(s1.find("checksum") != std::string::npos);

    const TaskSpec tiny;  // triggers the fallback warning
    const std::string p3 = tmp_path("pauselab_manifest3.json");
    save_manifest(generate_task(tiny), tiny, p3);
    std::ifstream c(p3);
    const std::string s3((std::istreambuf_iterator<char>(c)), std::istreambuf_iterator<char>());
    CHECK(s3.find("tuple space") != std::string::npos);
    for (const std::string& p : {p1, p2, p3}) std::remove(p.c_str());
}
