#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "pauselab/taskgen.hpp"
#include "pauselab/vocab.hpp"

using namespace pauselab;

namespace {
Vocab arith_vocab() { return Vocab::build(task_alphabet("annotated-arithmetic")); }
}  // namespace

TEST_CASE("specials occupy the reserved low ids") {
    const Vocab v = arith_vocab();
    CHECK(v.surface(kPauseId) == "[PAUSE]");
    CHECK(v.surface(kBosId) == "[BOS]");
    CHECK(v.surface(kEosId) == "[EOS]");
    CHECK(v.surface(kPadId) == "[PAD]");
    CHECK(v.is_special(kPauseId));
    CHECK_FALSE(v.is_special(kNumSpecialTokens));
}

TEST_CASE("vocab size is specials plus alphabet") {
    const Vocab v = Vocab::build({"0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "+", "=", "<<", ">>",
                                  "####", " ", "."});
    CHECK(v.size() == 4 + 17);
}

TEST_CASE("same alphabet builds the same vocab") {
    CHECK(Vocab::build({"b", "a", " "}).token_list() == Vocab::build({"a", " ", "b"}).token_list());
}

TEST_CASE("reserved spellings are rejected") {
    CHECK_THROWS_AS(Vocab::build({"a", "[PAUSE]"}), std::invalid_argument);
    CHECK_THROWS_AS(Vocab::build({"[PAD]"}), std::invalid_argument);
    CHECK_THROWS_AS(Vocab::build({}), std::invalid_argument);
}

TEST_CASE("round-trip over generated dataset lines") {
    const Vocab v = arith_vocab();
    TaskSpec spec;
    spec.n_train = 30;
    spec.n_val = 2;
    spec.n_test = 2;
    spec.steps = 3;
    spec.digits = 2;
    const GeneratedData data = gen_annotated_arithmetic(spec);
    for (const DataRecord& r : data.train.records) {
        CHECK(v.decode(v.encode(r.prefix), false) == r.prefix);
        CHECK(v.decode(v.encode(r.target), false) == r.target);
    }
}

TEST_CASE("pause inside a word is stripped on decode") {
    const Vocab v = Vocab::build({"Jan", "et", " "});
    std::vector<TokenId> ids = v.encode("Jan");
    ids.push_back(kPauseId);
    const std::vector<TokenId> et = v.encode("et");
    ids.insert(ids.end(), et.begin(), et.end());
    CHECK(v.decode(ids, true) == "Janet");
    CHECK(v.decode(ids, false) == "Jan[PAUSE]et");
}

TEST_CASE("longest match wins over prefixes") {
    const Vocab v = Vocab::build({"<", "<<", "a"});
    const std::vector<TokenId> ids = v.encode("<<");
    REQUIRE(ids.size() == 1);
    CHECK(v.surface(ids[0]) == "<<");
    CHECK(v.encode("<<<").size() == 2);
}

TEST_CASE("unknown fragment is named in the error") {
    const Vocab v = Vocab::build({"a", "b", " "});
    try {
        v.encode("a q");
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("'q'") != std::string::npos);
    }
}

TEST_CASE("special surfaces are not matchable from plain text") {
    const Vocab v = Vocab::build({"a", "[", "]", "P", "A", "U", "S", "E"});
    // Segments into single characters instead of the reserved id.
    for (TokenId id : v.encode("[PAUSE]")) CHECK_FALSE(v.is_special(id));
}

TEST_CASE("json round-trip preserves ordering") {
    const Vocab v = arith_vocab();
    const std::string path = (std::filesystem::temp_directory_path() / "pauselab_vocab_test.json").string();
    v.save_json(path);
    CHECK(Vocab::load_json(path) == v);
    std::remove(path.c_str());
}

TEST_CASE("whitespace classification") {
    const Vocab v = arith_vocab();
    const std::vector<TokenId> sp = v.encode(" ");
    REQUIRE(sp.size() == 1);
    CHECK(v.is_whitespace(sp[0]));
    CHECK_FALSE(v.is_whitespace(v.encode("7")[0]));
    CHECK_FALSE(v.is_whitespace(kPauseId));
}
