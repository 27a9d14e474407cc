#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qmt/diagram.hpp"
#include "qmt/rng.hpp"
#include "test_paths.hpp"

using namespace qmt;

namespace {

Diagram make(const std::string& sentence, const std::string& lang) {
    static Lexicon lex = Lexicon::load_json(test_path("data/lexicon.json"));
    auto ts = assign_types(sentence, lex, lang);
    return build_diagram(ts, reduce(ts));
}

std::vector<int> wire_counts(const Diagram& d) {
    std::vector<int> out;
    for (const auto& w : d.words) out.push_back(w.count);
    return out;
}

}  // namespace

TEST_CASE("English worked example occupies 13 wires") {
    auto d = make("Sara buys the book from the bookshop", "en");
    CHECK(wire_counts(d) == std::vector<int>{1, 4, 2, 1, 2, 2, 1});
    CHECK(d.total_wires == 13);
    CHECK(d.cups.size() == 6);
    CHECK(d.sentence_wire == 2);
    CHECK(d.words[1].first == 1);
    CHECK(d.words[6].first == 12);
}

TEST_CASE("Persian worked example occupies 11 wires") {
    auto d = make("Sara ketab ra az ketabforoushi mikharad", "fa");
    CHECK(wire_counts(d) == std::vector<int>{1, 1, 2, 2, 1, 4});
    CHECK(d.total_wires == 11);
    CHECK(d.cups.size() == 5);
    CHECK(d.sentence_wire == 10);
}

TEST_CASE("transitive example occupies 5 wires") {
    auto d = make("Sara sees Bob", "en");
    CHECK(wire_counts(d) == std::vector<int>{1, 3, 1});
    CHECK(d.total_wires == 5);
    CHECK(d.sentence_wire == 2);
}

TEST_CASE("cup count is (total wires - 1) / 2 on generated sentences") {
    static Lexicon lex = Lexicon::load_json(test_path("data/lexicon.json"));
    for (const char* s : {"Sara walks in the park", "Bob walks in the park", "Sara walks",
                          "Bob sees the apple", "Sara takes the pen from the library"}) {
        auto d = make(s, "en");
        CHECK(static_cast<int>(d.cups.size()) == (d.total_wires - 1) / 2);
        CHECK(d.total_wires % 2 == 1);
        int sum = 0;
        for (const auto& w : d.words) sum += w.count;
        CHECK(sum == d.total_wires);
    }
}

TEST_CASE("malformed proofs are rejected with the offending wire") {
    static Lexicon lex = Lexicon::load_json(test_path("data/lexicon.json"));
    auto ts = assign_types("Sara sees Bob", lex, "en");
    auto proof = reduce(ts);
    auto bad = proof;
    bad.cups[0] = bad.cups[1];  // wire 0 uncovered, wires 3/4 doubly covered
    CHECK_THROWS_AS(build_diagram(ts, bad), StructuralError);
    bad = proof;
    bad.survivor = proof.cups[0].first;
    CHECK_THROWS_AS(build_diagram(ts, bad), StructuralError);
}

TEST_CASE("diagram JSON round-trips") {
    auto d = make("Sara buys the book from the bookshop", "en");
    std::string tmp = test_tmp_path("diagram_roundtrip.json");
    save_diagram_json(d, tmp);
    auto again = load_diagram_json(tmp);
    CHECK(again == d);
}

TEST_CASE("wire report lists words, spans, cups and the sentence wire") {
    auto d = make("Sara sees Bob", "en");
    auto report = wire_report(d);
    CHECK(report.find("sees : n.r s n.l  wires 1..3") != std::string::npos);
    CHECK(report.find("cups: (0,1) (3,4)") != std::string::npos);
    CHECK(report.find("sentence wire: 2") != std::string::npos);
}
