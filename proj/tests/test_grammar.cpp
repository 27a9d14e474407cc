#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "qmt/grammar.hpp"
#include "qmt/rng.hpp"
#include "test_paths.hpp"

using namespace qmt;

namespace {

// Independent oracle: a factor sequence contracts to a lone plain target iff
// some non-crossing perfect matching of the remaining factors pairs only
// cancellable (left-lower, adjacent-order, equal-base) factors and no pair
// spans the survivor.
bool segment_matches(const std::vector<SimpleType>& f, int lo, int hi) {
    if (lo > hi) return true;
    for (int k = lo + 1; k <= hi; k += 2) {
        if (cancels(f[lo], f[k]) && segment_matches(f, lo + 1, k - 1) &&
            segment_matches(f, k + 1, hi))
            return true;
    }
    return false;
}

bool oracle_reducible(const std::vector<SimpleType>& f, BasicType target = BasicType::s) {
    int n = static_cast<int>(f.size());
    for (int p = 0; p < n; ++p) {
        if (!(f[p] == SimpleType{target, 0})) continue;
        if (segment_matches(f, 0, p - 1) && segment_matches(f, p + 1, n - 1)) return true;
    }
    return false;
}

std::vector<SimpleType> random_factors(Rng& rng, int max_len) {
    if (rng.uniform_index(2) == 0) {
        // grow a reducible sequence by inserting adjacent cancellable pairs,
        // then sometimes corrupt one factor
        std::vector<SimpleType> f{{BasicType::s, 0}};
        int pairs = static_cast<int>(rng.uniform_index((max_len - 1) / 2 + 1));
        for (int p = 0; p < pairs; ++p) {
            SimpleType low;
            low.base = rng.uniform_index(4) == 0 ? BasicType::s : BasicType::n;
            low.adjoint = static_cast<int>(rng.uniform_index(5)) - 2;
            SimpleType high{low.base, low.adjoint + 1};
            size_t at = rng.uniform_index(f.size() + 1);
            f.insert(f.begin() + at, {low, high});
        }
        if (rng.uniform_index(3) == 0 && !f.empty()) {
            auto& t = f[rng.uniform_index(f.size())];
            t.adjoint += static_cast<int>(rng.uniform_index(3)) - 1;
        }
        return f;
    }
    int len = 1 + static_cast<int>(rng.uniform_index(max_len));
    std::vector<SimpleType> f(len);
    for (auto& t : f) {
        t.base = rng.uniform_index(4) == 0 ? BasicType::s : BasicType::n;
        t.adjoint = static_cast<int>(rng.uniform_index(5)) - 2;
    }
    return f;
}

void check_proof(const std::vector<SimpleType>& f, const ReductionProof& proof,
                 BasicType target = BasicType::s) {
    std::set<int> used;
    for (auto [a, b] : proof.cups) {
        REQUIRE(a < b);
        CHECK(cancels(f[a], f[b]));
        CHECK(used.insert(a).second);
        CHECK(used.insert(b).second);
    }
    CHECK(used.insert(proof.survivor).second);
    CHECK(used.size() == f.size());
    CHECK(f[proof.survivor] == SimpleType{target, 0});
    // non-crossing, and no cup spans the survivor
    for (auto [a, b] : proof.cups) {
        CHECK(!(a < proof.survivor && proof.survivor < b));
        for (auto [c, d] : proof.cups) {
            if (a == c) continue;
            bool crossed = (a < c && c < b && b < d) || (c < a && a < d && d < b);
            CHECK(!crossed);
        }
    }
}

}  // namespace

TEST_CASE("type notation round-trips") {
    for (const char* text : {"n", "s", "n.l", "n.r", "n.r.r", "n.l.l", "n.r s n.l n.l",
                             "n.r n.r n.r s", "n n.l", ""}) {
        CHECK(format_type(parse_type(text)) == text);
    }
    auto t = parse_type("n.r s n.l n.l");
    REQUIRE(t.size() == 4);
    CHECK(t[0] == SimpleType{BasicType::n, 1});
    CHECK(t[1] == SimpleType{BasicType::s, 0});
    CHECK(t[2] == SimpleType{BasicType::n, -1});
    CHECK(t[3] == SimpleType{BasicType::n, -1});
    CHECK(parse_type("").empty());
    CHECK(parse_type("n.r.r")[0].adjoint == 2);
    CHECK_THROWS_AS(parse_type("n.x"), TypeParseError);
    CHECK_THROWS_AS(parse_type("q"), TypeParseError);
}

TEST_CASE("canonical English sentence reduces per the worked layout") {
    auto lex = Lexicon::load_json(test_path("data/lexicon.json"));
    auto ts = assign_types("Sara buys the book from the bookshop", lex, "en");
    REQUIRE(ts.words.size() == 7);
    CHECK(format_type(ts.words[1].type) == "n.r s n.l n.l");
    CHECK(format_type(ts.words[2].type) == "n n.l");
    auto proof = reduce(ts);
    std::vector<std::pair<int, int>> want{{0, 1}, {3, 8}, {4, 5}, {6, 7}, {9, 10}, {11, 12}};
    CHECK(proof.cups == want);
    CHECK(proof.survivor == 2);  // the s factor of "buys"
    check_proof(ts.flatten(), proof);
}

TEST_CASE("canonical Persian sentence reduces per the worked layout") {
    auto lex = Lexicon::load_json(test_path("data/lexicon.json"));
    auto ts = assign_types("Sara ketab ra az ketabforoushi mikharad", lex, "fa");
    REQUIRE(ts.words.size() == 6);
    CHECK(format_type(ts.words[5].type) == "n.r n.r n.r s");
    auto proof = reduce(ts);
    std::vector<std::pair<int, int>> want{{0, 9}, {1, 2}, {3, 8}, {4, 7}, {5, 6}};
    CHECK(proof.cups == want);
    CHECK(proof.survivor == 10);
    check_proof(ts.flatten(), proof);
}

TEST_CASE("transitive sentence and its Persian counterpart") {
    auto lex = Lexicon::load_json(test_path("data/lexicon.json"));
    auto en = assign_types("Sara sees Bob", lex, "en");
    auto p_en = reduce(en);
    CHECK(p_en.cups == std::vector<std::pair<int, int>>{{0, 1}, {3, 4}});
    CHECK(p_en.survivor == 2);

    auto fa = assign_types("Sara Bob ra mibinad", lex, "fa");
    auto p_fa = reduce(fa);
    CHECK(p_fa.cups == std::vector<std::pair<int, int>>{{0, 5}, {1, 2}, {3, 4}});
    CHECK(p_fa.survivor == 6);
}

TEST_CASE("assign_types backtracks across ambiguous entries") {
    auto lex = Lexicon::load_json(test_path("data/lexicon.json"));
    // "walks" lists the intransitive type first; the prepositional sentence
    // only reduces with the second entry.
    auto ts = assign_types("Sara walks in the park", lex, "en");
    REQUIRE(ts.words.size() == 5);
    CHECK(format_type(ts.words[1].type) == "n.r s n.l");
    check_proof(ts.flatten(), reduce(ts));
    // the bare intransitive picks the first entry
    auto bare = assign_types("Sara walks", lex, "en");
    CHECK(format_type(bare.words[1].type) == "n.r s");
    CHECK(reduce(bare).survivor == 2);
}

TEST_CASE("unknown words and irreducible sentences fail with context") {
    auto lex = Lexicon::load_json(test_path("data/lexicon.json"));
    CHECK_THROWS_AS(assign_types("Sara flies", lex, "en"), LookupError);
    try {
        assign_types("Sara Bob", lex, "en");
        FAIL("expected UngrammaticalError");
    } catch (const UngrammaticalError& e) {
        CHECK(e.remaining.size() >= 2);  // best partial is carried
    }
}

TEST_CASE("reduce is deterministic") {
    auto lex = Lexicon::load_json(test_path("data/lexicon.json"));
    auto ts = assign_types("Sara buys the book from the bookshop", lex, "en");
    auto a = reduce(ts);
    auto b = reduce(ts);
    CHECK(a.cups == b.cups);
    CHECK(a.survivor == b.survivor);
}

TEST_CASE("reduce agrees with exhaustive non-crossing matching up to length 10") {
    Rng rng(20260814);
    int reducible_seen = 0;
    for (int trial = 0; trial < 4000; ++trial) {
        auto f = random_factors(rng, 10);
        bool want = oracle_reducible(f);
        bool got = true;
        try {
            auto proof = reduce_factors(f);
            check_proof(f, proof);
        } catch (const UngrammaticalError&) {
            got = false;
        }
        REQUIRE_MESSAGE(got == want, "factors: " << format_type(f));
        reducible_seen += want ? 1 : 0;
    }
    CHECK(reducible_seen > 800);  // the generator exercises both outcomes
}

TEST_CASE("lexicon JSON round-trips and rejects duplicates") {
    auto lex = Lexicon::load_json(test_path("data/lexicon.json"));
    CHECK(lex.lookup("walks", "en").size() == 2);
    std::string tmp = test_tmp_path("lexicon_roundtrip.json");
    lex.save_json(tmp);
    auto again = Lexicon::load_json(tmp);
    CHECK(again.entries().size() == lex.entries().size());
    for (size_t i = 0; i < lex.entries().size(); ++i)
        CHECK(again.entries()[i] == lex.entries()[i]);
    LexiconEntry dup = lex.entries().front();
    CHECK_THROWS_AS(again.add(dup), StructuralError);
}
