#include "qmt/grammar.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

namespace qmt {

namespace {

std::vector<std::string> split_ws(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

SimpleType parse_factor(const std::string& tok) {
    SimpleType t;
    size_t pos = 0;
    if (tok.compare(0, 1, "n") == 0) {
        t.base = BasicType::n;
        pos = 1;
    } else if (tok.compare(0, 1, "s") == 0) {
        t.base = BasicType::s;
        pos = 1;
    } else {
        throw TypeParseError("bad type factor '" + tok + "': expected basic type n or s");
    }
    while (pos < tok.size()) {
        if (tok.compare(pos, 2, ".l") == 0) {
            --t.adjoint;
            pos += 2;
        } else if (tok.compare(pos, 2, ".r") == 0) {
            ++t.adjoint;
            pos += 2;
        } else {
            throw TypeParseError("bad type factor '" + tok + "': unknown suffix at '" +
                                 tok.substr(pos) + "'");
        }
    }
    return t;
}

}  // namespace

PregroupType parse_type(const std::string& text) {
    PregroupType type;
    for (const auto& tok : split_ws(text)) type.push_back(parse_factor(tok));
    return type;
}

std::string format_simple(const SimpleType& t) {
    std::string out = t.base == BasicType::n ? "n" : "s";
    for (int i = 0; i < -t.adjoint; ++i) out += ".l";
    for (int i = 0; i < t.adjoint; ++i) out += ".r";
    return out;
}

std::string format_type(const PregroupType& t) {
    std::string out;
    for (size_t i = 0; i < t.size(); ++i) {
        if (i) out += ' ';
        out += format_simple(t[i]);
    }
    return out;
}

void Lexicon::add(LexiconEntry entry) {
    for (const auto& e : entries_) {
        if (e.surface == entry.surface && e.language == entry.language && e.type == entry.type)
            throw StructuralError("duplicate lexicon entry for '" + entry.surface + "' (" +
                                  entry.language + ")");
    }
    entries_.push_back(std::move(entry));
}

std::vector<const LexiconEntry*> Lexicon::lookup(const std::string& surface,
                                                 const std::string& language) const {
    std::vector<const LexiconEntry*> out;
    for (const auto& e : entries_)
        if (e.surface == surface && e.language == language) out.push_back(&e);
    return out;
}

const LexiconEntry* Lexicon::find_concept(const std::string& concept_id,
                                          const std::string& language) const {
    for (const auto& e : entries_)
        if (e.concept_id == concept_id && e.language == language) return &e;
    return nullptr;
}

Lexicon Lexicon::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lexicon file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed lexicon JSON in " + path + ": " + e.what());
    }
    if (!doc.is_array()) throw IoError("lexicon JSON must be an array: " + path);
    Lexicon lex;
    for (const auto& row : doc) {
        LexiconEntry e;
        try {
            e.surface = row.at("surface").get<std::string>();
            e.language = row.at("language").get<std::string>();
            e.type = parse_type(row.at("type").get<std::string>());
            e.concept_id = row.at("concept").get<std::string>();
        } catch (const nlohmann::json::exception& err) {
            throw IoError(std::string("bad lexicon row: ") + err.what());
        }
        lex.add(std::move(e));
    }
    return lex;
}

void Lexicon::save_json(const std::string& path) const {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& e : entries_) {
        doc.push_back({{"surface", e.surface},
                       {"language", e.language},
                       {"type", format_type(e.type)},
                       {"concept", e.concept_id}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write lexicon file: " + path);
    out << doc.dump(2) << '\n';
}

std::vector<SimpleType> TypedSentence::flatten() const {
    std::vector<SimpleType> out;
    for (const auto& w : words) out.insert(out.end(), w.type.begin(), w.type.end());
    return out;
}

std::vector<int> TypedSentence::factor_owner() const {
    std::vector<int> out;
    for (size_t w = 0; w < words.size(); ++w)
        out.insert(out.end(), words[w].type.size(), static_cast<int>(w));
    return out;
}

namespace {

struct ReduceSearch {
    const std::vector<SimpleType>& factors;
    SimpleType target;
    std::set<std::vector<int>> seen;
    std::vector<std::pair<int, int>> best_cups;
    std::vector<int> best_remaining;

    bool run(std::vector<int>& live, std::vector<std::pair<int, int>>& cups) {
        if (live.size() < best_remaining.size() || best_remaining.empty()) {
            best_remaining = live;
            best_cups = cups;
        }
        if (live.size() == 1) return factors[live[0]] == target;
        if (live.size() % 2 == 0) return false;  // one survivor is unreachable
        if (!seen.insert(live).second) return false;
        for (size_t i = 0; i + 1 < live.size(); ++i) {
            if (!cancels(factors[live[i]], factors[live[i + 1]])) continue;
            std::pair<int, int> cup{live[i], live[i + 1]};
            std::vector<int> next = live;
            next.erase(next.begin() + i, next.begin() + i + 2);
            cups.push_back(cup);
            if (run(next, cups)) return true;
            cups.pop_back();
        }
        return false;
    }
};

}  // namespace

ReductionProof reduce_factors(const std::vector<SimpleType>& factors, BasicType target) {
    ReduceSearch search{factors, SimpleType{target, 0}, {}, {}, {}};
    std::vector<int> live(factors.size());
    for (size_t i = 0; i < live.size(); ++i) live[i] = static_cast<int>(i);
    search.best_remaining = live;
    std::vector<std::pair<int, int>> cups;
    if (!search.run(live, cups)) {
        std::string left;
        for (int i : search.best_remaining) {
            if (!left.empty()) left += ' ';
            left += format_simple(factors[i]);
        }
        throw UngrammaticalError("sentence does not reduce to " +
                                     format_simple(SimpleType{target, 0}) +
                                     "; best partial leaves: " + (left.empty() ? "(unit)" : left),
                                 search.best_cups, search.best_remaining);
    }
    ReductionProof proof;
    proof.cups = cups;
    std::sort(proof.cups.begin(), proof.cups.end());
    std::vector<char> cupped(factors.size(), 0);
    for (auto [a, b] : proof.cups) cupped[a] = cupped[b] = 1;
    for (size_t i = 0; i < factors.size(); ++i)
        if (!cupped[i]) proof.survivor = static_cast<int>(i);
    return proof;
}

ReductionProof reduce(const TypedSentence& ts, BasicType target) {
    return reduce_factors(ts.flatten(), target);
}

TypedSentence assign_types(const std::string& sentence, const Lexicon& lexicon,
                           const std::string& language) {
    auto tokens = split_ws(sentence);
    if (tokens.empty()) throw GrammarError("empty sentence");

    std::vector<std::vector<const LexiconEntry*>> candidates;
    for (const auto& tok : tokens) {
        auto found = lexicon.lookup(tok, language);
        if (found.empty())
            throw LookupError("unknown word '" + tok + "' for language " + language);
        candidates.push_back(std::move(found));
    }

    TypedSentence ts;
    ts.text = sentence;
    ts.language = language;
    ts.words.resize(tokens.size());

    const UngrammaticalError* best = nullptr;
    UngrammaticalError best_err("", {}, {});
    bool have_err = false;

    std::function<bool(size_t)> fill = [&](size_t w) -> bool {
        if (w == tokens.size()) {
            try {
                reduce(ts);
                return true;
            } catch (const UngrammaticalError& e) {
                if (!have_err || e.remaining.size() < best_err.remaining.size()) {
                    best_err = e;
                    have_err = true;
                }
                return false;
            }
        }
        for (const LexiconEntry* cand : candidates[w]) {
            ts.words[w] = *cand;
            if (fill(w + 1)) return true;
        }
        return false;
    };

    if (!fill(0)) {
        if (have_err) throw best_err;
        throw GrammarError("no type assignment reduces for: " + sentence);
    }
    (void)best;
    return ts;
}

}  // namespace qmt
