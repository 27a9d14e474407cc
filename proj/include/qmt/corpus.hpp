#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmt/circuit.hpp"
#include "qmt/grammar.hpp"

namespace qmt {

struct SentencePair {
    std::string id;
    std::string src;
    std::string tgt;

    bool operator==(const SentencePair&) const = default;
};

/// A bilingual parallel corpus. Serialized as UTF-8 TSV with a
/// "#lang <src> <tgt>" header row (tab separated) followed by
/// id <TAB> src sentence <TAB> tgt sentence rows.
struct Corpus {
    std::string src_language = "en";
    std::string tgt_language = "fa";
    std::vector<SentencePair> pairs;

    std::string to_tsv() const;
    static Corpus from_tsv(const std::string& text);

    static Corpus load_tsv(const std::string& path);
    void save_tsv(const std::string& path) const;
};

/// Spreadsheet-style lowercase row ids: a..z, aa, ab, ...
std::string corpus_id(int index);

/// Generate n_pairs sentence pairs. The four documented pairs come first
/// (truncated when n_pairs < 4); the rest substitutes lexicon nouns and
/// verbs into the same three sentence shapes, deduplicated and seeded.
/// Every emitted sentence is checked to reduce to s in both languages.
/// Throws StructuralError when the templates cannot fill n_pairs.
Corpus gen_corpus(const Lexicon& lexicon, int n_pairs, uint64_t seed);

struct CircuitPair {
    std::string id;
    ParamCircuit src;
    ParamCircuit tgt;
};

/// Parse, reduce and compile both sides of every pair in corpus order.
std::vector<CircuitPair> compile_corpus(const Corpus& corpus, const Lexicon& lexicon,
                                        ParamRegistry& reg, int iqp_layers = 1);

}  // namespace qmt
