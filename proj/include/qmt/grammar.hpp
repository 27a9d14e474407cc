#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qmt/errors.hpp"

namespace qmt {

enum class BasicType { n, s };

/// One factor of a pregroup type: a basic type with an iterated adjoint.
/// adjoint < 0 means |adjoint|-fold left adjoint (x^l, x^ll, ...),
/// adjoint > 0 right adjoint, 0 the plain type.
struct SimpleType {
    BasicType base = BasicType::n;
    int adjoint = 0;

    bool operator==(const SimpleType&) const = default;
};

/// A pregroup type is a sequence of simple types; the empty sequence is the
/// monoid unit.
using PregroupType = std::vector<SimpleType>;

/// Parse type text such as "n.r s n.l n.l" or "n.r.r". Whitespace separates
/// factors; each factor is a basic type followed by ".l"/".r" suffixes.
PregroupType parse_type(const std::string& text);

/// Canonical text for a type; round-trips bit-exactly through parse_type.
std::string format_type(const PregroupType& t);

std::string format_simple(const SimpleType& t);

struct LexiconEntry {
    std::string surface;
    std::string language;
    PregroupType type;
    std::string concept_id;  // shared across languages for synonyms

    /// Per-layer parameter slots implied by the wire count (see circuit
    /// module): 3 Euler angles for one wire, k-1 entangler angles otherwise.
    int param_arity() const {
        int k = static_cast<int>(type.size());
        return k <= 1 ? 3 : k - 1;
    }

    bool operator==(const LexiconEntry&) const = default;
};

/// Word -> type dictionary for both languages. (surface, language) keys an
/// ordered candidate list; assign_types backtracks across candidates.
class Lexicon {
  public:
    void add(LexiconEntry entry);  // rejects exact duplicates

    const std::vector<LexiconEntry>& entries() const { return entries_; }

    /// Candidates for a surface form in file order; empty if unknown.
    std::vector<const LexiconEntry*> lookup(const std::string& surface,
                                            const std::string& language) const;

    /// First entry for a concept in a language (surface lookup for
    /// generation); nullptr if absent.
    const LexiconEntry* find_concept(const std::string& concept_id,
                                     const std::string& language) const;

    static Lexicon load_json(const std::string& path);
    void save_json(const std::string& path) const;

  private:
    std::vector<LexiconEntry> entries_;
};

struct TypedSentence {
    std::string text;
    std::string language;
    std::vector<LexiconEntry> words;

    /// Types of all words concatenated left to right.
    std::vector<SimpleType> flatten() const;

    /// Word index owning flattened factor i.
    std::vector<int> factor_owner() const;
};

/// Witness that a factor sequence contracts to a single surviving factor.
/// Cup endpoints index the flattened sequence and are pairwise disjoint,
/// non-crossing, and together with the survivor cover every factor.
struct ReductionProof {
    std::vector<std::pair<int, int>> cups;  // sorted by left endpoint
    int survivor = 0;
};

/// Thrown when no reduction exists; carries the best partial contraction
/// found (fewest surviving factors).
struct UngrammaticalError : GrammarError {
    UngrammaticalError(std::string msg, std::vector<std::pair<int, int>> partial_cups,
                       std::vector<int> remaining)
        : GrammarError(std::move(msg)),
          partial_cups(std::move(partial_cups)),
          remaining(std::move(remaining)) {}

    std::vector<std::pair<int, int>> partial_cups;
    std::vector<int> remaining;  // surviving factor indices
};

/// Reduce a typed sentence to the plain target type (sentence type s by
/// default). Deterministic: adjacent cancellable pairs are tried smallest
/// left index first, with backtracking.
ReductionProof reduce(const TypedSentence& ts, BasicType target = BasicType::s);
ReductionProof reduce_factors(const std::vector<SimpleType>& factors,
                              BasicType target = BasicType::s);

/// Tokenize on whitespace, look every word up, and backtrack across
/// ambiguous entries until the whole sentence reduces.
TypedSentence assign_types(const std::string& sentence, const Lexicon& lexicon,
                           const std::string& language);

/// True when left and right may be joined by a cup: equal base, adjoint
/// orders differ by one, left member lower.
inline bool cancels(const SimpleType& left, const SimpleType& right) {
    return left.base == right.base && left.adjoint + 1 == right.adjoint;
}

}  // namespace qmt
