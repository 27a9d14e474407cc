#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmt/diagram.hpp"

namespace qmt {

enum class GateKind { NOP, RX, RZ, H, CRZ, CNOT };

const char* gate_kind_name(GateKind k);
GateKind gate_kind_from_name(const std::string& name);

/// A gate slot in a parameterized circuit. q1 is the target of two-qubit
/// gates (-1 otherwise). param is empty for H/CNOT. word is the owning word
/// index; -1 marks cup machinery.
struct Gate {
    GateKind kind = GateKind::NOP;
    int q0 = 0;
    int q1 = -1;
    std::string param;
    int word = -1;

    bool operator==(const Gate&) const = default;
};

struct BoundGate {
    GateKind kind = GateKind::NOP;
    int q0 = 0;
    int q1 = -1;
    double angle = 0.0;
    int word = -1;

    bool operator==(const BoundGate&) const = default;
};

struct ParamCircuit {
    int n_qubits = 0;
    std::vector<Gate> gates;
    std::vector<int> postselect;  // sorted; measured and required |0>
    int sentence_qubit = 0;
    std::string language;
    std::string source_text;
    // word ownership annotations (partition_words rebuilds them when absent)
    std::vector<int> word_first;
    std::vector<int> word_count;
    std::vector<std::string> word_concepts;
};

struct BoundCircuit {
    int n_qubits = 0;
    std::vector<BoundGate> gates;
    std::vector<int> postselect;
    int sentence_qubit = 0;
    std::string language;
    std::string source_text;
    std::vector<int> word_first;
    std::vector<int> word_count;
};

/// Name -> angle store plus the concept arity bookkeeping that decides which
/// slots are shared across languages. Missing parameters are created lazily
/// from splitmix64(seed ^ fnv1a64(name)), so creation order never matters.
class ParamRegistry {
  public:
    ParamRegistry() = default;
    explicit ParamRegistry(uint64_t seed) : seed_(seed) {}

    uint64_t seed() const { return seed_; }

    bool has(const std::string& name) const { return values_.count(name) != 0; }
    double value(const std::string& name) const;       // throws BindError if absent
    double ensure(const std::string& name);            // lazy seeded creation
    void set(const std::string& name, double radians) { values_[name] = radians; }
    const std::map<std::string, double>& values() const { return values_; }

    /// Record that a concept reaches `arity` parameter slots in a language.
    void note_arity(const std::string& concept_id, const std::string& language, int arity);

    /// Slots below the minimum arity across languages are shared
    /// ("concept/slot"); the remainder are language-local
    /// ("concept@language/slot"). Unknown concepts share everything.
    std::string slot_name(const std::string& concept_id, const std::string& language,
                          int slot) const;

    static ParamRegistry load_json(const std::string& path, uint64_t seed = 0);
    void save_json(const std::string& path) const;  // flat name -> radians map

  private:
    uint64_t seed_ = 0;
    std::map<std::string, double> values_;
    std::map<std::string, std::map<std::string, int>> arity_;  // concept -> language -> slots
};

/// Record every concept's slot arity from the lexicon (max over a concept's
/// entries per language, scaled by iqp_layers for multi-wire words).
void note_arities(ParamRegistry& reg, const Lexicon& lexicon, int iqp_layers = 1);

/// Seeded registry pre-populated with every parameter the lexicon can reach.
ParamRegistry init_params(const Lexicon& lexicon, uint64_t seed, int iqp_layers = 1);

/// Compile a diagram to its parameterized circuit: per-word ansatz gates
/// (Euler rotations on single wires, iqp_layers x (H wall + CRZ ladder)
/// otherwise) in word order, then cup Bell effects (CNOT + H, post-selected)
/// ordered by cup left endpoint.
ParamCircuit compile(const Diagram& d, ParamRegistry& reg, int iqp_layers = 1);

/// Registry copy in which the angles bound by c's parameterized gates are
/// permuted (seeded); the gate-level angle multiset is preserved exactly.
ParamRegistry swap_angles(const ParamCircuit& c, const ParamRegistry& reg, uint64_t seed);

/// Resolve every parameter name to its angle. Throws BindError on misses.
BoundCircuit bind(const ParamCircuit& c, const ParamRegistry& reg);

/// Names bound by c's parameterized gates, in first-occurrence gate order.
std::vector<std::string> circuit_params(const ParamCircuit& c);

void to_json(nlohmann::json& j, const ParamCircuit& c);
void from_json(const nlohmann::json& j, ParamCircuit& c);
void to_json(nlohmann::json& j, const BoundCircuit& c);
void from_json(const nlohmann::json& j, BoundCircuit& c);

ParamCircuit load_circuit_json(const std::string& path);
void save_circuit_json(const ParamCircuit& c, const std::string& path);
void save_bound_circuit_json(const BoundCircuit& c, const std::string& path);

}  // namespace qmt
