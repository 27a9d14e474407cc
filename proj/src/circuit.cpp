#include "qmt/circuit.hpp"

#include <algorithm>
#include <fstream>

#include "qmt/rng.hpp"

namespace qmt {

const char* gate_kind_name(GateKind k) {
    switch (k) {
        case GateKind::NOP: return "NOP";
        case GateKind::RX: return "RX";
        case GateKind::RZ: return "RZ";
        case GateKind::H: return "H";
        case GateKind::CRZ: return "CRZ";
        case GateKind::CNOT: return "CNOT";
    }
    return "?";
}

GateKind gate_kind_from_name(const std::string& name) {
    for (GateKind k : {GateKind::NOP, GateKind::RX, GateKind::RZ, GateKind::H, GateKind::CRZ,
                       GateKind::CNOT})
        if (name == gate_kind_name(k)) return k;
    throw StructuralError("unknown gate kind: " + name);
}

double ParamRegistry::value(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw BindError("unresolved parameter: " + name);
    return it->second;
}

double ParamRegistry::ensure(const std::string& name) {
    auto it = values_.find(name);
    if (it != values_.end()) return it->second;
    uint64_t state = seed_ ^ fnv1a64(name);
    Rng rng(splitmix64(state));
    double angle = rng.uniform_angle();
    values_[name] = angle;
    return angle;
}

void ParamRegistry::note_arity(const std::string& concept_id, const std::string& language,
                               int arity) {
    int& cur = arity_[concept_id][language];
    cur = std::max(cur, arity);
}

std::string ParamRegistry::slot_name(const std::string& concept_id, const std::string& language,
                                     int slot) const {
    auto it = arity_.find(concept_id);
    if (it != arity_.end() && it->second.size() > 1) {
        int shared = -1;
        for (const auto& [lang, arity] : it->second)
            shared = shared < 0 ? arity : std::min(shared, arity);
        if (slot >= shared)
            return concept_id + "@" + language + "/" + std::to_string(slot);
    }
    return concept_id + "/" + std::to_string(slot);
}

ParamRegistry ParamRegistry::load_json(const std::string& path, uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open registry file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed registry JSON in " + path + ": " + e.what());
    }
    ParamRegistry reg(seed);
    for (auto it = j.begin(); it != j.end(); ++it) reg.set(it.key(), it.value().get<double>());
    return reg;
}

void ParamRegistry::save_json(const std::string& path) const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, angle] : values_) j[name] = angle;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write registry file: " + path);
    out << j.dump(2) << '\n';
}

namespace {

int word_arity(const LexiconEntry& e, int iqp_layers) {
    int k = static_cast<int>(e.type.size());
    return k <= 1 ? 3 : iqp_layers * (k - 1);
}

}  // namespace

void note_arities(ParamRegistry& reg, const Lexicon& lexicon, int iqp_layers) {
    if (iqp_layers < 1) throw PreconditionError("iqp_layers must be >= 1");
    for (const auto& e : lexicon.entries())
        reg.note_arity(e.concept_id, e.language, word_arity(e, iqp_layers));
}

ParamRegistry init_params(const Lexicon& lexicon, uint64_t seed, int iqp_layers) {
    ParamRegistry reg(seed);
    note_arities(reg, lexicon, iqp_layers);
    for (const auto& e : lexicon.entries()) {
        int arity = word_arity(e, iqp_layers);
        for (int slot = 0; slot < arity; ++slot)
            reg.ensure(reg.slot_name(e.concept_id, e.language, slot));
    }
    return reg;
}

ParamCircuit compile(const Diagram& d, ParamRegistry& reg, int iqp_layers) {
    if (iqp_layers < 1) throw PreconditionError("iqp_layers must be >= 1");
    ParamCircuit c;
    c.n_qubits = d.total_wires;
    c.sentence_qubit = d.sentence_wire;
    c.language = d.language;
    c.source_text = d.text;

    auto param = [&](const std::string& concept_id, int slot) {
        std::string name = reg.slot_name(concept_id, d.language, slot);
        reg.ensure(name);
        return name;
    };

    for (size_t w = 0; w < d.words.size(); ++w) {
        const auto& word = d.words[w];
        int wi = static_cast<int>(w);
        c.word_first.push_back(word.first);
        c.word_count.push_back(word.count);
        c.word_concepts.push_back(word.concept_id);
        if (word.count == 1) {
            c.gates.push_back({GateKind::RX, word.first, -1, param(word.concept_id, 0), wi});
            c.gates.push_back({GateKind::RZ, word.first, -1, param(word.concept_id, 1), wi});
            c.gates.push_back({GateKind::RX, word.first, -1, param(word.concept_id, 2), wi});
        } else {
            for (int layer = 0; layer < iqp_layers; ++layer) {
                for (int q = 0; q < word.count; ++q)
                    c.gates.push_back({GateKind::H, word.first + q, -1, "", wi});
                for (int j = 0; j + 1 < word.count; ++j) {
                    int slot = layer * (word.count - 1) + j;
                    c.gates.push_back({GateKind::CRZ, word.first + j, word.first + j + 1,
                                       param(word.concept_id, slot), wi});
                }
            }
        }
    }

    for (auto [a, b] : d.cups) {
        c.gates.push_back({GateKind::CNOT, a, b, "", -1});
        c.gates.push_back({GateKind::H, a, -1, "", -1});
        c.postselect.push_back(a);
        c.postselect.push_back(b);
    }
    std::sort(c.postselect.begin(), c.postselect.end());
    return c;
}

std::vector<std::string> circuit_params(const ParamCircuit& c) {
    std::vector<std::string> names;
    for (const auto& g : c.gates) {
        if (g.param.empty()) continue;
        if (std::find(names.begin(), names.end(), g.param) == names.end())
            names.push_back(g.param);
    }
    return names;
}

ParamRegistry swap_angles(const ParamCircuit& c, const ParamRegistry& reg, uint64_t seed) {
    auto names = circuit_params(c);
    std::map<std::string, int> multiplicity;
    for (const auto& g : c.gates)
        if (!g.param.empty()) ++multiplicity[g.param];

    // Permuting within equal-multiplicity groups keeps the gate-level angle
    // multiset exact even when one name binds several gates.
    std::vector<int> mults;
    for (const auto& n : names)
        if (std::find(mults.begin(), mults.end(), multiplicity[n]) == mults.end())
            mults.push_back(multiplicity[n]);

    ParamRegistry out = reg;
    Rng rng(seed);
    for (int m : mults) {
        std::vector<std::string> group;
        for (const auto& n : names)
            if (multiplicity[n] == m) group.push_back(n);
        std::vector<double> angles;
        for (const auto& n : group) angles.push_back(reg.value(n));
        rng.shuffle(angles);
        for (size_t i = 0; i < group.size(); ++i) out.set(group[i], angles[i]);
    }
    return out;
}

BoundCircuit bind(const ParamCircuit& c, const ParamRegistry& reg) {
    BoundCircuit b;
    b.n_qubits = c.n_qubits;
    b.postselect = c.postselect;
    b.sentence_qubit = c.sentence_qubit;
    b.language = c.language;
    b.source_text = c.source_text;
    b.word_first = c.word_first;
    b.word_count = c.word_count;
    for (const auto& g : c.gates) {
        double angle = g.param.empty() ? 0.0 : reg.value(g.param);
        b.gates.push_back({g.kind, g.q0, g.q1, angle, g.word});
    }
    return b;
}

namespace {

nlohmann::json gate_qubits(int q0, int q1) {
    nlohmann::json q = nlohmann::json::array();
    q.push_back(q0);
    if (q1 >= 0) q.push_back(q1);
    return q;
}

void read_qubits(const nlohmann::json& q, int& q0, int& q1) {
    q0 = q.at(0).get<int>();
    q1 = q.size() > 1 ? q.at(1).get<int>() : -1;
}

}  // namespace

void to_json(nlohmann::json& j, const ParamCircuit& c) {
    nlohmann::json gates = nlohmann::json::array();
    for (const auto& g : c.gates) {
        nlohmann::json row = {{"kind", gate_kind_name(g.kind)},
                              {"qubits", gate_qubits(g.q0, g.q1)}};
        if (!g.param.empty()) row["param"] = g.param;
        if (g.word >= 0) row["word"] = g.word;
        gates.push_back(std::move(row));
    }
    nlohmann::json words = nlohmann::json::array();
    for (size_t w = 0; w < c.word_first.size(); ++w) {
        nlohmann::json row = {{"first", c.word_first[w]}, {"count", c.word_count[w]}};
        if (w < c.word_concepts.size()) row["concept"] = c.word_concepts[w];
        words.push_back(std::move(row));
    }
    j = {{"n_qubits", c.n_qubits},
         {"gates", gates},
         {"words", words},
         {"postselect", c.postselect},
         {"sentence_qubit", c.sentence_qubit},
         {"language", c.language},
         {"source_text", c.source_text}};
}

void from_json(const nlohmann::json& j, ParamCircuit& c) {
    c = ParamCircuit{};
    c.n_qubits = j.at("n_qubits").get<int>();
    for (const auto& row : j.at("gates")) {
        Gate g;
        g.kind = gate_kind_from_name(row.at("kind").get<std::string>());
        read_qubits(row.at("qubits"), g.q0, g.q1);
        if (row.contains("param")) g.param = row.at("param").get<std::string>();
        if (row.contains("word")) g.word = row.at("word").get<int>();
        c.gates.push_back(std::move(g));
    }
    if (j.contains("words")) {
        for (const auto& row : j.at("words")) {
            c.word_first.push_back(row.at("first").get<int>());
            c.word_count.push_back(row.at("count").get<int>());
            if (row.contains("concept"))
                c.word_concepts.push_back(row.at("concept").get<std::string>());
        }
    }
    c.postselect = j.at("postselect").get<std::vector<int>>();
    c.sentence_qubit = j.at("sentence_qubit").get<int>();
    c.language = j.at("language").get<std::string>();
    c.source_text = j.at("source_text").get<std::string>();
}

void to_json(nlohmann::json& j, const BoundCircuit& c) {
    nlohmann::json gates = nlohmann::json::array();
    for (const auto& g : c.gates)
        gates.push_back({{"kind", gate_kind_name(g.kind)},
                         {"qubits", gate_qubits(g.q0, g.q1)},
                         {"angle", g.angle}});
    j = {{"n_qubits", c.n_qubits},
         {"gates", gates},
         {"postselect", c.postselect},
         {"sentence_qubit", c.sentence_qubit},
         {"language", c.language},
         {"source_text", c.source_text}};
}

void from_json(const nlohmann::json& j, BoundCircuit& c) {
    c = BoundCircuit{};
    c.n_qubits = j.at("n_qubits").get<int>();
    for (const auto& row : j.at("gates")) {
        BoundGate g;
        g.kind = gate_kind_from_name(row.at("kind").get<std::string>());
        read_qubits(row.at("qubits"), g.q0, g.q1);
        g.angle = row.value("angle", 0.0);
        c.gates.push_back(g);
    }
    c.postselect = j.at("postselect").get<std::vector<int>>();
    c.sentence_qubit = j.at("sentence_qubit").get<int>();
    c.language = j.at("language").get<std::string>();
    c.source_text = j.at("source_text").get<std::string>();
}

ParamCircuit load_circuit_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open circuit file: " + path);
    nlohmann::json j;
    try {
        in >> j;
        return j.get<ParamCircuit>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed circuit JSON in " + path + ": " + e.what());
    }
}

void save_circuit_json(const ParamCircuit& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write circuit file: " + path);
    out << nlohmann::json(c).dump(2) << '\n';
}

void save_bound_circuit_json(const BoundCircuit& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write circuit file: " + path);
    out << nlohmann::json(c).dump(2) << '\n';
}

}  // namespace qmt
