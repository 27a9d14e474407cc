#include "qmt/diagram.hpp"

#include <fstream>
#include <sstream>

namespace qmt {

Diagram build_diagram(const TypedSentence& ts, const ReductionProof& proof) {
    Diagram d;
    d.text = ts.text;
    d.language = ts.language;
    int wire = 0;
    for (const auto& w : ts.words) {
        WordWires ww;
        ww.surface = w.surface;
        ww.concept_id = w.concept_id;
        ww.type_text = format_type(w.type);
        ww.first = wire;
        ww.count = static_cast<int>(w.type.size());
        wire += ww.count;
        d.words.push_back(std::move(ww));
    }
    d.total_wires = wire;

    std::vector<int> uses(d.total_wires, 0);
    for (auto [a, b] : proof.cups) {
        if (a < 0 || b >= d.total_wires || a >= b)
            throw StructuralError("cup endpoints out of range: (" + std::to_string(a) + ", " +
                                  std::to_string(b) + ")");
        ++uses[a];
        ++uses[b];
    }
    if (proof.survivor < 0 || proof.survivor >= d.total_wires)
        throw StructuralError("survivor wire out of range: " + std::to_string(proof.survivor));
    ++uses[proof.survivor];
    for (int i = 0; i < d.total_wires; ++i) {
        if (uses[i] != 1)
            throw StructuralError("malformed proof: wire " + std::to_string(i) +
                                  (uses[i] ? " covered twice" : " uncovered"));
    }

    d.cups = proof.cups;
    d.sentence_wire = proof.survivor;
    return d;
}

std::string wire_report(const Diagram& d) {
    std::ostringstream out;
    out << d.text << "  [" << d.language << "]\n";
    for (const auto& w : d.words) {
        out << "  " << w.surface << " : " << w.type_text << "  wires ";
        if (w.count == 1)
            out << w.first;
        else
            out << w.first << ".." << (w.first + w.count - 1);
        out << '\n';
    }
    out << "  cups:";
    for (auto [a, b] : d.cups) out << " (" << a << "," << b << ")";
    out << "\n  sentence wire: " << d.sentence_wire << '\n';
    return out.str();
}

void to_json(nlohmann::json& j, const Diagram& d) {
    nlohmann::json words = nlohmann::json::array();
    for (const auto& w : d.words)
        words.push_back({{"surface", w.surface},
                         {"concept", w.concept_id},
                         {"type", w.type_text},
                         {"first_wire", w.first},
                         {"wires", w.count}});
    nlohmann::json cups = nlohmann::json::array();
    for (auto [a, b] : d.cups) cups.push_back({a, b});
    j = {{"text", d.text},         {"language", d.language},
         {"words", words},         {"cups", cups},
         {"sentence_wire", d.sentence_wire}, {"total_wires", d.total_wires}};
}

void from_json(const nlohmann::json& j, Diagram& d) {
    d = Diagram{};
    d.text = j.at("text").get<std::string>();
    d.language = j.at("language").get<std::string>();
    for (const auto& w : j.at("words")) {
        WordWires ww;
        ww.surface = w.at("surface").get<std::string>();
        ww.concept_id = w.at("concept").get<std::string>();
        ww.type_text = w.at("type").get<std::string>();
        ww.first = w.at("first_wire").get<int>();
        ww.count = w.at("wires").get<int>();
        d.words.push_back(std::move(ww));
    }
    for (const auto& c : j.at("cups")) d.cups.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
    d.sentence_wire = j.at("sentence_wire").get<int>();
    d.total_wires = j.at("total_wires").get<int>();
}

Diagram load_diagram_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open diagram file: " + path);
    nlohmann::json j;
    try {
        in >> j;
        return j.get<Diagram>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed diagram JSON in " + path + ": " + e.what());
    }
}

void save_diagram_json(const Diagram& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write diagram file: " + path);
    out << nlohmann::json(d).dump(2) << '\n';
}

}  // namespace qmt
