#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qmt/grammar.hpp"

namespace qmt {

/// One word box in a string diagram: a contiguous run of wires, one wire per
/// type factor.
struct WordWires {
    std::string surface;
    std::string concept_id;
    std::string type_text;
    int first = 0;
    int count = 0;

    bool operator==(const WordWires&) const = default;
};

/// String diagram of a sentence: word boxes over a row of wires, cups joining
/// wire pairs, one open sentence wire.
struct Diagram {
    std::string text;
    std::string language;
    std::vector<WordWires> words;
    std::vector<std::pair<int, int>> cups;  // sorted by left endpoint
    int sentence_wire = 0;
    int total_wires = 0;

    bool operator==(const Diagram&) const = default;
};

/// Build the diagram for a typed sentence from its reduction proof. Wires are
/// numbered left to right in flattened factor order. Throws StructuralError
/// if the proof does not cover the factors exactly once.
Diagram build_diagram(const TypedSentence& ts, const ReductionProof& proof);

/// Human-readable wire layout: each word with its type and wire span, then
/// cups and the sentence wire.
std::string wire_report(const Diagram& d);

void to_json(nlohmann::json& j, const Diagram& d);
void from_json(const nlohmann::json& j, Diagram& d);

Diagram load_diagram_json(const std::string& path);
void save_diagram_json(const Diagram& d, const std::string& path);

}  // namespace qmt
