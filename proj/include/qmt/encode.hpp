#pragma once

#include <array>
#include <string>
#include <vector>

#include "qmt/circuit.hpp"
#include "qmt/corpus.hpp"

namespace qmt {

/// One gate as 8 reals: one-hot over {NOP, RX, RZ, H, CRZ, CNOT}, then
/// angle/2pi in [0,1), then qubit offset within the word / word width.
/// An all-zero row is padding. CRZ rows store the control offset; the
/// target sits at offset+1 by ansatz construction.
using GateVector = std::array<double, 8>;

/// T_max frames of G_max gate rows; rows within a frame sorted by offset.
struct WordEncoding {
    std::vector<std::vector<GateVector>> frames;
};

struct SentenceMeta {
    int n_words = 0;
    int t_max = 0;
    int g_max = 0;
    int n_qubits = 0;
    std::vector<int> word_widths;
    std::vector<std::pair<int, int>> cups;
    int sentence_qubit = 0;
    std::string language;

    bool operator==(const SentenceMeta&) const = default;
};

struct SentenceEncoding {
    std::vector<WordEncoding> words;
    SentenceMeta meta;
};

struct EncodingShape {
    int t_max = 0;
    int g_max = 0;
};

/// Ordered per-word qubit groups. Uses the circuit's word annotations when
/// present, otherwise falls back to connected components of the two-qubit
/// gate graph with CNOT edges ignored. Groups must come out contiguous.
std::vector<std::vector<int>> partition_words(const ParamCircuit& c);

/// Global frontier schedule of the word-owned gates (cup CNOT/H machinery
/// is excluded). moment[i] is gate i's time step, -1 for cup gates. A gate
/// joins the newest open step only when its qubits are free there and every
/// gate of the same word already in that step sits at a lower offset; the
/// second condition keeps per-word (step, offset) order equal to gate order.
struct Schedule {
    std::vector<std::vector<int>> groups;
    std::vector<int> moment;
    int n_steps = 0;
};

Schedule schedule_circuit(const ParamCircuit& c);

/// Smallest (T, G) shape that fits the circuit's schedule.
EncodingShape required_shape(const ParamCircuit& c);

/// Bind angles from reg and lay the schedule out as L x T_max x G_max gate
/// vectors (zero rows pad). Throws CapacityError naming the required (T, G)
/// when the shape is too small.
SentenceEncoding encode_sentence(const ParamCircuit& c, const ParamRegistry& reg,
                                 EncodingShape shape);

/// Rebuild the bound circuit: word gates from the frames (word-major, frame
/// then offset order), cup machinery and post-selection from the meta.
/// Throws StructuralError with frame coordinates on malformed rows.
BoundCircuit decode_sentence(const SentenceEncoding& e);

/// Integer token stream: PAD=0, STEP_SEP=1, WORD_SEP=2, then quantized gate
/// tokens 3 + (kind * w_max + offset) * bins + floor(bins * angle / 2pi)
/// over the four word-gate kinds {RX, RZ, H, CRZ}.
struct TokenSequence {
    std::vector<int> ids;
    SentenceMeta meta;
    int bins = 32;
    int w_max = 0;
};

inline constexpr int kPadToken = 0;
inline constexpr int kStepSepToken = 1;
inline constexpr int kWordSepToken = 2;

/// Vocabulary size for a tokenizer configuration.
int token_vocabulary(int w_max, int bins);

TokenSequence tokenize(const SentenceEncoding& e, int bins = 32, int w_max = 0);

/// Inverse of tokenize up to angle quantization: parameterized angles come
/// back at bin centers (error <= pi/bins), H rows at exactly 0.
SentenceEncoding detokenize(const TokenSequence& t);

void to_json(nlohmann::json& j, const SentenceMeta& m);
void from_json(const nlohmann::json& j, SentenceMeta& m);

/// One corpus pair, encoded and tokenized on both sides.
struct DatasetRecord {
    std::string id;
    std::string src_text;
    std::string tgt_text;
    TokenSequence src;
    TokenSequence tgt;
};

/// Fixed-shape token dataset: shared (T_max, G_max, W_max, bins) computed
/// as corpus maxima, token ids padded to per-language maximum lengths.
struct Dataset {
    EncodingShape shape;
    int w_max = 0;
    int bins = 32;
    int vocabulary = 0;
    int src_len = 0;
    int tgt_len = 0;
    std::vector<DatasetRecord> records;
};

Dataset build_dataset(const std::vector<CircuitPair>& pairs, const ParamRegistry& reg,
                      int bins = 32);

/// JSON-lines: a shape header record first, then one record per pair.
void save_dataset_jsonl(const Dataset& d, const std::string& path);
Dataset load_dataset_jsonl(const std::string& path);

}  // namespace qmt
