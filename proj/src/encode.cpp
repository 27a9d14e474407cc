#include "qmt/encode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace qmt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w == kTwoPi ? 0.0 : w;
}

int find_root(std::vector<int>& parent, int q) {
    while (parent[q] != q) {
        parent[q] = parent[parent[q]];
        q = parent[q];
    }
    return q;
}

std::vector<std::vector<int>> groups_from_annotations(const ParamCircuit& c) {
    if (c.word_first.size() != c.word_count.size())
        throw StructuralError("word annotation arrays disagree in length");
    std::vector<std::vector<int>> groups;
    int next = 0;
    for (size_t w = 0; w < c.word_first.size(); ++w) {
        if (c.word_first[w] != next || c.word_count[w] < 1)
            throw StructuralError("word annotations must tile the qubits contiguously");
        std::vector<int> g(c.word_count[w]);
        for (int k = 0; k < c.word_count[w]; ++k) g[k] = next + k;
        next += c.word_count[w];
        groups.push_back(std::move(g));
    }
    if (next != c.n_qubits)
        throw StructuralError("word annotations cover " + std::to_string(next) + " of " +
                              std::to_string(c.n_qubits) + " qubits");
    return groups;
}

std::vector<std::vector<int>> groups_from_components(const ParamCircuit& c) {
    std::vector<int> parent(c.n_qubits);
    for (int q = 0; q < c.n_qubits; ++q) parent[q] = q;
    for (const auto& g : c.gates) {
        if (g.kind != GateKind::CRZ) continue;  // CNOTs bridge words; skip them
        int a = find_root(parent, g.q0);
        int b = find_root(parent, g.q1);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::map<int, std::vector<int>> by_root;
    for (int q = 0; q < c.n_qubits; ++q) by_root[find_root(parent, q)].push_back(q);
    std::vector<std::vector<int>> groups;
    for (auto& [_, g] : by_root) {
        if (g.back() - g.front() + 1 != static_cast<int>(g.size()))
            throw StructuralError("gate graph components are not contiguous qubit runs");
        groups.push_back(std::move(g));
    }
    return groups;
}

struct GatePlace {
    int word = -1;    // -1 for cup machinery
    int offset = 0;   // q0 relative to the word's first qubit
};

std::vector<GatePlace> place_gates(const ParamCircuit& c,
                                   const std::vector<std::vector<int>>& groups) {
    std::vector<int> group_of(c.n_qubits, -1);
    for (size_t w = 0; w < groups.size(); ++w)
        for (int q : groups[w]) group_of[q] = static_cast<int>(w);

    bool annotated = !c.word_first.empty();
    std::vector<GatePlace> places(c.gates.size());
    for (size_t i = 0; i < c.gates.size(); ++i) {
        const auto& g = c.gates[i];
        if (g.kind == GateKind::CNOT || (annotated && g.word < 0)) continue;  // cup
        int w = annotated ? g.word : group_of[g.q0];
        if (w < 0 || w >= static_cast<int>(groups.size()))
            throw StructuralError("gate " + std::to_string(i) + " has no owning word");
        places[i].word = w;
        places[i].offset = g.q0 - groups[w].front();
        if (places[i].offset < 0 || places[i].offset >= static_cast<int>(groups[w].size()))
            throw StructuralError("gate " + std::to_string(i) + " leaves its word's qubits");
    }
    return places;
}

int onehot_kind(const GateVector& v, int w, int t, int r) {
    auto at = [&](const char* what) {
        return "word " + std::to_string(w) + " frame " + std::to_string(t) + " row " +
               std::to_string(r) + ": " + what;
    };
    int kind = -1;
    for (int k = 0; k < 6; ++k) {
        if (v[k] <= 0.5) continue;
        if (kind >= 0) throw StructuralError(at("two gate kinds set"));
        kind = k;
    }
    if (kind >= 0) return kind;
    for (double x : v)
        if (std::abs(x) > 1e-9) throw StructuralError(at("values present without a gate kind"));
    return -1;  // all-zero padding
}

std::string fmt_shape(int t, int g) {
    return "(T=" + std::to_string(t) + ", G=" + std::to_string(g) + ")";
}

}  // namespace

std::vector<std::vector<int>> partition_words(const ParamCircuit& c) {
    if (c.n_qubits < 1) throw StructuralError("cannot partition an empty circuit");
    return c.word_first.empty() ? groups_from_components(c) : groups_from_annotations(c);
}

Schedule schedule_circuit(const ParamCircuit& c) {
    Schedule s;
    s.groups = partition_words(c);
    auto places = place_gates(c, s.groups);
    s.moment.assign(c.gates.size(), -1);

    std::vector<char> busy(c.n_qubits, 0);
    std::vector<std::pair<int, int>> members;  // (word, offset) in the newest step
    int newest = -1;
    for (size_t i = 0; i < c.gates.size(); ++i) {
        if (places[i].word < 0) continue;
        const auto& g = c.gates[i];
        bool fits = newest >= 0 && !busy[g.q0] && (g.q1 < 0 || !busy[g.q1]);
        if (fits)
            for (const auto& [w, off] : members)
                if (w == places[i].word && off >= places[i].offset) {
                    fits = false;
                    break;
                }
        if (!fits) {
            ++newest;
            std::fill(busy.begin(), busy.end(), 0);
            members.clear();
        }
        s.moment[i] = newest;
        busy[g.q0] = 1;
        if (g.q1 >= 0) busy[g.q1] = 1;
        members.emplace_back(places[i].word, places[i].offset);
    }
    s.n_steps = newest + 1;
    return s;
}

EncodingShape required_shape(const ParamCircuit& c) {
    auto s = schedule_circuit(c);
    std::map<std::pair<int, int>, int> load;  // (word, step) -> gates
    auto places = place_gates(c, s.groups);
    int g_max = 0;
    for (size_t i = 0; i < c.gates.size(); ++i) {
        if (s.moment[i] < 0) continue;
        g_max = std::max(g_max, ++load[{places[i].word, s.moment[i]}]);
    }
    return {s.n_steps, g_max};
}

SentenceEncoding encode_sentence(const ParamCircuit& c, const ParamRegistry& reg,
                                 EncodingShape shape) {
    auto sched = schedule_circuit(c);
    auto places = place_gates(c, sched.groups);
    auto need = required_shape(c);
    if (need.t_max > shape.t_max || need.g_max > shape.g_max)
        throw CapacityError("encoding needs shape " + fmt_shape(need.t_max, need.g_max) +
                            " but was given " + fmt_shape(shape.t_max, shape.g_max));

    SentenceEncoding e;
    e.meta.n_words = static_cast<int>(sched.groups.size());
    e.meta.t_max = shape.t_max;
    e.meta.g_max = shape.g_max;
    e.meta.n_qubits = c.n_qubits;
    for (const auto& g : sched.groups)
        e.meta.word_widths.push_back(static_cast<int>(g.size()));
    for (const auto& g : c.gates)
        if (g.kind == GateKind::CNOT) e.meta.cups.emplace_back(g.q0, g.q1);
    e.meta.sentence_qubit = c.sentence_qubit;
    e.meta.language = c.language;

    e.words.resize(sched.groups.size());
    std::vector<std::vector<int>> fill(sched.groups.size(),
                                       std::vector<int>(shape.t_max, 0));
    for (auto& w : e.words)
        w.frames.assign(shape.t_max, std::vector<GateVector>(shape.g_max, GateVector{}));

    for (size_t i = 0; i < c.gates.size(); ++i) {
        if (places[i].word < 0) continue;
        const auto& g = c.gates[i];
        int w = places[i].word;
        int t = sched.moment[i];
        GateVector v{};
        v[static_cast<int>(g.kind)] = 1.0;
        if (!g.param.empty()) v[6] = wrap_angle(reg.value(g.param)) / kTwoPi;
        double width = e.meta.word_widths[w];
        v[7] = places[i].offset / width;
        e.words[w].frames[t][fill[w][t]++] = v;
    }
    return e;
}

BoundCircuit decode_sentence(const SentenceEncoding& e) {
    const auto& m = e.meta;
    if (static_cast<int>(e.words.size()) != m.n_words ||
        static_cast<int>(m.word_widths.size()) != m.n_words)
        throw StructuralError("encoding word count disagrees with its meta");
    int total = 0;
    for (int w : m.word_widths) total += w;
    if (total != m.n_qubits)
        throw StructuralError("word widths sum to " + std::to_string(total) + ", meta says " +
                              std::to_string(m.n_qubits) + " qubits");

    BoundCircuit c;
    c.n_qubits = m.n_qubits;
    c.sentence_qubit = m.sentence_qubit;
    c.language = m.language;
    int first = 0;
    for (int w : m.word_widths) {
        c.word_first.push_back(first);
        c.word_count.push_back(w);
        first += w;
    }

    for (int w = 0; w < m.n_words; ++w) {
        const auto& frames = e.words[w].frames;
        if (static_cast<int>(frames.size()) != m.t_max)
            throw StructuralError("word " + std::to_string(w) + " has " +
                                  std::to_string(frames.size()) + " frames, meta says " +
                                  std::to_string(m.t_max));
        int width = m.word_widths[w];
        for (int t = 0; t < m.t_max; ++t) {
            for (int r = 0; r < static_cast<int>(frames[t].size()); ++r) {
                const auto& v = frames[t][r];
                int kind = onehot_kind(v, w, t, r);
                if (kind < 0) continue;  // padding
                auto at = [&](const char* what) {
                    return "word " + std::to_string(w) + " frame " + std::to_string(t) +
                           " row " + std::to_string(r) + ": " + std::string(what);
                };
                if (kind == static_cast<int>(GateKind::NOP)) {
                    if (std::abs(v[6]) > 1e-9 || std::abs(v[7]) > 1e-9)
                        throw StructuralError(at("NOP rows carry no angle or offset"));
                    continue;
                }
                if (kind == static_cast<int>(GateKind::CNOT))
                    throw StructuralError(at("cup CNOTs do not belong in word frames"));
                double scaled = v[7] * width;
                int offset = static_cast<int>(std::lround(scaled));
                if (std::abs(scaled - offset) > 1e-6 || offset < 0 || offset >= width)
                    throw StructuralError(at("qubit offset is not a lattice point"));
                BoundGate g;
                g.kind = static_cast<GateKind>(kind);
                g.q0 = c.word_first[w] + offset;
                g.angle = (g.kind == GateKind::H) ? 0.0 : v[6] * kTwoPi;
                g.word = w;
                if (g.kind == GateKind::CRZ) {
                    if (offset + 1 >= width)
                        throw StructuralError(at("CRZ control sits at the word edge"));
                    g.q1 = g.q0 + 1;
                }
                c.gates.push_back(g);
            }
        }
    }

    auto cups = m.cups;
    std::sort(cups.begin(), cups.end());
    for (const auto& [a, b] : cups) {
        if (a < 0 || b < 0 || a >= m.n_qubits || b >= m.n_qubits || a == b)
            throw StructuralError("cup endpoints out of range");
        c.gates.push_back({GateKind::CNOT, a, b, 0.0, -1});
        c.gates.push_back({GateKind::H, a, -1, 0.0, -1});
        c.postselect.push_back(a);
        c.postselect.push_back(b);
    }
    std::sort(c.postselect.begin(), c.postselect.end());
    return c;
}

int token_vocabulary(int w_max, int bins) { return 3 + 4 * w_max * bins; }

namespace {

// Token kinds cover only the four gate kinds a word frame may hold.
constexpr GateKind kTokenKinds[4] = {GateKind::RX, GateKind::RZ, GateKind::H, GateKind::CRZ};

int token_kind_index(int onehot_kind_idx) {
    switch (static_cast<GateKind>(onehot_kind_idx)) {
        case GateKind::RX: return 0;
        case GateKind::RZ: return 1;
        case GateKind::H: return 2;
        case GateKind::CRZ: return 3;
        default: return -1;
    }
}

}  // namespace

TokenSequence tokenize(const SentenceEncoding& e, int bins, int w_max) {
    if (bins < 1) throw PreconditionError("tokenizer needs at least one angle bin");
    int widest = 0;
    for (int w : e.meta.word_widths) widest = std::max(widest, w);
    if (w_max == 0) w_max = widest;
    if (w_max < widest)
        throw PreconditionError("w_max " + std::to_string(w_max) +
                                " cannot hold a word of width " + std::to_string(widest));

    if (static_cast<int>(e.words.size()) != e.meta.n_words ||
        static_cast<int>(e.meta.word_widths.size()) != e.meta.n_words)
        throw StructuralError("encoding word count disagrees with its meta");

    TokenSequence t;
    t.meta = e.meta;
    t.bins = bins;
    t.w_max = w_max;
    for (int w = 0; w < e.meta.n_words; ++w) {
        int width = e.meta.word_widths[w];
        for (int f = 0; f < static_cast<int>(e.words[w].frames.size()); ++f) {
            const auto& frame = e.words[w].frames[f];
            for (int r = 0; r < static_cast<int>(frame.size()); ++r) {
                const auto& v = frame[r];
                int kind = onehot_kind(v, w, f, r);
                if (kind < 0 || kind == static_cast<int>(GateKind::NOP)) continue;
                int tk = token_kind_index(kind);
                if (tk < 0)
                    throw StructuralError("word frames may not hold cup CNOTs");
                int offset = static_cast<int>(std::lround(v[7] * width));
                int bin = std::clamp(static_cast<int>(std::floor(bins * v[6])), 0, bins - 1);
                t.ids.push_back(3 + (tk * w_max + offset) * bins + bin);
            }
            t.ids.push_back(kStepSepToken);
        }
        t.ids.push_back(kWordSepToken);
    }
    return t;
}

SentenceEncoding detokenize(const TokenSequence& t) {
    const auto& m = t.meta;
    if (m.n_words < 0 || static_cast<int>(m.word_widths.size()) != m.n_words)
        throw StructuralError("token meta word widths disagree with n_words");
    if (t.bins < 1 || t.w_max < 1)
        throw PreconditionError("token sequence lacks its bins / w_max configuration");
    const int vocab = token_vocabulary(t.w_max, t.bins);

    SentenceEncoding e;
    e.meta = m;
    e.words.resize(m.n_words);
    for (auto& w : e.words)
        w.frames.assign(m.t_max, std::vector<GateVector>(m.g_max, GateVector{}));

    int w = 0, frame = 0, row = 0, last_offset = -1;
    size_t i = 0;
    for (; i < t.ids.size(); ++i) {
        int id = t.ids[i];
        if (id == kPadToken) break;
        if (id < 0 || id >= vocab)
            throw StructuralError("token id " + std::to_string(id) + " is out of vocabulary");
        if (w >= m.n_words)
            throw StructuralError("tokens continue past the last word");
        if (id == kWordSepToken) {
            if (frame != m.t_max)
                throw StructuralError("word " + std::to_string(w) + " closed after " +
                                      std::to_string(frame) + " of " +
                                      std::to_string(m.t_max) + " frames");
            ++w;
            frame = 0;
            continue;
        }
        if (id == kStepSepToken) {
            if (frame >= m.t_max)
                throw StructuralError("word " + std::to_string(w) + " has too many frames");
            ++frame;
            row = 0;
            last_offset = -1;
            continue;
        }
        // gate token
        if (frame >= m.t_max)
            throw StructuralError("gate token after the word's last frame");
        if (row >= m.g_max)
            throw StructuralError("frame holds more than g_max gates");
        int g = id - 3;
        int bin = g % t.bins;
        int tk = (g / t.bins) / t.w_max;
        int offset = (g / t.bins) % t.w_max;
        int width = m.word_widths[w];
        if (offset >= width)
            throw StructuralError("gate offset " + std::to_string(offset) +
                                  " exceeds word width " + std::to_string(width));
        if (offset <= last_offset)
            throw StructuralError("frame gates must ascend by offset");
        GateKind kind = kTokenKinds[tk];
        if (kind == GateKind::CRZ && offset + 1 >= width)
            throw StructuralError("CRZ control sits at the word edge");
        GateVector v{};
        v[static_cast<int>(kind)] = 1.0;
        if (kind != GateKind::H) v[6] = (bin + 0.5) / t.bins;
        v[7] = static_cast<double>(offset) / width;
        e.words[w].frames[frame][row++] = v;
        last_offset = offset;
    }
    for (; i < t.ids.size(); ++i)
        if (t.ids[i] != kPadToken)
            throw StructuralError("padding must stay at the sequence tail");
    if (w != m.n_words)
        throw StructuralError("token stream ends inside word " + std::to_string(w));
    return e;
}

void to_json(nlohmann::json& j, const SentenceMeta& m) {
    nlohmann::json cups = nlohmann::json::array();
    for (const auto& [a, b] : m.cups) cups.push_back({a, b});
    j = {{"n_words", m.n_words},         {"t_max", m.t_max},
         {"g_max", m.g_max},             {"n_qubits", m.n_qubits},
         {"widths", m.word_widths},      {"cups", cups},
         {"sentence_qubit", m.sentence_qubit}, {"language", m.language}};
}

void from_json(const nlohmann::json& j, SentenceMeta& m) {
    m = SentenceMeta{};
    m.n_words = j.at("n_words").get<int>();
    m.t_max = j.at("t_max").get<int>();
    m.g_max = j.at("g_max").get<int>();
    m.n_qubits = j.at("n_qubits").get<int>();
    m.word_widths = j.at("widths").get<std::vector<int>>();
    for (const auto& c : j.at("cups")) m.cups.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
    m.sentence_qubit = j.at("sentence_qubit").get<int>();
    m.language = j.at("language").get<std::string>();
}

Dataset build_dataset(const std::vector<CircuitPair>& pairs, const ParamRegistry& reg,
                      int bins) {
    if (pairs.empty()) throw PreconditionError("dataset needs at least one pair");

    Dataset d;
    d.bins = bins;
    for (const auto& p : pairs) {
        for (const ParamCircuit* c : {&p.src, &p.tgt}) {
            auto need = required_shape(*c);
            d.shape.t_max = std::max(d.shape.t_max, need.t_max);
            d.shape.g_max = std::max(d.shape.g_max, need.g_max);
            for (const auto& group : partition_words(*c))
                d.w_max = std::max(d.w_max, static_cast<int>(group.size()));
        }
    }
    d.vocabulary = token_vocabulary(d.w_max, d.bins);

    for (const auto& p : pairs) {
        DatasetRecord r;
        r.id = p.id;
        r.src_text = p.src.source_text;
        r.tgt_text = p.tgt.source_text;
        r.src = tokenize(encode_sentence(p.src, reg, d.shape), d.bins, d.w_max);
        r.tgt = tokenize(encode_sentence(p.tgt, reg, d.shape), d.bins, d.w_max);
        d.src_len = std::max(d.src_len, static_cast<int>(r.src.ids.size()));
        d.tgt_len = std::max(d.tgt_len, static_cast<int>(r.tgt.ids.size()));
        d.records.push_back(std::move(r));
    }
    for (auto& r : d.records) {
        r.src.ids.resize(d.src_len, kPadToken);
        r.tgt.ids.resize(d.tgt_len, kPadToken);
    }
    return d;
}

void save_dataset_jsonl(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset " + path);
    nlohmann::json header = {{"record", "shape"},   {"t_max", d.shape.t_max},
                             {"g_max", d.shape.g_max}, {"w_max", d.w_max},
                             {"bins", d.bins},      {"vocabulary", d.vocabulary},
                             {"src_len", d.src_len}, {"tgt_len", d.tgt_len}};
    out << header.dump() << '\n';
    for (const auto& r : d.records) {
        nlohmann::json row = {{"record", "pair"},
                              {"id", r.id},
                              {"src_text", r.src_text},
                              {"tgt_text", r.tgt_text},
                              {"src_tokens", r.src.ids},
                              {"tgt_tokens", r.tgt.ids},
                              {"meta_src", r.src.meta},
                              {"meta_tgt", r.tgt.meta}};
        out << row.dump() << '\n';
    }
    if (!out) throw IoError("short write to " + path);
}

Dataset load_dataset_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read dataset " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("dataset " + path + " is empty");

    Dataset d;
    try {
        auto header = nlohmann::json::parse(line);
        if (header.at("record") != "shape")
            throw IoError("dataset must start with its shape record");
        d.shape.t_max = header.at("t_max").get<int>();
        d.shape.g_max = header.at("g_max").get<int>();
        d.w_max = header.at("w_max").get<int>();
        d.bins = header.at("bins").get<int>();
        d.vocabulary = header.at("vocabulary").get<int>();
        d.src_len = header.at("src_len").get<int>();
        d.tgt_len = header.at("tgt_len").get<int>();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto row = nlohmann::json::parse(line);
            DatasetRecord r;
            r.id = row.at("id").get<std::string>();
            r.src_text = row.at("src_text").get<std::string>();
            r.tgt_text = row.at("tgt_text").get<std::string>();
            r.src.ids = row.at("src_tokens").get<std::vector<int>>();
            r.src.meta = row.at("meta_src").get<SentenceMeta>();
            r.tgt.ids = row.at("tgt_tokens").get<std::vector<int>>();
            r.tgt.meta = row.at("meta_tgt").get<SentenceMeta>();
            r.src.bins = r.tgt.bins = d.bins;
            r.src.w_max = r.tgt.w_max = d.w_max;
            d.records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw IoError("dataset " + path + ": " + ex.what());
    }
    return d;
}

}  // namespace qmt
