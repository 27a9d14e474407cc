#include "qmt/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qmt/rng.hpp"

namespace qmt {

namespace {

std::string fmt17(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

std::string id_or_index(const std::vector<std::string>& ids, size_t i) {
    return i < ids.size() ? ids[i] : std::to_string(i);
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

double shannon_entropy(const OutcomeDistribution& d) {
    double h = 0.0;
    for (const auto& [_, p] : d.mass)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

double entropy_diff(double h_src, double h_tgt) { return std::abs(h_src - h_tgt); }

std::string EntropyTable::to_csv() const {
    std::string out = "id,language,entropy\n";
    for (const auto& r : rows)
        out += r.id + "," + r.language + "," + fmt17(r.entropy) + "\n";
    return out;
}

EntropyTable EntropyTable::from_csv(const std::string& text) {
    EntropyTable t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "id,language,entropy")
        throw IoError("entropy table must start with 'id,language,entropy'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t a = line.find(',');
        size_t b = line.find(',', a + 1);
        if (a == std::string::npos || b == std::string::npos)
            throw IoError("entropy table row needs 3 cells, got '" + line + "'");
        t.rows.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1),
                          std::stod(line.substr(b + 1))});
    }
    return t;
}

double MatchMatrix::mean_diagonal_score() const {
    if (values.empty() || values.size() != values.front().size())
        throw PreconditionError("diagonal score needs a square match matrix");
    double sum = 0.0;
    for (size_t i = 0; i < values.size(); ++i) sum += values[i][i];
    return sum / static_cast<double>(values.size());
}

double MatchMatrix::diagonal_accuracy() const {
    if (best.empty()) throw PreconditionError("diagonal accuracy needs a nonempty matrix");
    int hits = 0;
    for (size_t i = 0; i < best.size(); ++i)
        if (best[i] == static_cast<int>(i)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(best.size());
}

MatchMatrix match_matrix(const EntropyTable& src, const EntropyTable& tgt, double offset) {
    if (src.rows.empty() || tgt.rows.empty())
        throw PreconditionError("match matrix needs nonempty entropy tables");
    MatchMatrix m;
    m.offset = offset;
    m.values.assign(src.rows.size(), std::vector<double>(tgt.rows.size(), 0.0));
    m.best.assign(src.rows.size(), 0);
    for (size_t i = 0; i < src.rows.size(); ++i) {
        m.row_ids.push_back(src.rows[i].id);
        for (size_t j = 0; j < tgt.rows.size(); ++j) {
            double v = std::abs(entropy_diff(src.rows[i].entropy, tgt.rows[j].entropy) - offset);
            m.values[i][j] = v;
            if (v < m.values[i][m.best[i]]) m.best[i] = static_cast<int>(j);
        }
    }
    for (const auto& r : tgt.rows) m.col_ids.push_back(r.id);
    return m;
}

double calibrate_offset(const EntropyTable& src, const EntropyTable& tgt) {
    if (src.rows.empty() || src.rows.size() != tgt.rows.size())
        throw PreconditionError("calibration needs aligned nonempty tables");
    std::vector<double> gaps;
    gaps.reserve(src.rows.size());
    for (size_t i = 0; i < src.rows.size(); ++i)
        gaps.push_back(entropy_diff(src.rows[i].entropy, tgt.rows[i].entropy));
    std::sort(gaps.begin(), gaps.end());
    size_t n = gaps.size();
    return n % 2 == 1 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
}

std::string matrix_csv(const MatchMatrix& m) {
    std::string out;
    for (const auto& row : m.values) {
        for (size_t j = 0; j < row.size(); ++j) {
            if (j) out += ',';
            out += fmt17(row[j]);
        }
        out += '\n';
    }
    return out;
}

MatchExperiment run_matching_experiment(const std::vector<CircuitPair>& pairs,
                                        const ParamRegistry& reg, long long shots,
                                        uint64_t seed, bool swapped,
                                        std::optional<double> offset) {
    if (pairs.empty())
        throw PreconditionError("matching experiment needs a nonempty corpus");

    auto simulate = [&](const BoundCircuit& b, uint64_t sample_seed) {
        return shots == OutcomeDistribution::kExact ? exact_distribution(b)
                                                    : sample(b, shots, sample_seed);
    };

    MatchExperiment ex;
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        BoundCircuit src_bound =
            swapped ? bind(p.src, swap_angles(p.src, reg, mix_seed(seed, 3 * i + 2)))
                    : bind(p.src, reg);
        auto src_dist = simulate(src_bound, mix_seed(seed, 3 * i));
        auto tgt_dist = simulate(bind(p.tgt, reg), mix_seed(seed, 3 * i + 1));
        ex.src.rows.push_back({p.id, p.src.language, shannon_entropy(src_dist)});
        ex.tgt.rows.push_back({p.id, p.tgt.language, shannon_entropy(tgt_dist)});
    }
    double off = offset ? *offset : calibrate_offset(ex.src, ex.tgt);
    ex.matrix = match_matrix(ex.src, ex.tgt, off);
    return ex;
}

void heatmap_export(const MatchMatrix& m, const std::filesystem::path& dir) {
    if (m.values.empty() || m.values.front().empty())
        throw PreconditionError("heatmap export needs a nonempty matrix");
    std::filesystem::create_directories(dir);

    write_file(dir / "match_matrix.csv", matrix_csv(m));

    size_t rows = m.values.size();
    size_t cols = m.values.front().size();
    double max_v = 0.0;
    for (const auto& row : m.values)
        for (double v : row) max_v = std::max(max_v, v);

    std::string pgm = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    for (const auto& row : m.values)
        for (double v : row) {
            double shade = max_v > 0.0 ? 255.0 * (1.0 - v / max_v) : 255.0;
            long px = std::lround(shade);
            pgm += static_cast<char>(std::clamp(px, 0L, 255L));
        }
    write_file(dir / "heatmap.pgm", pgm);

    std::string best = "src_id,tgt_id,score\n";
    for (size_t i = 0; i < rows; ++i) {
        size_t j = static_cast<size_t>(m.best[i]);
        best += id_or_index(m.row_ids, i) + "," + id_or_index(m.col_ids, j) + "," +
                fmt17(m.values[i][j]) + "\n";
    }
    write_file(dir / "best_matches.csv", best);
}

}  // namespace qmt
