#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qmt/corpus.hpp"
#include "qmt/sim.hpp"

namespace qmt {

/// -sum p log2 p in bits, with 0 log 0 = 0.
double shannon_entropy(const OutcomeDistribution& d);

/// |h_src - h_tgt|.
double entropy_diff(double h_src, double h_tgt);

struct EntropyRow {
    std::string id;
    std::string language;
    double entropy = 0.0;
};

struct EntropyTable {
    std::vector<EntropyRow> rows;

    std::string to_csv() const;  // header id,language,entropy
    static EntropyTable from_csv(const std::string& text);
};

/// values[i][j] = | |H_src(i) - H_tgt(j)| - offset |. best[i] is the row
/// argmin, ties broken toward the lowest column.
struct MatchMatrix {
    std::vector<std::vector<double>> values;
    double offset = 1.0;
    std::vector<int> best;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;

    /// Mean of values[i][i]; the matrix must be square.
    double mean_diagonal_score() const;

    /// Fraction of rows whose best match sits on the diagonal.
    double diagonal_accuracy() const;
};

MatchMatrix match_matrix(const EntropyTable& src, const EntropyTable& tgt,
                         double offset = 1.0);

/// Median |H_src(i) - H_tgt(i)| over aligned rows: the empirical stand-in
/// for the fixed unity offset.
double calibrate_offset(const EntropyTable& src, const EntropyTable& tgt);

std::string matrix_csv(const MatchMatrix& m);  // row-major, 17 significant digits

struct MatchExperiment {
    EntropyTable src;
    EntropyTable tgt;
    MatchMatrix matrix;
};

/// Simulate every circuit of the corpus (exact when shots ==
/// OutcomeDistribution::kExact), tabulate raw-distribution entropies and
/// build the match matrix. swapped=true permutes each source circuit's
/// angles (seeded per pair) before binding. offset: nullopt calibrates via
/// calibrate_offset, otherwise the given value is used.
MatchExperiment run_matching_experiment(const std::vector<CircuitPair>& pairs,
                                        const ParamRegistry& reg, long long shots,
                                        uint64_t seed, bool swapped,
                                        std::optional<double> offset = std::nullopt);

/// Write match_matrix.csv, heatmap.pgm (8-bit binary graymap, pixel =
/// 255*(1 - v/max)) and best_matches.csv into dir.
void heatmap_export(const MatchMatrix& m, const std::filesystem::path& dir);

}  // namespace qmt
