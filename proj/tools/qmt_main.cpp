// Command-line front end: one subcommand per pipeline stage, every output
// directory carries a manifest.json with the effective config, seeds and
// input digests so runs can be reproduced bit for bit.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qmt/corpus.hpp"
#include "qmt/diagram.hpp"
#include "qmt/encode.hpp"
#include "qmt/entropy.hpp"
#include "qmt/errors.hpp"
#include "qmt/grammar.hpp"
#include "qmt/rng.hpp"
#include "qmt/seq2seq.hpp"
#include "qmt/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qmt;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

std::string fnv_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

/// Collects everything the manifest needs while a subcommand runs.
struct RunContext {
    std::string command;
    json config = json::object();
    json inputs = json::object();
    std::vector<std::string> outputs;
    fs::path out;
    bool has_out = false;

    void set_out(const std::string& dir) {
        if (dir.empty()) return;
        out = dir;
        has_out = true;
        fs::create_directories(out);
    }

    /// Digest an input file and return its contents.
    std::string input(const std::string& label, const std::string& path) {
        auto bytes = read_file(path);
        inputs[label] = {{"path", path}, {"fnv1a64", fnv_hex(bytes)}};
        return bytes;
    }

    fs::path emit(const std::string& name) {
        outputs.push_back(name);
        return out / name;
    }

    void finish() {
        if (!has_out) return;
        json m{{"command", command},
               {"config", config},
               {"inputs", inputs},
               {"outputs", outputs}};
        write_text(out / "manifest.json", m.dump(2) + "\n");
    }
};

Lexicon load_lexicon(RunContext& ctx, const std::string& path) {
    ctx.input("lexicon", path);
    return Lexicon::load_json(path);
}

Corpus load_corpus(RunContext& ctx, const std::string& path) {
    return Corpus::from_tsv(ctx.input("corpus", path));
}

OutcomeDistribution distribution_of(const BoundCircuit& bc, long long shots,
                                    uint64_t sample_seed) {
    if (shots == OutcomeDistribution::kExact) return exact_distribution(bc);
    return sample(bc, shots, sample_seed);
}

void print_distribution(const OutcomeDistribution& d) {
    std::printf("%d qubits, %s, total mass %.6f, entropy %.6f bits\n", d.n_qubits,
                d.shots == OutcomeDistribution::kExact
                    ? "exact"
                    : (std::to_string(d.shots) + " shots").c_str(),
                d.total(), shannon_entropy(d));
    std::vector<std::pair<std::string, double>> top(d.mass.begin(), d.mass.end());
    std::stable_sort(top.begin(), top.end(),
                     [](auto& a, auto& b) { return a.second > b.second; });
    for (size_t i = 0; i < top.size() && i < 5; ++i)
        std::printf("  %s  %.6f\n", top[i].first.c_str(), top[i].second);
}

// ---- subcommand bodies ----

struct SentenceArgs {
    std::string sentence;
    std::string language = "en";
    std::string lexicon = "data/lexicon.json";
    std::string out;
};

void cmd_parse(RunContext& ctx, const SentenceArgs& a) {
    auto lex = load_lexicon(ctx, a.lexicon);
    auto ts = assign_types(a.sentence, lex, a.language);
    auto proof = reduce(ts);
    json words = json::array();
    for (const auto& w : ts.words) {
        std::printf("%-16s %s\n", w.surface.c_str(), format_type(w.type).c_str());
        words.push_back({{"surface", w.surface},
                         {"type", format_type(w.type)},
                         {"concept", w.concept_id}});
    }
    std::string cups;
    for (auto [l, r] : proof.cups) cups += "(" + std::to_string(l) + "," + std::to_string(r) + ") ";
    std::printf("reduces to s: cups %ssurvivor %d\n", cups.c_str(), proof.survivor);
    if (ctx.has_out) {
        json j{{"sentence", a.sentence},
               {"language", a.language},
               {"words", words},
               {"cups", proof.cups},
               {"survivor", proof.survivor}};
        write_text(ctx.emit("parse.json"), j.dump(2) + "\n");
    }
}

void cmd_diagram(RunContext& ctx, const SentenceArgs& a) {
    auto lex = load_lexicon(ctx, a.lexicon);
    auto ts = assign_types(a.sentence, lex, a.language);
    auto d = build_diagram(ts, reduce(ts));
    std::fputs(wire_report(d).c_str(), stdout);
    if (ctx.has_out) save_diagram_json(d, ctx.emit("diagram.json").string());
}

struct CompileArgs : SentenceArgs {
    uint64_t seed = 0;
    int layers = 1;
};

void cmd_compile(RunContext& ctx, const CompileArgs& a) {
    auto lex = load_lexicon(ctx, a.lexicon);
    auto ts = assign_types(a.sentence, lex, a.language);
    auto reg = init_params(lex, a.seed, a.layers);
    auto c = compile(build_diagram(ts, reduce(ts)), reg, a.layers);
    std::printf("%d qubits, sentence qubit q%d, %zu gates, %zu parameters\n",
                c.n_qubits, c.sentence_qubit, c.gates.size(),
                circuit_params(c).size());
    if (ctx.has_out) {
        save_circuit_json(c, ctx.emit("circuit.json").string());
        reg.save_json(ctx.emit("params.json").string());
    }
}

struct SimulateArgs {
    std::string circuit;
    std::string params;
    std::string bound;
    long long shots = OutcomeDistribution::kExact;
    uint64_t sample_seed = 0;
    bool apply_postselect = false;
    std::string out;
};

void cmd_simulate(RunContext& ctx, const SimulateArgs& a) {
    BoundCircuit bc;
    if (!a.bound.empty()) {
        bc = json::parse(ctx.input("bound", a.bound)).get<BoundCircuit>();
    } else {
        if (a.circuit.empty() || a.params.empty())
            throw IoError("simulate needs --bound, or --circuit with --params");
        auto c = json::parse(ctx.input("circuit", a.circuit)).get<ParamCircuit>();
        auto reg = ParamRegistry::load_json(a.params);
        ctx.input("params", a.params);
        bc = bind(c, reg);
    }
    auto d = distribution_of(bc, a.shots, a.sample_seed);
    if (a.apply_postselect) d = postselect(d, bc.postselect);
    print_distribution(d);
    if (ctx.has_out) write_text(ctx.emit("distribution.csv"), distribution_csv(d));
}

struct CorpusArgs {
    std::string corpus;
    std::string lexicon = "data/lexicon.json";
    uint64_t seed = 0;  // parameter registry seed
    int layers = 1;
    std::string out;
};

struct EntropyArgs : CorpusArgs {
    long long shots = OutcomeDistribution::kExact;
    uint64_t sample_seed = 0;
};

void cmd_entropy(RunContext& ctx, const EntropyArgs& a) {
    auto lex = load_lexicon(ctx, a.lexicon);
    auto corpus = load_corpus(ctx, a.corpus);
    auto reg = init_params(lex, a.seed, a.layers);
    auto pairs = compile_corpus(corpus, lex, reg, a.layers);
    EntropyTable table;
    for (size_t i = 0; i < pairs.size(); ++i) {
        auto ds = distribution_of(bind(pairs[i].src, reg), a.shots,
                                  mix_seed(a.sample_seed, 2 * i));
        auto dt = distribution_of(bind(pairs[i].tgt, reg), a.shots,
                                  mix_seed(a.sample_seed, 2 * i + 1));
        table.rows.push_back({pairs[i].id, pairs[i].src.language, shannon_entropy(ds)});
        table.rows.push_back({pairs[i].id, pairs[i].tgt.language, shannon_entropy(dt)});
    }
    for (const auto& r : table.rows)
        std::printf("%-4s %-3s %.6f\n", r.id.c_str(), r.language.c_str(), r.entropy);
    if (ctx.has_out) write_text(ctx.emit("entropies.csv"), table.to_csv());
}

struct MatchArgs : CorpusArgs {
    long long shots = OutcomeDistribution::kExact;
    uint64_t run_seed = 13;
    bool swapped = false;
    double offset = -1.0;  // negative -> calibrate
    MatchArgs() { layers = 2; }
};

void cmd_match(RunContext& ctx, const MatchArgs& a) {
    auto lex = load_lexicon(ctx, a.lexicon);
    auto corpus = load_corpus(ctx, a.corpus);
    auto reg = init_params(lex, a.seed, a.layers);
    auto pairs = compile_corpus(corpus, lex, reg, a.layers);
    std::optional<double> offset;
    if (a.offset >= 0.0) offset = a.offset;
    auto ex = run_matching_experiment(pairs, reg, a.shots, a.run_seed, a.swapped,
                                      offset);
    double diag = ex.matrix.mean_diagonal_score();
    double acc = ex.matrix.diagonal_accuracy();
    std::printf("%zu pairs, offset %.6f, mean diagonal score %.6f, accuracy %.3f%s\n",
                pairs.size(), ex.matrix.offset, diag, acc,
                a.swapped ? " (swapped control)" : "");
    if (ctx.has_out) {
        EntropyTable both;
        both.rows = ex.src.rows;
        both.rows.insert(both.rows.end(), ex.tgt.rows.begin(), ex.tgt.rows.end());
        write_text(ctx.emit("entropies.csv"), both.to_csv());
        heatmap_export(ex.matrix, ctx.out);
        ctx.outputs.insert(ctx.outputs.end(),
                           {"match_matrix.csv", "heatmap.pgm", "best_matches.csv"});
        json summary{{"pairs", pairs.size()},       {"offset", ex.matrix.offset},
                     {"mean_diagonal_score", diag}, {"accuracy", acc},
                     {"swapped", a.swapped},        {"shots", a.shots},
                     {"layers", a.layers}};
        write_text(ctx.emit("summary.json"), summary.dump(2) + "\n");
    }
}

struct EncodeArgs : CorpusArgs {
    int bins = 32;
};

void cmd_encode(RunContext& ctx, const EncodeArgs& a) {
    auto lex = load_lexicon(ctx, a.lexicon);
    auto corpus = load_corpus(ctx, a.corpus);
    auto reg = init_params(lex, a.seed, a.layers);
    auto pairs = compile_corpus(corpus, lex, reg, a.layers);
    auto d = build_dataset(pairs, reg, a.bins);
    std::printf("%zu records, shape (T=%d, G=%d), w_max %d, %d bins, "
                "vocabulary %d, lengths %d -> %d\n",
                d.records.size(), d.shape.t_max, d.shape.g_max, d.w_max, d.bins,
                d.vocabulary, d.src_len, d.tgt_len);
    if (ctx.has_out) {
        save_dataset_jsonl(d, ctx.emit("dataset.jsonl").string());
        reg.save_json(ctx.emit("params.json").string());
    }
}

struct TrainArgs {
    std::string dataset;
    std::string model = "m3";
    std::string optimizer = "adam";
    double lr = 0.0;  // 0 -> optimizer default
    int epochs = 10;
    int batch = 16;
    double val_split = 0.2;
    int units = 0;  // 0 -> variant default
    uint64_t train_seed = 0;
    uint64_t model_seed = 0;
    std::string out;
};

void cmd_train(RunContext& ctx, const TrainArgs& a) {
    ctx.input("dataset", a.dataset);
    auto d = load_dataset_jsonl(a.dataset);
    auto cfg = default_config(variant_from_name(a.model), d);
    if (a.units > 0) cfg.units = a.units;
    auto m = build_model(cfg, a.model_seed);
    auto opt = OptimizerState::make(optimizer_from_name(a.optimizer));
    if (a.lr > 0.0) opt.lr = a.lr;
    TrainOptions topt;
    topt.epochs = a.epochs;
    topt.batch = a.batch;
    topt.val_split = a.val_split;
    topt.seed = a.train_seed;
    auto hist = train(m, d, opt, topt);
    if (hist.epochs.empty()) {
        std::printf("training diverged before the first epoch completed\n");
    } else {
        const auto& last = hist.epochs.back();
        std::printf("%zu epochs%s: train %.6f val %.6f mae %.6f mse %.6f\n",
                    hist.epochs.size(), hist.diverged ? " (diverged)" : "",
                    last.train_loss, last.val_loss, last.mae, last.mse);
    }
    if (ctx.has_out) {
        write_text(ctx.emit("history.csv"), hist.to_csv());
        save_checkpoint(m, opt, static_cast<int>(hist.epochs.size()),
                        ctx.emit("checkpoint.json").string());
    }
}

struct TranslateArgs {
    std::string dataset;
    std::string checkpoint;
    std::string id;
    int index = 0;
    std::string out;
};

void cmd_translate(RunContext& ctx, const TranslateArgs& a) {
    ctx.input("dataset", a.dataset);
    ctx.input("checkpoint", a.checkpoint);
    auto d = load_dataset_jsonl(a.dataset);
    auto m = load_checkpoint(a.checkpoint);
    int idx = a.index;
    if (!a.id.empty()) {
        idx = -1;
        for (size_t i = 0; i < d.records.size(); ++i)
            if (d.records[i].id == a.id) idx = static_cast<int>(i);
        if (idx < 0) throw IoError("record id " + a.id + " not in the dataset");
    }
    if (idx < 0 || idx >= static_cast<int>(d.records.size()))
        throw PreconditionError("record index " + std::to_string(idx) +
                                " outside the dataset");
    const auto& rec = d.records[idx];
    auto tr = translate(m, d, rec);
    auto want = rec.tgt.ids;
    while (!want.empty() && want.back() == kPadToken) want.pop_back();
    auto got = tr.tokens.ids;
    while (!got.empty() && got.back() == kPadToken) got.pop_back();
    bool exact = got == want;
    std::printf("record %s: %zu tokens, %d repairs, %s reference target\n",
                rec.id.c_str(), got.size(), tr.repairs,
                exact ? "matches" : "differs from");
    if (ctx.has_out) {
        json toks{{"id", rec.id},
                  {"tokens", tr.tokens.ids},
                  {"repairs", tr.repairs},
                  {"matches_reference", exact}};
        write_text(ctx.emit("tokens.json"), toks.dump(2) + "\n");
        save_bound_circuit_json(tr.circuit, ctx.emit("translated.json").string());
    }
}

struct ReportArgs {
    std::string entropies;
    std::string match_dir;
    std::string train_dir;
    std::string out;
};

void cmd_report(RunContext& ctx, const ReportArgs& a) {
    std::string md = "# Workbench report\n";
    if (!a.entropies.empty()) {
        auto table = EntropyTable::from_csv(ctx.input("entropies", a.entropies));
        md += "\n## Sentence entropies\n\n| id | language | entropy (bits) |\n"
              "|----|----------|----------------|\n";
        char row[128];
        for (const auto& r : table.rows) {
            std::snprintf(row, sizeof row, "| %s | %s | %.6f |\n", r.id.c_str(),
                          r.language.c_str(), r.entropy);
            md += row;
        }
        md += "\nSource: [" + a.entropies + "](" + a.entropies + ")\n";
    }
    if (!a.match_dir.empty()) {
        auto summary = json::parse(
            ctx.input("match_summary", (fs::path(a.match_dir) / "summary.json").string()));
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "\n## Matching\n\n%lld pairs, offset %.6f, mean diagonal score "
                      "%.6f, best-match accuracy %.3f%s.\n",
                      summary.at("pairs").get<long long>(),
                      summary.at("offset").get<double>(),
                      summary.at("mean_diagonal_score").get<double>(),
                      summary.at("accuracy").get<double>(),
                      summary.at("swapped").get<bool>() ? " (swapped control)" : "");
        md += buf;
        md += "\nMatrix: [match_matrix.csv](" + a.match_dir + "/match_matrix.csv), "
              "matches: [best_matches.csv](" + a.match_dir + "/best_matches.csv)\n";
    }
    if (!a.train_dir.empty()) {
        auto csv = ctx.input("history", (fs::path(a.train_dir) / "history.csv").string());
        // header plus one line per epoch; surface the first and last rows
        std::vector<std::string> lines;
        std::istringstream in(csv);
        for (std::string line; std::getline(in, line);)
            if (!line.empty()) lines.push_back(line);
        md += "\n## Training\n\n";
        if (lines.size() >= 2) {
            md += std::to_string(lines.size() - 1) + " epochs (" + lines[0] + ")\n\n";
            md += "first: " + lines[1] + "\n";
            md += "last:  " + lines.back() + "\n";
        }
        md += "\nCurves: [history.csv](" + a.train_dir + "/history.csv)\n";
    }
    write_text(ctx.emit("report.md"), md);
    std::printf("wrote %s\n", (ctx.out / "report.md").string().c_str());
}

struct GenCorpusArgs {
    int pairs = 80;
    uint64_t corpus_seed = 1;
    std::string lexicon = "data/lexicon.json";
    std::string out;
};

void cmd_gen_corpus(RunContext& ctx, const GenCorpusArgs& a) {
    auto lex = load_lexicon(ctx, a.lexicon);
    auto corpus = gen_corpus(lex, a.pairs, a.corpus_seed);
    std::printf("%zu pairs (%s -> %s)\n", corpus.pairs.size(),
                corpus.src_language.c_str(), corpus.tgt_language.c_str());
    write_text(ctx.emit("corpus.tsv"), corpus.to_tsv());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantum machine translation workbench"};
    app.require_subcommand(1);

    RunContext ctx;

    auto add_sentence_opts = [&](CLI::App* sub, SentenceArgs& a, bool out_required) {
        sub->add_option("--sentence", a.sentence, "sentence text")->required();
        sub->add_option("--language", a.language, "en or fa")
            ->check(CLI::IsMember({"en", "fa"}));
        sub->add_option("--lexicon", a.lexicon, "lexicon JSON path");
        auto* o = sub->add_option("--out", a.out, "output directory");
        if (out_required) o->required();
    };
    auto base_config = [&](const SentenceArgs& a) {
        ctx.config["sentence"] = a.sentence;
        ctx.config["language"] = a.language;
    };

    SentenceArgs parse_args;
    auto* sub_parse = app.add_subcommand("parse", "type-assign and reduce a sentence");
    add_sentence_opts(sub_parse, parse_args, false);
    sub_parse->callback([&] {
        ctx.command = "parse";
        ctx.set_out(parse_args.out);
        base_config(parse_args);
        cmd_parse(ctx, parse_args);
    });

    SentenceArgs diagram_args;
    auto* sub_diagram = app.add_subcommand("diagram", "wire diagram of a reduction");
    add_sentence_opts(sub_diagram, diagram_args, false);
    sub_diagram->callback([&] {
        ctx.command = "diagram";
        ctx.set_out(diagram_args.out);
        base_config(diagram_args);
        cmd_diagram(ctx, diagram_args);
    });

    CompileArgs compile_args;
    auto* sub_compile = app.add_subcommand("compile", "compile a sentence to a circuit");
    add_sentence_opts(sub_compile, compile_args, false);
    sub_compile->add_option("--seed", compile_args.seed, "parameter seed");
    sub_compile->add_option("--layers", compile_args.layers, "IQP layers")
        ->check(CLI::PositiveNumber);
    sub_compile->callback([&] {
        ctx.command = "compile";
        ctx.set_out(compile_args.out);
        base_config(compile_args);
        ctx.config["seed"] = compile_args.seed;
        ctx.config["layers"] = compile_args.layers;
        cmd_compile(ctx, compile_args);
    });

    SimulateArgs sim_args;
    auto* sub_sim = app.add_subcommand("simulate", "run a circuit and tabulate outcomes");
    sub_sim->add_option("--circuit", sim_args.circuit, "parameterized circuit JSON");
    sub_sim->add_option("--params", sim_args.params, "parameter registry JSON");
    sub_sim->add_option("--bound", sim_args.bound, "bound circuit JSON");
    sub_sim->add_option("--shots", sim_args.shots, "-1 exact, otherwise shot count");
    sub_sim->add_option("--sample-seed", sim_args.sample_seed, "sampling seed");
    sub_sim->add_flag("--postselect", sim_args.apply_postselect,
                      "apply the circuit's post-selection");
    sub_sim->add_option("--out", sim_args.out, "output directory");
    sub_sim->callback([&] {
        ctx.command = "simulate";
        ctx.set_out(sim_args.out);
        ctx.config = {{"shots", sim_args.shots},
                      {"sample_seed", sim_args.sample_seed},
                      {"postselect", sim_args.apply_postselect}};
        cmd_simulate(ctx, sim_args);
    });

    auto add_corpus_opts = [&](CLI::App* sub, CorpusArgs& a, bool out_required) {
        sub->add_option("--corpus", a.corpus, "corpus TSV path")->required();
        sub->add_option("--lexicon", a.lexicon, "lexicon JSON path");
        sub->add_option("--seed", a.seed, "parameter seed");
        sub->add_option("--layers", a.layers, "IQP layers")->check(CLI::PositiveNumber);
        auto* o = sub->add_option("--out", a.out, "output directory");
        if (out_required) o->required();
    };
    auto corpus_config = [&](const CorpusArgs& a) {
        ctx.config["seed"] = a.seed;
        ctx.config["layers"] = a.layers;
    };

    EntropyArgs entropy_args;
    auto* sub_entropy = app.add_subcommand("entropy", "per-sentence circuit entropies");
    add_corpus_opts(sub_entropy, entropy_args, false);
    sub_entropy->add_option("--shots", entropy_args.shots, "-1 exact, otherwise shots");
    sub_entropy->add_option("--sample-seed", entropy_args.sample_seed, "sampling seed");
    sub_entropy->callback([&] {
        ctx.command = "entropy";
        ctx.set_out(entropy_args.out);
        corpus_config(entropy_args);
        ctx.config["shots"] = entropy_args.shots;
        ctx.config["sample_seed"] = entropy_args.sample_seed;
        cmd_entropy(ctx, entropy_args);
    });

    MatchArgs match_args;
    auto* sub_match = app.add_subcommand("match", "entropy matching experiment");
    add_corpus_opts(sub_match, match_args, true);
    sub_match->add_option("--shots", match_args.shots, "-1 exact, otherwise shots");
    sub_match->add_option("--run-seed", match_args.run_seed,
                          "sampling/swap seed for the experiment");
    sub_match->add_flag("--swapped", match_args.swapped, "swapped-angles control run");
    sub_match->add_option("--offset", match_args.offset,
                          "fixed match offset (omit to calibrate)");
    sub_match->callback([&] {
        ctx.command = "match";
        ctx.set_out(match_args.out);
        corpus_config(match_args);
        ctx.config["shots"] = match_args.shots;
        ctx.config["run_seed"] = match_args.run_seed;
        ctx.config["swapped"] = match_args.swapped;
        ctx.config["offset"] =
            match_args.offset >= 0 ? json(match_args.offset) : json("calibrated");
        cmd_match(ctx, match_args);
    });

    EncodeArgs encode_args;
    auto* sub_encode = app.add_subcommand("encode", "tokenize a corpus into a dataset");
    add_corpus_opts(sub_encode, encode_args, true);
    sub_encode->add_option("--bins", encode_args.bins, "angle quantization bins")
        ->check(CLI::PositiveNumber);
    sub_encode->callback([&] {
        ctx.command = "encode";
        ctx.set_out(encode_args.out);
        corpus_config(encode_args);
        ctx.config["bins"] = encode_args.bins;
        cmd_encode(ctx, encode_args);
    });

    TrainArgs train_args;
    auto* sub_train = app.add_subcommand("train", "train a translation model");
    sub_train->add_option("--dataset", train_args.dataset, "dataset JSONL")->required();
    sub_train->add_option("--model", train_args.model, "m1, m2 or m3")
        ->check(CLI::IsMember({"m1", "m2", "m3", "M1", "M2", "M3"}));
    sub_train->add_option("--optimizer", train_args.optimizer, "sgd, adam or rmsprop")
        ->check(CLI::IsMember({"sgd", "adam", "rmsprop"}));
    sub_train->add_option("--lr", train_args.lr, "learning rate (0 = optimizer default)");
    sub_train->add_option("--epochs", train_args.epochs, "training epochs")
        ->check(CLI::PositiveNumber);
    sub_train->add_option("--batch", train_args.batch, "batch size")
        ->check(CLI::PositiveNumber);
    sub_train->add_option("--val-split", train_args.val_split, "validation fraction");
    sub_train->add_option("--units", train_args.units, "LSTM units (0 = variant default)");
    sub_train->add_option("--train-seed", train_args.train_seed, "shuffle/split seed");
    sub_train->add_option("--model-seed", train_args.model_seed, "initialization seed");
    sub_train->add_option("--out", train_args.out, "output directory");
    sub_train->callback([&] {
        ctx.command = "train";
        ctx.set_out(train_args.out);
        ctx.config = {{"model", train_args.model},
                      {"optimizer", train_args.optimizer},
                      {"lr", train_args.lr},
                      {"epochs", train_args.epochs},
                      {"batch", train_args.batch},
                      {"val_split", train_args.val_split},
                      {"units", train_args.units},
                      {"train_seed", train_args.train_seed},
                      {"model_seed", train_args.model_seed}};
        cmd_train(ctx, train_args);
    });

    TranslateArgs translate_args;
    auto* sub_translate = app.add_subcommand("translate", "translate one dataset record");
    sub_translate->add_option("--dataset", translate_args.dataset, "dataset JSONL")
        ->required();
    sub_translate->add_option("--checkpoint", translate_args.checkpoint,
                              "model checkpoint JSON")->required();
    sub_translate->add_option("--id", translate_args.id, "record id");
    sub_translate->add_option("--index", translate_args.index, "record index");
    sub_translate->add_option("--out", translate_args.out, "output directory");
    sub_translate->callback([&] {
        ctx.command = "translate";
        ctx.set_out(translate_args.out);
        ctx.config = {{"id", translate_args.id}, {"index", translate_args.index}};
        cmd_translate(ctx, translate_args);
    });

    ReportArgs report_args;
    auto* sub_report = app.add_subcommand("report", "summarize run artifacts");
    sub_report->add_option("--entropies", report_args.entropies, "entropies.csv path");
    sub_report->add_option("--match-dir", report_args.match_dir, "match run directory");
    sub_report->add_option("--train-dir", report_args.train_dir, "train run directory");
    sub_report->add_option("--out", report_args.out, "output directory")->required();
    sub_report->callback([&] {
        ctx.command = "report";
        ctx.set_out(report_args.out);
        ctx.config = {{"entropies", report_args.entropies},
                      {"match_dir", report_args.match_dir},
                      {"train_dir", report_args.train_dir}};
        cmd_report(ctx, report_args);
    });

    GenCorpusArgs gen_args;
    auto* sub_gen = app.add_subcommand("gen-corpus", "generate a seeded corpus");
    sub_gen->add_option("--pairs", gen_args.pairs, "pair count")
        ->check(CLI::PositiveNumber);
    sub_gen->add_option("--corpus-seed", gen_args.corpus_seed, "generation seed");
    sub_gen->add_option("--lexicon", gen_args.lexicon, "lexicon JSON path");
    sub_gen->add_option("--out", gen_args.out, "output directory")->required();
    sub_gen->callback([&] {
        ctx.command = "gen-corpus";
        ctx.set_out(gen_args.out);
        ctx.config = {{"pairs", gen_args.pairs}, {"corpus_seed", gen_args.corpus_seed}};
        cmd_gen_corpus(ctx, gen_args);
    });

    try {
        app.parse(argc, argv);
        ctx.finish();
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const GrammarError& e) {
        std::fprintf(stderr, "grammar error: %s\n", e.what());
        return 2;
    } catch (const PreconditionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
    return 0;
}
