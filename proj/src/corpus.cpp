#include "qmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "qmt/diagram.hpp"
#include "qmt/rng.hpp"

namespace qmt {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

// Concept categories feeding the sentence templates. The lexicon stays a
// plain type dictionary; the corpus generator owns this world knowledge and
// silently drops concepts the lexicon does not cover in both languages.
const std::vector<std::string> kPersons = {"sara", "bob"};
const std::vector<std::string> kThings = {"book", "pen", "apple"};
const std::vector<std::string> kPlaces = {"bookshop", "park", "school", "library", "garden"};
const std::vector<std::string> kBuyVerbs = {"buy", "take", "bring"};   // <P> V the <T> from the <L>
const std::vector<std::string> kSeeVerbs = {"see", "like"};            // <P> V <object>
const std::vector<std::string> kWalkVerbs = {"walk", "run"};           // <P> V in the <L>

struct Surfaces {
    std::string en;
    std::string fa;
};

class TemplateVocab {
  public:
    explicit TemplateVocab(const Lexicon& lexicon) : lexicon_(lexicon) {}

    std::vector<Surfaces> resolve(const std::vector<std::string>& concepts) const {
        std::vector<Surfaces> out;
        for (const auto& c : concepts) {
            const auto* en = lexicon_.find_concept(c, "en");
            const auto* fa = lexicon_.find_concept(c, "fa");
            if (en && fa) out.push_back({en->surface, fa->surface});
        }
        return out;
    }

  private:
    const Lexicon& lexicon_;
};

void check_reduces(const std::string& sentence, const Lexicon& lexicon,
                   const std::string& language) {
    auto ts = assign_types(sentence, lexicon, language);
    reduce(ts);  // throws UngrammaticalError on failure
}

}  // namespace

std::string corpus_id(int index) {
    std::string id;
    int i = index;
    while (true) {
        id.insert(id.begin(), static_cast<char>('a' + i % 26));
        i = i / 26 - 1;
        if (i < 0) return id;
    }
}

std::string Corpus::to_tsv() const {
    std::ostringstream out;
    out << "#lang\t" << src_language << '\t' << tgt_language << '\n';
    for (const auto& p : pairs) out << p.id << '\t' << p.src << '\t' << p.tgt << '\n';
    return out.str();
}

Corpus Corpus::from_tsv(const std::string& text) {
    Corpus c;
    std::istringstream in(text);
    std::string line;
    bool saw_header = false;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_tabs(line);
        if (!saw_header) {
            if (cells.size() != 3 || cells[0] != "#lang")
                throw IoError("corpus must start with a '#lang<TAB>src<TAB>tgt' header");
            c.src_language = cells[1];
            c.tgt_language = cells[2];
            saw_header = true;
            continue;
        }
        if (cells.size() != 3)
            throw IoError("corpus row needs 3 tab-separated cells, got '" + line + "'");
        if (!ids.insert(cells[0]).second)
            throw IoError("duplicate corpus id '" + cells[0] + "'");
        c.pairs.push_back({cells[0], cells[1], cells[2]});
    }
    if (!saw_header) throw IoError("corpus file is empty");
    return c;
}

Corpus Corpus::load_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read corpus file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_tsv(buf.str());
}

void Corpus::save_tsv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus file " + path);
    out << to_tsv();
    if (!out) throw IoError("short write to " + path);
}

Corpus gen_corpus(const Lexicon& lexicon, int n_pairs, uint64_t seed) {
    if (n_pairs < 0) throw PreconditionError("n_pairs must be >= 0");

    const std::vector<std::pair<std::string, std::string>> attested = {
        {"Sara buys the book from the bookshop", "Sara ketab ra az ketabforoushi mikharad"},
        {"Sara sees Bob", "Sara Bob ra mibinad"},
        {"Sara walks in the park", "Sara dar park rahmiravad"},
        {"Bob walks in the park", "Bob dar park rahmiravad"},
    };

    TemplateVocab vocab(lexicon);
    auto persons = vocab.resolve(kPersons);
    auto things = vocab.resolve(kThings);
    auto places = vocab.resolve(kPlaces);
    auto buy_verbs = vocab.resolve(kBuyVerbs);
    auto see_verbs = vocab.resolve(kSeeVerbs);
    auto walk_verbs = vocab.resolve(kWalkVerbs);

    std::set<std::pair<std::string, std::string>> seen(attested.begin(), attested.end());
    std::vector<std::pair<std::string, std::string>> candidates;
    auto offer = [&](std::string en, std::string fa) {
        if (seen.insert({en, fa}).second) candidates.emplace_back(std::move(en), std::move(fa));
    };

    // <P> buys the <T> from the <L> / <P> <T> ra az <L> mikharad
    for (const auto& p : persons)
        for (const auto& v : buy_verbs)
            for (const auto& t : things)
                for (const auto& l : places)
                    offer(p.en + " " + v.en + " the " + t.en + " from the " + l.en,
                          p.fa + " " + t.fa + " ra az " + l.fa + " " + v.fa);

    // <P> sees <P2> / <P> <P2> ra mibinad   (distinct persons)
    for (const auto& p : persons)
        for (const auto& v : see_verbs)
            for (const auto& o : persons) {
                if (o.en == p.en) continue;
                offer(p.en + " " + v.en + " " + o.en, p.fa + " " + o.fa + " ra " + v.fa);
            }

    // <P> sees the <T> / <P> <T> ra mibinad
    for (const auto& p : persons)
        for (const auto& v : see_verbs)
            for (const auto& t : things)
                offer(p.en + " " + v.en + " the " + t.en, p.fa + " " + t.fa + " ra " + v.fa);

    // <P> walks in the <L> / <P> dar <L> rahmiravad
    for (const auto& p : persons)
        for (const auto& v : walk_verbs)
            for (const auto& l : places)
                offer(p.en + " " + v.en + " in the " + l.en, p.fa + " dar " + l.fa + " " + v.fa);

    int generated = std::max(0, n_pairs - static_cast<int>(attested.size()));
    if (generated > static_cast<int>(candidates.size()))
        throw StructuralError("template exhaustion: can generate at most " +
                              std::to_string(attested.size() + candidates.size()) +
                              " pairs, asked for " + std::to_string(n_pairs));

    Rng rng(mix_seed(seed, fnv1a64("corpus")));
    rng.shuffle(candidates);

    Corpus corpus;
    for (int i = 0; i < n_pairs; ++i) {
        const auto& [en, fa] = i < static_cast<int>(attested.size())
                                   ? attested[i]
                                   : candidates[i - attested.size()];
        check_reduces(en, lexicon, corpus.src_language);
        check_reduces(fa, lexicon, corpus.tgt_language);
        corpus.pairs.push_back({corpus_id(i), en, fa});
    }
    return corpus;
}

std::vector<CircuitPair> compile_corpus(const Corpus& corpus, const Lexicon& lexicon,
                                        ParamRegistry& reg, int iqp_layers) {
    std::vector<CircuitPair> out;
    out.reserve(corpus.pairs.size());
    for (const auto& p : corpus.pairs) {
        auto src_ts = assign_types(p.src, lexicon, corpus.src_language);
        auto tgt_ts = assign_types(p.tgt, lexicon, corpus.tgt_language);
        CircuitPair cp;
        cp.id = p.id;
        cp.src = compile(build_diagram(src_ts, reduce(src_ts)), reg, iqp_layers);
        cp.tgt = compile(build_diagram(tgt_ts, reduce(tgt_ts)), reg, iqp_layers);
        out.push_back(std::move(cp));
    }
    return out;
}

}  // namespace qmt
