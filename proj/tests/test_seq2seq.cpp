#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "qmt/corpus.hpp"
#include "qmt/encode.hpp"
#include "qmt/grammar.hpp"
#include "qmt/rng.hpp"
#include "qmt/seq2seq.hpp"
#include "test_paths.hpp"

using namespace qmt;

namespace {

const Lexicon& lex() {
    static Lexicon l = Lexicon::load_json(test_path("data/lexicon.json"));
    return l;
}

/// Compiled bilingual dataset shared by the slower cases.
const Dataset& pair_dataset() {
    static Dataset d = [] {
        auto corpus = gen_corpus(lex(), 2, 31);
        auto reg = init_params(lex(), 5, 1);
        auto pairs = compile_corpus(corpus, lex(), reg, 1);
        return build_dataset(pairs, reg, 32);
    }();
    return d;
}

/// Synthetic token records: live prefix then PAD tail, ids in [3, vocab).
Dataset tiny_dataset(int vocab, int src_len, int tgt_len, int n, uint64_t seed) {
    Dataset d;
    d.vocabulary = vocab;
    d.src_len = src_len;
    d.tgt_len = tgt_len;
    d.bins = 4;
    d.w_max = 2;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        DatasetRecord r;
        r.id = "r" + std::to_string(i);
        int live = 1 + static_cast<int>(rng.uniform_index(src_len));
        for (int t = 0; t < src_len; ++t)
            r.src.ids.push_back(
                t < live ? 3 + static_cast<int>(rng.uniform_index(vocab - 3)) : 0);
        for (int t = 0; t < tgt_len; ++t)
            r.tgt.ids.push_back(
                t < tgt_len - 1 ? 3 + static_cast<int>(rng.uniform_index(vocab - 3))
                                : 0);
        d.records.push_back(r);
    }
    return d;
}

ModelConfig small_config(ModelVariant v) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.units = v == ModelVariant::M2 ? 5 : 4;
    cfg.vocabulary = 9;
    cfg.src_len = 5;
    cfg.tgt_len = 4;
    return cfg;
}

bool same_tensors(const Model& a, const Model& b) {
    auto ta = a.tensors();
    auto tb = b.tensors();
    if (ta.size() != tb.size()) return false;
    for (size_t i = 0; i < ta.size(); ++i)
        if (*ta[i] != *tb[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("lstm_forward zero parameters give zero outputs") {
    LSTMLayerParams p;
    p.wx = Mat::Zero(8, 3);
    p.wh = Mat::Zero(8, 2);
    p.b = Mat::Zero(8, 1);
    std::vector<Vec> xs(4, Vec::Ones(3));
    LSTMState fin;
    auto hs = lstm_forward(p, xs, &fin);
    REQUIRE(hs.size() == 4);
    for (const Vec& h : hs) CHECK(h.norm() == 0.0);
    CHECK(fin.h.norm() == 0.0);
    CHECK(fin.c.norm() == 0.0);
}

TEST_CASE("lstm_forward length one equals a single cell step") {
    Rng rng(9);
    LSTMLayerParams p;
    p.wx = Mat::Zero(8, 3);
    p.wh = Mat::Zero(8, 2);
    p.b = Mat::Zero(8, 1);
    for (Mat* t : {&p.wx, &p.wh, &p.b})
        for (Eigen::Index r = 0; r < t->rows(); ++r)
            for (Eigen::Index c = 0; c < t->cols(); ++c)
                (*t)(r, c) = rng.uniform_in(-0.5, 0.5);
    Vec x(3);
    x << 0.3, -0.8, 0.25;

    auto hs = lstm_forward(p, {x});
    REQUIRE(hs.size() == 1);

    // hand-rolled cell: gates stacked [input, forget, cell, output]
    Vec z = p.wx * x + p.b.col(0);  // h0 = 0
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (int u = 0; u < 2; ++u) {
        double i = sig(z(u)), f = sig(z(2 + u)), g = std::tanh(z(4 + u)),
               o = sig(z(6 + u));
        (void)f;  // cell state starts at zero
        double c = i * g;
        CHECK(hs[0](u) == doctest::Approx(o * std::tanh(c)).epsilon(1e-12));
    }
}

TEST_CASE("lstm_forward rejects non-finite states") {
    LSTMLayerParams p;
    p.wx = Mat::Constant(8, 3, std::numeric_limits<double>::quiet_NaN());
    p.wh = Mat::Zero(8, 2);
    p.b = Mat::Zero(8, 1);
    std::vector<Vec> xs(2, Vec::Ones(3));
    CHECK_THROWS_AS(lstm_forward(p, xs), NumericError);
}

TEST_CASE("gradients match central finite differences") {
    // worst absolute deviation across all tensors stays at FD-noise level;
    // the per-tensor norm ratio is the scale-free version of the same check
    for (auto v : {ModelVariant::M1, ModelVariant::M2, ModelVariant::M3}) {
        CAPTURE(variant_name(v));
        auto d = tiny_dataset(9, 5, 4, 2, 11);
        auto m = build_model(small_config(v), 7);
        std::vector<int> idx{0, 1};
        auto grads = batch_gradients(m, d, idx);
        auto ts = m.tensors();
        REQUIRE(grads.size() == ts.size());
        const double h = 1e-5;
        for (size_t k = 0; k < ts.size(); ++k) {
            CAPTURE(k);
            double num_norm = 0, ana_norm = 0, diff_norm = 0;
            for (Eigen::Index r = 0; r < ts[k]->rows(); ++r)
                for (Eigen::Index c = 0; c < ts[k]->cols(); ++c) {
                    double keep = (*ts[k])(r, c);
                    (*ts[k])(r, c) = keep + h;
                    double lp = batch_loss(m, d, idx);
                    (*ts[k])(r, c) = keep - h;
                    double lm = batch_loss(m, d, idx);
                    (*ts[k])(r, c) = keep;
                    double num = (lp - lm) / (2 * h);
                    double ana = grads[k](r, c);
                    num_norm += num * num;
                    ana_norm += ana * ana;
                    diff_norm += (num - ana) * (num - ana);
                    // pointwise: relative on large entries, absolute floor on
                    // entries drowned in finite-difference noise
                    CHECK(std::abs(num - ana) <=
                          1e-4 * (std::abs(num) + std::abs(ana)) + 1e-7);
                }
            double rel = std::sqrt(diff_norm) /
                         std::max(std::sqrt(num_norm) + std::sqrt(ana_norm), 1e-12);
            CHECK(rel <= 1e-4);
        }
    }
}

TEST_CASE("build_model is deterministic and sized by the config") {
    auto d = tiny_dataset(9, 5, 4, 1, 1);

    SUBCASE("same seed twice gives identical parameters") {
        auto a = build_model(small_config(ModelVariant::M1), 42);
        auto b = build_model(small_config(ModelVariant::M1), 42);
        CHECK(same_tensors(a, b));
        auto c = build_model(small_config(ModelVariant::M1), 43);
        CHECK(!same_tensors(a, c));
    }

    SUBCASE("M3 parameter count follows the closed form") {
        auto cfg = default_config(ModelVariant::M3, d);
        auto m = build_model(cfg, 0);
        long U = cfg.units, V = cfg.vocabulary;
        CHECK(U == 32);
        long expect = 4 * U * (V + U + 1)      // encoder: wx, wh, b
                      + 4 * U * (2 * U + 1)    // decoder over the repeated context
                      + V * U + V;             // head
        CHECK(m.parameter_count() == expect);
    }

    SUBCASE("M2 output dimension matches the vocabulary") {
        auto m = build_model(default_config(ModelVariant::M2, d), 0);
        CHECK(m.head.w.rows() == d.vocabulary);
        CHECK(m.cfg.units == 100);
        CHECK(m.frame.w.rows() == 24);
        CHECK(m.input_steps() == std::max(d.src_len, d.tgt_len));
    }

    SUBCASE("forget-gate bias block starts at one") {
        auto m = build_model(small_config(ModelVariant::M3), 0);
        int U = m.cfg.units;
        CHECK(m.lstm[0].b.block(U, 0, U, 1).isOnes());
        CHECK(m.lstm[0].b.topRows(U).isZero());
    }

    SUBCASE("degenerate configs are rejected") {
        auto cfg = small_config(ModelVariant::M1);
        cfg.vocabulary = 3;
        CHECK_THROWS_AS(build_model(cfg, 0), PreconditionError);
        cfg = small_config(ModelVariant::M1);
        cfg.src_len = 0;
        CHECK_THROWS_AS(build_model(cfg, 0), PreconditionError);
    }
}

TEST_CASE("optimizers minimize the quadratic probe within budget") {
    // d/dw of 0.5*||w||^2 is w itself; budgets hold the measured crossing
    // steps (40 / 2078 / 1011 on this probe) with margin
    struct Probe {
        OptimizerKind kind;
        double lr;
        int budget;
    };
    for (auto [kind, lr, budget] : {Probe{OptimizerKind::SGD, 0.1, 200},
                                    Probe{OptimizerKind::Adam, 0.001, 2500},
                                    Probe{OptimizerKind::RMSprop, 0.001, 1500}}) {
        std::string name = optimizer_name(kind);
        CAPTURE(name);
        Mat w = Mat::Ones(8, 1);
        auto opt = OptimizerState::make(kind);
        opt.lr = lr;
        int steps = 0;
        while (0.5 * w.squaredNorm() >= 1e-3 && steps < budget) {
            opt.apply({&w}, {w});
            ++steps;
        }
        CHECK(0.5 * w.squaredNorm() < 1e-3);
        CHECK(steps < budget);
        if (kind == OptimizerKind::SGD) {
            // geometric decay: ||w|| = 0.9^n * sqrt(8) first dips below
            // sqrt(2e-3) at n = 40
            CHECK(steps == 40);
        }
    }
}

TEST_CASE("zero learning rate leaves parameters fixed at constant loss") {
    auto d = tiny_dataset(9, 5, 4, 3, 2);
    auto m = build_model(small_config(ModelVariant::M3), 5);
    auto before = build_model(small_config(ModelVariant::M3), 5);
    auto opt = OptimizerState::make(OptimizerKind::SGD);
    opt.lr = 0.0;
    TrainOptions topt;
    topt.epochs = 4;
    topt.batch = 2;
    topt.val_split = 0.0;
    auto hist = train(m, d, opt, topt);
    REQUIRE(hist.epochs.size() == 4);
    CHECK(same_tensors(m, before));
    for (const auto& e : hist.epochs) {
        CHECK(e.train_loss == doctest::Approx(hist.epochs[0].train_loss).epsilon(1e-15));
        CHECK(e.val_loss == doctest::Approx(hist.epochs[0].val_loss).epsilon(1e-15));
    }
}

TEST_CASE("uniform logits score ln V") {
    auto d = tiny_dataset(9, 5, 4, 2, 3);
    auto m = build_model(small_config(ModelVariant::M2), 1);
    for (Mat* t : m.tensors()) t->setZero();
    auto ev = evaluate(m, d);
    CHECK(ev.loss == doctest::Approx(std::log(9.0)).epsilon(1e-12));
    CHECK(batch_loss(m, d, {0, 1}) == doctest::Approx(std::log(9.0)).epsilon(1e-12));
}

TEST_CASE("training fits a small synthetic task and its metrics reach zero") {
    auto cfg = small_config(ModelVariant::M1);
    cfg.units = 16;
    auto d = tiny_dataset(9, 5, 4, 4, 8);
    auto m = build_model(cfg, 6);
    auto opt = OptimizerState::make(OptimizerKind::Adam);
    opt.lr = 0.01;
    TrainOptions topt;
    topt.epochs = 400;
    topt.batch = 4;
    topt.val_split = 0.0;
    auto hist = train(m, d, opt, topt);
    REQUIRE(!hist.epochs.empty());
    CHECK(!hist.diverged);
    CHECK(hist.epochs.back().train_loss < 0.02);
    // teacher-forced argmax is exact once the loss collapses
    auto ev = evaluate(m, d);
    CHECK(ev.mae == 0.0);
    CHECK(ev.mse == 0.0);
    CHECK(hist.epochs.back().train_loss <= hist.epochs.front().train_loss);
}

TEST_CASE("training is deterministic given the seeds") {
    auto d = tiny_dataset(9, 5, 4, 6, 4);
    auto run = [&] {
        auto m = build_model(small_config(ModelVariant::M3), 13);
        auto opt = OptimizerState::make(OptimizerKind::Adam);
        TrainOptions topt;
        topt.epochs = 5;
        topt.batch = 2;
        topt.seed = 3;
        auto hist = train(m, d, opt, topt);
        return std::pair{hist.to_csv(), std::move(m)};
    };
    auto [csv_a, model_a] = run();
    auto [csv_b, model_b] = run();
    CHECK(csv_a == csv_b);
    CHECK(same_tensors(model_a, model_b));
}

TEST_CASE("history CSV carries one labelled row per epoch") {
    auto d = tiny_dataset(9, 5, 4, 6, 4);
    auto m = build_model(small_config(ModelVariant::M3), 13);
    auto opt = OptimizerState::make(OptimizerKind::SGD);
    TrainOptions topt;
    topt.epochs = 3;
    topt.batch = 2;
    auto hist = train(m, d, opt, topt);
    auto csv = hist.to_csv();
    CHECK(csv.rfind("epoch,train_loss,val_loss,mae,mse\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("\n1,") != std::string::npos);
    CHECK(csv.find("\n3,") != std::string::npos);
}

TEST_CASE("divergence truncates history instead of throwing") {
    auto d = tiny_dataset(9, 5, 4, 2, 3);
    auto m = build_model(small_config(ModelVariant::M3), 5);
    m.lstm[0].wx(0, 0) = std::numeric_limits<double>::quiet_NaN();
    auto opt = OptimizerState::make(OptimizerKind::SGD);
    TrainOptions topt;
    topt.epochs = 3;
    topt.val_split = 0.0;
    auto hist = train(m, d, opt, topt);
    CHECK(hist.diverged);
    CHECK(hist.epochs.empty());
}

TEST_CASE("checkpoints round-trip the model and optimizer") {
    auto d = tiny_dataset(9, 5, 4, 4, 8);
    auto cfg = small_config(ModelVariant::M2);
    auto path = test_tmp_path("seq2seq_ckpt.json");

    auto m = build_model(cfg, 17);
    auto opt = OptimizerState::make(OptimizerKind::Adam);
    TrainOptions topt;
    topt.epochs = 2;
    topt.batch = 2;
    topt.val_split = 0.0;
    train(m, d, opt, topt);
    save_checkpoint(m, opt, 2, path);

    OptimizerState opt2;
    int epoch = -1;
    auto m2 = load_checkpoint(path, &opt2, &epoch);
    CHECK(epoch == 2);
    CHECK(m2.cfg == m.cfg);
    CHECK(same_tensors(m, m2));
    CHECK(opt2.kind == OptimizerKind::Adam);
    CHECK(opt2.step == opt.step);
    REQUIRE(opt2.m1.size() == opt.m1.size());
    REQUIRE(opt2.m2.size() == opt.m2.size());
    for (size_t i = 0; i < opt.m1.size(); ++i) CHECK(opt2.m1[i] == opt.m1[i]);
    for (size_t i = 0; i < opt.m2.size(); ++i) CHECK(opt2.m2[i] == opt.m2[i]);

    SUBCASE("training continues identically after a reload") {
        auto cont_a = m;
        auto opt_a = opt;
        auto hist_a = train(cont_a, d, opt_a, topt);
        auto hist_b = train(m2, d, opt2, topt);
        CHECK(hist_a.to_csv() == hist_b.to_csv());
        CHECK(same_tensors(cont_a, m2));
    }

    SUBCASE("a missing file raises an io error") {
        CHECK_THROWS_AS(load_checkpoint(test_tmp_path("absent_ckpt.json")), IoError);
    }

    SUBCASE("a truncated file raises an io error") {
        {
            std::ofstream bad(path, std::ios::binary | std::ios::trunc);
            bad << "{\"version\":1,\"config\"";
        }
        CHECK_THROWS_AS(load_checkpoint(path), IoError);
    }
    std::filesystem::remove(path);
}

TEST_CASE("translate on the compiled pair corpus") {
    const Dataset& d = pair_dataset();
    REQUIRE(d.records.size() == 2);

    SUBCASE("an untrained model still emits a decodable stream or reports one") {
        auto m = build_model(default_config(ModelVariant::M1, d), 1);
        try {
            auto tr = translate(m, d, d.records[0]);
            CHECK(tr.repairs > 0);  // raw argmax of a fresh model is not grammatical
            CHECK(tr.circuit.n_qubits == d.records[0].tgt.meta.n_qubits);
            CHECK(!tr.tokens.ids.empty());
        } catch (const StructuralError& e) {
            CHECK(std::string(e.what()).find("raw tokens") != std::string::npos);
        }
    }

    SUBCASE("the source length is validated") {
        auto m = build_model(default_config(ModelVariant::M1, d), 1);
        DatasetRecord bad = d.records[0];
        bad.src.ids.pop_back();
        CHECK_THROWS_AS(translate(m, d, bad), PreconditionError);
    }
}

TEST_CASE("untrained reference model reproduces the frozen evaluation triple") {
    const Dataset& d = pair_dataset();
    CHECK(d.vocabulary == 515);
    CHECK(d.src_len == 123);
    CHECK(d.tgt_len == 106);
    auto m = build_model(default_config(ModelVariant::M3, d), 21);
    auto ev = evaluate(m, d);
    CHECK(ev.loss == doctest::Approx(6.244273121911732).epsilon(1e-9));
    CHECK(ev.mae == doctest::Approx(0.74963592233009624).epsilon(1e-9));
    CHECK(ev.mse == doctest::Approx(0.6293436747529968).epsilon(1e-9));
}

TEST_CASE("batch helpers validate their inputs") {
    auto d = tiny_dataset(9, 5, 4, 2, 3);
    auto m = build_model(small_config(ModelVariant::M3), 5);
    CHECK_THROWS_AS(batch_loss(m, d, {7}), PreconditionError);
    Dataset empty = d;
    empty.records.clear();
    CHECK_THROWS_AS(evaluate(m, empty), PreconditionError);
    auto opt = OptimizerState::make(OptimizerKind::SGD);
    TrainOptions topt;
    topt.epochs = 0;
    CHECK_THROWS_AS(train(m, d, opt, topt), PreconditionError);
    CHECK_THROWS_AS(train(m, empty, opt, topt), PreconditionError);

    // mismatched sequence lengths are caught before any math runs
    auto wrong = tiny_dataset(9, 6, 4, 1, 3);
    CHECK_THROWS_AS(batch_loss(m, wrong, {0}), PreconditionError);
}
