#include "qmt/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "qmt/rng.hpp"

namespace qmt {

namespace {

constexpr int kFrameUnits = 24;  // M2's linear frame layer width

using ArrXX = Eigen::ArrayXXd;
using IntMat = Eigen::MatrixXi;

ArrXX sigmoid(const ArrXX& x) { return 1.0 / (1.0 + (-x).exp()); }

/// Activations of one LSTM layer over a lockstep batch; every record in the
/// batch shares the padded sequence length, so step t is a U x B matrix and
/// the recurrences run as matrix products instead of per-record vector ops.
struct LayerCache {
    std::vector<Mat> H, C, I, F, G, O, TC;  // per step, U x B
    Mat h0, c0;                             // U x B
    const IntMat* toks = nullptr;           // (steps x B) one-hot inputs, or
    const std::vector<Mat>* X = nullptr;    // per-step dense inputs (I x B)
    int steps = 0;
    int batch = 0;
};

LayerCache run_layer(const LSTMLayerParams& p, const IntMat* toks,
                     const std::vector<Mat>* X, const Mat* h0, const Mat* c0,
                     const char* where) {
    const int U = p.units();
    const int T = toks ? static_cast<int>(toks->rows()) : static_cast<int>(X->size());
    const int B = toks ? static_cast<int>(toks->cols())
                       : static_cast<int>(X->front().cols());
    LayerCache cc;
    cc.toks = toks;
    cc.X = X;
    cc.steps = T;
    cc.batch = B;
    for (auto* v : {&cc.H, &cc.C, &cc.I, &cc.F, &cc.G, &cc.O, &cc.TC}) v->reserve(T);
    cc.h0 = h0 ? *h0 : Mat::Zero(U, B);
    cc.c0 = c0 ? *c0 : Mat::Zero(U, B);

    Mat h = cc.h0;
    Mat c = cc.c0;
    for (int t = 0; t < T; ++t) {
        Mat z = p.b.col(0).replicate(1, B);
        z.noalias() += p.wh * h;
        if (toks) {
            for (int b = 0; b < B; ++b) {
                int tok = (*toks)(t, b);
                if (tok < 0 || tok >= p.input())
                    throw PreconditionError("token id " + std::to_string(tok) +
                                            " is outside the model vocabulary");
                z.col(b) += p.wx.col(tok);
            }
        } else {
            z.noalias() += p.wx * (*X)[t];
        }
        ArrXX i = sigmoid(z.topRows(U).array());
        ArrXX f = sigmoid(z.middleRows(U, U).array());
        ArrXX g = z.middleRows(2 * U, U).array().tanh();
        ArrXX o = sigmoid(z.bottomRows(U).array());
        ArrXX cn = f * c.array() + i * g;
        ArrXX tc = cn.tanh();
        cc.I.push_back(i.matrix());
        cc.F.push_back(f.matrix());
        cc.G.push_back(g.matrix());
        cc.O.push_back(o.matrix());
        cc.C.push_back(cn.matrix());
        cc.TC.push_back(tc.matrix());
        c = cn.matrix();
        h = (o * tc).matrix();
        cc.H.push_back(h);
    }
    // NaN/inf sticks to the recurrent state once it appears
    if (T > 0 && (!h.allFinite() || !c.allFinite()))
        throw NumericError(std::string("non-finite LSTM state in ") + where);
    return cc;
}

/// Backpropagation through time over the batch. dH_ext (nullable) carries
/// per-step gradients into the hidden outputs; dh_fin/dc_fin add gradient
/// into the final state (encoder-decoder handoffs). Fills dX for dense
/// inputs and the initial-state gradient on request.
void back_layer(const LSTMLayerParams& p, const LayerCache& cc,
                const std::vector<Mat>* dH_ext, const Mat* dh_fin, const Mat* dc_fin,
                Mat& g_wx, Mat& g_wh, Mat& g_b, std::vector<Mat>* dX, Mat* dh0,
                Mat* dc0) {
    const int U = p.units();
    const int B = cc.batch;
    Mat dh_carry = dh_fin ? *dh_fin : Mat::Zero(U, B);
    Mat dc_carry = dc_fin ? *dc_fin : Mat::Zero(U, B);
    Mat dz(4 * U, B);
    for (int t = cc.steps - 1; t >= 0; --t) {
        ArrXX dh = dh_carry.array();
        if (dH_ext) dh += (*dH_ext)[t].array();
        ArrXX i = cc.I[t].array();
        ArrXX f = cc.F[t].array();
        ArrXX g = cc.G[t].array();
        ArrXX o = cc.O[t].array();
        ArrXX tc = cc.TC[t].array();
        ArrXX c_prev = (t ? cc.C[t - 1] : cc.c0).array();

        ArrXX dc = dc_carry.array() + dh * o * (1.0 - tc * tc);
        dz.topRows(U) = (dc * g * i * (1.0 - i)).matrix();
        dz.middleRows(U, U) = (dc * c_prev * f * (1.0 - f)).matrix();
        dz.middleRows(2 * U, U) = (dc * i * (1.0 - g * g)).matrix();
        dz.bottomRows(U) = (dh * tc * o * (1.0 - o)).matrix();

        const Mat& h_prev = t ? cc.H[t - 1] : cc.h0;
        g_wh.noalias() += dz * h_prev.transpose();
        g_b.col(0) += dz.rowwise().sum();
        if (cc.toks) {
            for (int b = 0; b < B; ++b) g_wx.col((*cc.toks)(t, b)) += dz.col(b);
        } else {
            g_wx.noalias() += dz * (*cc.X)[t].transpose();
            if (dX) (*dX)[t].noalias() = p.wx.transpose() * dz;
        }
        dh_carry.noalias() = p.wh.transpose() * dz;
        dc_carry = (dc * f).matrix();
    }
    if (dh0) *dh0 = dh_carry;
    if (dc0) *dc0 = dc_carry;
}

struct ForwardPass {
    std::vector<LayerCache> layers;
    IntMat src;               // (input steps x B)
    IntMat dec;               // M1 teacher-forced decoder tokens
    std::vector<Mat> repeats; // M3 decoder inputs, context repeated per step
    std::vector<Mat> frame;   // M2 linear frame activations per step (24 x B)
    std::vector<Mat> logits;  // per output step, V x B
    int batch = 0;
};

void check_record(const Model& m, const Dataset& d, int i) {
    if (i < 0 || i >= static_cast<int>(d.records.size()))
        throw PreconditionError("record index " + std::to_string(i) +
                                " outside the dataset");
    if (static_cast<int>(d.records[i].src.ids.size()) != m.cfg.src_len ||
        static_cast<int>(d.records[i].tgt.ids.size()) != m.cfg.tgt_len)
        throw PreconditionError("record " + d.records[i].id +
                                " does not match the model's sequence lengths");
}

/// Teacher-forced pass over a lockstep batch of dataset records.
ForwardPass forward_batch(const Model& m, const Dataset& d,
                          const std::vector<int>& idx) {
    const auto& cfg = m.cfg;
    const int B = static_cast<int>(idx.size());
    ForwardPass fp;
    fp.batch = B;
    fp.layers.reserve(3);

    fp.src.resize(m.input_steps(), B);
    for (int b = 0; b < B; ++b) {
        check_record(m, d, idx[b]);
        const auto& ids = d.records[idx[b]].src.ids;
        for (int t = 0; t < fp.src.rows(); ++t)
            fp.src(t, b) = t < static_cast<int>(ids.size()) ? ids[t] : kPadToken;
    }

    auto head_over = [&](const std::vector<Mat>& hs) {
        fp.logits.reserve(hs.size());
        for (const Mat& h : hs)
            fp.logits.push_back((m.head.w * h).colwise() + m.head.b.col(0));
    };

    switch (cfg.variant) {
        case ModelVariant::M1: {
            fp.layers.push_back(run_layer(m.lstm[0], &fp.src, nullptr, nullptr,
                                          nullptr, "encoder layer 1"));
            fp.layers.push_back(run_layer(m.lstm[1], nullptr, &fp.layers[0].H,
                                          nullptr, nullptr, "encoder layer 2"));
            fp.dec.resize(cfg.tgt_len, B);
            for (int b = 0; b < B; ++b) {
                const auto& tgt = d.records[idx[b]].tgt.ids;
                fp.dec(0, b) = kPadToken;  // PAD doubles as the start token
                for (int t = 1; t < cfg.tgt_len; ++t) fp.dec(t, b) = tgt[t - 1];
            }
            Mat h0 = fp.layers[1].H.back();
            Mat c0 = fp.layers[1].C.back();
            fp.layers.push_back(run_layer(m.lstm[2], &fp.dec, nullptr, &h0, &c0,
                                          "decoder"));
            head_over(fp.layers[2].H);
            break;
        }
        case ModelVariant::M2: {
            fp.layers.push_back(run_layer(m.lstm[0], &fp.src, nullptr, nullptr,
                                          nullptr, "layer 1"));
            fp.layers.push_back(run_layer(m.lstm[1], nullptr, &fp.layers[0].H,
                                          nullptr, nullptr, "layer 2"));
            fp.frame.reserve(fp.layers[1].H.size());
            for (const Mat& h : fp.layers[1].H)
                fp.frame.push_back((m.frame.w * h).colwise() + m.frame.b.col(0));
            fp.logits.reserve(fp.frame.size());
            for (const Mat& f : fp.frame)
                fp.logits.push_back((m.head.w * f).colwise() + m.head.b.col(0));
            break;
        }
        case ModelVariant::M3: {
            fp.layers.push_back(run_layer(m.lstm[0], &fp.src, nullptr, nullptr,
                                          nullptr, "encoder"));
            Mat context = fp.layers[0].H.back();
            fp.repeats.assign(cfg.tgt_len, context);
            fp.layers.push_back(run_layer(m.lstm[1], nullptr, &fp.repeats, nullptr,
                                          nullptr, "decoder"));
            head_over(fp.layers[1].H);
            break;
        }
    }
    return fp;
}

/// Accumulate parameter gradients for the batch given dL/dlogits per step.
void backward_batch(const Model& m, const ForwardPass& fp,
                    const std::vector<Mat>& dlogits, std::vector<Mat>& grads) {
    auto lstm_slot = [&](size_t layer) -> std::array<Mat*, 3> {
        return {&grads[3 * layer], &grads[3 * layer + 1], &grads[3 * layer + 2]};
    };
    const size_t after_lstm = 3 * m.lstm.size();
    const int steps = static_cast<int>(dlogits.size());

    auto head_back = [&](const std::vector<Mat>& hs, Mat& g_w, Mat& g_b,
                         const Mat& w) {
        std::vector<Mat> dH(steps);
        for (int t = 0; t < steps; ++t) {
            g_w.noalias() += dlogits[t] * hs[t].transpose();
            g_b.col(0) += dlogits[t].rowwise().sum();
            dH[t].noalias() = w.transpose() * dlogits[t];
        }
        return dH;
    };

    switch (m.cfg.variant) {
        case ModelVariant::M1: {
            auto dHdec = head_back(fp.layers[2].H, grads[after_lstm],
                                   grads[after_lstm + 1], m.head.w);
            auto [dwx, dwh, db] = lstm_slot(2);
            Mat dh0, dc0;
            back_layer(m.lstm[2], fp.layers[2], &dHdec, nullptr, nullptr, *dwx, *dwh,
                       *db, nullptr, &dh0, &dc0);

            auto [ewx2, ewh2, eb2] = lstm_slot(1);
            std::vector<Mat> dH1(fp.layers[0].steps);
            back_layer(m.lstm[1], fp.layers[1], nullptr, &dh0, &dc0, *ewx2, *ewh2,
                       *eb2, &dH1, nullptr, nullptr);

            auto [ewx1, ewh1, eb1] = lstm_slot(0);
            back_layer(m.lstm[0], fp.layers[0], &dH1, nullptr, nullptr, *ewx1, *ewh1,
                       *eb1, nullptr, nullptr, nullptr);
            break;
        }
        case ModelVariant::M2: {
            // head over the 24-unit frames, then the frame layer itself
            std::vector<Mat> dframe(steps);
            for (int t = 0; t < steps; ++t) {
                grads[after_lstm + 2].noalias() += dlogits[t] * fp.frame[t].transpose();
                grads[after_lstm + 3].col(0) += dlogits[t].rowwise().sum();
                dframe[t].noalias() = m.head.w.transpose() * dlogits[t];
            }
            std::vector<Mat> dH2(steps);
            for (int t = 0; t < steps; ++t) {
                grads[after_lstm].noalias() +=
                    dframe[t] * fp.layers[1].H[t].transpose();
                grads[after_lstm + 1].col(0) += dframe[t].rowwise().sum();
                dH2[t].noalias() = m.frame.w.transpose() * dframe[t];
            }
            auto [wx2, wh2, b2] = lstm_slot(1);
            std::vector<Mat> dH1(fp.layers[0].steps);
            back_layer(m.lstm[1], fp.layers[1], &dH2, nullptr, nullptr, *wx2, *wh2,
                       *b2, &dH1, nullptr, nullptr);
            auto [wx1, wh1, b1] = lstm_slot(0);
            back_layer(m.lstm[0], fp.layers[0], &dH1, nullptr, nullptr, *wx1, *wh1,
                       *b1, nullptr, nullptr, nullptr);
            break;
        }
        case ModelVariant::M3: {
            auto dHdec = head_back(fp.layers[1].H, grads[after_lstm],
                                   grads[after_lstm + 1], m.head.w);
            auto [wx2, wh2, b2] = lstm_slot(1);
            std::vector<Mat> dRep(m.cfg.tgt_len);
            back_layer(m.lstm[1], fp.layers[1], &dHdec, nullptr, nullptr, *wx2, *wh2,
                       *b2, &dRep, nullptr, nullptr);

            // every repeated step fed the same context column
            Mat dcontext = Mat::Zero(m.lstm[0].units(), fp.batch);
            for (const Mat& dr : dRep) dcontext += dr;
            auto [wx1, wh1, b1] = lstm_slot(0);
            back_layer(m.lstm[0], fp.layers[0], nullptr, &dcontext, nullptr, *wx1,
                       *wh1, *b1, nullptr, nullptr, nullptr);
            break;
        }
    }
}

Vec softmax_of(const Vec& logits) {
    Vec p = (logits.array() - logits.maxCoeff()).exp().matrix();
    p /= p.sum();
    return p;
}

std::vector<int> labels_for(const Model& m, const DatasetRecord& r) {
    std::vector<int> out = r.tgt.ids;
    out.resize(m.output_steps(), kPadToken);  // M2 stretches to the shared span
    return out;
}

std::vector<int> all_indices(const Dataset& d) {
    std::vector<int> idx(d.records.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    return idx;
}

/// Loss (and optionally gradients) over one lockstep batch. Returns the
/// summed cross-entropy over non-PAD positions; tokens_out counts them.
/// Gradient scaling is deferred to the caller via inv_total.
double batch_pass(const Model& m, const Dataset& d, const std::vector<int>& idx,
                  std::vector<Mat>* grads, double inv_total, long* tokens_out) {
    auto fp = forward_batch(m, d, idx);
    const int steps = static_cast<int>(fp.logits.size());
    std::vector<Mat> dlogits;
    if (grads)
        dlogits.assign(steps, Mat::Zero(m.cfg.vocabulary, fp.batch));

    double loss = 0.0;
    long tokens = 0;
    for (int b = 0; b < fp.batch; ++b) {
        auto labels = labels_for(m, d.records[idx[b]]);
        for (int t = 0; t < steps; ++t) {
            if (labels[t] == kPadToken) continue;
            Vec p = softmax_of(fp.logits[t].col(b));
            loss += -std::log(std::max(p(labels[t]), 1e-300));
            ++tokens;
            if (grads) {
                p(labels[t]) -= 1.0;
                dlogits[t].col(b) = p * inv_total;
            }
        }
    }
    if (grads) backward_batch(m, fp, dlogits, *grads);
    if (tokens_out) *tokens_out = tokens;
    return loss;
}

long count_tokens(const Model& m, const Dataset& d, const std::vector<int>& idx) {
    long total = 0;
    for (int i : idx) {
        check_record(m, d, i);
        for (int id : labels_for(m, d.records[i]))
            if (id != kPadToken) ++total;
    }
    return total;
}

std::vector<Mat> zero_like(const Model& m) {
    std::vector<Mat> grads;
    for (const Mat* t : m.tensors()) grads.push_back(Mat::Zero(t->rows(), t->cols()));
    return grads;
}

std::string fmt17(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

std::vector<double> mat_flat(const Mat& m) {
    std::vector<double> out;
    out.reserve(m.size());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    return out;
}

void mat_fill(Mat& m, const std::vector<double>& flat, const std::string& name) {
    if (static_cast<Eigen::Index>(flat.size()) != m.size())
        throw IoError("checkpoint tensor " + name + " has " +
                      std::to_string(flat.size()) + " values, expected " +
                      std::to_string(m.size()));
    size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[k++];
}

}  // namespace

std::vector<Vec> lstm_forward(const LSTMLayerParams& p, const std::vector<Vec>& xs,
                              LSTMState* final_state) {
    std::vector<Mat> steps;
    steps.reserve(xs.size());
    for (const Vec& x : xs) {
        if (x.size() != p.input())
            throw PreconditionError("LSTM input width does not match the layer");
        steps.push_back(x);
    }
    if (steps.empty()) {
        if (final_state) {
            final_state->h = Vec::Zero(p.units());
            final_state->c = Vec::Zero(p.units());
        }
        return {};
    }
    auto cc = run_layer(p, nullptr, &steps, nullptr, nullptr, "lstm_forward");
    std::vector<Vec> hs;
    hs.reserve(cc.steps);
    for (const Mat& h : cc.H) hs.push_back(h.col(0));
    if (final_state) {
        final_state->h = cc.H.back().col(0);
        final_state->c = cc.C.back().col(0);
    }
    return hs;
}

const char* variant_name(ModelVariant v) {
    switch (v) {
        case ModelVariant::M1: return "M1";
        case ModelVariant::M2: return "M2";
        case ModelVariant::M3: return "M3";
    }
    return "?";
}

ModelVariant variant_from_name(const std::string& name) {
    if (name == "M1" || name == "m1") return ModelVariant::M1;
    if (name == "M2" || name == "m2") return ModelVariant::M2;
    if (name == "M3" || name == "m3") return ModelVariant::M3;
    throw PreconditionError("unknown model variant: " + name);
}

ModelConfig default_config(ModelVariant v, const Dataset& d) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.units = v == ModelVariant::M1 ? 64 : v == ModelVariant::M2 ? 100 : 32;
    cfg.vocabulary = d.vocabulary;
    cfg.src_len = d.src_len;
    cfg.tgt_len = d.tgt_len;
    return cfg;
}

std::vector<Mat*> Model::tensors() {
    std::vector<Mat*> out;
    for (auto& l : lstm) {
        out.push_back(&l.wx);
        out.push_back(&l.wh);
        out.push_back(&l.b);
    }
    if (cfg.variant == ModelVariant::M2) {
        out.push_back(&frame.w);
        out.push_back(&frame.b);
    }
    out.push_back(&head.w);
    out.push_back(&head.b);
    return out;
}

std::vector<const Mat*> Model::tensors() const {
    std::vector<const Mat*> out;
    for (auto* t : const_cast<Model*>(this)->tensors()) out.push_back(t);
    return out;
}

std::vector<std::string> Model::tensor_names() const {
    std::vector<std::string> out;
    for (size_t l = 0; l < lstm.size(); ++l)
        for (const char* part : {"wx", "wh", "b"})
            out.push_back("lstm" + std::to_string(l) + "/" + part);
    if (cfg.variant == ModelVariant::M2) {
        out.push_back("frame/w");
        out.push_back("frame/b");
    }
    out.push_back("head/w");
    out.push_back("head/b");
    return out;
}

long Model::parameter_count() const {
    long n = 0;
    for (const Mat* t : tensors()) n += static_cast<long>(t->size());
    return n;
}

int Model::input_steps() const {
    return cfg.variant == ModelVariant::M2 ? std::max(cfg.src_len, cfg.tgt_len)
                                           : cfg.src_len;
}

int Model::output_steps() const {
    return cfg.variant == ModelVariant::M2 ? std::max(cfg.src_len, cfg.tgt_len)
                                           : cfg.tgt_len;
}

Model build_model(const ModelConfig& cfg_in, uint64_t seed) {
    ModelConfig cfg = cfg_in;
    if (cfg.units == 0)
        cfg.units = cfg.variant == ModelVariant::M1   ? 64
                    : cfg.variant == ModelVariant::M2 ? 100
                                                      : 32;
    if (cfg.vocabulary <= 3)
        throw PreconditionError("model vocabulary must exceed the separator tokens");
    if (cfg.src_len < 1 || cfg.tgt_len < 1 || cfg.units < 1)
        throw PreconditionError("model dimensions must be positive");

    Model m;
    m.cfg = cfg;
    const int U = cfg.units;
    const int V = cfg.vocabulary;
    auto layer = [&](int input) {
        LSTMLayerParams p;
        p.wx = Mat::Zero(4 * U, input);
        p.wh = Mat::Zero(4 * U, U);
        p.b = Mat::Zero(4 * U, 1);
        p.b.block(U, 0, U, 1).setOnes();  // forget gate starts open
        return p;
    };
    switch (cfg.variant) {
        case ModelVariant::M1:
            m.lstm = {layer(V), layer(U), layer(V)};
            m.head = {Mat::Zero(V, U), Mat::Zero(V, 1)};
            break;
        case ModelVariant::M2:
            m.lstm = {layer(V), layer(U)};
            m.frame = {Mat::Zero(kFrameUnits, U), Mat::Zero(kFrameUnits, 1)};
            m.head = {Mat::Zero(V, kFrameUnits), Mat::Zero(V, 1)};
            break;
        case ModelVariant::M3:
            m.lstm = {layer(V), layer(U)};
            m.head = {Mat::Zero(V, U), Mat::Zero(V, 1)};
            break;
    }

    Rng rng(mix_seed(seed, fnv1a64("model-init")));
    auto names = m.tensor_names();
    auto tensors = m.tensors();
    for (size_t i = 0; i < tensors.size(); ++i) {
        if (names[i].ends_with("/b")) continue;  // biases keep their fixed init
        double s = 1.0 / std::sqrt(static_cast<double>(tensors[i]->cols()));
        for (Eigen::Index r = 0; r < tensors[i]->rows(); ++r)
            for (Eigen::Index c = 0; c < tensors[i]->cols(); ++c)
                (*tensors[i])(r, c) = rng.uniform_in(-s, s);
    }
    return m;
}

const char* optimizer_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::SGD: return "sgd";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::RMSprop: return "rmsprop";
    }
    return "?";
}

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "sgd" || name == "SGD") return OptimizerKind::SGD;
    if (name == "adam" || name == "Adam") return OptimizerKind::Adam;
    if (name == "rmsprop" || name == "RMSprop") return OptimizerKind::RMSprop;
    throw PreconditionError("unknown optimizer: " + name);
}

OptimizerState OptimizerState::make(OptimizerKind kind) {
    OptimizerState o;
    o.kind = kind;
    o.lr = kind == OptimizerKind::SGD ? 0.01 : 0.001;
    return o;
}

void OptimizerState::apply(std::vector<Mat*> params, const std::vector<Mat>& grads) {
    if (params.size() != grads.size())
        throw PreconditionError("optimizer got mismatched parameter/gradient lists");
    if (kind != OptimizerKind::SGD && m2.empty()) {
        for (const Mat* p : params) {
            if (kind == OptimizerKind::Adam)
                m1.push_back(Mat::Zero(p->rows(), p->cols()));
            m2.push_back(Mat::Zero(p->rows(), p->cols()));
        }
    }
    ++step;
    for (size_t i = 0; i < params.size(); ++i) {
        Mat& p = *params[i];
        const Mat& g = grads[i];
        if (p.rows() != g.rows() || p.cols() != g.cols())
            throw PreconditionError("gradient shape does not match its parameter");
        switch (kind) {
            case OptimizerKind::SGD:
                p -= lr * g;
                break;
            case OptimizerKind::Adam: {
                m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
                m2[i] = beta2 * m2[i] + (1.0 - beta2) * g.cwiseProduct(g);
                double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                p.array() -=
                    lr * (m1[i].array() / c1) / ((m2[i].array() / c2).sqrt() + eps);
                break;
            }
            case OptimizerKind::RMSprop:
                m2[i] = rho * m2[i] + (1.0 - rho) * g.cwiseProduct(g);
                p.array() -= lr * g.array() / (m2[i].array().sqrt() + eps);
                break;
        }
    }
}

double batch_loss(const Model& m, const Dataset& d, const std::vector<int>& idx) {
    auto use = idx.empty() ? all_indices(d) : idx;
    long total = count_tokens(m, d, use);
    if (total == 0) throw PreconditionError("batch has no supervised positions");
    return batch_pass(m, d, use, nullptr, 0.0, nullptr) / static_cast<double>(total);
}

std::vector<Mat> batch_gradients(const Model& m, const Dataset& d,
                                 const std::vector<int>& idx, double* loss_out) {
    auto use = idx.empty() ? all_indices(d) : idx;
    long total = count_tokens(m, d, use);
    if (total == 0) throw PreconditionError("batch has no supervised positions");
    auto grads = zero_like(m);
    double loss = batch_pass(m, d, use, &grads, 1.0 / static_cast<double>(total),
                             nullptr);
    if (loss_out) *loss_out = loss / static_cast<double>(total);
    return grads;
}

EvalStats evaluate(const Model& m, const Dataset& d, const std::vector<int>& idx) {
    auto use = idx.empty() ? all_indices(d) : idx;
    if (use.empty()) throw PreconditionError("evaluate needs at least one record");
    EvalStats s;
    long total = 0;
    const double v = static_cast<double>(m.cfg.vocabulary);
    constexpr int kChunk = 16;  // bound the lockstep cache memory
    for (size_t at = 0; at < use.size(); at += kChunk) {
        std::vector<int> chunk(use.begin() + at,
                               use.begin() + std::min(at + kChunk, use.size()));
        auto fp = forward_batch(m, d, chunk);
        for (int b = 0; b < fp.batch; ++b) {
            auto labels = labels_for(m, d.records[chunk[b]]);
            for (int t = 0; t < static_cast<int>(fp.logits.size()); ++t) {
                if (labels[t] == kPadToken) continue;
                Vec p = softmax_of(fp.logits[t].col(b));
                s.loss += -std::log(std::max(p(labels[t]), 1e-300));
                int best = 0;
                p.maxCoeff(&best);
                double diff = static_cast<double>(best - labels[t]) / v;
                s.mae += std::abs(diff);
                s.mse += diff * diff;
                ++total;
            }
        }
    }
    if (total == 0) throw PreconditionError("evaluate found no supervised positions");
    s.loss /= static_cast<double>(total);
    s.mae /= static_cast<double>(total);
    s.mse /= static_cast<double>(total);
    return s;
}

std::string TrainHistory::to_csv() const {
    std::string out = "epoch,train_loss,val_loss,mae,mse\n";
    for (size_t e = 0; e < epochs.size(); ++e) {
        out += std::to_string(e + 1) + "," + fmt17(epochs[e].train_loss) + "," +
               fmt17(epochs[e].val_loss) + "," + fmt17(epochs[e].mae) + "," +
               fmt17(epochs[e].mse) + "\n";
    }
    return out;
}

TrainHistory train(Model& m, const Dataset& d, OptimizerState& opt,
                   const TrainOptions& opts) {
    if (d.records.empty()) throw PreconditionError("training needs a nonempty dataset");
    if (opts.epochs < 1 || opts.batch < 1)
        throw PreconditionError("training needs positive epochs and batch size");

    auto idx = all_indices(d);
    Rng split_rng(mix_seed(opts.seed, fnv1a64("val-split")));
    split_rng.shuffle(idx);
    int n_val = static_cast<int>(opts.val_split * static_cast<double>(idx.size()));
    std::vector<int> val_idx(idx.end() - n_val, idx.end());
    std::vector<int> train_idx(idx.begin(), idx.end() - n_val);
    if (train_idx.empty())
        throw PreconditionError("validation split leaves no training records");
    // too few records to spare: report metrics on the training split instead
    const std::vector<int>& metric_idx = val_idx.empty() ? train_idx : val_idx;

    TrainHistory hist;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        auto order = train_idx;
        Rng epoch_rng(mix_seed(opts.seed, 0xe0c0 + static_cast<uint64_t>(epoch)));
        epoch_rng.shuffle(order);

        double num = 0.0;
        long den = 0;
        try {
            for (size_t at = 0; at < order.size();
                 at += static_cast<size_t>(opts.batch)) {
                std::vector<int> batch(
                    order.begin() + at,
                    order.begin() +
                        std::min(at + static_cast<size_t>(opts.batch), order.size()));
                long tokens = count_tokens(m, d, batch);
                if (tokens == 0) continue;
                auto grads = zero_like(m);
                double loss = batch_pass(m, d, batch, &grads,
                                         1.0 / static_cast<double>(tokens), nullptr);
                opt.apply(m.tensors(), grads);
                num += loss;
                den += tokens;
            }
            EpochStats st;
            st.train_loss = num / static_cast<double>(den);
            auto ev = evaluate(m, d, metric_idx);
            st.val_loss = ev.loss;
            st.mae = ev.mae;
            st.mse = ev.mse;
            if (!std::isfinite(st.train_loss) || !std::isfinite(st.val_loss)) {
                hist.diverged = true;
                break;
            }
            hist.epochs.push_back(st);
        } catch (const NumericError&) {
            hist.diverged = true;
            break;
        }
    }
    return hist;
}

namespace {

/// Stream-grammar state while decoding predictions into tokens the target
/// meta can accept (mirrors detokenize's checks).
struct DecodeState {
    int word = 0;
    int frame = 0;
    int row = 0;
    int last_offset = -1;
};

bool token_legal(int id, const DecodeState& st, const SentenceMeta& meta, int bins,
                 int w_max) {
    bool done = st.word >= meta.n_words;
    if (id == kPadToken) return done;
    if (done) return false;
    if (id == kStepSepToken) return st.frame < meta.t_max;
    if (id == kWordSepToken) return st.frame == meta.t_max;
    if (st.frame >= meta.t_max || st.row >= meta.g_max) return false;
    int g = id - 3;
    int kind = (g / bins) / w_max;
    int offset = (g / bins) % w_max;
    int width = meta.word_widths[st.word];
    if (offset <= st.last_offset || offset >= width) return false;
    if (kind == 3 && offset + 1 >= width) return false;  // CRZ control edge
    return true;
}

}  // namespace

Translation translate(const Model& m, const Dataset& d, const DatasetRecord& rec) {
    const SentenceMeta& meta = rec.tgt.meta;
    const int bins = d.bins;
    const int w_max = d.w_max;
    const int vocab = m.cfg.vocabulary;
    const int steps = m.output_steps();
    if (static_cast<int>(rec.src.ids.size()) != m.cfg.src_len)
        throw PreconditionError("record does not match the model's source length");

    Translation out;
    out.tokens.meta = meta;
    out.tokens.bins = bins;
    out.tokens.w_max = w_max;

    DecodeState st;
    auto pick = [&](const Vec& logits) {
        int raw = 0;
        logits.maxCoeff(&raw);
        int best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int id = 0; id < vocab; ++id) {
            if (!token_legal(id, st, meta, bins, w_max)) continue;
            if (logits(id) > best_score) {
                best_score = logits(id);
                best = id;
            }
        }
        if (best < 0) {
            std::string ids;
            for (int t : out.tokens.ids) ids += std::to_string(t) + " ";
            throw StructuralError("no legal token available; raw prefix: " + ids);
        }
        if (best != raw) ++out.repairs;
        if (best == kWordSepToken) {
            ++st.word;
            st.frame = 0;
            st.row = 0;
            st.last_offset = -1;
        } else if (best == kStepSepToken) {
            ++st.frame;
            st.row = 0;
            st.last_offset = -1;
        } else if (best != kPadToken) {
            ++st.row;
            st.last_offset = ((best - 3) / bins) % w_max;
        }
        out.tokens.ids.push_back(best);
        return best;
    };

    if (m.cfg.variant == ModelVariant::M1) {
        IntMat src(m.cfg.src_len, 1);
        for (int t = 0; t < m.cfg.src_len; ++t) src(t, 0) = rec.src.ids[t];
        auto enc1 = run_layer(m.lstm[0], &src, nullptr, nullptr, nullptr,
                              "encoder layer 1");
        auto enc2 = run_layer(m.lstm[1], nullptr, &enc1.H, nullptr, nullptr,
                              "encoder layer 2");
        Mat h = enc2.H.back();
        Mat c = enc2.C.back();
        IntMat fed(1, 1);
        fed(0, 0) = kPadToken;
        for (int t = 0; t < steps; ++t) {
            auto cell = run_layer(m.lstm[2], &fed, nullptr, &h, &c, "decoder");
            h = cell.H.back();
            c = cell.C.back();
            Vec logits = m.head.w * h.col(0) + m.head.b.col(0);
            fed(0, 0) = pick(logits);
        }
    } else {
        // the record must live in a dataset slot for the lockstep pass;
        // find it by identity, else run a one-off copy
        int slot = -1;
        for (size_t i = 0; i < d.records.size(); ++i)
            if (&d.records[i] == &rec) slot = static_cast<int>(i);
        Dataset tmp;
        const Dataset* use = &d;
        std::vector<int> idx{slot};
        if (slot < 0) {
            tmp = d;
            tmp.records = {rec};
            use = &tmp;
            idx = {0};
        }
        auto fp = forward_batch(m, *use, idx);
        for (int t = 0; t < steps && t < static_cast<int>(fp.logits.size()); ++t)
            pick(fp.logits[t].col(0));
    }

    if (st.word < meta.n_words) {
        std::string ids;
        for (int t : out.tokens.ids) ids += std::to_string(t) + " ";
        throw StructuralError("translation ran out of steps before closing word " +
                              std::to_string(st.word) + "; raw tokens: " + ids);
    }
    out.circuit = decode_sentence(detokenize(out.tokens));
    return out;
}

void save_checkpoint(const Model& m, const OptimizerState& opt, int epoch,
                     const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["config"] = {{"variant", variant_name(m.cfg.variant)},
                   {"units", m.cfg.units},
                   {"vocabulary", m.cfg.vocabulary},
                   {"src_len", m.cfg.src_len},
                   {"tgt_len", m.cfg.tgt_len}};
    j["epoch"] = epoch;
    nlohmann::json tensors;
    auto names = m.tensor_names();
    auto ts = m.tensors();
    for (size_t i = 0; i < ts.size(); ++i) tensors[names[i]] = mat_flat(*ts[i]);
    j["tensors"] = std::move(tensors);
    j["optimizer"] = {{"kind", optimizer_name(opt.kind)}, {"lr", opt.lr},
                      {"beta1", opt.beta1},               {"beta2", opt.beta2},
                      {"rho", opt.rho},                   {"eps", opt.eps},
                      {"step", opt.step}};
    nlohmann::json m1 = nlohmann::json::array(), m2 = nlohmann::json::array();
    for (const Mat& t : opt.m1) m1.push_back(mat_flat(t));
    for (const Mat& t : opt.m2) m2.push_back(mat_flat(t));
    j["optimizer"]["m1"] = std::move(m1);
    j["optimizer"]["m2"] = std::move(m2);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out << j.dump();
    if (!out) throw IoError("short write to " + path);
}

Model load_checkpoint(const std::string& path, OptimizerState* opt, int* epoch) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path);
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        if (j.at("version").get<int>() != 1)
            throw IoError("unsupported checkpoint version in " + path);
        ModelConfig cfg;
        cfg.variant = variant_from_name(j.at("config").at("variant").get<std::string>());
        cfg.units = j.at("config").at("units").get<int>();
        cfg.vocabulary = j.at("config").at("vocabulary").get<int>();
        cfg.src_len = j.at("config").at("src_len").get<int>();
        cfg.tgt_len = j.at("config").at("tgt_len").get<int>();
        Model m = build_model(cfg, 0);
        auto names = m.tensor_names();
        auto ts = m.tensors();
        for (size_t i = 0; i < ts.size(); ++i)
            mat_fill(*ts[i], j.at("tensors").at(names[i]).get<std::vector<double>>(),
                     names[i]);
        if (epoch) *epoch = j.at("epoch").get<int>();
        if (opt) {
            const auto& jo = j.at("optimizer");
            opt->kind = optimizer_from_name(jo.at("kind").get<std::string>());
            opt->lr = jo.at("lr").get<double>();
            opt->beta1 = jo.at("beta1").get<double>();
            opt->beta2 = jo.at("beta2").get<double>();
            opt->rho = jo.at("rho").get<double>();
            opt->eps = jo.at("eps").get<double>();
            opt->step = jo.at("step").get<long>();
            opt->m1.clear();
            opt->m2.clear();
            auto load_moments = [&](const char* key, std::vector<Mat>& dst) {
                size_t k = 0;
                for (const auto& flat : jo.at(key)) {
                    if (k >= ts.size()) throw IoError("too many moment tensors");
                    Mat t = Mat::Zero(ts[k]->rows(), ts[k]->cols());
                    mat_fill(t, flat.get<std::vector<double>>(), key);
                    dst.push_back(std::move(t));
                    ++k;
                }
            };
            load_moments("m1", opt->m1);
            load_moments("m2", opt->m2);
        }
        return m;
    } catch (const nlohmann::json::exception& ex) {
        throw IoError("checkpoint " + path + ": " + ex.what());
    }
}

}  // namespace qmt
