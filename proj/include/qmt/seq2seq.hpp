#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "qmt/encode.hpp"

namespace qmt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// One LSTM layer. Gate blocks are stacked row-wise in the order
/// input, forget, cell, output, so wx is (4U x I), wh is (4U x U) and the
/// bias is (4U x 1). Token inputs are one-hot, so I is the vocabulary size
/// and the input product reduces to a column gather.
struct LSTMLayerParams {
    Mat wx;
    Mat wh;
    Mat b;

    int units() const { return static_cast<int>(wh.cols()); }
    int input() const { return static_cast<int>(wx.cols()); }
};

struct DenseParams {
    Mat w;
    Mat b;
};

struct LSTMState {
    Vec h;
    Vec c;
};

/// Plain single-layer run over a dense input sequence; used directly by the
/// gradient tests and internally by the models. Throws NumericError when a
/// non-finite value appears, naming the offending step.
std::vector<Vec> lstm_forward(const LSTMLayerParams& p, const std::vector<Vec>& xs,
                              LSTMState* final_state = nullptr);

/// M1: two-layer LSTM encoder whose top-layer final state seeds a one-layer
///     decoder over teacher-forced target tokens, then a softmax head.
/// M2: two stacked LSTM layers read the source, a 24-unit linear frame layer
///     feeds the softmax head position by position.
/// M3: one LSTM encoder, its final hidden state repeated across the target
///     length, a second LSTM over the repeats, a time-distributed head.
enum class ModelVariant { M1, M2, M3 };

const char* variant_name(ModelVariant v);
ModelVariant variant_from_name(const std::string& name);

struct ModelConfig {
    ModelVariant variant = ModelVariant::M3;
    int units = 0;  // 0 picks the variant default: M1 64, M2 100, M3 32
    int vocabulary = 0;
    int src_len = 0;
    int tgt_len = 0;

    bool operator==(const ModelConfig&) const = default;
};

/// Config with variant defaults filled in from a dataset's shape.
ModelConfig default_config(ModelVariant v, const Dataset& d);

struct Model {
    ModelConfig cfg;
    std::vector<LSTMLayerParams> lstm;  // wiring per variant, see build_model
    DenseParams frame;                  // M2's 24-unit linear layer, else empty
    DenseParams head;                   // softmax over the vocabulary

    /// Flat parameter view in a fixed order (the optimizer and the
    /// checkpoint both index tensors by this order).
    std::vector<Mat*> tensors();
    std::vector<const Mat*> tensors() const;
    std::vector<std::string> tensor_names() const;
    long parameter_count() const;

    /// Steps the decoder side runs for (tgt_len; M2 shares one padded span
    /// with the source, so there it is max(src_len, tgt_len)).
    int output_steps() const;
    int input_steps() const;
};

/// Seeded initialization: weights uniform(-s, s) with s = 1/sqrt(fan_in),
/// biases zero except the forget block at 1.
Model build_model(const ModelConfig& cfg, uint64_t seed);

enum class OptimizerKind { SGD, Adam, RMSprop };

const char* optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(const std::string& name);

/// SGD lr 0.01; Adam lr 0.001, beta1 0.9, beta2 0.999, eps 1e-8;
/// RMSprop lr 0.001, rho 0.9, eps 1e-8. Moment slots are allocated on the
/// first step to mirror the parameter shapes.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::SGD;
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double rho = 0.9;
    double eps = 1e-8;
    long step = 0;
    std::vector<Mat> m1;  // Adam first moment
    std::vector<Mat> m2;  // Adam second moment / RMSprop average

    static OptimizerState make(OptimizerKind kind);
    void apply(std::vector<Mat*> params, const std::vector<Mat>& grads);
};

/// Mean sparse categorical cross-entropy over non-PAD target positions of
/// the given records (all records when idx is empty).
double batch_loss(const Model& m, const Dataset& d, const std::vector<int>& idx);

/// Analytic gradients for the same batch objective, one tensor per entry of
/// Model::tensors(); optionally reports the loss of the same pass.
std::vector<Mat> batch_gradients(const Model& m, const Dataset& d,
                                 const std::vector<int>& idx,
                                 double* loss_out = nullptr);

struct EvalStats {
    double loss = 0.0;
    double mae = 0.0;
    double mse = 0.0;
};

/// Teacher-forced metrics over non-PAD positions; MAE/MSE compare argmax
/// token ids against targets, scaled by the vocabulary size.
EvalStats evaluate(const Model& m, const Dataset& d,
                   const std::vector<int>& idx = {});

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double mae = 0.0;
    double mse = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    bool diverged = false;

    std::string to_csv() const;  // epoch,train_loss,val_loss,mae,mse
};

struct TrainOptions {
    int epochs = 10;
    int batch = 16;
    double val_split = 0.2;
    uint64_t seed = 0;
};

/// Mini-batch training with a seeded shuffle each epoch and a fixed 20%
/// validation tail drawn once up front. Validation metrics fall back to the
/// training split when the dataset is too small to spare records. Stops
/// early (history truncated, diverged flag set) if the loss leaves the
/// finite range.
TrainHistory train(Model& m, const Dataset& d, OptimizerState& opt,
                   const TrainOptions& opts);

struct Translation {
    TokenSequence tokens;   // legal sequence actually decoded
    BoundCircuit circuit;
    int repairs = 0;        // positions where the raw argmax was illegal
};

/// Greedy decoding of one dataset record constrained to tokens the target
/// meta can legally accept, so the result always detokenizes. Raw argmax
/// choices that break the stream grammar are replaced by the best legal
/// token and counted. Throws StructuralError carrying the raw ids only if
/// no legal token exists at some position.
Translation translate(const Model& m, const Dataset& d, const DatasetRecord& rec);

/// Checkpoint round trip: config, tensors (row-major), optimizer state and
/// epoch counter in one versioned JSON document.
void save_checkpoint(const Model& m, const OptimizerState& opt, int epoch,
                     const std::string& path);
Model load_checkpoint(const std::string& path, OptimizerState* opt = nullptr,
                      int* epoch = nullptr);

}  // namespace qmt
