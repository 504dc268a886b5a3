#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qnn/data.hpp"
#include "qnn/layers.hpp"
#include "qnn/tape.hpp"

namespace qnn {

/// Model hyperparameters; serialized verbatim into checkpoints.
/// input "fields": categorical features through per-field embedding tables,
/// layer width D = #fields * embed_dim. input "dense": raw dense_in-wide rows
/// through a learnable projection to `width` (the synthetic 2-D studies).
struct ModelConfig {
    std::string input = "fields";
    std::vector<std::size_t> vocab_sizes;  // fields input: s_i per field
    std::size_t embed_dim = 16;
    std::size_t dense_in = 2;   // dense input only
    std::size_t width = 0;      // dense input only: layer width D
    std::string format = "qnn_alpha";
    std::string placement_mode = "none";
    std::string placement_kind = "relu";
    std::size_t layers = 3;
    std::size_t M = 1, H = 1;
    std::string head_input = "local";
    int layer_bias = -1;  // -1: format default, 0: off, 1: on
    bool residual = true;
    double dropout = 0.1;
    std::uint64_t seed = 0;

    std::size_t D() const;
    NeuronFormatSpec make_spec() const;
    void validate() const;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

/// Probabilities are clamped to this interval before any loss.
constexpr double kProbEps = 1e-7;

struct QnnModel {
    ModelConfig config;
    NeuronFormatSpec spec;            // cached from config
    std::vector<Tensor> embeddings;   // fields input: per field [s_i x d], row 0 = OOV
    Tensor in_proj, in_bias;          // dense input: [D x dense_in], [D]
    std::vector<LayerParams> stack;   // length L
    std::vector<Tensor> projections;  // concat formats: per layer [D x 2D]
    Tensor head_w;                    // [D]
    Tensor head_b;                    // [1]

    static QnnModel init(ModelConfig cfg);

    /// Stable (name, tensor) views in checkpoint/optimizer order.
    std::vector<std::pair<std::string, Tensor*>> named_params();
    std::vector<std::pair<std::string, const Tensor*>> named_params() const;
    std::size_t param_total() const;

    /// Inference probabilities, dropout off, chunked internally.
    std::vector<double> predict(const EncodedDataset& data) const;
    std::vector<double> predict_xy(const std::vector<double>& xy) const;  // n x 2

    std::uint64_t config_hash() const;

    void save(const std::string& path) const;
    static QnnModel load(const std::string& path);
};

/// One training/inference step: the model's parameters pushed once onto a
/// fresh tape, reusable across several stochastic forward passes so their
/// gradients accumulate on the same leaves.
class ModelSession {
public:
    explicit ModelSession(const QnnModel& m);

    /// Stochastic pass over the given rows; returns clamped probabilities [B].
    Var forward(const EncodedDataset& data, const std::vector<std::uint32_t>& rows,
                bool training, Rng& dropout_rng);
    /// Dense-input pass over n x 2 points (dense models only).
    Var forward_xy(const double* xy, std::size_t n, bool training, Rng& dropout_rng);

    Tape& tape() { return tape_; }
    /// Aligned 1:1 with QnnModel::named_params().
    const std::vector<Var>& param_vars() const { return flat_; }

private:
    Var run_stack(Var x1, bool training, Rng& dropout_rng);

    const QnnModel* model_;
    Tape tape_;
    std::vector<Var> flat_;
    std::vector<Var> embed_vars_;
    Var in_proj_, in_bias_;
    std::vector<LayerVars> layer_vars_;
    std::vector<Var> proj_vars_;
    Var head_w_, head_b_;
};

}  // namespace qnn
