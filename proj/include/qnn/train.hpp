#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qnn/loss_metrics.hpp"
#include "qnn/model.hpp"

namespace qnn {

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 20;
    std::size_t patience = 2;       // consecutive non-improving epochs before stop
    double plateau_factor = 10.0;   // lr divisor on every non-improving epoch
    double min_improve = 1e-6;      // val AUC must beat best by more than this
    std::uint64_t seed = 0;
    bool se_enabled = true;
    std::size_t forward_passes = 2;  // stochastic passes per step when SE is on
    SeVariant se_variant = SeVariant::se;
    double grad_clip = 0.0;  // global-norm ceiling; 0 disables

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_logloss = 0.0;
    double val_auc = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
    bool improved = false;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    double best_val_auc = 0.0;
    std::string stop_reason;  // "early_stop" | "max_epochs"

    /// One JSON object per epoch followed by a summary object.
    std::string to_jsonl() const;
};

/// Bias-corrected Adam over a fixed parameter list; state is keyed by
/// position, so the list must be identical on every step.
class Adam {
public:
    Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(const std::vector<std::pair<std::string, Tensor*>>& params,
              const std::vector<Tensor>& grads, double lr);
    std::size_t steps() const { return t_; }

private:
    double b1_, b2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Minibatch training with per-epoch validation, reduce-on-plateau, and early
/// stopping. The model is left at its best-validation-AUC parameters.
TrainReport train_model(QnnModel& model, const EncodedDataset& train_data,
                        const EncodedDataset& val_data, const TrainConfig& cfg);

MetricReport evaluate_model(const QnnModel& model, const EncodedDataset& data);

/// Inference latency on a fixed batch drawn from the head of `data`.
LatencyStats bench_model(const QnnModel& model, const EncodedDataset& data,
                         std::size_t batch, int reps = 30);

}  // namespace qnn
