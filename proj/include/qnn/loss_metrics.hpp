#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qnn/tape.hpp"

namespace qnn {

/// Mean binary cross-entropy of probabilities y_hat against labels y in {0,1}.
double bce(const std::vector<double>& y, const std::vector<double>& y_hat);

/// Self-Ensemble loss over two stochastic passes: both passes pulled toward
/// their frozen average. Equals bce(y_tilde, y1) + bce(y_tilde, y2) with
/// y_tilde = (y1+y2)/2 treated as constants.
double se_loss(const std::vector<double>& y1, const std::vector<double>& y2);

/// bce(y, (y1+y2)/2) + se_loss(y1, y2).
double total_loss(const std::vector<double>& y, const std::vector<double>& y1,
                  const std::vector<double>& y2);

/// AUC via the Mann-Whitney rank statistic, average ranks for ties:
/// (sum of positive ranks - P(P+1)/2) / (P*Q). Throws MetricError when only
/// one class is present.
double auc(const std::vector<double>& y, const std::vector<double>& scores);

/// Consistency-loss family for the loss ablation. se is the default;
/// kl_sym is the symmetric KL between the two Bernoulli outputs,
/// mse_consistency the mean squared probability disagreement; none trains
/// on bce only.
enum class SeVariant { se, kl_sym, mse_consistency, none };

SeVariant parse_se_variant(const std::string& name);
std::string se_variant_name(SeVariant v);

/// Tape-side consistency loss between two probability passes. For se the
/// target y_tilde is the frozen average (entering as plain labels, so no
/// gradient flows through it).
Var se_loss_var(Tape& t, Var p1, Var p2, SeVariant variant);

/// Tape-side L_total over >= 1 passes: bce(y, mean of passes) plus, for two
/// or more passes, the pairwise-free generalization of the consistency loss
/// (each pass pulled toward the frozen mean).
Var total_loss_var(Tape& t, const std::vector<double>& y, const std::vector<Var>& passes,
                   SeVariant variant);

struct MetricReport {
    double logloss = 0.0;
    double auc = 0.0;
    std::size_t n = 0;
    double latency_ms_per_100 = -1.0;  // negative: not measured

    std::string to_json() const;
};

struct LatencyStats {
    double median_ms_per_100 = 0.0;
    double p95_ms_per_100 = 0.0;
    int reps = 0;
};

/// Times repeated single-threaded sweeps of `run` (warm-up first), reporting
/// median and p95 wall-clock per 100 samples.
LatencyStats measure_latency(const std::function<void()>& run, std::size_t n_samples,
                             int reps = 30);

}  // namespace qnn
