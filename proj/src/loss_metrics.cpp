#include "qnn/loss_metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace qnn {

namespace {

void require_probability_batch(const std::vector<double>& a, const std::vector<double>& b,
                               const char* op) {
    if (a.size() != b.size())
        throw ArgumentError(std::string(op) + ": length mismatch " + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()));
    if (a.empty()) throw ArgumentError(std::string(op) + ": empty batch");
}

}  // namespace

double bce(const std::vector<double>& y, const std::vector<double>& y_hat) {
    require_probability_batch(y, y_hat, "bce");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        acc += y[i] * std::log(y_hat[i]) + (1.0 - y[i]) * std::log(1.0 - y_hat[i]);
    return -acc / static_cast<double>(y.size());
}

double se_loss(const std::vector<double>& y1, const std::vector<double>& y2) {
    require_probability_batch(y1, y2, "se_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < y1.size(); ++i) {
        const double yt = 0.5 * (y1[i] + y2[i]);
        acc += yt * std::log(y1[i] * y2[i]) +
               (1.0 - yt) * std::log((1.0 - y1[i]) * (1.0 - y2[i]));
    }
    return -acc / static_cast<double>(y1.size());
}

double total_loss(const std::vector<double>& y, const std::vector<double>& y1,
                  const std::vector<double>& y2) {
    require_probability_batch(y, y1, "total_loss");
    require_probability_batch(y1, y2, "total_loss");
    std::vector<double> mean(y1.size());
    for (std::size_t i = 0; i < y1.size(); ++i) mean[i] = 0.5 * (y1[i] + y2[i]);
    return bce(y, mean) + se_loss(y1, y2);
}

double auc(const std::vector<double>& y, const std::vector<double>& scores) {
    require_probability_batch(y, scores, "auc");
    const std::size_t n = y.size();
    std::size_t pos = 0;
    for (double v : y) {
        if (v == 1.0)
            ++pos;
        else if (v != 0.0)
            throw ArgumentError("auc: labels must be 0 or 1, got " + std::to_string(v));
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0)
        throw MetricError("auc undefined: all " + std::to_string(n) + " labels are " +
                          (pos ? "positive" : "negative"));
    for (double s : scores)
        if (!std::isfinite(s)) throw NumericError("auc: non-finite score");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average
        for (std::size_t k = i; k < j; ++k)
            if (y[order[k]] == 1.0) rank_sum_pos += avg_rank;
        i = j;
    }
    const double p = static_cast<double>(pos);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

SeVariant parse_se_variant(const std::string& name) {
    if (name == "se") return SeVariant::se;
    if (name == "kl_sym") return SeVariant::kl_sym;
    if (name == "mse_consistency") return SeVariant::mse_consistency;
    if (name == "none") return SeVariant::none;
    throw ConfigError("unknown consistency loss '" + name +
                      "' (valid: se, kl_sym, mse_consistency, none)");
}

std::string se_variant_name(SeVariant v) {
    switch (v) {
        case SeVariant::se: return "se";
        case SeVariant::kl_sym: return "kl_sym";
        case SeVariant::mse_consistency: return "mse_consistency";
        case SeVariant::none: return "none";
    }
    return "?";
}

Var se_loss_var(Tape& t, Var p1, Var p2, SeVariant variant) {
    const Tensor& v1 = t.value(p1);
    const Tensor& v2 = t.value(p2);
    require_same_shape(v1, v2, "se_loss");
    const std::size_t n = v1.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    switch (variant) {
        case SeVariant::se: {
            std::vector<double> y_tilde(n);  // frozen: plain labels, no gradient
            for (std::size_t i = 0; i < n; ++i) y_tilde[i] = 0.5 * (v1.data[i] + v2.data[i]);
            return t.add(t.bce_loss(y_tilde, p1), t.bce_loss(y_tilde, p2));
        }
        case SeVariant::kl_sym: {
            // Bernoulli symmetric KL: mean (p1-p2) * (logit(p1) - logit(p2)).
            Var ones = t.leaf(Tensor::ones(v1.shape));
            auto logit = [&](Var p) {
                Var one_minus = t.add(ones, t.scale(p, -1.0));
                return t.add(t.log(p), t.scale(t.log(one_minus), -1.0));
            };
            Var diff = t.add(p1, t.scale(p2, -1.0));
            Var ld = t.add(logit(p1), t.scale(logit(p2), -1.0));
            return t.scale(t.sum(t.hadamard(diff, ld)), inv_n);
        }
        case SeVariant::mse_consistency: {
            Var diff = t.add(p1, t.scale(p2, -1.0));
            return t.scale(t.sum(t.hadamard(diff, diff)), inv_n);
        }
        case SeVariant::none:
            return t.leaf(Tensor::zeros({1}));
    }
    throw ConfigError("unreachable se variant");
}

Var total_loss_var(Tape& t, const std::vector<double>& y, const std::vector<Var>& passes,
                   SeVariant variant) {
    if (passes.empty()) throw ArgumentError("total_loss: no forward passes");
    if (y.size() != t.value(passes[0]).size())
        throw ArgumentError("total_loss: " + std::to_string(y.size()) + " labels vs " +
                            std::to_string(t.value(passes[0]).size()) + " predictions");
    Var mean = passes[0];
    for (std::size_t p = 1; p < passes.size(); ++p) mean = t.add(mean, passes[p]);
    if (passes.size() > 1) mean = t.scale(mean, 1.0 / static_cast<double>(passes.size()));
    Var ctr = t.bce_loss(y, mean);
    if (variant == SeVariant::none || passes.size() < 2) return ctr;
    if (passes.size() == 2) return t.add(ctr, se_loss_var(t, passes[0], passes[1], variant));
    if (variant != SeVariant::se)
        throw ConfigError(se_variant_name(variant) + " supports exactly 2 forward passes");
    // >2 passes: every pass pulled toward the frozen mean.
    const Tensor& mv = t.value(mean);
    std::vector<double> y_tilde(mv.data.begin(), mv.data.end());
    Var se = t.bce_loss(y_tilde, passes[0]);
    for (std::size_t p = 1; p < passes.size(); ++p)
        se = t.add(se, t.bce_loss(y_tilde, passes[p]));
    return t.add(ctr, se);
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["logloss"] = logloss;
    j["auc"] = auc;
    j["n"] = n;
    if (latency_ms_per_100 >= 0.0) j["latency_ms_per_100"] = latency_ms_per_100;
    return j.dump();
}

LatencyStats measure_latency(const std::function<void()>& run, std::size_t n_samples,
                             int reps) {
    if (n_samples == 0) throw ArgumentError("measure_latency: empty sample set");
    if (reps < 1) throw ArgumentError("measure_latency: reps must be >= 1");
    using clock = std::chrono::steady_clock;
    run();  // warm-up
    run();
    std::vector<double> ms(static_cast<std::size_t>(reps));
    for (double& m : ms) {
        const auto t0 = clock::now();
        run();
        m = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    }
    std::sort(ms.begin(), ms.end());
    const double scale = 100.0 / static_cast<double>(n_samples);
    LatencyStats s;
    s.reps = reps;
    s.median_ms_per_100 = ms[ms.size() / 2] * scale;
    s.p95_ms_per_100 = ms[std::min(ms.size() - 1, static_cast<std::size_t>(
                                                      0.95 * static_cast<double>(ms.size())))] *
                       scale;
    return s;
}

}  // namespace qnn
