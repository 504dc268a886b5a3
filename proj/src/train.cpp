#include "qnn/train.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "qnn/errors.hpp"
#include "qnn/rng.hpp"

namespace qnn {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1: nothing would be trained");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(plateau_factor > 1.0)) throw ConfigError("plateau_factor must be > 1");
    if (!(min_improve >= 0.0)) throw ConfigError("min_improve must be >= 0");
    if (forward_passes < 1) throw ConfigError("forward_passes must be >= 1");
    if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
}

std::string TrainReport::to_jsonl() const {
    std::ostringstream out;
    for (const EpochStats& e : epochs) {
        json j;
        j["epoch"] = e.epoch;
        j["train_loss"] = e.train_loss;
        j["val_logloss"] = e.val_logloss;
        j["val_auc"] = e.val_auc;
        j["lr"] = e.lr;
        j["seconds"] = e.seconds;
        j["improved"] = e.improved;
        out << j.dump() << "\n";
    }
    json s;
    s["summary"]["epochs"] = epochs.size();
    s["summary"]["best_epoch"] = best_epoch;
    s["summary"]["best_val_auc"] = best_val_auc;
    s["summary"]["stop_reason"] = stop_reason;
    out << s.dump() << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(double beta1, double beta2, double eps) : b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<std::pair<std::string, Tensor*>>& params,
                const std::vector<Tensor>& grads, double lr) {
    if (params.size() != grads.size())
        throw ArgumentError("adam: " + std::to_string(params.size()) + " params but " +
                            std::to_string(grads.size()) + " gradients");
    if (m_.empty()) {
        for (auto& [name, t] : params) {
            m_.emplace_back(t->data.size(), 0.0);
            v_.emplace_back(t->data.size(), 0.0);
        }
    }
    if (m_.size() != params.size())
        throw ArgumentError("adam: parameter list changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor* t = params[i].second;
        const std::vector<double>& g = grads[i].data;
        if (g.size() != t->data.size())
            throw ArgumentError("adam: gradient size mismatch for '" + params[i].first + "'");
        for (std::size_t k = 0; k < g.size(); ++k) {
            m_[i][k] = b1_ * m_[i][k] + (1.0 - b1_) * g[k];
            v_[i][k] = b2_ * v_[i][k] + (1.0 - b2_) * g[k] * g[k];
            double mhat = m_[i][k] / c1;
            double vhat = v_[i][k] / c2;
            t->data[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

// ---------------------------------------------------------------------------
// Training loop

static std::vector<double> labels_vec(const EncodedDataset& d,
                                      const std::vector<std::uint32_t>& rows) {
    std::vector<double> y;
    y.reserve(rows.size());
    for (auto r : rows) y.push_back(static_cast<double>(d.labels[r]));
    return y;
}

MetricReport evaluate_model(const QnnModel& model, const EncodedDataset& data) {
    std::vector<double> probs = model.predict(data);
    std::vector<double> y(data.labels.begin(), data.labels.end());
    MetricReport r;
    r.logloss = bce(y, probs);
    r.auc = auc(y, probs);
    r.n = data.n;
    return r;
}

LatencyStats bench_model(const QnnModel& model, const EncodedDataset& data, std::size_t batch,
                         int reps) {
    if (data.n == 0) throw ArgumentError("bench needs a non-empty dataset");
    batch = std::min(batch, data.n);
    std::vector<std::uint32_t> rows(batch);
    for (std::size_t i = 0; i < batch; ++i) rows[i] = static_cast<std::uint32_t>(i);
    auto run = [&]() {
        Rng dummy(0);
        ModelSession s(model);
        s.forward(data, rows, false, dummy);
    };
    return measure_latency(run, batch, reps);
}

TrainReport train_model(QnnModel& model, const EncodedDataset& train_data,
                        const EncodedDataset& val_data, const TrainConfig& cfg) {
    cfg.validate();
    if (train_data.n == 0 || val_data.n == 0)
        throw DataError("training and validation splits must be non-empty");

    const std::size_t passes_n = cfg.se_enabled ? cfg.forward_passes : 1;
    const SeVariant variant = cfg.se_enabled ? cfg.se_variant : SeVariant::none;

    Adam adam(cfg.beta1, cfg.beta2, cfg.adam_eps);
    double lr = cfg.lr;
    TrainReport report;
    report.best_val_auc = -1.0;
    QnnModel best = model;
    std::size_t bad_streak = 0;
    report.stop_reason = "max_epochs";

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        double loss_sum = 0.0;
        auto batches = epoch_batches(train_data.n, cfg.batch_size, cfg.seed, epoch);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const std::vector<std::uint32_t>& rows = batches[b];
            ModelSession s(model);
            std::vector<Var> passes;
            for (std::size_t p = 0; p < passes_n; ++p) {
                Rng drop_rng(derive_seed(cfg.seed, epoch, b, p));
                passes.push_back(s.forward(train_data, rows, true, drop_rng));
            }
            Var loss = total_loss_var(s.tape(), labels_vec(train_data, rows), passes, variant);
            double lv = s.tape().scalar(loss);
            if (!std::isfinite(lv))
                throw NumericError("non-finite training loss " + std::to_string(lv) + " at epoch " +
                                   std::to_string(epoch) + " batch " + std::to_string(b));
            s.tape().backward(loss);
            auto named = model.named_params();
            std::vector<Tensor> grads;
            grads.reserve(named.size());
            for (Var v : s.param_vars()) grads.push_back(s.tape().grad(v));
            for (std::size_t i = 0; i < grads.size(); ++i)
                for (double g : grads[i].data)
                    if (!std::isfinite(g))
                        throw NumericError("non-finite gradient in '" + named[i].first +
                                           "' at epoch " + std::to_string(epoch) + " batch " +
                                           std::to_string(b) + " (loss " + std::to_string(lv) +
                                           ")");
            if (cfg.grad_clip > 0.0) {
                double sq = 0.0;
                for (const Tensor& g : grads)
                    for (double x : g.data) sq += x * x;
                double norm = std::sqrt(sq);
                if (norm > cfg.grad_clip) {
                    double scale = cfg.grad_clip / norm;
                    for (Tensor& g : grads)
                        for (double& x : g.data) x *= scale;
                }
            }
            adam.step(named, grads, lr);
            loss_sum += lv * static_cast<double>(rows.size());
        }

        MetricReport val = evaluate_model(model, val_data);
        EpochStats es;
        es.epoch = epoch;
        es.train_loss = loss_sum / static_cast<double>(train_data.n);
        es.val_logloss = val.logloss;
        es.val_auc = val.auc;
        es.lr = lr;
        es.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        es.improved = val.auc > report.best_val_auc + cfg.min_improve;
        if (es.improved) {
            report.best_val_auc = val.auc;
            report.best_epoch = epoch;
            best = model;
            bad_streak = 0;
        } else {
            ++bad_streak;
            lr /= cfg.plateau_factor;
        }
        report.epochs.push_back(es);
        if (bad_streak >= cfg.patience) {
            report.stop_reason = "early_stop";
            break;
        }
    }

    model = best;
    return report;
}

}  // namespace qnn
