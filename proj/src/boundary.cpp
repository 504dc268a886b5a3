#include "qnn/boundary.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "qnn/data.hpp"
#include "qnn/errors.hpp"
#include "qnn/rng.hpp"
#include "qnn/train.hpp"

namespace qnn {

BoundaryResult run_boundary(const BoundaryConfig& cfg) {
    if (cfg.dataset != "moons" && cfg.dataset != "circles")
        throw ConfigError("boundary dataset must be 'moons' or 'circles', got '" + cfg.dataset +
                          "'");
    if (cfg.n < 10) throw ConfigError("boundary needs at least 10 points");
    if (cfg.grid_n < 2) throw ConfigError("grid_n must be >= 2");
    if (!(cfg.grid_hi > cfg.grid_lo)) throw ConfigError("grid range must be non-empty");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.layers < 1) throw ConfigError("layers must be >= 1");
    if (!(cfg.lr > 0.0)) throw ConfigError("lr must be > 0");

    const bool moons = cfg.dataset == "moons";
    double noise = cfg.noise >= 0.0 ? cfg.noise : (moons ? 0.2 : 0.1);
    std::size_t epochs = cfg.epochs > 0 ? cfg.epochs : (moons ? 500 : 100);
    Points2D pts = moons ? make_moons(cfg.n, noise, cfg.seed)
                         : make_circles(cfg.n, cfg.factor, noise, cfg.seed);

    // 80/20 train/test on a seeded shuffle.
    std::vector<std::uint32_t> order(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng split_rng(derive_seed(cfg.seed, 0xb0, 0, 0));
    shuffle(order, split_rng);
    std::size_t n_train = (cfg.n * 8) / 10;
    auto gather = [&](std::size_t from, std::size_t to) {
        std::pair<std::vector<double>, std::vector<double>> out;
        for (std::size_t i = from; i < to; ++i) {
            out.first.push_back(pts.xy[2 * order[i]]);
            out.first.push_back(pts.xy[2 * order[i] + 1]);
            out.second.push_back(pts.labels[order[i]]);
        }
        return out;
    };
    auto [train_xy, train_y] = gather(0, n_train);
    auto [test_xy, test_y] = gather(n_train, cfg.n);

    ModelConfig mc;
    mc.input = "dense";
    mc.dense_in = 2;
    mc.width = cfg.width;
    mc.format = cfg.format;
    mc.placement_mode = cfg.placement_mode;
    mc.placement_kind = cfg.placement_kind;
    mc.layers = cfg.layers;
    mc.M = cfg.M;
    mc.H = cfg.H;
    mc.dropout = 0.0;
    mc.seed = cfg.seed;
    BoundaryResult res;
    res.model = QnnModel::init(mc);

    Adam adam;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        auto batches = epoch_batches(n_train, cfg.batch_size, cfg.seed, epoch);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& rows = batches[b];
            std::vector<double> xy, y;
            for (auto r : rows) {
                xy.push_back(train_xy[2 * r]);
                xy.push_back(train_xy[2 * r + 1]);
                y.push_back(train_y[r]);
            }
            Rng dummy(0);
            ModelSession s(res.model);
            Var p = s.forward_xy(xy.data(), rows.size(), true, dummy);
            Var loss = s.tape().bce_loss(y, p);
            double lv = s.tape().scalar(loss);
            if (!std::isfinite(lv))
                throw NumericError("non-finite boundary loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(b));
            s.tape().backward(loss);
            std::vector<Tensor> grads;
            for (Var v : s.param_vars()) grads.push_back(s.tape().grad(v));
            adam.step(res.model.named_params(), grads, cfg.lr);
        }
    }

    std::vector<double> test_p = res.model.predict_xy(test_xy);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test_p.size(); ++i)
        if ((test_p[i] > 0.5 ? 1.0 : 0.0) == test_y[i]) ++hits;
    res.test_accuracy = static_cast<double>(hits) / static_cast<double>(test_p.size());

    res.grid_n = cfg.grid_n;
    std::vector<double> grid_xy;
    grid_xy.reserve(cfg.grid_n * cfg.grid_n * 2);
    double step = (cfg.grid_hi - cfg.grid_lo) / static_cast<double>(cfg.grid_n - 1);
    for (std::size_t iy = 0; iy < cfg.grid_n; ++iy) {
        double y = cfg.grid_lo + step * static_cast<double>(iy);
        for (std::size_t ix = 0; ix < cfg.grid_n; ++ix) {
            double x = cfg.grid_lo + step * static_cast<double>(ix);
            grid_xy.push_back(x);
            grid_xy.push_back(y);
            res.grid_x.push_back(x);
            res.grid_y.push_back(y);
        }
    }
    res.grid_p = res.model.predict_xy(grid_xy);
    return res;
}

void write_boundary_csv(const BoundaryResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write boundary grid '" + path + "'");
    out << "x,y,p\n" << std::setprecision(10);
    for (std::size_t i = 0; i < r.grid_p.size(); ++i)
        out << r.grid_x[i] << "," << r.grid_y[i] << "," << r.grid_p[i] << "\n";
    if (!out) throw DataError("failed writing boundary grid '" + path + "'");
}

}  // namespace qnn
