#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qnn/model.hpp"

namespace qnn {

/// Fixed 2-D study protocol: width-20 dense model, two format layers,
/// Adam at lr 1e-2, 500 epochs on moons / 100 on circles, 80/20 train/test,
/// probability surface sampled on a grid over +/-2.5 standardized units.
struct BoundaryConfig {
    std::string dataset = "moons";  // moons | circles
    std::string format = "t9";
    std::string placement_mode = "none";
    std::string placement_kind = "relu";
    std::size_t M = 1, H = 1;
    std::size_t n = 1000;
    double noise = -1.0;  // <0: dataset default (0.2 moons, 0.1 circles)
    double factor = 0.5;  // circles only
    std::uint64_t seed = 0;
    std::size_t width = 20;
    std::size_t layers = 2;
    double lr = 1e-2;
    std::size_t epochs = 0;  // 0: dataset default (500 moons, 100 circles)
    std::size_t batch_size = 128;
    std::size_t grid_n = 200;
    double grid_lo = -2.5, grid_hi = 2.5;
};

struct BoundaryResult {
    QnnModel model;
    double test_accuracy = 0.0;
    std::size_t grid_n = 0;
    std::vector<double> grid_x, grid_y, grid_p;  // grid_n^2 entries, x fastest
};

BoundaryResult run_boundary(const BoundaryConfig& cfg);

/// "x,y,p" header plus one row per grid point.
void write_boundary_csv(const BoundaryResult& r, const std::string& path);

}  // namespace qnn
