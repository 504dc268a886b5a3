#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "qnn/errors.hpp"

namespace qnn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

// Dense row-major f64 value. Plain data; autodiff state lives on the Tape.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        check_invariants();
    }
    explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape), 0.0) {
        check_invariants();
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor ones(Shape s) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), 1.0);
        return t;
    }
    static Tensor vec(std::initializer_list<double> v) {
        return Tensor({v.size()}, std::vector<double>(v));
    }
    // Row-major rank-2 constructor.
    static Tensor mat(std::size_t rows, std::size_t cols, std::vector<double> d) {
        return Tensor({rows, cols}, std::move(d));
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool empty() const { return shape.empty(); }

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    // Rank-2 accessor.
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    void check_invariants() const {
        for (std::size_t e : shape) {
            if (e < 1) throw ArgumentError("tensor shape has zero extent " + shape_str(shape));
        }
        if (numel(shape) != data.size()) {
            throw ArgumentError("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
        }
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
    }
}

}  // namespace qnn
