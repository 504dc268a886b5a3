#include "qnn/tape.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace qnn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

constexpr double kLeakySlope = 0.01;

}  // namespace

Act parse_activation(const std::string& name) {
    if (name == "identity" || name == "none") return Act::identity;
    if (name == "relu") return Act::relu;
    if (name == "leaky_relu") return Act::leaky_relu;
    if (name == "sigmoid") return Act::sigmoid;
    if (name == "tanh") return Act::tanh;
    throw ConfigError("unknown activation '" + name +
                      "' (valid: identity, relu, leaky_relu, sigmoid, tanh)");
}

std::string activation_name(Act a) {
    switch (a) {
        case Act::identity: return "identity";
        case Act::relu: return "relu";
        case Act::leaky_relu: return "leaky_relu";
        case Act::sigmoid: return "sigmoid";
        case Act::tanh: return "tanh";
    }
    return "?";
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tape::Node& Tape::at(Var v) {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        throw ArgumentError("invalid tape var id " + std::to_string(v.id));
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::at(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        throw ArgumentError("invalid tape var id " + std::to_string(v.id));
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Tape::value(Var v) const { return at(v).val; }

const Tensor& Tape::grad(Var v) const {
    const Node& n = at(v);
    if (n.grd.data.empty()) {
        // Unreached by backward: gradient is identically zero.
        const_cast<Node&>(n).grd = Tensor::zeros(n.val.shape);
    }
    return n.grd;
}

double Tape::scalar(Var v) const {
    const Tensor& t = value(v);
    if (t.size() != 1) throw ArgumentError("scalar() on tensor of shape " + shape_str(t.shape));
    return t.data[0];
}

Var Tape::leaf(Tensor value) {
    Node n;
    n.op = Op::leaf;
    n.val = std::move(value);
    return {push(std::move(n))};
}

Var Tape::matvec(Var W, Var x) {
    const Tensor& w = at(W).val;
    const Tensor& v = at(x).val;
    if (w.rank() != 2 || v.rank() != 1 || w.shape[1] != v.shape[0])
        throw DimensionError("matvec: W " + shape_str(w.shape) + " incompatible with x " +
                             shape_str(v.shape));
    Node n;
    n.op = Op::matvec;
    n.in = {W.id, x.id};
    n.val = Tensor::zeros({w.shape[0]});
    ConstMatMap wm(w.data.data(), static_cast<Eigen::Index>(w.shape[0]),
                   static_cast<Eigen::Index>(w.shape[1]));
    ConstVecMap xv(v.data.data(), static_cast<Eigen::Index>(v.shape[0]));
    VecMap(n.val.data.data(), static_cast<Eigen::Index>(w.shape[0])).noalias() = wm * xv;
    return {push(std::move(n))};
}

Var Tape::linear(Var X, Var W) {
    const Tensor& x = at(X).val;
    const Tensor& w = at(W).val;
    if (x.rank() != 2 || w.rank() != 2 || x.shape[1] != w.shape[1])
        throw DimensionError("linear: X " + shape_str(x.shape) + " incompatible with W " +
                             shape_str(w.shape));
    const auto b = static_cast<Eigen::Index>(x.shape[0]);
    const auto in = static_cast<Eigen::Index>(x.shape[1]);
    const auto out = static_cast<Eigen::Index>(w.shape[0]);
    Node n;
    n.op = Op::linear;
    n.in = {X.id, W.id};
    n.val = Tensor::zeros({x.shape[0], w.shape[0]});
    ConstMatMap xm(x.data.data(), b, in);
    ConstMatMap wm(w.data.data(), out, in);
    MatMap(n.val.data.data(), b, out).noalias() = xm * wm.transpose();
    return {push(std::move(n))};
}

Var Tape::hadamard(Var a, Var b) {
    const Tensor& ta = at(a).val;
    const Tensor& tb = at(b).val;
    require_same_shape(ta, tb, "hadamard");
    Node n;
    n.op = Op::hadamard;
    n.in = {a.id, b.id};
    n.val = Tensor(ta.shape);
    for (std::size_t i = 0; i < ta.size(); ++i) n.val.data[i] = ta.data[i] * tb.data[i];
    return {push(std::move(n))};
}

Var Tape::krp_sum(Var a, Var B) {
    const Tensor& ta = at(a).val;
    const Tensor& tb = at(B).val;
    if (ta.rank() != 1 || tb.rank() != 2 || tb.shape[1] != ta.shape[0])
        throw DimensionError("krp_sum: a " + shape_str(ta.shape) + " incompatible with B " +
                             shape_str(tb.shape));
    const std::size_t d = ta.shape[0];
    const std::size_t m = tb.shape[0];
    Node n;
    n.op = Op::krp_sum;
    n.in = {a.id, B.id};
    n.u0 = m;
    n.val = Tensor::zeros({d});
    for (std::size_t j = 0; j < d; ++j) {
        double colsum = 0.0;
        for (std::size_t p = 0; p < m; ++p) colsum += tb.data[p * d + j];
        n.val.data[j] = ta.data[j] * colsum;
    }
    return {push(std::move(n))};
}

Var Tape::krp_sum_batch(Var A, Var U, std::size_t m) {
    const Tensor& ta = at(A).val;
    const Tensor& tu = at(U).val;
    if (ta.rank() != 2 || tu.rank() != 2 || ta.shape[0] != tu.shape[0] ||
        tu.shape[1] != m * ta.shape[1] || m < 1)
        throw DimensionError("krp_sum_batch: A " + shape_str(ta.shape) + " incompatible with U " +
                             shape_str(tu.shape) + " at M=" + std::to_string(m));
    const std::size_t batch = ta.shape[0];
    const std::size_t d = ta.shape[1];
    Node n;
    n.op = Op::krp_sum_batch;
    n.in = {A.id, U.id};
    n.u0 = m;
    n.val = Tensor::zeros({batch, d});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* arow = ta.data.data() + b * d;
        const double* urow = tu.data.data() + b * m * d;
        double* orow = n.val.data.data() + b * d;
        for (std::size_t j = 0; j < d; ++j) {
            double colsum = 0.0;
            for (std::size_t p = 0; p < m; ++p) colsum += urow[p * d + j];
            orow[j] = arow[j] * colsum;
        }
    }
    return {push(std::move(n))};
}

Var Tape::activation(Var x, Act kind) {
    const Tensor& tx = at(x).val;
    Node n;
    n.op = Op::act;
    n.act = kind;
    n.in = {x.id, -1};
    n.val = Tensor(tx.shape);
    for (std::size_t i = 0; i < tx.size(); ++i) {
        const double v = tx.data[i];
        switch (kind) {
            case Act::identity: n.val.data[i] = v; break;
            case Act::relu: n.val.data[i] = v > 0.0 ? v : 0.0; break;
            case Act::leaky_relu: n.val.data[i] = v > 0.0 ? v : kLeakySlope * v; break;
            case Act::sigmoid: n.val.data[i] = 1.0 / (1.0 + std::exp(-v)); break;
            case Act::tanh: n.val.data[i] = std::tanh(v); break;
        }
    }
    return {push(std::move(n))};
}

Var Tape::concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ArgumentError("concat: empty part list");
    const std::size_t rank = at(parts[0]).val.rank();
    if (rank != 1 && rank != 2) throw ArgumentError("concat: only rank-1/2 parts supported");
    std::size_t lead = rank == 2 ? at(parts[0]).val.shape[0] : 0;
    std::size_t width = 0;
    for (Var p : parts) {
        const Tensor& t = at(p).val;
        if (t.rank() != rank || (rank == 2 && t.shape[0] != lead))
            throw DimensionError("concat: part " + shape_str(t.shape) +
                                 " incompatible with first part " +
                                 shape_str(at(parts[0]).val.shape));
        width += t.shape[rank - 1];
    }
    Node n;
    n.op = Op::concat;
    for (Var p : parts) n.iaux.push_back(static_cast<std::uint32_t>(p.id));
    n.val = rank == 1 ? Tensor::zeros({width}) : Tensor::zeros({lead, width});
    const std::size_t rows = rank == 1 ? 1 : lead;
    std::size_t col0 = 0;
    for (Var p : parts) {
        const Tensor& t = at(p).val;
        const std::size_t w = t.shape[rank - 1];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c)
                n.val.data[r * width + col0 + c] = t.data[r * w + c];
        col0 += w;
    }
    return {push(std::move(n))};
}

Var Tape::dropout(Var x, double rate, Rng& rng, bool training) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw ConfigError("dropout rate " + std::to_string(rate) + " outside [0,1)");
    const Tensor& tx = at(x).val;
    Node n;
    n.op = Op::dropout;
    n.in = {x.id, -1};
    n.val = Tensor(tx.shape);
    n.aux.resize(tx.size());
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < tx.size(); ++i) {
        double factor = 1.0;
        if (training && rate > 0.0) factor = uniform01(rng) < rate ? 0.0 : keep_scale;
        n.aux[i] = factor;
        n.val.data[i] = tx.data[i] * factor;
    }
    return {push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = at(a).val;
    const Tensor& tb = at(b).val;
    require_same_shape(ta, tb, "add");
    Node n;
    n.op = Op::add;
    n.in = {a.id, b.id};
    n.val = Tensor(ta.shape);
    for (std::size_t i = 0; i < ta.size(); ++i) n.val.data[i] = ta.data[i] + tb.data[i];
    return {push(std::move(n))};
}

Var Tape::scale(Var x, double c) {
    const Tensor& tx = at(x).val;
    Node n;
    n.op = Op::scale;
    n.in = {x.id, -1};
    n.d0 = c;
    n.val = Tensor(tx.shape);
    for (std::size_t i = 0; i < tx.size(); ++i) n.val.data[i] = c * tx.data[i];
    return {push(std::move(n))};
}

Var Tape::mul_rowvec(Var X, Var v) {
    const Tensor& tx = at(X).val;
    const Tensor& tv = at(v).val;
    const std::size_t d = tx.shape[tx.rank() - 1];
    if (tv.rank() != 1 || tv.shape[0] != d)
        throw DimensionError("mul_rowvec: X " + shape_str(tx.shape) + " incompatible with v " +
                             shape_str(tv.shape));
    Node n;
    n.op = Op::mul_rowvec;
    n.in = {X.id, v.id};
    n.val = Tensor(tx.shape);
    const std::size_t rows = tx.size() / d;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j)
            n.val.data[r * d + j] = tx.data[r * d + j] * tv.data[j];
    return {push(std::move(n))};
}

Var Tape::add_rowvec(Var X, Var v) {
    const Tensor& tx = at(X).val;
    const Tensor& tv = at(v).val;
    const std::size_t d = tx.shape[tx.rank() - 1];
    if (tv.rank() != 1 || tv.shape[0] != d)
        throw DimensionError("add_rowvec: X " + shape_str(tx.shape) + " incompatible with v " +
                             shape_str(tv.shape));
    Node n;
    n.op = Op::add_rowvec;
    n.in = {X.id, v.id};
    n.val = Tensor(tx.shape);
    const std::size_t rows = tx.size() / d;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j)
            n.val.data[r * d + j] = tx.data[r * d + j] + tv.data[j];
    return {push(std::move(n))};
}

Var Tape::rowwise_dot(Var a, Var b) {
    const Tensor& ta = at(a).val;
    const Tensor& tb = at(b).val;
    require_same_shape(ta, tb, "rowwise_dot");
    const std::size_t d = ta.shape[ta.rank() - 1];
    const std::size_t rows = ta.size() / d;
    Node n;
    n.op = Op::rowwise_dot;
    n.in = {a.id, b.id};
    n.val = ta.rank() == 1 ? Tensor::zeros({1}) : Tensor::zeros({rows, 1});
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += ta.data[r * d + j] * tb.data[r * d + j];
        n.val.data[r] = acc;
    }
    return {push(std::move(n))};
}

Var Tape::broadcast_col(Var s, std::size_t width) {
    const Tensor& ts = at(s).val;
    const bool rank1 = ts.rank() == 1;
    if ((rank1 && ts.shape[0] != 1) || (!rank1 && (ts.rank() != 2 || ts.shape[1] != 1)))
        throw DimensionError("broadcast_col: expected [1] or [B x 1], got " +
                             shape_str(ts.shape));
    const std::size_t rows = rank1 ? 1 : ts.shape[0];
    Node n;
    n.op = Op::broadcast_col;
    n.in = {s.id, -1};
    n.val = rank1 ? Tensor::zeros({width}) : Tensor::zeros({rows, width});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < width; ++j) n.val.data[r * width + j] = ts.data[r];
    return {push(std::move(n))};
}

Var Tape::sum(Var x) {
    const Tensor& tx = at(x).val;
    Node n;
    n.op = Op::sum;
    n.in = {x.id, -1};
    n.val = Tensor::zeros({1});
    double acc = 0.0;
    for (double v : tx.data) acc += v;
    n.val.data[0] = acc;
    return {push(std::move(n))};
}

Var Tape::slice_cols(Var x, std::size_t lo, std::size_t width) {
    const Tensor& tx = at(x).val;
    const std::size_t d = tx.shape[tx.rank() - 1];
    if (width < 1 || lo + width > d)
        throw DimensionError("slice_cols: range [" + std::to_string(lo) + "," +
                             std::to_string(lo + width) + ") outside " + shape_str(tx.shape));
    const std::size_t rows = tx.size() / d;
    Node n;
    n.op = Op::slice_cols;
    n.in = {x.id, -1};
    n.u0 = lo;
    n.u1 = width;
    n.val = tx.rank() == 1 ? Tensor::zeros({width}) : Tensor::zeros({rows, width});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < width; ++c)
            n.val.data[r * width + c] = tx.data[r * d + lo + c];
    return {push(std::move(n))};
}

Var Tape::gather_rows(Var E, const std::vector<std::uint32_t>& indices) {
    const Tensor& te = at(E).val;
    if (te.rank() != 2) throw DimensionError("gather_rows: table must be rank-2, got " +
                                             shape_str(te.shape));
    if (indices.empty()) throw ArgumentError("gather_rows: empty index list");
    const std::size_t rows = te.shape[0];
    const std::size_t d = te.shape[1];
    Node n;
    n.op = Op::gather_rows;
    n.in = {E.id, -1};
    n.iaux = indices;
    n.val = Tensor::zeros({indices.size(), d});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        if (indices[b] >= rows)
            throw DataError("gather_rows: index " + std::to_string(indices[b]) +
                            " out of range for table " + shape_str(te.shape));
        const double* src = te.data.data() + static_cast<std::size_t>(indices[b]) * d;
        std::copy(src, src + d, n.val.data.data() + b * d);
    }
    return {push(std::move(n))};
}

Var Tape::clamp(Var x, double lo, double hi) {
    const Tensor& tx = at(x).val;
    Node n;
    n.op = Op::clamp;
    n.in = {x.id, -1};
    n.d0 = lo;
    n.d1 = hi;
    n.val = Tensor(tx.shape);
    for (std::size_t i = 0; i < tx.size(); ++i)
        n.val.data[i] = std::min(std::max(tx.data[i], lo), hi);
    return {push(std::move(n))};
}

Var Tape::reshape(Var x, Shape s) {
    const Tensor& tx = at(x).val;
    if (numel(s) != tx.size())
        throw DimensionError("reshape: " + shape_str(tx.shape) + " to " + shape_str(s) +
                             " changes element count");
    Node n;
    n.op = Op::reshape;
    n.in = {x.id, -1};
    n.val = Tensor(std::move(s), tx.data);
    return {push(std::move(n))};
}

Var Tape::log(Var x) {
    const Tensor& tx = at(x).val;
    Node n;
    n.op = Op::log_;
    n.in = {x.id, -1};
    n.val = Tensor(tx.shape);
    for (std::size_t i = 0; i < tx.size(); ++i) {
        if (!(tx.data[i] > 0.0))
            throw NumericError("log of non-positive value " + std::to_string(tx.data[i]));
        n.val.data[i] = std::log(tx.data[i]);
    }
    return {push(std::move(n))};
}

Var Tape::bce_loss(const std::vector<double>& labels, Var p) {
    const Tensor& tp = at(p).val;
    if (labels.size() != tp.size())
        throw ArgumentError("bce_loss: " + std::to_string(labels.size()) + " labels vs " +
                            std::to_string(tp.size()) + " predictions");
    if (labels.empty()) throw ArgumentError("bce_loss: empty batch");
    Node n;
    n.op = Op::bce;
    n.in = {p.id, -1};
    n.aux = labels;
    n.val = Tensor::zeros({1});
    double acc = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double y = labels[i];
        const double q = tp.data[i];
        acc += y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
    }
    n.val.data[0] = -acc / static_cast<double>(labels.size());
    return {push(std::move(n))};
}

Tensor& Tape::grad_buf(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grd.data.empty()) n.grd = Tensor::zeros(n.val.shape);
    return n.grd;
}

void Tape::backward(Var loss) {
    Node& top = at(loss);
    if (top.val.size() != 1)
        throw ArgumentError("backward: loss must be scalar, got " + shape_str(top.val.shape));
    grad_buf(loss.id).data[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grd.data.empty()) continue;  // not an ancestor of the loss
        backward_node(n);
    }
}

void Tape::backward_node(Node& n) {
    const std::vector<double>& g = n.grd.data;
    switch (n.op) {
        case Op::leaf:
            break;
        case Op::matvec: {
            Node& wn = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& xn = nodes_[static_cast<std::size_t>(n.in[1])];
            const auto out = static_cast<Eigen::Index>(wn.val.shape[0]);
            const auto in = static_cast<Eigen::Index>(wn.val.shape[1]);
            ConstMatMap wm(wn.val.data.data(), out, in);
            ConstVecMap xv(xn.val.data.data(), in);
            ConstVecMap gv(g.data(), out);
            MatMap gw(grad_buf(n.in[0]).data.data(), out, in);
            VecMap gx(grad_buf(n.in[1]).data.data(), in);
            gw.noalias() += gv * xv.transpose();
            gx.noalias() += wm.transpose() * gv;
            break;
        }
        case Op::linear: {
            Node& xn = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& wn = nodes_[static_cast<std::size_t>(n.in[1])];
            const auto b = static_cast<Eigen::Index>(xn.val.shape[0]);
            const auto in = static_cast<Eigen::Index>(xn.val.shape[1]);
            const auto out = static_cast<Eigen::Index>(wn.val.shape[0]);
            ConstMatMap xm(xn.val.data.data(), b, in);
            ConstMatMap wm(wn.val.data.data(), out, in);
            ConstMatMap gm(g.data(), b, out);
            MatMap gx(grad_buf(n.in[0]).data.data(), b, in);
            MatMap gw(grad_buf(n.in[1]).data.data(), out, in);
            gx.noalias() += gm * wm;
            gw.noalias() += gm.transpose() * xm;
            break;
        }
        case Op::hadamard: {
            Node& an = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& bn = nodes_[static_cast<std::size_t>(n.in[1])];
            std::vector<double>& ga = grad_buf(n.in[0]).data;
            std::vector<double>& gb = grad_buf(n.in[1]).data;
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * bn.val.data[i];
                gb[i] += g[i] * an.val.data[i];
            }
            break;
        }
        case Op::krp_sum: {
            Node& an = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& bn = nodes_[static_cast<std::size_t>(n.in[1])];
            const std::size_t d = an.val.shape[0];
            const std::size_t m = n.u0;
            std::vector<double>& ga = grad_buf(n.in[0]).data;
            std::vector<double>& gb = grad_buf(n.in[1]).data;
            for (std::size_t j = 0; j < d; ++j) {
                double colsum = 0.0;
                for (std::size_t p = 0; p < m; ++p) colsum += bn.val.data[p * d + j];
                ga[j] += g[j] * colsum;
                const double gja = g[j] * an.val.data[j];
                for (std::size_t p = 0; p < m; ++p) gb[p * d + j] += gja;
            }
            break;
        }
        case Op::krp_sum_batch: {
            Node& an = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& un = nodes_[static_cast<std::size_t>(n.in[1])];
            const std::size_t batch = an.val.shape[0];
            const std::size_t d = an.val.shape[1];
            const std::size_t m = n.u0;
            std::vector<double>& ga = grad_buf(n.in[0]).data;
            std::vector<double>& gu = grad_buf(n.in[1]).data;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* arow = an.val.data.data() + b * d;
                const double* urow = un.val.data.data() + b * m * d;
                const double* grow = g.data() + b * d;
                double* garow = ga.data() + b * d;
                double* gurow = gu.data() + b * m * d;
                for (std::size_t j = 0; j < d; ++j) {
                    double colsum = 0.0;
                    for (std::size_t p = 0; p < m; ++p) colsum += urow[p * d + j];
                    garow[j] += grow[j] * colsum;
                    const double gja = grow[j] * arow[j];
                    for (std::size_t p = 0; p < m; ++p) gurow[p * d + j] += gja;
                }
            }
            break;
        }
        case Op::act: {
            Node& xn = nodes_[static_cast<std::size_t>(n.in[0])];
            std::vector<double>& gx = grad_buf(n.in[0]).data;
            for (std::size_t i = 0; i < g.size(); ++i) {
                double d = 1.0;
                switch (n.act) {
                    case Act::identity: d = 1.0; break;
                    case Act::relu: d = xn.val.data[i] > 0.0 ? 1.0 : 0.0; break;
                    case Act::leaky_relu:
                        d = xn.val.data[i] > 0.0 ? 1.0 : kLeakySlope;
                        break;
                    case Act::sigmoid: {
                        const double s = n.val.data[i];
                        d = s * (1.0 - s);
                        break;
                    }
                    case Act::tanh: {
                        const double t = n.val.data[i];
                        d = 1.0 - t * t;
                        break;
                    }
                }
                gx[i] += g[i] * d;
            }
            break;
        }
        case Op::concat: {
            const std::size_t rank = n.val.rank();
            const std::size_t width = n.val.shape[rank - 1];
            const std::size_t rows = n.val.size() / width;
            std::size_t col0 = 0;
            for (std::uint32_t pid : n.iaux) {
                Node& pn = nodes_[pid];
                const std::size_t w = pn.val.shape[pn.val.rank() - 1];
                std::vector<double>& gp = grad_buf(static_cast<int>(pid)).data;
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < w; ++c)
                        gp[r * w + c] += g[r * width + col0 + c];
                col0 += w;
            }
            break;
        }
        case Op::dropout: {
            std::vector<double>& gx = grad_buf(n.in[0]).data;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.aux[i];
            break;
        }
        case Op::add: {
            std::vector<double>& ga = grad_buf(n.in[0]).data;
            std::vector<double>& gb = grad_buf(n.in[1]).data;
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
            break;
        }
        case Op::scale: {
            std::vector<double>& gx = grad_buf(n.in[0]).data;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.d0;
            break;
        }
        case Op::mul_rowvec: {
            Node& xn = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& vn = nodes_[static_cast<std::size_t>(n.in[1])];
            const std::size_t d = vn.val.shape[0];
            const std::size_t rows = n.val.size() / d;
            std::vector<double>& gx = grad_buf(n.in[0]).data;
            std::vector<double>& gv = grad_buf(n.in[1]).data;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < d; ++j) {
                    gx[r * d + j] += g[r * d + j] * vn.val.data[j];
                    gv[j] += g[r * d + j] * xn.val.data[r * d + j];
                }
            break;
        }
        case Op::add_rowvec: {
            const std::size_t d = nodes_[static_cast<std::size_t>(n.in[1])].val.shape[0];
            const std::size_t rows = n.val.size() / d;
            std::vector<double>& gx = grad_buf(n.in[0]).data;
            std::vector<double>& gv = grad_buf(n.in[1]).data;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < d; ++j) {
                    gx[r * d + j] += g[r * d + j];
                    gv[j] += g[r * d + j];
                }
            break;
        }
        case Op::rowwise_dot: {
            Node& an = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& bn = nodes_[static_cast<std::size_t>(n.in[1])];
            const std::size_t rows = n.val.size();
            const std::size_t d = an.val.size() / rows;
            std::vector<double>& ga = grad_buf(n.in[0]).data;
            std::vector<double>& gb = grad_buf(n.in[1]).data;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < d; ++j) {
                    ga[r * d + j] += g[r] * bn.val.data[r * d + j];
                    gb[r * d + j] += g[r] * an.val.data[r * d + j];
                }
            break;
        }
        case Op::broadcast_col: {
            const std::size_t rows = nodes_[static_cast<std::size_t>(n.in[0])].val.size();
            const std::size_t width = n.val.size() / rows;
            std::vector<double>& gs = grad_buf(n.in[0]).data;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < width; ++j) gs[r] += g[r * width + j];
            break;
        }
        case Op::sum: {
            std::vector<double>& gx = grad_buf(n.in[0]).data;
            for (double& v : gx) v += g[0];
            break;
        }
        case Op::slice_cols: {
            Node& xn = nodes_[static_cast<std::size_t>(n.in[0])];
            const std::size_t d = xn.val.shape[xn.val.rank() - 1];
            const std::size_t rows = xn.val.size() / d;
            std::vector<double>& gx = grad_buf(n.in[0]).data;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < n.u1; ++c)
                    gx[r * d + n.u0 + c] += g[r * n.u1 + c];
            break;
        }
        case Op::gather_rows: {
            const std::size_t d = n.val.shape[1];
            std::vector<double>& ge = grad_buf(n.in[0]).data;
            for (std::size_t b = 0; b < n.iaux.size(); ++b) {
                double* dst = ge.data() + static_cast<std::size_t>(n.iaux[b]) * d;
                const double* src = g.data() + b * d;
                for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
            }
            break;
        }
        case Op::clamp: {
            Node& xn = nodes_[static_cast<std::size_t>(n.in[0])];
            std::vector<double>& gx = grad_buf(n.in[0]).data;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = xn.val.data[i];
                if (v >= n.d0 && v <= n.d1) gx[i] += g[i];
            }
            break;
        }
        case Op::reshape: {
            std::vector<double>& gx = grad_buf(n.in[0]).data;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            break;
        }
        case Op::log_: {
            Node& xn = nodes_[static_cast<std::size_t>(n.in[0])];
            std::vector<double>& gx = grad_buf(n.in[0]).data;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xn.val.data[i];
            break;
        }
        case Op::bce: {
            Node& pn = nodes_[static_cast<std::size_t>(n.in[0])];
            const double inv_n = 1.0 / static_cast<double>(n.aux.size());
            std::vector<double>& gp = grad_buf(n.in[0]).data;
            for (std::size_t i = 0; i < n.aux.size(); ++i) {
                const double y = n.aux[i];
                const double q = pn.val.data[i];
                gp[i] += g[0] * inv_n * (q - y) / (q * (1.0 - q));
            }
            break;
        }
    }
}

double Tape::relu_kink_margin() const {
    double margin = std::numeric_limits<double>::infinity();
    for (const Node& n : nodes_) {
        if (n.op != Op::act || n.act != Act::relu) continue;
        const Node& xn = nodes_[static_cast<std::size_t>(n.in[0])];
        for (double v : xn.val.data) margin = std::min(margin, std::abs(v));
    }
    return margin;
}

}  // namespace qnn
