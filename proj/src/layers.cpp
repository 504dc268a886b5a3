#include "qnn/layers.hpp"

#include <array>
#include <cmath>

namespace qnn {

namespace {

// Order matters: FormatId below indexes this table.
// Fields: name, formula, a, b, c, alpha, qnn, mid, concat, x1, residual
constexpr std::array<FormatInfo, 28> kRegistry{{
    {"mlp", "W_a X", true, false, false, false, false, false, false, false, false},
    {"crossnetv2", "X_1 * W_a X + X", true, false, false, false, false, false, false, true, true},
    {"t1", "X^T W_a X + W_b X", true, true, false, false, false, false, false, false, false},
    {"t2", "X^T W_a X", true, false, false, false, false, false, false, false, false},
    {"t3", "W_a X^2", true, false, false, false, false, false, false, false, false},
    {"t4", "(W_a X)^2", true, false, false, false, false, false, false, false, false},
    {"t5", "W_a X * W_b X", true, true, false, false, false, false, false, false, false},
    {"t6", "X^T W_a X + W_b X^2", true, true, false, false, false, false, false, false, false},
    {"t7", "W_a X * W_b X + W_c X^2", true, true, true, false, false, false, false, false, false},
    {"t8", "W_a X * W_b X + W_c X", true, true, true, false, false, false, false, false, false},
    {"t9", "X * W_a X + X", true, false, false, false, false, false, false, false, true},
    {"t10", "X * W_a X + W_b X", true, true, false, false, false, false, false, false, false},
    {"t11", "W_a X || (W_b X)^2", true, true, false, false, false, false, true, false, false},
    {"t12", "W_a X * W_b X || W_c X^2", true, true, true, false, false, false, true, false, false},
    {"t13", "W_a X * W_b X || W_c X", true, true, true, false, false, false, true, false, false},
    {"t14", "W_a X * W_b X || W_b X", true, true, false, false, false, false, true, false, false},
    {"t15", "W_a X || (W_a X)^2", true, false, false, false, false, false, true, false, false},
    {"t16", "X * (W_a X * W_b X) + X", true, true, false, false, false, false, false, false, true},
    {"t17", "X * (W_a X + W_b X) + X", true, true, false, false, false, false, false, false, true},
    {"t18", "X * W_a X || X", true, false, false, false, false, false, true, false, false},
    {"t19", "X * relu(W_a X) + X", true, false, false, false, false, true, false, false, true},
    {"t20", "X * W_a X + W_a X + X", true, false, false, false, false, false, false, false, true},
    {"t21", "(X * W_a X)^2 + X", true, false, false, false, false, false, false, false, true},
    {"t22", "X * W_a X + alpha * X", true, false, false, true, false, false, false, false, true},
    {"t23", "W_a X * W_b X + X", true, true, false, false, false, false, false, false, true},
    {"t24", "W_a X * relu(W_b X) + X", true, true, false, false, false, true, false, false, true},
    {"t25", "X * W_a relu(W_b X) + X", true, true, false, false, false, true, false, false, true},
    {"qnn_alpha", "||_h (X^h . relu(W_a^h X) + X^h)", false, false, false, false, true, true,
     false, false, true},
}};

enum class FormatId : int {
    mlp, crossnetv2, t1, t2, t3, t4, t5, t6, t7, t8, t9, t10, t11, t12, t13,
    t14, t15, t16, t17, t18, t19, t20, t21, t22, t23, t24, t25, qnn_alpha
};

int registry_index(const std::string& name) {
    for (std::size_t i = 0; i < kRegistry.size(); ++i)
        if (name == kRegistry[i].name) return static_cast<int>(i);
    return -1;
}

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    for (double& v : t.data) v = uniform(rng, -bound, bound);
    return t;
}

}  // namespace

PlacementMode parse_placement(const std::string& name) {
    if (name == "none") return PlacementMode::none;
    if (name == "post") return PlacementMode::post;
    if (name == "mid") return PlacementMode::mid;
    throw ConfigError("unknown activation placement '" + name + "' (valid: none, post, mid)");
}

std::string placement_name(PlacementMode m) {
    switch (m) {
        case PlacementMode::none: return "none";
        case PlacementMode::post: return "post";
        case PlacementMode::mid: return "mid";
    }
    return "?";
}

const FormatInfo& registry_lookup(const std::string& name) {
    const int i = registry_index(name);
    if (i < 0) {
        std::string valid;
        for (const FormatInfo& f : kRegistry) {
            if (!valid.empty()) valid += ", ";
            valid += f.name;
        }
        throw ConfigError("unknown neuron format '" + name + "' (valid: " + valid + ")");
    }
    return kRegistry[static_cast<std::size_t>(i)];
}

const std::vector<std::string>& format_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const FormatInfo& f : kRegistry) n.emplace_back(f.name);
        return n;
    }();
    return names;
}

NeuronFormatSpec make_format_spec(const std::string& name, std::size_t dims,
                                  ActivationPlacement placement, std::size_t M,
                                  std::size_t H, HeadInput head_input) {
    const FormatInfo& info = registry_lookup(name);
    if (dims < 1) throw ConfigError("layer width must be >= 1, got " + std::to_string(dims));
    NeuronFormatSpec s;
    s.name = info.name;
    s.placement = placement;
    s.dims = dims;
    if (info.is_qnn) {
        if (M < 1 || H < 1)
            throw ConfigError("qnn_alpha needs M >= 1 and H >= 1, got M=" + std::to_string(M) +
                              " H=" + std::to_string(H));
        if (dims % H != 0)
            throw ConfigError("head count H=" + std::to_string(H) + " must divide D=" +
                              std::to_string(dims));
        s.M = M;
        s.H = H;
        s.head_input = head_input;
    } else if (M != 1 || H != 1) {
        throw ConfigError(std::string(info.name) + " does not take M/H hyperparameters");
    }
    if (placement.mode == PlacementMode::mid && !info.has_mid)
        throw ConfigError(std::string(info.name) + " has no mid-activation site");
    s.bias = (s.name == "mlp");
    return s;
}

std::vector<std::pair<std::string, Tensor*>> LayerParams::named() {
    std::vector<std::pair<std::string, Tensor*>> out;
    if (!W_a.data.empty()) out.emplace_back("W_a", &W_a);
    if (!W_b.data.empty()) out.emplace_back("W_b", &W_b);
    if (!W_c.data.empty()) out.emplace_back("W_c", &W_c);
    if (!alpha.data.empty()) out.emplace_back("alpha", &alpha);
    for (std::size_t h = 0; h < krp.size(); ++h)
        out.emplace_back("krp_" + std::to_string(h), &krp[h]);
    if (!bias.data.empty()) out.emplace_back("bias", &bias);
    return out;
}

std::size_t output_width(const NeuronFormatSpec& spec) {
    return registry_lookup(spec.name).concat_out ? 2 * spec.dims : spec.dims;
}

LayerParams init_params(const NeuronFormatSpec& spec, Rng& rng) {
    const FormatInfo& info = registry_lookup(spec.name);
    const std::size_t D = spec.dims;
    LayerParams p;
    if (info.uses_a) p.W_a = fan_in_uniform({D, D}, D, rng);
    if (info.uses_b) p.W_b = fan_in_uniform({D, D}, D, rng);
    if (info.uses_c) p.W_c = fan_in_uniform({D, D}, D, rng);
    if (info.is_qnn) {
        const std::size_t dh = D / spec.H;
        const std::size_t in = spec.head_input == HeadInput::local ? dh : D;
        for (std::size_t h = 0; h < spec.H; ++h)
            p.krp.push_back(fan_in_uniform({spec.M, dh, in}, in, rng));
    }
    if (info.has_alpha) p.alpha = Tensor::ones({D});
    if (spec.bias) p.bias = Tensor::zeros({output_width(spec)});
    return p;
}

std::size_t param_count(const NeuronFormatSpec& spec) {
    const FormatInfo& info = registry_lookup(spec.name);
    const std::size_t D = spec.dims;
    std::size_t n = 0;
    if (info.uses_a) n += D * D;
    if (info.uses_b) n += D * D;
    if (info.uses_c) n += D * D;
    if (info.has_alpha) n += D;
    if (info.is_qnn) {
        const std::size_t dh = D / spec.H;
        const std::size_t in = spec.head_input == HeadInput::local ? dh : D;
        n += spec.H * spec.M * dh * in;
    }
    if (spec.bias) n += output_width(spec);
    return n;
}

LayerVars push_params(Tape& t, const NeuronFormatSpec& spec, const LayerParams& p) {
    const FormatInfo& info = registry_lookup(spec.name);
    LayerVars v;
    if (info.uses_a) v.W_a = t.leaf(p.W_a);
    if (info.uses_b) v.W_b = t.leaf(p.W_b);
    if (info.uses_c) v.W_c = t.leaf(p.W_c);
    if (info.has_alpha) v.alpha = t.leaf(p.alpha);
    if (info.is_qnn) {
        const std::size_t dh = spec.dims / spec.H;
        const std::size_t in = spec.head_input == HeadInput::local ? dh : spec.dims;
        for (const Tensor& w : p.krp)  // rank-2 view [(M*Dh) x In] of the same data
            v.krp.push_back(t.leaf(Tensor({spec.M * dh, in}, w.data)));
    }
    if (spec.bias) v.bias = t.leaf(p.bias);
    return v;
}

Var layer_forward(Tape& t, const NeuronFormatSpec& spec, const LayerVars& v, Var X, Var X1) {
    const FormatInfo& info = registry_lookup(spec.name);
    const int id = registry_index(spec.name);
    const std::size_t D = spec.dims;

    const Tensor& xin = t.value(X);
    if (xin.shape[xin.rank() - 1] != D)
        throw DimensionError("layer_forward: input " + shape_str(xin.shape) +
                             " does not match layer width " + std::to_string(D));
    const bool rank1 = xin.rank() == 1;
    if (rank1) X = t.reshape(X, {1, D});
    if (info.needs_x1) {
        if (!X1.valid())
            throw ArgumentError(spec.name + " requires the first-order feature X_1");
        if (t.value(X1).rank() == 1) X1 = t.reshape(X1, {1, D});
    }

    const Act mid = spec.placement.mode == PlacementMode::mid ? spec.placement.kind : Act::relu;
    const bool res = spec.residual;
    auto lin = [&](Var W) { return t.linear(X, W); };
    auto sq = [&](Var z) { return t.hadamard(z, z); };
    auto xsq = [&] { return t.hadamard(X, X); };
    // Scalar quadratic form X^T W X broadcast back to width D.
    auto qform = [&](Var W) { return t.broadcast_col(t.rowwise_dot(X, lin(W)), D); };
    auto with_res = [&](Var core) { return res ? t.add(core, X) : core; };

    Var out;
    switch (static_cast<FormatId>(id)) {
        case FormatId::mlp: out = lin(v.W_a); break;
        case FormatId::crossnetv2: {
            Var core = t.hadamard(X1, lin(v.W_a));
            out = with_res(core);
            break;
        }
        case FormatId::t1: out = t.add(qform(v.W_a), lin(v.W_b)); break;
        case FormatId::t2: out = qform(v.W_a); break;
        case FormatId::t3: out = t.linear(xsq(), v.W_a); break;
        case FormatId::t4: out = sq(lin(v.W_a)); break;
        case FormatId::t5: out = t.hadamard(lin(v.W_a), lin(v.W_b)); break;
        case FormatId::t6: out = t.add(qform(v.W_a), t.linear(xsq(), v.W_b)); break;
        case FormatId::t7:
            out = t.add(t.hadamard(lin(v.W_a), lin(v.W_b)), t.linear(xsq(), v.W_c));
            break;
        case FormatId::t8: out = t.add(t.hadamard(lin(v.W_a), lin(v.W_b)), lin(v.W_c)); break;
        case FormatId::t9: out = with_res(t.hadamard(X, lin(v.W_a))); break;
        case FormatId::t10: out = t.add(t.hadamard(X, lin(v.W_a)), lin(v.W_b)); break;
        case FormatId::t11: out = t.concat({lin(v.W_a), sq(lin(v.W_b))}); break;
        case FormatId::t12:
            out = t.concat({t.hadamard(lin(v.W_a), lin(v.W_b)), t.linear(xsq(), v.W_c)});
            break;
        case FormatId::t13:
            out = t.concat({t.hadamard(lin(v.W_a), lin(v.W_b)), lin(v.W_c)});
            break;
        case FormatId::t14: {
            Var b = lin(v.W_b);
            out = t.concat({t.hadamard(lin(v.W_a), b), b});
            break;
        }
        case FormatId::t15: {
            Var a = lin(v.W_a);
            out = t.concat({a, sq(a)});
            break;
        }
        case FormatId::t16:
            out = with_res(t.hadamard(X, t.hadamard(lin(v.W_a), lin(v.W_b))));
            break;
        case FormatId::t17:
            out = with_res(t.hadamard(X, t.add(lin(v.W_a), lin(v.W_b))));
            break;
        case FormatId::t18: out = t.concat({t.hadamard(X, lin(v.W_a)), X}); break;
        case FormatId::t19: out = with_res(t.hadamard(X, t.activation(lin(v.W_a), mid))); break;
        case FormatId::t20: {
            Var a = lin(v.W_a);
            out = with_res(t.add(t.hadamard(X, a), a));
            break;
        }
        case FormatId::t21: out = with_res(sq(t.hadamard(X, lin(v.W_a)))); break;
        case FormatId::t22: {
            Var core = t.hadamard(X, lin(v.W_a));
            out = res ? t.add(core, t.mul_rowvec(X, v.alpha)) : core;
            break;
        }
        case FormatId::t23: out = with_res(t.hadamard(lin(v.W_a), lin(v.W_b))); break;
        case FormatId::t24:
            out = with_res(t.hadamard(lin(v.W_a), t.activation(lin(v.W_b), mid)));
            break;
        case FormatId::t25:
            out = with_res(t.hadamard(X, t.linear(t.activation(lin(v.W_b), mid), v.W_a)));
            break;
        case FormatId::qnn_alpha: {
            const std::size_t dh = D / spec.H;
            std::vector<Var> heads;
            heads.reserve(spec.H);
            for (std::size_t h = 0; h < spec.H; ++h) {
                Var xh = t.slice_cols(X, h * dh, dh);
                Var head_in = spec.head_input == HeadInput::local ? xh : X;
                Var u = t.activation(t.linear(head_in, v.krp[h]), mid);  // [B x M*Dh]
                Var k = t.krp_sum_batch(xh, u, spec.M);
                heads.push_back(res ? t.add(k, xh) : k);
            }
            out = t.concat(heads);
            break;
        }
    }

    if (spec.bias) out = t.add_rowvec(out, v.bias);
    if (spec.placement.mode == PlacementMode::post)
        out = t.activation(out, spec.placement.kind);
    if (rank1) out = t.reshape(out, {t.value(out).shape[1]});
    return out;
}

}  // namespace qnn
