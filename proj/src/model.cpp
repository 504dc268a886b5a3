#include "qnn/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qnn/errors.hpp"
#include "qnn/rng.hpp"

namespace qnn {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ModelConfig

std::size_t ModelConfig::D() const {
    if (input == "dense") return width;
    return vocab_sizes.size() * embed_dim;
}

NeuronFormatSpec ModelConfig::make_spec() const {
    ActivationPlacement pl{parse_placement(placement_mode), parse_activation(placement_kind)};
    HeadInput hi;
    if (head_input == "local") hi = HeadInput::local;
    else if (head_input == "full") hi = HeadInput::full;
    else throw ConfigError("head_input must be 'local' or 'full', got '" + head_input + "'");
    NeuronFormatSpec s = make_format_spec(format, D(), pl, M, H, hi);
    if (layer_bias == 0) s.bias = false;
    else if (layer_bias == 1) s.bias = true;
    s.residual = residual;
    return s;
}

void ModelConfig::validate() const {
    if (input != "fields" && input != "dense")
        throw ConfigError("input must be 'fields' or 'dense', got '" + input + "'");
    if (input == "fields") {
        if (vocab_sizes.empty()) throw ConfigError("fields input requires non-empty vocab_sizes");
        for (std::size_t s : vocab_sizes)
            if (s < 1) throw ConfigError("every vocabulary must have at least the OOV row");
        if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    } else {
        if (width < 1) throw ConfigError("dense input requires width >= 1");
        if (dense_in < 1) throw ConfigError("dense_in must be >= 1");
    }
    if (layers < 1) throw ConfigError("layers must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ConfigError("dropout must be in [0, 1), got " + std::to_string(dropout));
    if (layer_bias < -1 || layer_bias > 1)
        throw ConfigError("layer_bias must be -1 (format default), 0, or 1");
    make_spec();  // validates format/placement/M/H against D
}

std::string ModelConfig::to_json() const {
    json j;
    j["input"] = input;
    j["vocab_sizes"] = vocab_sizes;
    j["embed_dim"] = embed_dim;
    j["dense_in"] = dense_in;
    j["width"] = width;
    j["format"] = format;
    j["placement_mode"] = placement_mode;
    j["placement_kind"] = placement_kind;
    j["layers"] = layers;
    j["M"] = M;
    j["H"] = H;
    j["head_input"] = head_input;
    j["layer_bias"] = layer_bias;
    j["residual"] = residual;
    j["dropout"] = dropout;
    j["seed"] = seed;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid model config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    static const std::vector<std::string> known = {
        "input", "vocab_sizes", "embed_dim", "dense_in", "width", "format",
        "placement_mode", "placement_kind", "layers", "M", "H", "head_input",
        "layer_bias", "residual", "dropout", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known) ok = ok || k == it.key();
        if (!ok) throw ConfigError("unknown model config key '" + it.key() + "'");
    }
    ModelConfig c;
    try {
        if (j.contains("input")) c.input = j.at("input").get<std::string>();
        if (j.contains("vocab_sizes")) c.vocab_sizes = j.at("vocab_sizes").get<std::vector<std::size_t>>();
        if (j.contains("embed_dim")) c.embed_dim = j.at("embed_dim").get<std::size_t>();
        if (j.contains("dense_in")) c.dense_in = j.at("dense_in").get<std::size_t>();
        if (j.contains("width")) c.width = j.at("width").get<std::size_t>();
        if (j.contains("format")) c.format = j.at("format").get<std::string>();
        if (j.contains("placement_mode")) c.placement_mode = j.at("placement_mode").get<std::string>();
        if (j.contains("placement_kind")) c.placement_kind = j.at("placement_kind").get<std::string>();
        if (j.contains("layers")) c.layers = j.at("layers").get<std::size_t>();
        if (j.contains("M")) c.M = j.at("M").get<std::size_t>();
        if (j.contains("H")) c.H = j.at("H").get<std::size_t>();
        if (j.contains("head_input")) c.head_input = j.at("head_input").get<std::string>();
        if (j.contains("layer_bias")) c.layer_bias = j.at("layer_bias").get<int>();
        if (j.contains("residual")) c.residual = j.at("residual").get<bool>();
        if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad model config value: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// QnnModel

static void fill_uniform(Tensor& t, double bound, Rng& rng) {
    for (double& v : t.data) v = uniform(rng, -bound, bound);
}

QnnModel QnnModel::init(ModelConfig cfg) {
    cfg.validate();
    QnnModel m;
    m.config = cfg;
    m.spec = cfg.make_spec();
    const std::size_t d = cfg.D();
    Rng rng(derive_seed(cfg.seed, 0x11111, 0, 0));
    if (cfg.input == "fields") {
        double bound = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
        for (std::size_t s : cfg.vocab_sizes) {
            Tensor e({s, cfg.embed_dim});
            fill_uniform(e, bound, rng);
            m.embeddings.push_back(std::move(e));
        }
    } else {
        m.in_proj = Tensor({d, cfg.dense_in});
        fill_uniform(m.in_proj, 1.0 / std::sqrt(static_cast<double>(cfg.dense_in)), rng);
        m.in_bias = Tensor({d});
    }
    for (std::size_t l = 0; l < cfg.layers; ++l) m.stack.push_back(init_params(m.spec, rng));
    if (registry_lookup(m.spec.name).concat_out) {
        double bound = 1.0 / std::sqrt(static_cast<double>(2 * d));
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            Tensor p({d, 2 * d});
            fill_uniform(p, bound, rng);
            m.projections.push_back(std::move(p));
        }
    }
    m.head_w = Tensor({d});
    fill_uniform(m.head_w, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    m.head_b = Tensor({1});
    return m;
}

std::vector<std::pair<std::string, Tensor*>> QnnModel::named_params() {
    std::vector<std::pair<std::string, Tensor*>> out;
    if (config.input == "fields") {
        for (std::size_t i = 0; i < embeddings.size(); ++i)
            out.emplace_back("embed_" + std::to_string(i), &embeddings[i]);
    } else {
        out.emplace_back("in.proj", &in_proj);
        out.emplace_back("in.bias", &in_bias);
    }
    for (std::size_t l = 0; l < stack.size(); ++l) {
        std::string prefix = "layer" + std::to_string(l) + ".";
        for (auto& [name, t] : stack[l].named()) out.emplace_back(prefix + name, t);
        if (!projections.empty()) out.emplace_back(prefix + "proj", &projections[l]);
    }
    out.emplace_back("head.w", &head_w);
    out.emplace_back("head.b", &head_b);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> QnnModel::named_params() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (auto& [name, t] : const_cast<QnnModel*>(this)->named_params()) out.emplace_back(name, t);
    return out;
}

std::size_t QnnModel::param_total() const {
    std::size_t total = 0;
    for (auto& [name, t] : named_params()) total += t->data.size();
    return total;
}

std::uint64_t QnnModel::config_hash() const {
    std::string text = config.to_json();
    return fnv1a(text.data(), text.size());
}

// ---------------------------------------------------------------------------
// ModelSession

ModelSession::ModelSession(const QnnModel& m) : model_(&m) {
    const QnnModel& q = *model_;
    if (q.config.input == "fields") {
        for (const Tensor& e : q.embeddings) {
            Var v = tape_.leaf(e);
            embed_vars_.push_back(v);
            flat_.push_back(v);
        }
    } else {
        in_proj_ = tape_.leaf(q.in_proj);
        in_bias_ = tape_.leaf(q.in_bias);
        flat_.push_back(in_proj_);
        flat_.push_back(in_bias_);
    }
    for (std::size_t l = 0; l < q.stack.size(); ++l) {
        LayerVars lv = push_params(tape_, q.spec, q.stack[l]);
        layer_vars_.push_back(lv);
        if (lv.W_a.valid()) flat_.push_back(lv.W_a);
        if (lv.W_b.valid()) flat_.push_back(lv.W_b);
        if (lv.W_c.valid()) flat_.push_back(lv.W_c);
        if (lv.alpha.valid()) flat_.push_back(lv.alpha);
        for (Var kv : lv.krp) flat_.push_back(kv);
        if (lv.bias.valid()) flat_.push_back(lv.bias);
        if (!q.projections.empty()) {
            Var pv = tape_.leaf(q.projections[l]);
            proj_vars_.push_back(pv);
            flat_.push_back(pv);
        }
    }
    head_w_ = tape_.leaf(q.head_w);
    head_b_ = tape_.leaf(q.head_b);
    flat_.push_back(head_w_);
    flat_.push_back(head_b_);
}

Var ModelSession::run_stack(Var x1, bool training, Rng& dropout_rng) {
    const QnnModel& q = *model_;
    const std::size_t d = q.config.D();
    Var x = x1;
    for (std::size_t l = 0; l < layer_vars_.size(); ++l) {
        x = layer_forward(tape_, q.spec, layer_vars_[l], x, x1);
        if (!proj_vars_.empty()) x = tape_.linear(x, proj_vars_[l]);
        if (training && q.config.dropout > 0.0)
            x = tape_.dropout(x, q.config.dropout, dropout_rng, true);
    }
    Var logit = tape_.linear(x, tape_.reshape(head_w_, {1, d}));
    logit = tape_.add_rowvec(logit, head_b_);
    Var p = tape_.activation(logit, Act::sigmoid);
    p = tape_.clamp(p, kProbEps, 1.0 - kProbEps);
    std::size_t b = tape_.value(p).shape[0];
    return tape_.reshape(p, {b});
}

Var ModelSession::forward(const EncodedDataset& data, const std::vector<std::uint32_t>& rows,
                          bool training, Rng& dropout_rng) {
    const QnnModel& q = *model_;
    if (q.config.input != "fields")
        throw ArgumentError("forward over encoded rows requires a fields-input model");
    if (data.f != q.embeddings.size())
        throw DimensionError("dataset has " + std::to_string(data.f) + " fields, model expects " +
                             std::to_string(q.embeddings.size()));
    if (rows.empty()) throw ArgumentError("forward needs at least one row");
    std::vector<Var> cols;
    std::vector<std::uint32_t> idx(rows.size());
    for (std::size_t i = 0; i < data.f; ++i) {
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r] >= data.n)
                throw ArgumentError("row index " + std::to_string(rows[r]) + " out of range (n=" +
                                    std::to_string(data.n) + ")");
            idx[r] = data.row(rows[r])[i];
        }
        cols.push_back(tape_.gather_rows(embed_vars_[i], idx));
    }
    Var x1 = cols.size() == 1 ? cols[0] : tape_.concat(cols);
    return run_stack(x1, training, dropout_rng);
}

Var ModelSession::forward_xy(const double* xy, std::size_t n, bool training, Rng& dropout_rng) {
    const QnnModel& q = *model_;
    if (q.config.input != "dense")
        throw ArgumentError("forward_xy requires a dense-input model");
    if (n == 0) throw ArgumentError("forward_xy needs at least one point");
    Tensor x({n, q.config.dense_in}, std::vector<double>(xy, xy + n * q.config.dense_in));
    Var raw = tape_.leaf(x);
    Var x1 = tape_.add_rowvec(tape_.linear(raw, in_proj_), in_bias_);
    return run_stack(x1, training, dropout_rng);
}

std::vector<double> QnnModel::predict(const EncodedDataset& data) const {
    std::vector<double> out;
    out.reserve(data.n);
    Rng dummy(0);
    const std::size_t chunk = 8192;
    for (std::size_t start = 0; start < data.n; start += chunk) {
        std::size_t stop = std::min(data.n, start + chunk);
        std::vector<std::uint32_t> rows(stop - start);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::uint32_t>(start + i);
        ModelSession s(*this);
        Var p = s.forward(data, rows, false, dummy);
        const Tensor& t = s.tape().value(p);
        out.insert(out.end(), t.data.begin(), t.data.end());
    }
    return out;
}

std::vector<double> QnnModel::predict_xy(const std::vector<double>& xy) const {
    if (xy.size() % config.dense_in != 0)
        throw ArgumentError("point buffer length must be a multiple of dense_in");
    std::size_t n = xy.size() / config.dense_in;
    std::vector<double> out;
    out.reserve(n);
    Rng dummy(0);
    const std::size_t chunk = 8192;
    for (std::size_t start = 0; start < n; start += chunk) {
        std::size_t stop = std::min(n, start + chunk);
        ModelSession s(*this);
        Var p = s.forward_xy(xy.data() + start * config.dense_in, stop - start, false, dummy);
        const Tensor& t = s.tape().value(p);
        out.insert(out.end(), t.data.begin(), t.data.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: "QNNCKPT1" | u32 version | u32 len + config JSON |
// u32 count | per tensor: u32 len + name, u32 rank, u32 extents, f64 data.
// All integers and doubles little-endian.

static constexpr char kCkptMagic[8] = {'Q', 'N', 'N', 'C', 'K', 'P', 'T', '1'};
static constexpr std::uint32_t kCkptVersion = 1;

static void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

static void put_f64(std::string& out, double d) {
    std::uint64_t b = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((b >> (8 * i)) & 0xff));
}

namespace {
struct Cursor {
    const std::string& buf;
    std::size_t pos = 0;
    void need(std::size_t k) const {
        if (pos + k > buf.size()) throw IntegrityError("truncated checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(v);
    }
    std::string bytes(std::size_t k) {
        need(k);
        std::string s = buf.substr(pos, k);
        pos += k;
        return s;
    }
};
}  // namespace

void QnnModel::save(const std::string& path) const {
    std::string out;
    out.append(kCkptMagic, 8);
    put_u32(out, kCkptVersion);
    std::string cfg = config.to_json();
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out += cfg;
    auto named = named_params();
    put_u32(out, static_cast<std::uint32_t>(named.size()));
    for (auto& [name, t] : named) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(t->shape.size()));
        for (std::size_t e : t->shape) put_u32(out, static_cast<std::uint32_t>(e));
        for (double v : t->data) put_f64(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("failed writing checkpoint '" + path + "'");
}

QnnModel QnnModel::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    std::string buf = ss.str();

    Cursor c{buf};
    if (c.bytes(8) != std::string(kCkptMagic, 8))
        throw FileFormatError("'" + path + "' is not a QNNCKPT1 checkpoint");
    std::uint32_t version = c.u32();
    if (version != kCkptVersion)
        throw FileFormatError("unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kCkptVersion) + ")");
    std::string cfg_text = c.bytes(c.u32());
    ModelConfig cfg;
    try {
        cfg = ModelConfig::from_json(cfg_text);
    } catch (const Error& e) {
        throw FileFormatError(std::string("checkpoint config rejected: ") + e.what());
    }
    QnnModel m = QnnModel::init(cfg);
    auto named = m.named_params();
    std::uint32_t count = c.u32();
    if (count != named.size())
        throw IntegrityError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                             std::to_string(named.size()));
    for (auto& [name, t] : named) {
        std::string got = c.bytes(c.u32());
        if (got != name)
            throw IntegrityError("checkpoint tensor '" + got + "' where '" + name + "' expected");
        std::uint32_t rank = c.u32();
        Shape shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i) shape[i] = c.u32();
        if (shape != t->shape)
            throw IntegrityError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) +
                                 ", model expects " + shape_str(t->shape));
        for (double& v : t->data) v = c.f64();
    }
    if (c.pos != buf.size()) throw IntegrityError("trailing bytes after checkpoint payload");
    return m;
}

}  // namespace qnn
