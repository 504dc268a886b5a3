#include "qnn/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace qnn {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("short write to " + path);
}

// One CSV record; handles quoted cells with doubled quotes.
std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"' && cell.empty()) {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    if (quoted) throw DataError("line " + std::to_string(lineno) + ": unterminated quote");
    cells.push_back(std::move(cell));
    return cells;
}

}  // namespace

LogBase parse_log_base(const std::string& name) {
    if (name == "e2") return LogBase::e2;
    if (name == "2") return LogBase::two;
    throw ConfigError("unknown log base '" + name + "' (valid: e2, 2)");
}

DatasetSchema DatasetSchema::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("schema is not valid JSON: ") + e.what());
    }
    reject_unknown_keys(j, {"label", "fields"}, "schema");
    DatasetSchema s;
    if (!j.contains("label") || !j["label"].is_string())
        throw ConfigError("schema needs a string 'label' column name");
    s.label = j["label"].get<std::string>();
    if (!j.contains("fields") || !j["fields"].is_array() || j["fields"].empty())
        throw ConfigError("schema needs a non-empty 'fields' array");
    for (const json& fj : j["fields"]) {
        reject_unknown_keys(fj, {"name", "kind", "min_count"}, "schema field");
        FieldSpec f;
        if (!fj.contains("name")) throw ConfigError("schema field without a name");
        f.name = fj["name"].get<std::string>();
        const std::string kind = fj.value("kind", "categorical");
        if (kind == "categorical")
            f.kind = FieldKind::categorical;
        else if (kind == "numeric")
            f.kind = FieldKind::numeric;
        else
            throw ConfigError("field '" + f.name + "': unknown kind '" + kind + "'");
        f.min_count = fj.value("min_count", std::size_t{1});
        if (f.min_count < 1) throw ConfigError("field '" + f.name + "': min_count must be >= 1");
        s.fields.push_back(std::move(f));
    }
    for (std::size_t i = 0; i < s.fields.size(); ++i)
        for (std::size_t k = i + 1; k < s.fields.size(); ++k)
            if (s.fields[i].name == s.fields[k].name)
                throw ConfigError("duplicate field name '" + s.fields[i].name + "'");
    for (const FieldSpec& f : s.fields)
        if (f.name == s.label)
            throw ConfigError("label column '" + s.label + "' also listed as a field");
    return s;
}

std::string DatasetSchema::to_json() const {
    json j;
    j["label"] = label;
    j["fields"] = json::array();
    for (const FieldSpec& f : fields) {
        json fj;
        fj["name"] = f.name;
        fj["kind"] = f.kind == FieldKind::categorical ? "categorical" : "numeric";
        fj["min_count"] = f.min_count;
        j["fields"].push_back(fj);
    }
    return j.dump(2);
}

std::size_t RawDataset::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw DataError("column '" + name + "' not present in CSV header");
}

RawDataset read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    RawDataset d;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            d.columns = split_csv_line(line, lineno);
            if (d.columns.empty()) throw DataError("empty CSV header in " + path);
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line, lineno);
        if (cells.size() != d.columns.size())
            throw DataError(path + " line " + std::to_string(lineno) + ": " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(d.columns.size()));
        d.rows.push_back(std::move(cells));
    }
    if (lineno == 0) throw DataError(path + " is empty (header row required)");
    return d;
}

std::string discretize_numeric(const std::string& raw, LogBase base) {
    if (raw.empty()) return "";
    double x = 0.0;
    try {
        std::size_t used = 0;
        x = std::stod(raw, &used);
        if (used != raw.size()) return "";
    } catch (const std::exception&) {
        return "";
    }
    if (!std::isfinite(x)) return "";
    if (x <= 2.0) return "1";
    const double lg = base == LogBase::e2 ? std::log(x) : std::log2(x);
    return std::to_string(static_cast<long long>(std::floor(lg * lg)));
}

std::uint32_t Vocab::encode(std::size_t field, const std::string& token) const {
    if (field >= field_maps.size())
        throw ArgumentError("field index " + std::to_string(field) + " out of range");
    if (token.empty()) return 0;
    auto it = field_maps[field].find(token);
    return it == field_maps[field].end() ? 0 : it->second;
}

std::size_t Vocab::total_features() const {
    std::size_t total = 0;
    for (std::size_t s : sizes) total += s;
    return total;
}

std::string Vocab::to_json(const DatasetSchema& schema) const {
    json j;
    j["fields"] = json::array();
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        json fj;
        fj["name"] = schema.fields[i].name;
        std::vector<std::string> tokens(sizes[i] - 1);
        for (const auto& [tok, idx] : field_maps[i]) tokens[idx - 1] = tok;
        fj["tokens"] = tokens;
        j["fields"].push_back(fj);
    }
    return j.dump();
}

Vocab Vocab::from_json(const std::string& text, const DatasetSchema& schema) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FileFormatError(std::string("vocab is not valid JSON: ") + e.what());
    }
    if (!j.contains("fields") || j["fields"].size() != schema.fields.size())
        throw IntegrityError("vocab fields do not match schema");
    Vocab v;
    for (std::size_t i = 0; i < schema.fields.size(); ++i) {
        const json& fj = j["fields"][i];
        if (fj["name"] != schema.fields[i].name)
            throw IntegrityError("vocab field order differs from schema at '" +
                                 schema.fields[i].name + "'");
        std::unordered_map<std::string, std::uint32_t> m;
        std::uint32_t next = 1;
        for (const json& tok : fj["tokens"]) m[tok.get<std::string>()] = next++;
        v.sizes.push_back(m.size() + 1);
        v.field_maps.push_back(std::move(m));
    }
    return v;
}

Vocab build_vocab(const RawDataset& raw, const DatasetSchema& schema,
                  const std::vector<std::uint32_t>& train_rows, LogBase base) {
    Vocab v;
    for (const FieldSpec& f : schema.fields) {
        const std::size_t col = raw.column_index(f.name);
        std::unordered_map<std::string, std::size_t> counts;
        for (std::uint32_t r : train_rows) {
            if (r >= raw.rows.size())
                throw DataError("train row " + std::to_string(r) + " out of range");
            const std::string& cell = raw.rows[r][col];
            const std::string tok =
                f.kind == FieldKind::numeric ? discretize_numeric(cell, base) : cell;
            if (tok.empty()) continue;  // missing stays OOV
            ++counts[tok];
        }
        std::vector<std::pair<std::string, std::size_t>> kept;
        for (auto& [tok, c] : counts)
            if (c >= f.min_count) kept.emplace_back(tok, c);
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        std::unordered_map<std::string, std::uint32_t> m;
        std::uint32_t next = 1;
        for (auto& [tok, c] : kept) m[tok] = next++;
        v.sizes.push_back(m.size() + 1);
        v.field_maps.push_back(std::move(m));
    }
    return v;
}

EncodedDataset encode_dataset(const RawDataset& raw, const DatasetSchema& schema,
                              const Vocab& vocab, LogBase base) {
    EncodedDataset d;
    d.n = raw.rows.size();
    d.f = schema.fields.size();
    d.indices.reserve(d.n * d.f);
    d.labels.reserve(d.n);
    const std::size_t label_col = raw.column_index(schema.label);
    std::vector<std::size_t> cols;
    for (const FieldSpec& f : schema.fields) cols.push_back(raw.column_index(f.name));
    for (std::size_t r = 0; r < d.n; ++r) {
        for (std::size_t i = 0; i < d.f; ++i) {
            const std::string& cell = raw.rows[r][cols[i]];
            const std::string tok = schema.fields[i].kind == FieldKind::numeric
                                        ? discretize_numeric(cell, base)
                                        : cell;
            d.indices.push_back(vocab.encode(i, tok));
        }
        const std::string& lab = raw.rows[r][label_col];
        double y = 0.0;
        try {
            y = std::stod(lab);
        } catch (const std::exception&) {
            throw DataError("line " + std::to_string(r + 2) + ": label '" + lab +
                            "' is not numeric");
        }
        if (y != 0.0 && y != 1.0)
            throw DataError("line " + std::to_string(r + 2) + ": label " + lab +
                            " is not 0/1");
        d.labels.push_back(static_cast<std::uint8_t>(y));
    }
    return d;
}

EncodedDataset subset(const EncodedDataset& d, const std::vector<std::uint32_t>& rows) {
    EncodedDataset out;
    out.n = rows.size();
    out.f = d.f;
    out.indices.reserve(out.n * out.f);
    out.labels.reserve(out.n);
    for (std::uint32_t r : rows) {
        if (r >= d.n) throw ArgumentError("subset row " + std::to_string(r) + " out of range");
        const std::uint32_t* src = d.row(r);
        out.indices.insert(out.indices.end(), src, src + d.f);
        out.labels.push_back(d.labels[r]);
    }
    return out;
}

SplitIndices split_rows(std::size_t n, double r_train, double r_val, double r_test,
                        std::uint64_t seed) {
    if (std::abs(r_train + r_val + r_test - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");
    const std::size_t n_train = static_cast<std::size_t>(std::llround(r_train * static_cast<double>(n)));
    const std::size_t n_val = static_cast<std::size_t>(std::llround(r_val * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw ConfigError("split of " + std::to_string(n) + " rows at " +
                          std::to_string(r_train) + "/" + std::to_string(r_val) + "/" +
                          std::to_string(r_test) + " leaves an empty part");
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(derive_seed(seed, 0x5117, 0, 0));
    shuffle(order, rng);
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return s;
}

namespace {

void standardize(Points2D& p) {
    for (int axis = 0; axis < 2; ++axis) {
        double mean = 0.0;
        for (std::size_t i = 0; i < p.n; ++i) mean += p.xy[2 * i + axis];
        mean /= static_cast<double>(p.n);
        double var = 0.0;
        for (std::size_t i = 0; i < p.n; ++i) {
            const double d = p.xy[2 * i + axis] - mean;
            var += d * d;
        }
        var /= static_cast<double>(p.n);
        const double sd = std::sqrt(std::max(var, 1e-12));
        for (std::size_t i = 0; i < p.n; ++i)
            p.xy[2 * i + axis] = (p.xy[2 * i + axis] - mean) / sd;
    }
}

void check_synthetic_args(std::size_t n, double noise) {
    if (n < 2 || n % 2 != 0)
        throw ConfigError("synthetic n must be even and >= 2, got " + std::to_string(n));
    if (noise < 0.0) throw ConfigError("noise must be >= 0, got " + std::to_string(noise));
}

}  // namespace

Points2D make_moons(std::size_t n, double noise, std::uint64_t seed) {
    check_synthetic_args(n, noise);
    constexpr double pi = 3.14159265358979323846;
    Points2D p;
    p.n = n;
    p.xy.resize(2 * n);
    p.labels.resize(n);
    const std::size_t half = n / 2;
    Rng rng(derive_seed(seed, 0x300d5, 0, 0));
    for (std::size_t i = 0; i < half; ++i) {
        const double t = pi * static_cast<double>(i) / static_cast<double>(half - 1);
        p.xy[2 * i] = std::cos(t);
        p.xy[2 * i + 1] = std::sin(t);
        p.labels[i] = 0.0;
        const std::size_t j = half + i;
        p.xy[2 * j] = 1.0 - std::cos(t);
        p.xy[2 * j + 1] = 0.5 - std::sin(t);
        p.labels[j] = 1.0;
    }
    if (noise > 0.0)
        for (double& v : p.xy) v += noise * normal(rng);
    standardize(p);
    return p;
}

Points2D make_circles(std::size_t n, double factor, double noise, std::uint64_t seed) {
    check_synthetic_args(n, noise);
    if (!(factor > 0.0 && factor < 1.0))
        throw ConfigError("circle factor must be in (0,1), got " + std::to_string(factor));
    constexpr double pi = 3.14159265358979323846;
    Points2D p;
    p.n = n;
    p.xy.resize(2 * n);
    p.labels.resize(n);
    const std::size_t half = n / 2;
    Rng rng(derive_seed(seed, 0xc19c7e5, 0, 0));
    for (std::size_t i = 0; i < half; ++i) {
        const double t = 2.0 * pi * static_cast<double>(i) / static_cast<double>(half);
        p.xy[2 * i] = std::cos(t);  // outer, label 0
        p.xy[2 * i + 1] = std::sin(t);
        p.labels[i] = 0.0;
        const std::size_t j = half + i;
        p.xy[2 * j] = factor * std::cos(t);  // inner, label 1
        p.xy[2 * j + 1] = factor * std::sin(t);
        p.labels[j] = 1.0;
    }
    if (noise > 0.0)
        for (double& v : p.xy) v += noise * normal(rng);
    standardize(p);
    return p;
}

std::vector<std::vector<std::uint32_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                      std::uint64_t shuffle_seed,
                                                      std::uint64_t epoch) {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(derive_seed(shuffle_seed, epoch, 0xba7c4, 0));
    shuffle(order, rng);
    std::vector<std::vector<std::uint32_t>> blocks;
    for (std::size_t at = 0; at < n; at += batch_size) {
        const std::size_t end = std::min(n, at + batch_size);
        blocks.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                            order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return blocks;
}

static constexpr char kCacheMagic[9] = "QNNDATA1";

void save_cache(const EncodedDataset& d, const std::string& path) {
    std::string out;
    out.reserve(8 + 8 + 4 * d.indices.size() + d.labels.size());
    out.append(kCacheMagic, 8);
    put_u32(out, static_cast<std::uint32_t>(d.n));
    put_u32(out, static_cast<std::uint32_t>(d.f));
    for (std::uint32_t v : d.indices) put_u32(out, v);
    for (std::uint8_t b : d.labels) out.push_back(static_cast<char>(b));
    write_file(path, out);
}

EncodedDataset load_cache(const std::string& path) {
    const std::string in = read_file(path);
    if (in.size() < 16 || in.compare(0, 8, kCacheMagic, 8) != 0)
        throw FileFormatError(path + " is not a QNNDATA1 cache");
    EncodedDataset d;
    d.n = get_u32(in, 8);
    d.f = get_u32(in, 12);
    const std::size_t want = 16 + 4 * d.n * d.f + d.n;
    if (in.size() != want)
        throw IntegrityError(path + ": expected " + std::to_string(want) + " bytes, have " +
                             std::to_string(in.size()));
    d.indices.resize(d.n * d.f);
    for (std::size_t i = 0; i < d.indices.size(); ++i) d.indices[i] = get_u32(in, 16 + 4 * i);
    const std::size_t lab0 = 16 + 4 * d.indices.size();
    d.labels.resize(d.n);
    for (std::size_t i = 0; i < d.n; ++i) {
        const auto b = static_cast<std::uint8_t>(in[lab0 + i]);
        if (b > 1) throw IntegrityError(path + ": label byte " + std::to_string(b));
        d.labels[i] = b;
    }
    return d;
}

void save_split(const std::vector<std::uint32_t>& rows, const std::string& path) {
    std::string out;
    for (std::uint32_t r : rows) {
        out += std::to_string(r);
        out.push_back('\n');
    }
    write_file(path, out);
}

std::vector<std::uint32_t> load_split(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    std::vector<std::uint32_t> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            rows.push_back(static_cast<std::uint32_t>(std::stoul(line)));
        } catch (const std::exception&) {
            throw FileFormatError(path + " line " + std::to_string(lineno) +
                                  ": not a row index");
        }
    }
    return rows;
}

std::uint64_t fnv1a(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
    const std::string bytes = read_file(path);
    return fnv1a(bytes.data(), bytes.size());
}

}  // namespace qnn
