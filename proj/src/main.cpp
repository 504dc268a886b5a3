#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qnn/boundary.hpp"
#include "qnn/data.hpp"
#include "qnn/errors.hpp"
#include "qnn/layers.hpp"
#include "qnn/model.hpp"
#include "qnn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qnn;

namespace {

// ---------------------------------------------------------------------------
// Small file/JSON helpers

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write '" + path + "'");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw DataError("failed writing '" + path + "'");
}

void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok = ok || it.key() == k;
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void get_if(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + where + ": " + e.what());
    }
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// RunConfig: the JSON document driving train/sweep.

struct DataSection {
    std::string csv, schema;
    std::string split_train, split_val, split_test;  // optional precomputed splits
    std::size_t threshold = 0;                       // >0 overrides every field's min_count
    std::string log_base = "e2";
    std::vector<double> split_ratios = {0.8, 0.1, 0.1};
};

struct ModelSection {
    std::string format = "qnn_alpha";
    std::size_t d = 16;
    std::size_t L = 3;
    std::size_t M = 1, H = 1;
    double dropout = 0.1;
    std::string head_input = "local";
    std::string placement_mode = "none";
    std::string placement_kind = "relu";
};

struct RunConfig {
    DataSection data;
    ModelSection model;
    TrainConfig train;
    std::string output = "qnn_out";

    static RunConfig from_file(const std::string& path);
    json to_json() const;
};

RunConfig RunConfig::from_file(const std::string& path) {
    json j;
    try {
        j = json::parse(slurp(path));
    } catch (const json::exception& e) {
        throw ConfigError("invalid run config JSON in '" + path + "': " + e.what());
    }
    check_keys(j, {"data", "model", "train", "output"}, "run config");
    RunConfig rc;
    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, {"csv", "schema", "split_train", "split_val", "split_test", "threshold",
                       "log_base", "split_ratios"},
                   "data section");
        get_if(d, "csv", rc.data.csv, "data");
        get_if(d, "schema", rc.data.schema, "data");
        get_if(d, "split_train", rc.data.split_train, "data");
        get_if(d, "split_val", rc.data.split_val, "data");
        get_if(d, "split_test", rc.data.split_test, "data");
        get_if(d, "threshold", rc.data.threshold, "data");
        get_if(d, "log_base", rc.data.log_base, "data");
        get_if(d, "split_ratios", rc.data.split_ratios, "data");
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, {"format", "d", "L", "M", "H", "dropout", "head_input", "placement_mode",
                       "placement_kind"},
                   "model section");
        get_if(m, "format", rc.model.format, "model");
        get_if(m, "d", rc.model.d, "model");
        get_if(m, "L", rc.model.L, "model");
        get_if(m, "M", rc.model.M, "model");
        get_if(m, "H", rc.model.H, "model");
        get_if(m, "dropout", rc.model.dropout, "model");
        get_if(m, "head_input", rc.model.head_input, "model");
        get_if(m, "placement_mode", rc.model.placement_mode, "model");
        get_if(m, "placement_kind", rc.model.placement_kind, "model");
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, {"lr", "beta1", "beta2", "adam_eps", "batch_size", "max_epochs", "patience",
                       "plateau_factor", "min_improve", "seed", "se_enabled", "forward_passes",
                       "se_variant", "grad_clip"},
                   "train section");
        get_if(t, "lr", rc.train.lr, "train");
        get_if(t, "beta1", rc.train.beta1, "train");
        get_if(t, "beta2", rc.train.beta2, "train");
        get_if(t, "adam_eps", rc.train.adam_eps, "train");
        get_if(t, "batch_size", rc.train.batch_size, "train");
        get_if(t, "max_epochs", rc.train.max_epochs, "train");
        get_if(t, "patience", rc.train.patience, "train");
        get_if(t, "plateau_factor", rc.train.plateau_factor, "train");
        get_if(t, "min_improve", rc.train.min_improve, "train");
        get_if(t, "seed", rc.train.seed, "train");
        get_if(t, "se_enabled", rc.train.se_enabled, "train");
        get_if(t, "forward_passes", rc.train.forward_passes, "train");
        std::string variant = se_variant_name(rc.train.se_variant);
        get_if(t, "se_variant", variant, "train");
        rc.train.se_variant = parse_se_variant(variant);
        get_if(t, "grad_clip", rc.train.grad_clip, "train");
    }
    get_if(j, "output", rc.output, "run config");
    if (rc.data.csv.empty()) throw ConfigError("data.csv is required");
    if (rc.data.schema.empty()) throw ConfigError("data.schema is required");
    if (rc.data.split_ratios.size() != 3)
        throw ConfigError("data.split_ratios must have exactly 3 entries");
    bool any_split = !rc.data.split_train.empty() || !rc.data.split_val.empty() ||
                     !rc.data.split_test.empty();
    bool all_split = !rc.data.split_train.empty() && !rc.data.split_val.empty() &&
                     !rc.data.split_test.empty();
    if (any_split && !all_split)
        throw ConfigError("provide all of split_train/split_val/split_test or none");
    rc.train.validate();
    return rc;
}

json RunConfig::to_json() const {
    json j;
    j["data"]["csv"] = data.csv;
    j["data"]["schema"] = data.schema;
    j["data"]["split_train"] = data.split_train;
    j["data"]["split_val"] = data.split_val;
    j["data"]["split_test"] = data.split_test;
    j["data"]["threshold"] = data.threshold;
    j["data"]["log_base"] = data.log_base;
    j["data"]["split_ratios"] = data.split_ratios;
    j["model"]["format"] = model.format;
    j["model"]["d"] = model.d;
    j["model"]["L"] = model.L;
    j["model"]["M"] = model.M;
    j["model"]["H"] = model.H;
    j["model"]["dropout"] = model.dropout;
    j["model"]["head_input"] = model.head_input;
    j["model"]["placement_mode"] = model.placement_mode;
    j["model"]["placement_kind"] = model.placement_kind;
    j["train"]["lr"] = train.lr;
    j["train"]["beta1"] = train.beta1;
    j["train"]["beta2"] = train.beta2;
    j["train"]["adam_eps"] = train.adam_eps;
    j["train"]["batch_size"] = train.batch_size;
    j["train"]["max_epochs"] = train.max_epochs;
    j["train"]["patience"] = train.patience;
    j["train"]["plateau_factor"] = train.plateau_factor;
    j["train"]["min_improve"] = train.min_improve;
    j["train"]["seed"] = train.seed;
    j["train"]["se_enabled"] = train.se_enabled;
    j["train"]["forward_passes"] = train.forward_passes;
    j["train"]["se_variant"] = se_variant_name(train.se_variant);
    j["train"]["grad_clip"] = train.grad_clip;
    j["output"] = output;
    return j;
}

// QNN_SEED overrides the configured seed everywhere.
bool env_seed(std::uint64_t& out) {
    const char* s = std::getenv("QNN_SEED");
    if (!s || !*s) return false;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0')
        throw ArgumentError("QNN_SEED must be an unsigned integer, got '" + std::string(s) + "'");
    out = v;
    return true;
}

// ---------------------------------------------------------------------------
// Shared data pipeline for train/sweep

struct Prepared {
    DatasetSchema schema;
    Vocab vocab;
    EncodedDataset all, train, val, test;
    SplitIndices splits;
    std::vector<std::pair<std::string, std::uint64_t>> input_hashes;
};

Prepared prepare_data(const DataSection& ds, std::uint64_t seed) {
    Prepared p;
    p.schema = DatasetSchema::from_json(slurp(ds.schema));
    if (ds.threshold > 0)
        for (FieldSpec& f : p.schema.fields) f.min_count = ds.threshold;
    LogBase base = parse_log_base(ds.log_base);
    RawDataset raw = read_csv(ds.csv);
    if (!ds.split_train.empty()) {
        p.splits.train = load_split(ds.split_train);
        p.splits.val = load_split(ds.split_val);
        p.splits.test = load_split(ds.split_test);
    } else {
        p.splits = split_rows(raw.rows.size(), ds.split_ratios[0], ds.split_ratios[1],
                              ds.split_ratios[2], seed);
    }
    p.vocab = build_vocab(raw, p.schema, p.splits.train, base);
    p.all = encode_dataset(raw, p.schema, p.vocab, base);
    p.train = subset(p.all, p.splits.train);
    p.val = subset(p.all, p.splits.val);
    p.test = subset(p.all, p.splits.test);
    p.input_hashes.emplace_back(ds.csv, fnv1a_file(ds.csv));
    p.input_hashes.emplace_back(ds.schema, fnv1a_file(ds.schema));
    if (!ds.split_train.empty()) {
        p.input_hashes.emplace_back(ds.split_train, fnv1a_file(ds.split_train));
        p.input_hashes.emplace_back(ds.split_val, fnv1a_file(ds.split_val));
        p.input_hashes.emplace_back(ds.split_test, fnv1a_file(ds.split_test));
    }
    return p;
}

ModelConfig make_model_config(const ModelSection& ms, const Vocab& vocab, std::uint64_t seed) {
    ModelConfig mc;
    mc.input = "fields";
    mc.vocab_sizes = vocab.sizes;
    mc.embed_dim = ms.d;
    mc.format = ms.format;
    mc.placement_mode = ms.placement_mode;
    mc.placement_kind = ms.placement_kind;
    mc.layers = ms.L;
    mc.M = ms.M;
    mc.H = ms.H;
    mc.head_input = ms.head_input;
    mc.dropout = ms.dropout;
    mc.seed = seed;
    mc.validate();
    return mc;
}

// ---------------------------------------------------------------------------
// Subcommands

struct PrepArgs {
    std::string csv, schema, out;
    std::size_t threshold = 0;
    std::string log_base = "e2";
    std::uint64_t seed = 0;
};

int cmd_prep(const PrepArgs& a) {
    std::uint64_t seed = a.seed;
    env_seed(seed);
    DataSection ds;
    ds.csv = a.csv;
    ds.schema = a.schema;
    ds.threshold = a.threshold;
    ds.log_base = a.log_base;
    Prepared p = prepare_data(ds, seed);
    fs::create_directories(a.out);
    save_cache(p.all, (fs::path(a.out) / "cache.bin").string());
    spit((fs::path(a.out) / "vocab.json").string(), p.vocab.to_json(p.schema));
    save_split(p.splits.train, (fs::path(a.out) / "train.idx").string());
    save_split(p.splits.val, (fs::path(a.out) / "val.idx").string());
    save_split(p.splits.test, (fs::path(a.out) / "test.idx").string());
    for (std::size_t i = 0; i < p.vocab.sizes.size(); ++i)
        std::printf("field %s: %zu\n", p.schema.fields[i].name.c_str(), p.vocab.sizes[i]);
    std::printf("total features: %zu\n", p.vocab.total_features());
    std::printf("rows: %zu (train %zu / val %zu / test %zu)\n", p.all.n, p.splits.train.size(),
                p.splits.val.size(), p.splits.test.size());
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

void write_manifest(const std::string& dir, const std::string& command, const RunConfig& rc,
                    std::uint64_t seed, const Prepared& p, const QnnModel& model,
                    std::initializer_list<std::pair<const char*, const char*>> artifacts) {
    json m;
    m["command"] = command;
    m["config"] = rc.to_json();
    m["effective_seed"] = seed;
    for (auto& [path, hash] : p.input_hashes) m["inputs"][path] = hex64(hash);
    m["model_config_hash"] = hex64(model.config_hash());
    for (auto& [k, v] : artifacts) m["artifacts"][k] = v;
    spit((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

int cmd_train(const std::string& config_path) {
    RunConfig rc = RunConfig::from_file(config_path);
    env_seed(rc.train.seed);
    // Fail fast on a bad model section before touching data.
    registry_lookup(rc.model.format);
    Prepared p = prepare_data(rc.data, rc.train.seed);
    QnnModel model = QnnModel::init(make_model_config(rc.model, p.vocab, rc.train.seed));
    TrainReport rep = train_model(model, p.train, p.val, rc.train);
    MetricReport test = evaluate_model(model, p.test);

    fs::create_directories(rc.output);
    spit((fs::path(rc.output) / "report.jsonl").string(), rep.to_jsonl());
    spit((fs::path(rc.output) / "metrics.json").string(), test.to_json() + "\n");
    model.save((fs::path(rc.output) / "model.ckpt").string());
    write_manifest(rc.output, "train", rc, rc.train.seed, p, model,
                   {{"checkpoint", "model.ckpt"},
                    {"report", "report.jsonl"},
                    {"metrics", "metrics.json"}});

    std::printf("train: %zu epochs, best epoch %zu, best val auc %.6f (%s)\n", rep.epochs.size(),
                rep.best_epoch, rep.best_val_auc, rep.stop_reason.c_str());
    std::printf("test: logloss %.6f auc %.6f n %zu\n", test.logloss, test.auc, test.n);
    std::printf("wrote %s\n", rc.output.c_str());
    return 0;
}

struct SweepArgs {
    std::string config;
    std::string formats = "mlp,crossnetv2,t9,t19,qnn_alpha";
    std::string placements = "none,post";
    std::string out;  // defaults to the run config's output directory
};

struct SweepCell {
    std::string format, placement;
    bool ok = false;
    double logloss = 0.0, auc = 0.0, seconds = 0.0;
    std::size_t params = 0, epochs = 0;
    std::string error;
};

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += "\"\"";
        q.push_back(c);
    }
    return q + "\"";
}

int cmd_sweep(const SweepArgs& a) {
    RunConfig rc = RunConfig::from_file(a.config);
    env_seed(rc.train.seed);
    std::vector<std::string> formats = split_list(a.formats);
    std::vector<std::string> placements = split_list(a.placements);
    if (formats.empty()) throw ArgumentError("sweep needs at least one format");
    if (placements.empty()) throw ArgumentError("sweep needs at least one placement");
    for (const std::string& f : formats) registry_lookup(f);  // fail fast
    for (const std::string& pl : placements) parse_placement(pl);

    Prepared p = prepare_data(rc.data, rc.train.seed);
    std::vector<SweepCell> cells;
    for (const std::string& f : formats) {
        for (const std::string& pl : placements) {
            SweepCell cell;
            cell.format = f;
            cell.placement = pl;
            auto t0 = std::chrono::steady_clock::now();
            try {
                ModelSection ms = rc.model;
                ms.format = f;
                ms.placement_mode = pl;
                ModelConfig mc = make_model_config(ms, p.vocab, rc.train.seed);
                QnnModel model = QnnModel::init(mc);
                cell.params = param_count(model.spec);
                TrainReport rep = train_model(model, p.train, p.val, rc.train);
                MetricReport test = evaluate_model(model, p.test);
                cell.logloss = test.logloss;
                cell.auc = test.auc;
                cell.epochs = rep.epochs.size();
                cell.ok = true;
            } catch (const Error& e) {
                cell.error = e.what();
            }
            cell.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            cells.push_back(cell);
        }
    }

    std::string out_dir = a.out.empty() ? rc.output : a.out;
    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv << "format,placement,logloss,auc,params,seconds,epochs,error\n";
    for (const SweepCell& c : cells) {
        csv << c.format << "," << c.placement << ",";
        if (c.ok)
            csv << std::setprecision(17) << c.logloss << "," << c.auc << "," << c.params << ","
                << c.seconds << "," << c.epochs << ",";
        else
            csv << ",,,," << ",";
        csv << csv_quote(c.error) << "\n";
    }
    spit((fs::path(out_dir) / "sweep.csv").string(), csv.str());

    // Gap rows: plain formula minus its post-activation variant.
    auto find_cell = [&](const std::string& f, const std::string& pl) -> const SweepCell* {
        for (const SweepCell& c : cells)
            if (c.format == f && c.placement == pl && c.ok) return &c;
        return nullptr;
    };
    std::ostringstream gaps;
    gaps << "format,d_logloss,d_auc\n";
    bool any_gap = false;
    for (const std::string& f : formats) {
        const SweepCell* none = find_cell(f, "none");
        const SweepCell* post = find_cell(f, "post");
        if (none && post) {
            gaps << f << "," << std::setprecision(17) << none->logloss - post->logloss << ","
                 << none->auc - post->auc << "\n";
            any_gap = true;
        }
    }
    if (any_gap) spit((fs::path(out_dir) / "gaps.csv").string(), gaps.str());

    std::printf("%-12s %-6s %10s %10s %10s %9s %7s\n", "format", "place", "logloss", "auc",
                "params", "seconds", "epochs");
    for (const SweepCell& c : cells) {
        if (c.ok)
            std::printf("%-12s %-6s %10.6f %10.6f %10zu %9.2f %7zu\n", c.format.c_str(),
                        c.placement.c_str(), c.logloss, c.auc, c.params, c.seconds, c.epochs);
        else
            std::printf("%-12s %-6s failed: %s\n", c.format.c_str(), c.placement.c_str(),
                        c.error.c_str());
    }
    if (any_gap) {
        std::printf("\ngaps (none - post):\n%-12s %12s %12s\n", "format", "d_logloss", "d_auc");
        for (const std::string& f : formats) {
            const SweepCell* none = find_cell(f, "none");
            const SweepCell* post = find_cell(f, "post");
            if (none && post)
                std::printf("%-12s %+12.6f %+12.6f\n", f.c_str(), none->logloss - post->logloss,
                            none->auc - post->auc);
        }
    }
    std::printf("wrote %s\n", out_dir.c_str());
    return 0;
}

struct BoundaryArgs {
    std::string dataset = "moons";
    std::string format = "t9";
    std::string placement_mode = "none";
    std::string placement_kind = "relu";
    std::string out = "grid.csv";
    std::uint64_t seed = 0;
    std::size_t n = 1000;
    double noise = -1.0;
    double factor = 0.5;
    std::size_t epochs = 0;
    std::size_t M = 1, H = 1;
};

int cmd_boundary(const BoundaryArgs& a) {
    BoundaryConfig bc;
    bc.dataset = a.dataset;
    bc.format = a.format;
    bc.placement_mode = a.placement_mode;
    bc.placement_kind = a.placement_kind;
    bc.seed = a.seed;
    env_seed(bc.seed);
    bc.n = a.n;
    bc.noise = a.noise;
    bc.factor = a.factor;
    bc.epochs = a.epochs;
    bc.M = a.M;
    bc.H = a.H;
    BoundaryResult r = run_boundary(bc);
    write_boundary_csv(r, a.out);
    std::printf("test accuracy %.4f\n", r.test_accuracy);
    std::printf("wrote %s (%zux%zu grid)\n", a.out.c_str(), r.grid_n, r.grid_n);
    return 0;
}

struct BenchArgs {
    std::string checkpoint, data, out;
    std::size_t batch = 100;
    int reps = 30;
};

int cmd_bench(const BenchArgs& a) {
    if (a.reps < 30) throw ArgumentError("bench needs at least 30 repetitions");
    QnnModel model = QnnModel::load(a.checkpoint);
    EncodedDataset data = load_cache(a.data);
    LatencyStats ls = bench_model(model, data, a.batch, a.reps);
    std::printf("batch %zu, reps %d\n", std::min(a.batch, data.n), ls.reps);
    std::printf("median_ms_per_100 %.6f\n", ls.median_ms_per_100);
    std::printf("p95_ms_per_100 %.6f\n", ls.p95_ms_per_100);
    if (!a.out.empty()) {
        json j;
        j["median_ms_per_100"] = ls.median_ms_per_100;
        j["p95_ms_per_100"] = ls.p95_ms_per_100;
        j["reps"] = ls.reps;
        j["batch"] = std::min(a.batch, data.n);
        j["n"] = data.n;
        spit(a.out, j.dump(2) + "\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quadratic neural networks for click-through-rate prediction"};
    app.require_subcommand(1);

    PrepArgs prep;
    CLI::App* prep_cmd = app.add_subcommand("prep", "Encode a CSV dataset into cache artifacts");
    prep_cmd->add_option("--csv", prep.csv, "input CSV with header row")->required();
    prep_cmd->add_option("--schema", prep.schema, "dataset schema JSON")->required();
    prep_cmd->add_option("--out", prep.out, "output directory")->required();
    prep_cmd->add_option("--threshold", prep.threshold,
                         "OOV min-count override for every field (0: keep schema values)");
    prep_cmd->add_option("--log-base", prep.log_base, "numeric discretization base: e2 | 2");
    prep_cmd->add_option("--seed", prep.seed, "split seed");

    std::string train_config;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a model from a run config");
    train_cmd->add_option("--config", train_config, "run config JSON")->required();

    SweepArgs sweep;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Train a grid of formats x placements");
    sweep_cmd->add_option("--config", sweep.config, "run config JSON")->required();
    sweep_cmd->add_option("--formats", sweep.formats, "comma-separated neuron formats");
    sweep_cmd->add_option("--placements", sweep.placements,
                          "comma-separated placements from {none,post,mid}");
    sweep_cmd->add_option("--out", sweep.out, "output directory (default: config output)");

    BoundaryArgs boundary;
    CLI::App* boundary_cmd =
        app.add_subcommand("boundary", "2-D decision-boundary study on synthetic data");
    boundary_cmd->add_option("--dataset", boundary.dataset, "moons | circles");
    boundary_cmd->add_option("--format", boundary.format, "neuron format");
    boundary_cmd->add_option("--placement-mode", boundary.placement_mode, "none | post | mid");
    boundary_cmd->add_option("--placement-kind", boundary.placement_kind, "activation kind");
    boundary_cmd->add_option("--out", boundary.out, "grid CSV path");
    boundary_cmd->add_option("--seed", boundary.seed, "data/model seed");
    boundary_cmd->add_option("--n", boundary.n, "sample count");
    boundary_cmd->add_option("--noise", boundary.noise, "noise level (<0: dataset default)");
    boundary_cmd->add_option("--factor", boundary.factor, "circles radius ratio");
    boundary_cmd->add_option("--epochs", boundary.epochs, "override epoch count (0: protocol)");
    boundary_cmd->add_option("--M", boundary.M, "qnn_alpha expansion rows");
    boundary_cmd->add_option("--H", boundary.H, "qnn_alpha heads");

    BenchArgs bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Measure inference latency per 100 samples");
    bench_cmd->add_option("--checkpoint", bench.checkpoint, "model checkpoint")->required();
    bench_cmd->add_option("--data", bench.data, "encoded cache file")->required();
    bench_cmd->add_option("--batch", bench.batch, "batch size");
    bench_cmd->add_option("--reps", bench.reps, "timing repetitions (>= 30)");
    bench_cmd->add_option("--out", bench.out, "optional JSON output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(prep_cmd)) return cmd_prep(prep);
        if (app.got_subcommand(train_cmd)) return cmd_train(train_config);
        if (app.got_subcommand(sweep_cmd)) return cmd_sweep(sweep);
        if (app.got_subcommand(boundary_cmd)) return cmd_boundary(boundary);
        if (app.got_subcommand(bench_cmd)) return cmd_bench(bench);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FileFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IntegrityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const MetricError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
