#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "qnn/errors.hpp"
#include "qnn/rng.hpp"

namespace qnn {

enum class FieldKind { categorical, numeric };

/// Numeric discretization flavor: e2 is floor((ln x)^2), two is
/// floor((log2 x)^2); both apply only for x > 2.
enum class LogBase { e2, two };

LogBase parse_log_base(const std::string& name);

struct FieldSpec {
    std::string name;
    FieldKind kind = FieldKind::categorical;
    std::size_t min_count = 1;  // tokens below this frequency fold into OOV
};

struct DatasetSchema {
    std::vector<FieldSpec> fields;
    std::string label;

    static DatasetSchema from_json(const std::string& text);
    std::string to_json() const;
};

/// CSV loaded as strings; header row gives column names. Empty cell = missing.
struct RawDataset {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(const std::string& name) const;  // DataError if absent
};

RawDataset read_csv(const std::string& path);

/// Token for one raw numeric cell: "1" for x <= 2, floor(log^2 x) as a
/// decimal string for x > 2, "" (the OOV sentinel) for missing/NaN/inf.
std::string discretize_numeric(const std::string& raw, LogBase base);

struct Vocab {
    // index 0 is the OOV row of every field; tokens start at 1
    std::vector<std::unordered_map<std::string, std::uint32_t>> field_maps;
    std::vector<std::size_t> sizes;  // s_i, OOV slot included

    std::uint32_t encode(std::size_t field, const std::string& token) const;
    std::size_t total_features() const;

    std::string to_json(const DatasetSchema& schema) const;
    static Vocab from_json(const std::string& text, const DatasetSchema& schema);
};

/// Counts tokens over the given training rows only; keeps tokens with
/// count >= the field's min_count, indexed by descending count then
/// lexicographic order.
Vocab build_vocab(const RawDataset& raw, const DatasetSchema& schema,
                  const std::vector<std::uint32_t>& train_rows, LogBase base);

struct EncodedDataset {
    std::size_t n = 0, f = 0;
    std::vector<std::uint32_t> indices;  // n x f row-major
    std::vector<std::uint8_t> labels;    // {0,1}

    const std::uint32_t* row(std::size_t i) const { return indices.data() + i * f; }
};

EncodedDataset encode_dataset(const RawDataset& raw, const DatasetSchema& schema,
                              const Vocab& vocab, LogBase base);

/// Restriction of a dataset to a list of row indices.
EncodedDataset subset(const EncodedDataset& d, const std::vector<std::uint32_t>& rows);

struct SplitIndices {
    std::vector<std::uint32_t> train, val, test;
};

/// Seed-deterministic disjoint exhaustive split; throws ConfigError when any
/// part would be empty or ratios do not sum to 1.
SplitIndices split_rows(std::size_t n, double r_train, double r_val, double r_test,
                        std::uint64_t seed);

/// 2-D synthetic sets, standardized to zero mean / unit variance per axis.
struct Points2D {
    std::size_t n = 0;
    std::vector<double> xy;      // n x 2 row-major
    std::vector<double> labels;  // {0,1}
};

Points2D make_moons(std::size_t n, double noise, std::uint64_t seed);
Points2D make_circles(std::size_t n, double factor, double noise, std::uint64_t seed);

/// Row-index blocks for one epoch: shuffled by a seed derived from
/// (shuffle_seed, epoch), last partial batch kept.
std::vector<std::vector<std::uint32_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                      std::uint64_t shuffle_seed,
                                                      std::uint64_t epoch);

/// Binary cache (magic "QNNDATA1"): u32 n, u32 f, u32 indices, u8 labels,
/// all little-endian.
void save_cache(const EncodedDataset& d, const std::string& path);
EncodedDataset load_cache(const std::string& path);

/// Newline-separated row indices.
void save_split(const std::vector<std::uint32_t>& rows, const std::string& path);
std::vector<std::uint32_t> load_split(const std::string& path);

/// FNV-1a 64-bit content hashes for the reproducibility manifest.
std::uint64_t fnv1a(const void* data, std::size_t len);
std::uint64_t fnv1a_file(const std::string& path);

}  // namespace qnn
