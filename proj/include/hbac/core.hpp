#pragma once
// Dataset model shared by all modules: feature schema, row storage, the
// per-row bias metric, validation, and train/test sample splitting.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hbac/error.hpp"
#include "hbac/rng.hpp"

namespace hbac {

enum class ColumnKind { numeric, binary, categorical };
enum class MetricKind { continuous, binary };

const char* to_string(ColumnKind kind);
const char* to_string(MetricKind kind);
ColumnKind column_kind_from(const std::string& name);
MetricKind metric_kind_from(const std::string& name);

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    // Value labels for categorical columns; cells hold indices into this
    // list. Empty for numeric and binary columns.
    std::vector<std::string> categories;
};

struct FeatureSchema {
    std::vector<Column> columns;
    MetricKind metric_kind = MetricKind::continuous;

    std::size_t arity() const { return columns.size(); }
    bool has_categorical() const;
    bool has_numeric() const;
    std::vector<std::string> column_names() const;
};

// Non-owning view over row-major doubles.
struct MatrixView {
    const double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    const double* row(std::size_t r) const { return data + r * cols; }
    std::span<const double> row_span(std::size_t r) const {
        return {row(r), cols};
    }
};

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    MatrixView view() const { return {data.data(), rows, cols}; }
};

// Row-major feature storage plus the aligned metric and optional labels.
// Categorical cells hold exact small integers (indices into the column's
// category list); binary cells hold 0 or 1. Immutable after construction.
class Dataset {
public:
    Dataset(FeatureSchema schema, std::vector<double> cells,
            std::vector<double> metric,
            std::optional<std::vector<int>> labels = std::nullopt);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return schema_.arity(); }
    const FeatureSchema& schema() const { return schema_; }
    const std::vector<double>& cells() const { return cells_; }
    const std::vector<double>& metric() const { return metric_; }
    const std::optional<std::vector<int>>& labels() const { return labels_; }

    double cell(std::size_t row, std::size_t col) const {
        return cells_[row * schema_.arity() + col];
    }
    std::span<const double> row(std::size_t r) const {
        return {cells_.data() + r * schema_.arity(), schema_.arity()};
    }
    MatrixView features() const {
        return {cells_.data(), n_rows_, schema_.arity()};
    }

    // Dataset restricted to the given rows, order preserved.
    Dataset subset(std::span<const std::size_t> rows) const;

private:
    FeatureSchema schema_;
    std::size_t n_rows_ = 0;
    std::vector<double> cells_;
    std::vector<double> metric_;
    std::optional<std::vector<int>> labels_;
};

struct ValidationResult {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Structural checks: aligned lengths, schema conformance of every cell,
// metric values matching the declared metric kind, binary labels. Missing
// values (NaN) are violations; there is no imputation.
ValidationResult validate(const Dataset& dataset);

struct SplitIndices {
    std::vector<std::size_t> train;  // ascending
    std::vector<std::size_t> test;   // ascending
    double fraction = 0.0;
    std::uint64_t seed = 0;
};

// Uniform random partition of {0..n-1} without replacement with
// |test| = round(fraction*n), halves rounded up. Deterministic in
// (n, fraction, seed). Throws Errc::degenerate_split if a side is empty.
SplitIndices split_sample(std::size_t n, double fraction, std::uint64_t seed);

// Expands every categorical column into one 0/1 column per category
// (exactly one hot per row), named "<column>=<category>". Numeric and
// binary columns pass through unchanged, as do metric and labels.
Dataset one_hot_expand(const Dataset& dataset);

// FNV-1a 64-bit over arbitrary bytes; used for fit-data fingerprints in
// serialized artifacts (not a cryptographic hash).
std::uint64_t fnv1a64(const void* bytes, std::size_t len,
                      std::uint64_t state = 0xcbf29ce484222325ULL);
std::uint64_t hash_dataset(const Dataset& dataset);

}  // namespace hbac
