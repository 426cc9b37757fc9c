#include "hbac/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>

namespace hbac {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::validation: return "validation";
        case Errc::degenerate_split: return "degenerate_split";
        case Errc::insufficient_data: return "insufficient_data";
        case Errc::insufficient_sample: return "insufficient_sample";
        case Errc::degenerate_variance: return "degenerate_variance";
        case Errc::degenerate_table: return "degenerate_table";
        case Errc::schema_mismatch: return "schema_mismatch";
        case Errc::undefined_score: return "undefined_score";
        case Errc::infeasible_grid: return "infeasible_grid";
        case Errc::domain: return "domain";
        case Errc::single_class: return "single_class";
        case Errc::missing_table_entry: return "missing_table_entry";
        case Errc::unknown_distance: return "unknown_distance";
        case Errc::out_of_range: return "out_of_range";
        case Errc::bad_config: return "bad_config";
        case Errc::io: return "io";
    }
    return "unknown";
}

const char* to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::binary: return "binary";
        case ColumnKind::categorical: return "categorical";
    }
    return "unknown";
}

const char* to_string(MetricKind kind) {
    return kind == MetricKind::continuous ? "continuous" : "binary";
}

ColumnKind column_kind_from(const std::string& name) {
    if (name == "numeric") return ColumnKind::numeric;
    if (name == "binary") return ColumnKind::binary;
    if (name == "categorical") return ColumnKind::categorical;
    raise(Errc::bad_config, "unknown column kind '" + name + "'");
}

MetricKind metric_kind_from(const std::string& name) {
    if (name == "continuous") return MetricKind::continuous;
    if (name == "binary") return MetricKind::binary;
    raise(Errc::bad_config, "unknown metric kind '" + name + "'");
}

bool FeatureSchema::has_categorical() const {
    return std::any_of(columns.begin(), columns.end(), [](const Column& c) {
        return c.kind == ColumnKind::categorical;
    });
}

bool FeatureSchema::has_numeric() const {
    return std::any_of(columns.begin(), columns.end(), [](const Column& c) {
        return c.kind == ColumnKind::numeric;
    });
}

std::vector<std::string> FeatureSchema::column_names() const {
    std::vector<std::string> names;
    names.reserve(columns.size());
    for (const auto& c : columns) names.push_back(c.name);
    return names;
}

Dataset::Dataset(FeatureSchema schema, std::vector<double> cells,
                 std::vector<double> metric,
                 std::optional<std::vector<int>> labels)
    : schema_(std::move(schema)),
      cells_(std::move(cells)),
      metric_(std::move(metric)),
      labels_(std::move(labels)) {
    const std::size_t d = schema_.arity();
    if (d == 0) {
        raise(Errc::bad_config, "schema declares no feature columns");
    }
    if (cells_.size() % d != 0) {
        raise(Errc::bad_config, "cell count is not a multiple of the arity");
    }
    n_rows_ = cells_.size() / d;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    const std::size_t d = schema_.arity();
    std::vector<double> cells;
    cells.reserve(rows.size() * d);
    std::vector<double> metric;
    metric.reserve(rows.size());
    std::optional<std::vector<int>> labels;
    if (labels_) labels.emplace();

    for (std::size_t r : rows) {
        if (r >= n_rows_) raise(Errc::out_of_range, "subset row out of range");
        cells.insert(cells.end(), cells_.begin() + r * d,
                     cells_.begin() + (r + 1) * d);
        if (r < metric_.size()) metric.push_back(metric_[r]);
        if (labels_ && r < labels_->size()) labels->push_back((*labels_)[r]);
    }
    return Dataset(schema_, std::move(cells), std::move(metric),
                   std::move(labels));
}

namespace {

bool is_integral_value(double v) { return std::isfinite(v) && v == std::floor(v); }

constexpr std::size_t kMaxReportedViolations = 50;

void add_violation(ValidationResult& result, std::size_t& suppressed,
                   const std::string& text) {
    if (result.violations.size() < kMaxReportedViolations) {
        result.violations.push_back(text);
    } else {
        ++suppressed;
    }
}

}  // namespace

ValidationResult validate(const Dataset& dataset) {
    ValidationResult result;
    std::size_t suppressed = 0;
    const FeatureSchema& schema = dataset.schema();
    const std::size_t n = dataset.n_rows();

    if (n == 0) {
        result.violations.push_back("dataset is empty");
        return result;
    }

    // Schema self-consistency.
    std::set<std::string> seen;
    for (const Column& col : schema.columns) {
        if (col.name.empty()) {
            add_violation(result, suppressed, "schema has an unnamed column");
        }
        if (!seen.insert(col.name).second) {
            add_violation(result, suppressed,
                          "duplicate column name '" + col.name + "'");
        }
        if (col.kind == ColumnKind::categorical && col.categories.empty()) {
            add_violation(result, suppressed, "categorical column '" +
                                                  col.name +
                                                  "' declares no categories");
        }
    }

    if (dataset.metric().size() != n) {
        add_violation(result, suppressed,
                      "length mismatch: " + std::to_string(n) + " rows vs " +
                          std::to_string(dataset.metric().size()) +
                          " metric values");
    }
    if (dataset.labels() && dataset.labels()->size() != n) {
        add_violation(result, suppressed,
                      "length mismatch: " + std::to_string(n) + " rows vs " +
                          std::to_string(dataset.labels()->size()) +
                          " labels");
    }

    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < schema.arity(); ++c) {
            const double v = dataset.cell(r, c);
            const Column& col = schema.columns[c];
            std::string where = "row " + std::to_string(r) + ", column '" +
                                col.name + "'";
            switch (col.kind) {
                case ColumnKind::numeric:
                    if (!std::isfinite(v)) {
                        add_violation(result, suppressed,
                                      "non-finite numeric value at " + where);
                    }
                    break;
                case ColumnKind::binary:
                    if (v != 0.0 && v != 1.0) {
                        add_violation(result, suppressed,
                                      "non-binary value at " + where);
                    }
                    break;
                case ColumnKind::categorical:
                    if (!is_integral_value(v) || v < 0.0 ||
                        v >= static_cast<double>(col.categories.size())) {
                        add_violation(result, suppressed,
                                      "category index out of range at " + where);
                    }
                    break;
            }
        }
    }

    const std::size_t m = std::min(n, dataset.metric().size());
    for (std::size_t r = 0; r < m; ++r) {
        const double v = dataset.metric()[r];
        if (!std::isfinite(v)) {
            add_violation(result, suppressed,
                          "non-finite metric value at row " + std::to_string(r));
        } else if (schema.metric_kind == MetricKind::binary && v != 0.0 &&
                   v != 1.0) {
            add_violation(result, suppressed,
                          "non-binary metric value at row " + std::to_string(r));
        }
    }

    if (dataset.labels()) {
        const auto& labels = *dataset.labels();
        const std::size_t ln = std::min(n, labels.size());
        for (std::size_t r = 0; r < ln; ++r) {
            if (labels[r] != 0 && labels[r] != 1) {
                add_violation(result, suppressed,
                              "non-binary label at row " + std::to_string(r));
            }
        }
    }

    if (suppressed > 0) {
        result.violations.push_back("... and " + std::to_string(suppressed) +
                                    " further violations");
    }
    return result;
}

SplitIndices split_sample(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        raise(Errc::bad_config, "split fraction must lie in (0,1)");
    }
    // Round half up, e.g. round(0.5) == 1.
    const auto n_test = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(n) + 0.5));
    if (n < 2 || n_test < 1 || n_test > n - 1) {
        raise(Errc::degenerate_split,
              "split of " + std::to_string(n) + " rows at fraction " +
                  std::to_string(fraction) + " leaves an empty side");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(seed);
    rng.shuffle(order);

    SplitIndices out;
    out.fraction = fraction;
    out.seed = seed;
    out.test.assign(order.begin(), order.begin() + static_cast<long>(n_test));
    out.train.assign(order.begin() + static_cast<long>(n_test), order.end());
    std::sort(out.test.begin(), out.test.end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

Dataset one_hot_expand(const Dataset& dataset) {
    const FeatureSchema& schema = dataset.schema();

    FeatureSchema expanded;
    expanded.metric_kind = schema.metric_kind;
    for (const Column& col : schema.columns) {
        if (col.kind == ColumnKind::categorical) {
            for (const std::string& cat : col.categories) {
                expanded.columns.push_back(
                    {col.name + "=" + cat, ColumnKind::binary, {}});
            }
        } else {
            expanded.columns.push_back(col);
        }
    }

    const std::size_t n = dataset.n_rows();
    std::vector<double> cells;
    cells.reserve(n * expanded.arity());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < schema.arity(); ++c) {
            const Column& col = schema.columns[c];
            const double v = dataset.cell(r, c);
            if (col.kind == ColumnKind::categorical) {
                const auto hot = static_cast<std::size_t>(v);
                for (std::size_t j = 0; j < col.categories.size(); ++j) {
                    cells.push_back(j == hot ? 1.0 : 0.0);
                }
            } else {
                cells.push_back(v);
            }
        }
    }
    return Dataset(std::move(expanded), std::move(cells), dataset.metric(),
                   dataset.labels());
}

std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t state) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
        state ^= p[i];
        state *= 0x100000001b3ULL;
    }
    return state;
}

std::uint64_t hash_dataset(const Dataset& dataset) {
    std::uint64_t h = fnv1a64(dataset.cells().data(),
                              dataset.cells().size() * sizeof(double));
    h = fnv1a64(dataset.metric().data(),
                dataset.metric().size() * sizeof(double), h);
    if (dataset.labels()) {
        h = fnv1a64(dataset.labels()->data(),
                    dataset.labels()->size() * sizeof(int), h);
    }
    return h;
}

}  // namespace hbac
