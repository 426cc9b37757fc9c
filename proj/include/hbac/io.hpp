#pragma once
// File ingestion and serialization: CSV parsing, schema config files,
// dataset loading, and JSON/text renderings of partitions, test reports,
// selection results and campaign results. All writers are deterministic
// (no timestamps, stable key order) so that seeded reruns are byte-equal.

#include <cstdint>
#include <string>
#include <vector>

#include "hbac/clustering.hpp"
#include "hbac/core.hpp"
#include "hbac/model_selection.hpp"
#include "hbac/simulation.hpp"
#include "hbac/stats.hpp"

#include <nlohmann/json_fwd.hpp>

namespace hbac::io {

std::string read_file(const std::string& path);
// Writes to "<path>.tmp" then renames, so partial output never lands under
// the final name.
void atomic_write_file(const std::string& path, const std::string& content);

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // each row matches header size
};

// Comma-separated with a mandatory header row; double quotes escape commas,
// quotes and newlines. Throws Errc::io on structural problems.
Csv parse_csv(const std::string& text);
std::string csv_field(const std::string& value);

struct SchemaConfig {
    FeatureSchema schema;       // feature columns only
    std::string metric_column;
    std::string label_column;   // empty when absent
};

// Reads the JSON schema config: feature columns with kinds (categorical
// columns may declare their categories or leave them to be inferred from
// the data, sorted), the metric column and kind, and an optional label
// column.
SchemaConfig load_schema(const std::string& path);
SchemaConfig parse_schema(const std::string& text);

struct LoadedDataset {
    Dataset dataset;
    std::size_t dropped_rows = 0;  // removed by filter_missing
    std::uint64_t file_hash = 0;   // FNV-1a of the raw file bytes
};

// Builds a Dataset from a CSV file per the schema config. Cells that are
// empty or "NA" are missing: rows containing one are dropped when
// filter_missing is set and otherwise surface as validation violations.
LoadedDataset load_dataset_csv(const std::string& csv_path,
                               const SchemaConfig& config,
                               bool filter_missing = false);

nlohmann::json partition_to_json(const Partition& partition);
Partition partition_from_json(const nlohmann::json& j);
void save_partition(const std::string& path, const Partition& partition);
Partition load_partition(const std::string& path);

nlohmann::json test_report_to_json(const TestReport& report,
                                   MetricKind metric_kind);
// Fixed-width table with one row per cluster: size, metric level inside and
// outside, difference and p-values (binary metrics are shown as
// percentages). p-values below 1e-16 print as "<1e-16".
std::string render_test_table(const TestReport& report, MetricKind metric_kind);

nlohmann::json selection_to_json(const SelectionResult& selection);

nlohmann::json campaign_to_json(const sim::CampaignResult& result);
// One row per (simulation, cluster): sizes, differences, p-values.
std::string campaign_rows_csv(const sim::CampaignResult& result);
// Aggregate table: rejection rates with confidence intervals and the
// rank-position difference averages.
std::string campaign_summary_csv(const sim::CampaignResult& result);

// Flat per-row export of an assignment: row id, cluster, metric value.
std::string assignments_csv(const std::vector<std::size_t>& assignment,
                            const std::vector<double>& metric);

std::string format_p_value(double p);

}  // namespace hbac::io
