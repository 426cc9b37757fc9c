#include "hbac/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hbac/version.hpp"

namespace hbac::io {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io, "cannot open '" + path + "' for reading");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void atomic_write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(Errc::io, "cannot open '" + tmp + "' for writing");
        out << content;
        if (!out) raise(Errc::io, "short write to '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) raise(Errc::io, "cannot rename '" + tmp + "' to '" + path + "'");
}

Csv parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field.empty() && !field_started) {
                    in_quotes = true;
                    field_started = true;
                } else {
                    field.push_back(c);
                }
                break;
            case ',':
                end_field();
                break;
            case '\r':
                break;  // tolerate CRLF
            case '\n':
                end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
                break;
        }
    }
    if (in_quotes) raise(Errc::io, "unterminated quote in CSV input");
    if (field_started || !field.empty() || !record.empty()) end_record();

    if (records.empty()) raise(Errc::io, "CSV input has no header row");
    Csv csv;
    csv.header = records.front();
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() == 1 && records[r][0].empty()) continue;
        if (records[r].size() != csv.header.size()) {
            raise(Errc::io, "CSV row " + std::to_string(r) + " has " +
                                std::to_string(records[r].size()) +
                                " fields, header has " +
                                std::to_string(csv.header.size()));
        }
        csv.rows.push_back(std::move(records[r]));
    }
    return csv;
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

SchemaConfig parse_schema(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(Errc::bad_config, std::string("schema config is not valid JSON: ") + e.what());
    }
    SchemaConfig config;
    if (!j.contains("columns") || !j["columns"].is_array()) {
        raise(Errc::bad_config, "schema config needs a 'columns' array");
    }
    for (const auto& col : j["columns"]) {
        Column c;
        c.name = col.at("name").get<std::string>();
        c.kind = column_kind_from(col.at("kind").get<std::string>());
        if (col.contains("categories")) {
            c.categories = col["categories"].get<std::vector<std::string>>();
        }
        config.schema.columns.push_back(std::move(c));
    }
    if (!j.contains("metric")) {
        raise(Errc::bad_config, "schema config needs a 'metric' object");
    }
    config.metric_column = j["metric"].at("column").get<std::string>();
    config.schema.metric_kind =
        metric_kind_from(j["metric"].at("kind").get<std::string>());
    if (j.contains("label")) {
        config.label_column = j["label"].at("column").get<std::string>();
    }
    return config;
}

SchemaConfig load_schema(const std::string& path) {
    return parse_schema(read_file(path));
}

namespace {

bool is_missing(const std::string& field) {
    return field.empty() || field == "NA";
}

double parse_number(const std::string& field, std::size_t row,
                    const std::string& column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        raise(Errc::io, "cannot parse '" + field + "' as a number (row " +
                            std::to_string(row) + ", column '" + column + "')");
    }
}

}  // namespace

LoadedDataset load_dataset_csv(const std::string& csv_path,
                               const SchemaConfig& config,
                               bool filter_missing) {
    const std::string raw = read_file(csv_path);
    const std::uint64_t file_hash = fnv1a64(raw.data(), raw.size());
    const Csv csv = parse_csv(raw);

    std::map<std::string, std::size_t> column_of;
    for (std::size_t i = 0; i < csv.header.size(); ++i) {
        if (!column_of.emplace(csv.header[i], i).second) {
            raise(Errc::schema_mismatch,
                  "duplicate CSV column '" + csv.header[i] + "'");
        }
    }

    FeatureSchema schema = config.schema;
    std::vector<std::size_t> feature_cols;
    std::set<std::string> expected;
    for (const Column& col : schema.columns) {
        auto it = column_of.find(col.name);
        if (it == column_of.end()) {
            raise(Errc::schema_mismatch,
                  "schema column '" + col.name + "' is missing from the CSV");
        }
        feature_cols.push_back(it->second);
        expected.insert(col.name);
    }
    auto metric_it = column_of.find(config.metric_column);
    if (metric_it == column_of.end()) {
        raise(Errc::schema_mismatch, "metric column '" + config.metric_column +
                                         "' is missing from the CSV");
    }
    expected.insert(config.metric_column);
    std::size_t label_col = 0;
    const bool has_label = !config.label_column.empty();
    if (has_label) {
        auto it = column_of.find(config.label_column);
        if (it == column_of.end()) {
            raise(Errc::schema_mismatch, "label column '" +
                                             config.label_column +
                                             "' is missing from the CSV");
        }
        label_col = it->second;
        expected.insert(config.label_column);
    }
    for (const std::string& name : csv.header) {
        if (!expected.count(name)) {
            raise(Errc::schema_mismatch,
                  "CSV column '" + name + "' is not declared in the schema");
        }
    }

    // Infer missing category lists from the data, sorted for determinism.
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        Column& col = schema.columns[c];
        if (col.kind != ColumnKind::categorical || !col.categories.empty()) {
            continue;
        }
        std::set<std::string> values;
        for (const auto& row : csv.rows) {
            const std::string& field = row[feature_cols[c]];
            if (!is_missing(field)) values.insert(field);
        }
        col.categories.assign(values.begin(), values.end());
    }

    std::vector<double> cells;
    std::vector<double> metric;
    std::vector<int> labels;
    std::size_t dropped = 0;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        bool missing = is_missing(row[metric_it->second]) ||
                       (has_label && is_missing(row[label_col]));
        for (std::size_t c = 0; c < feature_cols.size() && !missing; ++c) {
            missing = is_missing(row[feature_cols[c]]);
        }
        if (missing && filter_missing) {
            ++dropped;
            continue;
        }

        for (std::size_t c = 0; c < feature_cols.size(); ++c) {
            const Column& col = schema.columns[c];
            const std::string& field = row[feature_cols[c]];
            if (is_missing(field)) {
                cells.push_back(nan);
                continue;
            }
            if (col.kind == ColumnKind::categorical) {
                const auto it = std::find(col.categories.begin(),
                                          col.categories.end(), field);
                cells.push_back(it == col.categories.end()
                                    ? nan
                                    : static_cast<double>(std::distance(
                                          col.categories.begin(), it)));
            } else {
                cells.push_back(parse_number(field, r, col.name));
            }
        }
        const std::string& mfield = row[metric_it->second];
        metric.push_back(is_missing(mfield)
                             ? nan
                             : parse_number(mfield, r, config.metric_column));
        if (has_label) {
            const std::string& lfield = row[label_col];
            labels.push_back(is_missing(lfield)
                                 ? -1
                                 : static_cast<int>(parse_number(
                                       lfield, r, config.label_column)));
        }
    }

    std::optional<std::vector<int>> label_opt;
    if (has_label) label_opt = std::move(labels);
    LoadedDataset out{
        Dataset(std::move(schema), std::move(cells), std::move(metric),
                std::move(label_opt)),
        dropped, file_hash};
    return out;
}

namespace {

json centroid_to_json(const Centroid& c) {
    return json{{"kind", c.kind == CentroidKind::mean ? "mean" : "mode"},
                {"values", c.values}};
}

Centroid centroid_from_json(const json& j) {
    Centroid c;
    c.kind = j.at("kind").get<std::string>() == "mean" ? CentroidKind::mean
                                                       : CentroidKind::mode;
    c.values = j.at("values").get<std::vector<double>>();
    return c;
}

json optional_to_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

}  // namespace

json partition_to_json(const Partition& partition) {
    json clusters = json::array();
    for (const Cluster& c : partition.clusters) {
        clusters.push_back(json{{"id", c.id},
                                {"members", c.members},
                                {"centroid", centroid_to_json(c.centroid)},
                                {"metric_mean", c.metric_mean},
                                {"metric_std", c.metric_std},
                                {"ever_selected", c.ever_selected}});
    }
    json trace = json::array();
    for (const SplitEvent& e : partition.trace) {
        trace.push_back(json{{"iteration", e.iteration},
                             {"parent_id", e.parent_id},
                             {"parent_mean", e.parent_mean},
                             {"parent_std", e.parent_std},
                             {"child_a_id", e.child_a_id},
                             {"child_b_id", e.child_b_id},
                             {"child_a_size", e.child_a_size},
                             {"child_b_size", e.child_b_size},
                             {"child_a_mean", e.child_a_mean},
                             {"child_b_mean", e.child_b_mean},
                             {"outcome", to_string(e.outcome)}});
    }
    return json{{"format", "hbac-partition"},
                {"version", 1},
                {"config",
                 {{"n_min", partition.config.n_min},
                  {"max_iterations", partition.config.max_iterations},
                  {"splitter", to_string(partition.config.splitter)},
                  {"seed", partition.config.seed}}},
                {"columns", partition.column_names},
                {"source_split", partition.source_split},
                {"fit_data_hash", partition.fit_data_hash},
                {"clusters", clusters},
                {"trace", trace}};
}

Partition partition_from_json(const json& j) {
    if (j.value("format", "") != "hbac-partition") {
        raise(Errc::io, "not a partition document");
    }
    Partition p;
    const json& cfg = j.at("config");
    p.config.n_min = cfg.at("n_min").get<std::size_t>();
    p.config.max_iterations = cfg.at("max_iterations").get<std::size_t>();
    p.config.splitter = splitter_from(cfg.at("splitter").get<std::string>());
    p.config.seed = cfg.at("seed").get<std::uint64_t>();
    p.column_names = j.at("columns").get<std::vector<std::string>>();
    p.source_split = j.at("source_split").get<std::string>();
    p.fit_data_hash = j.at("fit_data_hash").get<std::uint64_t>();
    for (const json& c : j.at("clusters")) {
        Cluster cl;
        cl.id = c.at("id").get<std::size_t>();
        cl.members = c.at("members").get<std::vector<std::size_t>>();
        cl.centroid = centroid_from_json(c.at("centroid"));
        cl.metric_mean = c.at("metric_mean").get<double>();
        cl.metric_std = c.at("metric_std").get<double>();
        cl.ever_selected = c.at("ever_selected").get<bool>();
        p.clusters.push_back(std::move(cl));
    }
    for (const json& t : j.value("trace", json::array())) {
        SplitEvent e;
        e.iteration = t.at("iteration").get<std::size_t>();
        e.parent_id = t.at("parent_id").get<std::size_t>();
        e.parent_mean = t.at("parent_mean").get<double>();
        e.parent_std = t.at("parent_std").get<double>();
        e.child_a_id = t.at("child_a_id").get<std::size_t>();
        e.child_b_id = t.at("child_b_id").get<std::size_t>();
        e.child_a_size = t.at("child_a_size").get<std::size_t>();
        e.child_b_size = t.at("child_b_size").get<std::size_t>();
        e.child_a_mean = t.at("child_a_mean").get<double>();
        e.child_b_mean = t.at("child_b_mean").get<double>();
        const std::string o = t.at("outcome").get<std::string>();
        e.outcome = o == "accepted" ? SplitOutcome::accepted
                    : o == "child_below_n_min" ? SplitOutcome::child_below_n_min
                                               : SplitOutcome::degenerate;
        p.trace.push_back(e);
    }
    return p;
}

void save_partition(const std::string& path, const Partition& partition) {
    atomic_write_file(path, partition_to_json(partition).dump(2) + "\n");
}

Partition load_partition(const std::string& path) {
    try {
        return partition_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        raise(Errc::io, std::string("cannot parse partition file: ") + e.what());
    }
}

std::string format_p_value(double p) {
    if (p < 1e-16) return "<1e-16";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", p);
    return buf;
}

json test_report_to_json(const TestReport& report, MetricKind metric_kind) {
    json tests = json::array();
    for (const ClusterTest& t : report.tests) {
        tests.push_back(json{{"cluster", t.cluster_index},
                             {"n_in", t.n_in},
                             {"n_out", t.n_out},
                             {"mean_in", optional_to_json(t.mean_in)},
                             {"mean_out", optional_to_json(t.mean_out)},
                             {"difference", optional_to_json(t.difference)},
                             {"statistic", optional_to_json(t.statistic)},
                             {"p_raw", optional_to_json(t.p_raw)},
                             {"p_adjusted", optional_to_json(t.p_adjusted)},
                             {"test", to_string(t.kind)},
                             {"testable", t.testable},
                             {"note", t.note}});
    }
    return json{{"alpha", report.alpha},
                {"correction", to_string(report.correction)},
                {"n_tested", report.n_tested},
                {"metric_kind", to_string(metric_kind)},
                {"method",
                 metric_kind == MetricKind::binary
                     ? "pearson_chi2_2x2_no_continuity_correction"
                     : "welch_t_satterthwaite_two_tailed"},
                {"split_info", report.split_info},
                {"tests", tests}};
}

std::string render_test_table(const TestReport& report,
                              MetricKind metric_kind) {
    const bool binary = metric_kind == MetricKind::binary;
    const char* level_in = binary ? "High risk (%) in cluster" : "Metric mean in cluster";
    const char* level_out = binary ? "High risk (%) outside cluster" : "Metric mean outside cluster";
    const char* diff_name = binary ? "Difference (%)" : "Difference";

    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-8s %-14s %-30s %-30s %-16s %-12s %-12s\n",
                  "Cluster", "n in cluster", level_in, level_out, diff_name,
                  "P-value", "P-adjusted");
    out << line;
    out << std::string(126, '-') << "\n";

    auto fmt_level = [&](const std::optional<double>& v) -> std::string {
        if (!v) return "-";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", binary ? *v * 100.0 : *v);
        return buf;
    };

    for (const ClusterTest& t : report.tests) {
        const std::string p_raw =
            t.p_raw ? format_p_value(*t.p_raw) : "untestable";
        const std::string p_adj =
            t.p_adjusted ? format_p_value(*t.p_adjusted) : "-";
        std::snprintf(line, sizeof(line),
                      "%-8zu %-14zu %-30s %-30s %-16s %-12s %-12s\n",
                      t.cluster_index + 1, t.n_in, fmt_level(t.mean_in).c_str(),
                      fmt_level(t.mean_out).c_str(),
                      fmt_level(t.difference).c_str(), p_raw.c_str(),
                      p_adj.c_str());
        out << line;
    }
    if (report.tests.empty()) {
        out << "(single cluster: no contrast to test)\n";
    } else {
        out << (binary ? "Pearson chi-squared on the 2x2 table, no "
                         "continuity correction; "
                       : "Welch t-test, two-tailed; ")
            << "adjusted = "
            << (report.correction == Correction::bonferroni
                    ? "Bonferroni over " + std::to_string(report.n_tested) +
                          " tested clusters"
                    : std::string("no correction"))
            << "\n";
    }
    return out.str();
}

json selection_to_json(const SelectionResult& selection) {
    json candidates = json::array();
    for (std::size_t i = 0; i < selection.grid.size(); ++i) {
        json folds = json::array();
        for (const FoldScore& f : selection.fold_scores[i]) {
            folds.push_back(json{{"value", f.infinite ? json("inf") : json(f.value)},
                                 {"degenerate", f.degenerate}});
        }
        const double mean = selection.mean_scores[i];
        candidates.push_back(
            json{{"n_min", selection.grid[i]},
                 {"feasible", static_cast<bool>(selection.feasible[i])},
                 {"fold_scores", folds},
                 {"mean_score", std::isinf(mean)
                                    ? json(mean > 0 ? "inf" : "-inf")
                                    : json(mean)}});
    }
    return json{{"grid", selection.grid},
                {"chosen_n_min", selection.chosen},
                {"candidates", candidates}};
}

json campaign_to_json(const sim::CampaignResult& result) {
    const auto& cfg = result.config;
    json rate = json::object();
    auto rate_json = [](const sim::RateSummary& r) {
        return json{{"rate", r.rate}, {"ci_low", r.ci_low}, {"ci_high", r.ci_high}};
    };
    rate["t_uncorrected"] = rate_json(result.t_raw_rate);
    rate["t_bonferroni"] = rate_json(result.t_bonf_rate);
    if (result.perm_rate) rate["permutation_max"] = rate_json(*result.perm_rate);

    json positions = json::array();
    for (const auto& p : result.positions) {
        positions.push_back(json{{"position", p.position},
                                 {"count", p.count},
                                 {"mean_diff_in", p.mean_diff_in},
                                 {"mean_diff_oos", p.mean_diff_oos}});
    }

    return json{
        {"experiment", to_string(cfg.experiment)},
        {"version", hbac::kVersion},
        {"config",
         {{"k_clusters", cfg.sim.k_clusters},
          {"n_total", cfg.sim.n_total},
          {"d", cfg.sim.d},
          {"scenario", to_string(cfg.sim.scenario)},
          {"seed", cfg.sim.seed},
          {"n_sims", cfg.n_sims},
          {"alpha", cfg.alpha},
          {"test_fraction", cfg.test_fraction},
          {"n_min", cfg.n_min},
          {"max_iterations", cfg.max_iterations},
          {"n_perm", cfg.n_perm},
          {"l2_penalty", cfg.l2_penalty}}},
        {"rejection_rates", rate},
        {"mean_abs_diff_in", result.mean_abs_diff_in},
        {"mean_abs_diff_oos", result.mean_abs_diff_oos},
        {"ranked_mean_abs_in", result.ranked_mean_abs_in},
        {"ranked_mean_abs_oos", result.ranked_mean_abs_oos},
        {"positions", positions}};
}

namespace {

std::string opt_csv(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return buf;
}

std::string num_csv(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string campaign_rows_csv(const sim::CampaignResult& result) {
    std::ostringstream out;
    out << "sim,cluster,n_train,n_test,variant,diff_in,diff_oos,p_value\n";
    for (const auto& sim : result.sims) {
        for (const auto& c : sim.clusters) {
            auto emit = [&](const char* variant,
                            const std::optional<double>& p) {
                if (!p) return;
                out << sim.sim << ',' << c.cluster << ',' << c.n_train << ','
                    << c.n_test << ',' << variant << ','
                    << num_csv(c.diff_in) << ',' << opt_csv(c.diff_oos) << ','
                    << num_csv(*p) << '\n';
            };
            emit("t_uncorrected", c.p_t_raw);
            emit("t_bonferroni", c.p_t_adj);
            emit("permutation_raw", c.p_perm_raw);
            emit("permutation_max", c.p_perm_max);
        }
    }
    return out.str();
}

std::string campaign_summary_csv(const sim::CampaignResult& result) {
    std::ostringstream out;
    out << "quantity,value,ci_low,ci_high\n";
    auto emit_rate = [&](const char* name, const sim::RateSummary& r) {
        out << name << ',' << num_csv(r.rate) << ',' << num_csv(r.ci_low)
            << ',' << num_csv(r.ci_high) << '\n';
    };
    emit_rate("rejection_rate_t_uncorrected", result.t_raw_rate);
    emit_rate("rejection_rate_t_bonferroni", result.t_bonf_rate);
    if (result.perm_rate) {
        emit_rate("rejection_rate_permutation_max", *result.perm_rate);
    }
    out << "mean_abs_diff_in," << num_csv(result.mean_abs_diff_in) << ",,\n";
    out << "mean_abs_diff_oos," << num_csv(result.mean_abs_diff_oos) << ",,\n";
    out << "ranked_mean_abs_in," << num_csv(result.ranked_mean_abs_in)
        << ",,\n";
    out << "ranked_mean_abs_oos," << num_csv(result.ranked_mean_abs_oos)
        << ",,\n";
    for (const auto& p : result.positions) {
        out << "position_" << p.position << "_diff_in,"
            << num_csv(p.mean_diff_in) << ",,\n";
        out << "position_" << p.position << "_diff_oos,"
            << num_csv(p.mean_diff_oos) << ",,\n";
    }
    return out.str();
}

std::string assignments_csv(const std::vector<std::size_t>& assignment,
                            const std::vector<double>& metric) {
    if (assignment.size() != metric.size()) {
        raise(Errc::bad_config, "assignment/metric length mismatch");
    }
    std::ostringstream out;
    out << "row,cluster,metric\n";
    for (std::size_t r = 0; r < assignment.size(); ++r) {
        out << r << ',' << assignment[r] << ',' << num_csv(metric[r]) << '\n';
    }
    return out.str();
}

}  // namespace hbac::io
