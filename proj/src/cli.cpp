#include "hbac/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hbac/io.hpp"
#include "hbac/version.hpp"

namespace hbac::cli {

using nlohmann::json;

namespace {

Splitter pick_splitter(const AuditConfig& config, const FeatureSchema& schema) {
    if (config.splitter) return *config.splitter;
    // All-categorical/binary data clusters on Hamming distance; anything
    // with a numeric column needs k-means.
    return schema.has_numeric() ? Splitter::kmeans : Splitter::kmodes;
}

std::vector<std::size_t> resolve_grid(const AuditConfig& config,
                                      std::size_t n_rows) {
    std::vector<std::size_t> grid = config.n_min_absolute;
    if (grid.empty()) {
        for (double f : config.n_min_fractions) {
            if (!(f > 0.0 && f < 1.0)) {
                raise(Errc::bad_config, "n_min fractions must lie in (0,1)");
            }
            grid.push_back(std::max<std::size_t>(
                2, static_cast<std::size_t>(
                       std::llround(f * static_cast<double>(n_rows)))));
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.empty()) raise(Errc::bad_config, "empty n_min grid");
    return grid;
}

}  // namespace

AuditReport audit_dataset(const AuditConfig& config, const Dataset& input,
                          std::uint64_t data_hash, std::size_t dropped_rows) {
    const ValidationResult vr = validate(input);
    if (!vr.ok()) {
        std::string msg = "dataset failed validation:";
        for (const std::string& v : vr.violations) msg += "\n  - " + v;
        raise(Errc::validation, msg);
    }

    const Dataset dataset = input.schema().has_categorical()
                                ? one_hot_expand(input)
                                : input;

    AuditReport report;
    report.tool_version = kVersion;
    report.data_hash = data_hash;
    report.dropped_rows = dropped_rows;
    report.n_rows = dataset.n_rows();
    report.metric_kind = dataset.schema().metric_kind;
    report.splitter = pick_splitter(config, dataset.schema());

    const SplitIndices split =
        split_sample(dataset.n_rows(), config.test_fraction, config.seed);
    report.n_train = split.train.size();
    report.n_test = split.test.size();
    const Dataset train = dataset.subset(split.train);
    const Dataset test = dataset.subset(split.test);

    HbacConfig base;
    base.max_iterations = config.max_iterations;
    base.splitter = report.splitter;
    base.seed = config.seed;

    const auto grid = resolve_grid(config, dataset.n_rows());
    report.selection = select_n_min(train, grid, config.folds, base);

    base.n_min = report.selection.chosen;
    std::ostringstream split_desc;
    split_desc << "train(fraction=" << (1.0 - config.test_fraction)
               << ",seed=" << config.seed << ")";
    report.partition = fit_hbac(train, base, split_desc.str());

    for (const Cluster& cl : report.partition.clusters) {
        std::vector<double> means(train.n_cols(), 0.0);
        for (std::size_t r : cl.members) {
            const auto row = train.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) means[c] += row[c];
        }
        for (double& m : means) m /= static_cast<double>(cl.members.size());
        report.cluster_column_means.push_back(std::move(means));
    }

    std::ostringstream test_desc;
    test_desc << "held-out(fraction=" << config.test_fraction
              << ",seed=" << config.seed << ",disjoint=true)";
    report.tests = test_clusters(report.partition, test, config.alpha,
                                 config.correction, test_desc.str());
    report.test_assignment = assign_all(report.partition, test);
    report.test_metric = test.metric();
    return report;
}

AuditReport run_audit(const AuditConfig& config) {
    const io::SchemaConfig schema = io::load_schema(config.schema_path);
    const io::LoadedDataset loaded = io::load_dataset_csv(
        config.input_path, schema, config.filter_missing);
    return audit_dataset(config, loaded.dataset, loaded.file_hash,
                         loaded.dropped_rows);
}

namespace {

json audit_config_to_json(const AuditConfig& config) {
    return json{{"input", config.input_path},
                {"schema", config.schema_path},
                {"splitter",
                 config.splitter ? json(to_string(*config.splitter))
                                 : json(nullptr)},
                {"n_min_fractions", config.n_min_fractions},
                {"n_min_absolute", config.n_min_absolute},
                {"folds", config.folds},
                {"test_fraction", config.test_fraction},
                {"alpha", config.alpha},
                {"correction", to_string(config.correction)},
                {"max_iterations", config.max_iterations},
                {"seed", config.seed},
                {"filter_missing", config.filter_missing}};
}

json audit_report_to_json(const AuditConfig& config,
                          const AuditReport& report) {
    json clusters = json::array();
    for (std::size_t c = 0; c < report.partition.clusters.size(); ++c) {
        const Cluster& cl = report.partition.clusters[c];
        json composition = json::object();
        for (std::size_t j = 0; j < report.partition.column_names.size(); ++j) {
            composition[report.partition.column_names[j]] =
                report.cluster_column_means[c][j];
        }
        clusters.push_back(json{{"cluster", c},
                                {"size", cl.members.size()},
                                {"metric_mean", cl.metric_mean},
                                {"metric_std", cl.metric_std},
                                {"composition", composition}});
    }
    return json{{"format", "hbac-audit-report"},
                {"version", report.tool_version},
                {"config", audit_config_to_json(config)},
                {"provenance",
                 {{"data_hash", report.data_hash},
                  {"seed", config.seed},
                  {"dropped_rows", report.dropped_rows}}},
                {"n_rows", report.n_rows},
                {"n_train", report.n_train},
                {"n_test", report.n_test},
                {"splitter", to_string(report.splitter)},
                {"selection", io::selection_to_json(report.selection)},
                {"clusters", clusters},
                {"tests",
                 io::test_report_to_json(report.tests, report.metric_kind)}};
}

std::string render_audit_text(const AuditReport& report) {
    std::ostringstream out;
    out << "Audit report (tool version " << report.tool_version << ")\n";
    out << "Rows: " << report.n_rows << " (train " << report.n_train
        << ", test " << report.n_test << ", dropped " << report.dropped_rows
        << ")\n";
    out << "Splitter: " << to_string(report.splitter)
        << "    chosen n_min: " << report.selection.chosen << "\n\n";

    out << "Cluster size\n";
    for (std::size_t c = 0; c < report.partition.clusters.size(); ++c) {
        const Cluster& cl = report.partition.clusters[c];
        const double share = 100.0 * static_cast<double>(cl.members.size()) /
                             static_cast<double>(report.n_train);
        char line[128];
        std::snprintf(line, sizeof(line),
                      "  cluster %zu: %zu members (%.1f%%), metric mean %.4f\n",
                      c + 1, cl.members.size(), share, cl.metric_mean);
        out << line;
    }
    out << "\nTesting the difference in bias metric per cluster\n";
    out << io::render_test_table(report.tests, report.metric_kind);

    if (!report.partition.column_names.empty() &&
        report.partition.column_names.size() <= 32) {
        out << "\nCharacteristics per cluster (column means over fit rows)\n";
        for (std::size_t c = 0; c < report.cluster_column_means.size(); ++c) {
            out << "  cluster " << c + 1 << ":\n";
            for (std::size_t j = 0; j < report.partition.column_names.size();
                 ++j) {
                char line[128];
                std::snprintf(line, sizeof(line), "    %-28s %.4f\n",
                              report.partition.column_names[j].c_str(),
                              report.cluster_column_means[c][j]);
                out << line;
            }
        }
    }
    return out.str();
}

}  // namespace

void write_audit_outputs(const AuditConfig& config,
                         const AuditReport& report) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    const std::string base = config.out_dir + "/";

    // Render everything first so a rendering failure leaves no final files.
    const std::string report_json =
        audit_report_to_json(config, report).dump(2) + "\n";
    const std::string report_txt = render_audit_text(report);
    const std::string partition_json =
        io::partition_to_json(report.partition).dump(2) + "\n";
    const std::string assignments =
        io::assignments_csv(report.test_assignment, report.test_metric);

    io::atomic_write_file(base + "report.json", report_json);
    io::atomic_write_file(base + "report.txt", report_txt);
    io::atomic_write_file(base + "partition.json", partition_json);
    io::atomic_write_file(base + "assignments.csv", assignments);
}

CohortSpec load_cohort_spec(const std::string& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        raise(Errc::bad_config,
              std::string("cohort config is not valid JSON: ") + e.what());
    }
    CohortSpec spec;
    spec.n = j.value("n", 0);
    spec.seed = j.value("seed", 0);
    if (!j.contains("strata") || !j["strata"].is_array()) {
        raise(Errc::bad_config, "cohort config needs a 'strata' array");
    }
    for (const json& s : j["strata"]) {
        duo::CohortStratum stratum;
        stratum.weight = s.at("weight").get<double>();
        stratum.record.education =
            duo::education_from(s.at("education").get<std::string>());
        stratum.record.age_current =
            duo::age_band_from(s.at("age").get<std::string>());
        stratum.record.distance =
            duo::distance_from(s.at("distance").get<std::string>());
        stratum.record.age_registered =
            duo::r3_age_from(s.value("age_registered", "19-20"));
        stratum.record.age_gba = duo::r3_age_from(s.value("age_gba", "19-20"));
        spec.strata.push_back(stratum);
    }
    return spec;
}

AuditReport run_duo_demo(const DuoDemoConfig& config) {
    const duo::RiskTables tables = duo::load_risk_tables(
        config.r2_path, config.r1_path, config.r3_path);
    CohortSpec spec = load_cohort_spec(config.cohort_path);
    if (config.n_override > 0) spec.n = config.n_override;
    if (config.seed_override) spec.seed = *config.seed_override;

    if (spec.n == 0) {
        raise(Errc::validation, "cohort size is 0; nothing to audit");
    }
    const Dataset cohort =
        duo::synth_cohort(spec.n, spec.strata, tables, spec.seed);
    return audit_dataset(config.audit, cohort, hash_dataset(cohort), 0);
}

sim::CampaignResult run_simulate(const SimulateConfig& config) {
    const sim::CampaignResult result = sim::run_campaign(config.campaign);

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    const std::string base = config.out_dir + "/";
    io::atomic_write_file(base + "campaign.json",
                          io::campaign_to_json(result).dump(2) + "\n");
    io::atomic_write_file(base + "campaign_rows.csv",
                          io::campaign_rows_csv(result));
    io::atomic_write_file(base + "campaign_summary.csv",
                          io::campaign_summary_csv(result));
    return result;
}

std::string error_record(const std::string& code, const std::string& message) {
    return json{{"error", {{"code", code}, {"message", message}}}}.dump() +
           "\n";
}

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::validation:
        case Errc::io:
        case Errc::schema_mismatch:
        case Errc::bad_config:
        case Errc::missing_table_entry:
        case Errc::unknown_distance:
        case Errc::insufficient_data:
        case Errc::infeasible_grid:
        case Errc::degenerate_split:
            return 1;
        default:
            return 2;
    }
}

}  // namespace hbac::cli
