#pragma once
// The audit, simulation and demo pipelines behind the command-line tool,
// exposed as library functions so they are testable in-process.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hbac/clustering.hpp"
#include "hbac/core.hpp"
#include "hbac/duo.hpp"
#include "hbac/model_selection.hpp"
#include "hbac/simulation.hpp"
#include "hbac/stats.hpp"

namespace hbac::cli {

struct AuditConfig {
    std::string input_path;   // CSV with a header row
    std::string schema_path;  // JSON schema config
    std::optional<Splitter> splitter;  // unset = pick from the schema
    // Default n_min grid as fractions of N; an absolute grid overrides it.
    std::vector<double> n_min_fractions = {0.02, 0.04, 0.08, 0.12};
    std::vector<std::size_t> n_min_absolute;
    std::size_t folds = 5;
    double test_fraction = 0.2;
    double alpha = 0.05;
    Correction correction = Correction::bonferroni;
    std::size_t max_iterations = 1000;
    std::uint64_t seed = 0;
    bool filter_missing = false;
    std::string out_dir = ".";
};

struct AuditReport {
    std::string tool_version;
    std::uint64_t data_hash = 0;
    std::size_t n_rows = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t dropped_rows = 0;
    MetricKind metric_kind = MetricKind::continuous;
    Splitter splitter = Splitter::kmeans;
    SelectionResult selection;
    Partition partition;
    // Per cluster, the mean of every feature column over the fit members
    // (cluster composition; for one-hot columns these are shares).
    std::vector<std::vector<double>> cluster_column_means;
    TestReport tests;
    std::vector<std::size_t> test_assignment;
    std::vector<double> test_metric;
};

// Full pipeline on an already-loaded dataset: validate, one-hot expand,
// split, select n_min by cross-validation on the training side, fit, test
// on the held-out side.
AuditReport audit_dataset(const AuditConfig& config, const Dataset& dataset,
                          std::uint64_t data_hash, std::size_t dropped_rows);

// Loads CSV + schema, then runs audit_dataset.
AuditReport run_audit(const AuditConfig& config);

// Serializes the report (JSON + human-readable table + partition +
// held-out assignments) under config.out_dir. Contents are deterministic.
void write_audit_outputs(const AuditConfig& config, const AuditReport& report);

struct DuoDemoConfig {
    std::string cohort_path;  // JSON cohort mix
    std::string r2_path;      // R2 table CSV
    std::string r1_path;      // optional R1 override CSV
    std::string r3_path;      // optional R3 override CSV
    std::size_t n_override = 0;
    std::optional<std::uint64_t> seed_override;
    AuditConfig audit;
};

struct CohortSpec {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::vector<duo::CohortStratum> strata;
};

CohortSpec load_cohort_spec(const std::string& path);
AuditReport run_duo_demo(const DuoDemoConfig& config);

struct SimulateConfig {
    sim::CampaignConfig campaign;
    std::string out_dir = ".";
};

sim::CampaignResult run_simulate(const SimulateConfig& config);

// Machine-readable error record written to stderr on failures.
std::string error_record(const std::string& code, const std::string& message);

// Exit codes: 0 ok, 1 data/configuration error, 2 internal error.
int exit_code_for(Errc code);

}  // namespace hbac::cli
