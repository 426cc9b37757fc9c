// Command-line front end: `hbac audit`, `hbac simulate`, `hbac duo-demo`.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hbac/cli.hpp"
#include "hbac/version.hpp"

namespace {

using namespace hbac;

void add_audit_options(CLI::App* cmd, cli::AuditConfig& config,
                       std::string& splitter_name) {
    cmd->add_option("--splitter", splitter_name,
                    "kmeans or kmodes (default: inferred from the schema)")
        ->check(CLI::IsMember({"kmeans", "kmodes"}));
    cmd->add_option("--n-min-grid", config.n_min_absolute,
                    "absolute n_min candidates (overrides fractions)")
        ->delimiter(',');
    cmd->add_option("--n-min-fractions", config.n_min_fractions,
                    "n_min candidates as fractions of N")
        ->delimiter(',');
    cmd->add_option("--folds", config.folds, "cross-validation folds");
    cmd->add_option("--test-fraction", config.test_fraction,
                    "held-out fraction for testing");
    cmd->add_option("--alpha", config.alpha, "significance level");
    std::string correction = "bonferroni";
    cmd->add_option_function<std::string>(
           "--correction",
           [&config](const std::string& v) {
               config.correction = v == "none" ? Correction::none
                                               : Correction::bonferroni;
           },
           "bonferroni or none")
        ->check(CLI::IsMember({"bonferroni", "none"}))
        ->default_str(correction);
    cmd->add_option("--max-iterations", config.max_iterations,
                    "split iteration budget");
    cmd->add_option("--seed", config.seed, "random seed")
        ->envname("HBAC_SEED");
    cmd->add_option("--out-dir", config.out_dir, "output directory");
}

int dispatch(CLI::App& app, cli::AuditConfig& audit_config,
             std::string& audit_splitter, cli::DuoDemoConfig& duo_config,
             std::string& duo_splitter, cli::SimulateConfig& sim_config,
             const std::string& experiment, const std::string& scenario) {
    if (app.got_subcommand("audit")) {
        if (!audit_splitter.empty()) {
            audit_config.splitter = splitter_from(audit_splitter);
        }
        const cli::AuditReport report = cli::run_audit(audit_config);
        cli::write_audit_outputs(audit_config, report);
        std::cout << "audit complete: " << report.partition.size()
                  << " clusters, report under " << audit_config.out_dir
                  << "\n";
        return 0;
    }
    if (app.got_subcommand("duo-demo")) {
        if (!duo_splitter.empty()) {
            duo_config.audit.splitter = splitter_from(duo_splitter);
        }
        const cli::AuditReport report = cli::run_duo_demo(duo_config);
        cli::write_audit_outputs(duo_config.audit, report);
        std::cout << "demo audit complete: " << report.partition.size()
                  << " clusters, report under " << duo_config.audit.out_dir
                  << "\n";
        return 0;
    }
    if (app.got_subcommand("simulate")) {
        sim_config.campaign.experiment = sim::experiment_from(experiment);
        sim_config.campaign.sim.scenario = sim::scenario_from(scenario);
        const sim::CampaignResult result = cli::run_simulate(sim_config);
        std::cout << "campaign complete: " << result.sims.size()
                  << " simulations, outputs under " << sim_config.out_dir
                  << "\n";
        char line[160];
        std::snprintf(line, sizeof(line),
                      "rejection rates: t_uncorrected=%.4f t_bonferroni=%.4f",
                      result.t_raw_rate.rate, result.t_bonf_rate.rate);
        std::cout << line;
        if (result.perm_rate) {
            std::snprintf(line, sizeof(line), " permutation=%.4f",
                          result.perm_rate->rate);
            std::cout << line;
        }
        std::cout << "\n";
        return 0;
    }
    std::cerr << app.help();
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised bias detection: hierarchical bias-aware "
                 "clustering with out-of-sample inference"};
    app.set_version_flag("--version", hbac::kVersion);
    app.require_subcommand(0, 1);

    cli::AuditConfig audit_config;
    std::string audit_splitter;
    CLI::App* audit = app.add_subcommand(
        "audit", "run the full audit pipeline on a CSV dataset");
    audit->add_option("--input", audit_config.input_path, "input CSV")
        ->required();
    audit->add_option("--schema", audit_config.schema_path,
                      "schema config JSON")
        ->required();
    audit->add_flag("--filter-missing", audit_config.filter_missing,
                    "drop rows with missing cells before validation");
    add_audit_options(audit, audit_config, audit_splitter);

    cli::DuoDemoConfig duo_config;
    std::string duo_splitter;
    CLI::App* demo = app.add_subcommand(
        "duo-demo",
        "synthesize a student cohort, score it with the rule-based risk "
        "profile and audit the high-risk flag");
    demo->add_option("--cohort", duo_config.cohort_path, "cohort mix JSON")
        ->required();
    demo->add_option("--r2", duo_config.r2_path, "R2 table CSV")->required();
    demo->add_option("--r1", duo_config.r1_path,
                     "override the built-in R1 factors (education,factor)");
    demo->add_option("--r3", duo_config.r3_path,
                     "override the built-in R3 rows (six bounds, factor)");
    demo->add_option("--n", duo_config.n_override, "override cohort size");
    std::uint64_t demo_seed = 0;
    CLI::Option* demo_seed_opt =
        demo->add_option("--cohort-seed", demo_seed, "override cohort seed");
    add_audit_options(demo, duo_config.audit, duo_splitter);

    cli::SimulateConfig sim_config;
    std::string experiment = "bonferroni_effect";
    std::string scenario = "constant";
    CLI::App* simulate = app.add_subcommand(
        "simulate", "run a seeded simulation campaign");
    simulate
        ->add_option("experiment", experiment,
                     "insample_vs_oos | bonferroni_effect | perm_vs_t | "
                     "accuracy_perm")
        ->check(CLI::IsMember({"insample_vs_oos", "bonferroni_effect",
                               "perm_vs_t", "accuracy_perm"}));
    simulate->add_option("--scenario", scenario, "constant | linear")
        ->check(CLI::IsMember({"constant", "linear"}));
    simulate->add_option("--k", sim_config.campaign.sim.k_clusters,
                         "planted cluster count");
    simulate->add_option("--n", sim_config.campaign.sim.n_total,
                         "rows per simulation");
    simulate->add_option("--d", sim_config.campaign.sim.d,
                         "feature dimension");
    simulate->add_option("--sims", sim_config.campaign.n_sims,
                         "number of simulations");
    simulate->add_option("--n-perm", sim_config.campaign.n_perm,
                         "permutations per simulation");
    simulate->add_option("--alpha", sim_config.campaign.alpha,
                         "significance level");
    simulate->add_option("--test-fraction", sim_config.campaign.test_fraction,
                         "held-out fraction");
    simulate->add_option("--n-min", sim_config.campaign.n_min,
                         "minimum cluster size (0 = automatic)");
    simulate->add_option("--max-iterations",
                         sim_config.campaign.max_iterations,
                         "split iteration budget");
    simulate->add_option("--l2-penalty", sim_config.campaign.l2_penalty,
                         "classifier ridge penalty");
    simulate->add_flag("--probability-metric",
                       sim_config.campaign.probability_metric,
                       "perm_vs_t: audit the model probability instead of "
                       "the hard prediction");
    simulate->add_option("--threads", sim_config.campaign.threads,
                         "worker threads");
    simulate->add_option("--seed", sim_config.campaign.sim.seed, "random seed")
        ->envname("HBAC_SEED");
    simulate->add_option("--out-dir", sim_config.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (demo_seed_opt->count() > 0) duo_config.seed_override = demo_seed;

    try {
        return dispatch(app, audit_config, audit_splitter, duo_config,
                        duo_splitter, sim_config, experiment, scenario);
    } catch (const hbac::Error& e) {
        std::cerr << cli::error_record(hbac::errc_name(e.code()), e.what());
        return cli::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << cli::error_record("internal", e.what());
        return 2;
    }
}
