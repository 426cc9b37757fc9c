#pragma once
// Synthetic-data experiments: Gaussian features and bias metric over K
// planted clusters, Bernoulli labels, an L2-penalized logistic classifier,
// and seeded simulation campaigns that measure per-cluster differences and
// rejection rates under several inference disciplines.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hbac/clustering.hpp"
#include "hbac/core.hpp"
#include "hbac/stats.hpp"

namespace hbac::sim {

enum class Scenario { constant, linear };
enum class LabelMode { direct_metric, bernoulli_labels };
enum class MetricSource { predicted_value, predicted_probability, accuracy };

const char* to_string(Scenario scenario);
Scenario scenario_from(const std::string& name);

struct SimConfig {
    std::size_t k_clusters = 5;
    std::size_t n_total = 1000;
    std::size_t d = 2;
    Scenario scenario = Scenario::constant;
    LabelMode label_mode = LabelMode::direct_metric;
    std::uint64_t seed = 0;

    std::size_t per_cluster() const { return n_total / k_clusters; }
    void check() const;  // Errc::bad_config on violations
};

struct ClusterParams {
    double mu = 0.0;   // feature mean, drawn U(-1, 1)
    double eta = 0.0;  // metric mean
    double p = 0.5;    // label probability
};

// Closed forms over the 1-based cluster index k in {1..K}.
double eta_for(Scenario scenario, std::size_t k, std::size_t K);
double p_for(Scenario scenario, std::size_t k, std::size_t K);

// One entry per cluster; mu values consume 2*K uniform draws from `rng`
// (one per cluster), eta and p are deterministic in (scenario, K).
std::vector<ClusterParams> draw_cluster_params(const SimConfig& config,
                                               RngStream& rng);

struct GeneratedFeatures {
    Matrix features;                        // n_total x d, cluster-major
    std::vector<std::size_t> true_cluster;  // 0-based planted cluster
};

// x_i ~ N(mu_k * 1_d, I_d) with equal rows per cluster.
GeneratedFeatures gen_features(const SimConfig& config,
                               const std::vector<ClusterParams>& params,
                               RngStream& rng);

// m_i ~ N(eta_k, 1) for the row's planted cluster.
std::vector<double> gen_metric(const SimConfig& config,
                               const std::vector<ClusterParams>& params,
                               const std::vector<std::size_t>& true_cluster,
                               RngStream& rng);

// y_i ~ Bernoulli(p_k) for the row's planted cluster.
std::vector<int> gen_labels(const SimConfig& config,
                            const std::vector<ClusterParams>& params,
                            const std::vector<std::size_t>& true_cluster,
                            RngStream& rng);

struct LogisticModel {
    std::vector<double> weights;
    double intercept = 0.0;
    double l2_penalty = 0.0;
    std::size_t iterations = 0;
    double grad_norm = 0.0;
    std::vector<double> loss_trace;  // penalized NLL per accepted step
};

// Newton iterations with step halving on the penalized negative
// log-likelihood (the intercept is not penalized), run to gradient norm
// <= 1e-8. Deterministic; `seed` is accepted for interface symmetry only.
// Throws Errc::single_class unless both label values are present.
LogisticModel train_logistic(MatrixView x, const std::vector<int>& y,
                             double l2_penalty, std::uint64_t seed = 0);

std::vector<double> predict_probability(const LogisticModel& model,
                                        MatrixView x);
// Hard labels: probability >= 0.5 maps to 1.
std::vector<int> predict_label(const LogisticModel& model, MatrixView x);

// predicted_value: m_i = yhat_i (hard 0/1). predicted_probability: the raw
// model probability. accuracy: m_i = 1 when yhat_i == y_i.
std::vector<double> metric_from_model(MetricSource kind,
                                      const LogisticModel& model, MatrixView x,
                                      const std::vector<int>& y);

enum class Experiment {
    insample_vs_oos,
    bonferroni_effect,
    perm_vs_t,
    accuracy_perm,
};
const char* to_string(Experiment experiment);
Experiment experiment_from(const std::string& name);

struct CampaignConfig {
    Experiment experiment = Experiment::bonferroni_effect;
    SimConfig sim;
    std::size_t n_sims = 1000;
    double alpha = 0.05;
    double test_fraction = 0.2;
    std::size_t n_min = 0;  // 0 = automatic: max(2, n_train/10)
    std::size_t max_iterations = 1000;
    std::size_t n_perm = 1000;     // permutation experiments only
    double l2_penalty = 1e-4;
    std::size_t threads = 1;
    // perm_vs_t only: audit the model probability instead of the hard
    // prediction.
    bool probability_metric = false;

    bool uses_labels() const {
        return experiment == Experiment::perm_vs_t ||
               experiment == Experiment::accuracy_perm;
    }
};

struct ClusterRecord {
    std::size_t cluster = 0;  // position in the fitted partition
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double diff_in = 0.0;                  // in-sample mean_in - mean_out
    std::optional<double> diff_oos;        // out-of-sample difference
    std::optional<double> p_t_raw;
    std::optional<double> p_t_adj;
    std::optional<double> p_perm_raw;
    std::optional<double> p_perm_max;
};

struct SimRecord {
    std::size_t sim = 0;
    std::size_t n_clusters = 0;
    bool reject_t_raw = false;   // any cluster, uncorrected t
    bool reject_t_bonf = false;  // any cluster, Bonferroni-corrected t
    std::optional<bool> reject_perm;  // max-statistic permutation family test
    std::vector<ClusterRecord> clusters;
};

struct RateSummary {
    double rate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

// Per rank position (clusters ordered by in-sample difference within each
// simulation), the across-simulation average of the signed differences.
struct PositionAverage {
    std::size_t position = 0;
    std::size_t count = 0;
    double mean_diff_in = 0.0;
    double mean_diff_oos = 0.0;
};

struct CampaignResult {
    CampaignConfig config;
    std::vector<SimRecord> sims;

    RateSummary t_raw_rate;
    RateSummary t_bonf_rate;
    std::optional<RateSummary> perm_rate;

    // Plain averages over (simulation, cluster) pairs with both sides
    // defined.
    double mean_abs_diff_in = 0.0;
    double mean_abs_diff_oos = 0.0;
    // Averages of |PositionAverage.mean_diff_*| weighted by counts; the
    // rank-aligned view in which in-sample differences are systematic and
    // out-of-sample ones cancel.
    double ranked_mean_abs_in = 0.0;
    double ranked_mean_abs_oos = 0.0;
    std::vector<PositionAverage> positions;
};

// Runs `n_sims` independent simulations (generate, split, fit, test) and
// aggregates. Deterministic in the configuration for any thread count.
CampaignResult run_campaign(const CampaignConfig& config);

}  // namespace hbac::sim
