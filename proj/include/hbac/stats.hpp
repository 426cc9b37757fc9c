#pragma once
// Hypothesis tests for per-cluster bias differences: Welch two-sample t,
// Pearson chi-squared on the 2x2 table, Bonferroni correction, and a
// label-permutation test with retraining. The t and chi-squared p-values
// are exact via the regularized incomplete beta/gamma functions.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hbac/clustering.hpp"
#include "hbac/core.hpp"

namespace hbac {

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// Regularized upper incomplete gamma Q(a, x).
double incomplete_gamma_upper(double a, double x);

// P(T <= x) for Student's t with df > 0 (df may be fractional).
double student_t_cdf(double x, double df);
// P(X > x) for chi-squared with df > 0; returns 1 for x <= 0.
double chi2_sf(double x, double df);

struct TestOutcome {
    double statistic = 0.0;
    double p = 1.0;
};

// Welch statistic with Satterthwaite degrees of freedom, two-tailed p.
// Requires >= 2 values per side (Errc::insufficient_sample) and at least
// one side with nonzero variance (Errc::degenerate_variance).
TestOutcome welch_t_test(std::span<const double> a, std::span<const double> b);

// Pearson chi-squared on the 2x2 table (group x {0,1} metric), no
// continuity correction, 1 df. All inputs must be exactly 0 or 1; every
// row and column margin must be nonzero (Errc::degenerate_table).
TestOutcome chi2_test(std::span<const double> a, std::span<const double> b);

// Family-wise correction: min(1, k*p) per value.
std::vector<double> bonferroni(std::span<const double> p_values,
                               std::size_t k);

enum class TestKind { welch_t, chi2, permutation };
const char* to_string(TestKind kind);

enum class Correction { bonferroni, none };
const char* to_string(Correction correction);

struct ClusterTest {
    std::size_t cluster_index = 0;  // position in the partition
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    std::optional<double> mean_in;
    std::optional<double> mean_out;
    std::optional<double> difference;  // mean_in - mean_out
    std::optional<double> statistic;
    std::optional<double> p_raw;
    std::optional<double> p_adjusted;
    TestKind kind = TestKind::welch_t;
    bool testable = false;
    std::string note;  // reason when untestable
};

struct TestReport {
    std::vector<ClusterTest> tests;  // one per cluster; empty for 1 cluster
    double alpha = 0.05;
    Correction correction = Correction::bonferroni;
    std::size_t n_tested = 0;  // the Bonferroni k
    std::string split_info;

    bool any_significant() const;      // adjusted p <= alpha
    bool any_significant_raw() const;  // raw p <= alpha
};

// Assigns the test rows by centroid and runs the metric-appropriate test
// per cluster (cluster vs all other test rows). The caller guarantees the
// test rows are disjoint from the fit rows; `split_info` records that
// provenance. Per-cluster degeneracies become untestable entries, never
// failures.
TestReport test_clusters(const Partition& partition, const Dataset& test_data,
                         double alpha,
                         Correction correction = Correction::bonferroni,
                         const std::string& split_info = "");

struct PermutationResult {
    // Entries are nullopt for clusters with no rows on one side.
    std::vector<std::optional<double>> observed;  // |mean_in - mean_out|
    std::vector<std::optional<double>> p_raw;     // (1+b)/(1+n_perm)
    std::vector<std::optional<double>> p_max;     // max-statistic adjusted
    std::size_t n_perm = 0;
};

// Ojala-Garriga style test: labels are shuffled, the classifier retrained
// and the per-cluster statistic recomputed n_perm times. `metric_fn` maps a
// label vector to per-row metric values (training happens inside it);
// `assignment_fn` maps metric values to a cluster assignment of the same
// rows. With refit_partition=false (default) the observed assignment is
// held fixed across permutations and p_raw is the per-cluster add-one
// estimator; with refit_partition=true clusters are re-derived per
// permutation, so only the max-statistic p is meaningful and p_raw equals
// p_max. Requires n_perm >= 19.
PermutationResult permutation_test(
    std::span<const int> labels,
    const std::function<std::vector<double>(const std::vector<int>&)>&
        metric_fn,
    const std::function<std::vector<std::size_t>(const std::vector<double>&)>&
        assignment_fn,
    std::size_t n_clusters, std::size_t n_perm, std::uint64_t seed,
    bool refit_partition = false);

}  // namespace hbac
